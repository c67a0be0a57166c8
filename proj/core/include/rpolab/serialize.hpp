#pragma once

#include <string>

#include "rpolab/instance.hpp"
#include "rpolab/policy.hpp"

namespace rpolab {

// Fixed-width decimal formatting (17 significant digits): reading the text
// back recovers the exact double, and equal inputs produce equal bytes.
std::string format_double(double v);

// Policy exchange format: logits and support row-major, optional feature
// block.  Writing is byte-deterministic.
void write_policy_json(const TabularPolicy& pol, const std::string& path);
TabularPolicy read_policy_json(const std::string& path);

// Full environment exchange format: true rewards, reference policy, prompt
// distribution, and data-collection behavior.  Writing is byte-deterministic;
// reading validates the instance and reports problems as io_error.
void write_instance_json(const BanditInstance& inst, const std::string& path);
BanditInstance read_instance_json(const std::string& path);

}  // namespace rpolab
