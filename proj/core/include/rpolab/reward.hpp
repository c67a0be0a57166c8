#pragma once

#include <string>

#include "rpolab/grid.hpp"

namespace rpolab {

// Bounded reward model: one value per (prompt, response), each in [0, bound].
struct RewardTable {
  Grid values;
  double bound = 1.0;

  RewardTable() = default;
  RewardTable(Grid g, double b) : values(std::move(g)), bound(b) { validate(); }

  double at(int x, int a) const { return values.at(x, a); }
  double& at(int x, int a) { return values.at(x, a); }
  int num_prompts() const { return values.rows; }
  int num_responses() const { return values.cols; }

  void validate() const {
    if (bound <= 0.0) throw config_error("RewardTable: bound must be positive");
    for (double r : values.v) {
      if (!(r >= 0.0 && r <= bound))
        throw config_error("RewardTable: entry outside [0, " + std::to_string(bound) + "]");
    }
  }

  friend bool operator==(const RewardTable& a, const RewardTable& b) {
    return a.bound == b.bound && a.values == b.values;
  }
};

}  // namespace rpolab
