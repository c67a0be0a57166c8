#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rpolab {

// One comparison: responses a1 and a0 to prompt x, with label y = 1 when
// a1 was preferred.
struct PreferenceTriple {
  int x = 0;
  int a1 = 0;
  int a0 = 0;
  int y = 1;

  friend bool operator==(const PreferenceTriple&, const PreferenceTriple&) = default;
};

// Immutable list of comparisons plus the seed that generated them.
struct PreferenceDataset {
  std::vector<PreferenceTriple> triples;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(triples.size()); }

  friend bool operator==(const PreferenceDataset&, const PreferenceDataset&) = default;
};

// JSON-lines exchange format: a header record {"schema":"pref-v1",...}
// followed by one record per comparison.  Writing is byte-deterministic.
void write_dataset_jsonl(const PreferenceDataset& data, const std::string& path);
PreferenceDataset read_dataset_jsonl(const std::string& path);

}  // namespace rpolab
