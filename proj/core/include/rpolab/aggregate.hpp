#pragma once

#include <vector>

#include "rpolab/dataset.hpp"

namespace rpolab {

// Comparisons grouped by (prompt, pair, label).  On finite instances the
// loss of N raw comparisons reduces to a weighted sum over at most
// K*M*(M-1)*2 distinct cells, which keeps iterative solvers O(cells) per
// step instead of O(N).  Cells are sorted, so reductions over them are
// deterministic.
struct PairCell {
  int x = 0;
  int a1 = 0;
  int a0 = 0;
  int y = 1;
  double weight = 0.0;
};

struct AggregatedData {
  std::vector<PairCell> cells;
  double total = 0.0;  // sum of weights

  static AggregatedData from(const PreferenceDataset& data);
  static AggregatedData from_triples(const std::vector<PreferenceTriple>& triples);
};

}  // namespace rpolab
