#pragma once

// Greedy receptor-panel reduction by odor separability.
//
// Separability of an odor x receptor table is the sum of Euclidean distances
// between every unordered pair of odor rows. Reduction repeatedly drops the
// receptor whose removal leaves the highest separability.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "olfsim/door.hpp"

namespace olfsim::selection {

using door::ResponseMatrix;

struct EliminationTrace {
  std::vector<std::string> removed_or_ids;      // first removed first
  std::vector<double> separability_after_each;  // score after each removal
  std::vector<std::string> final_panel;         // survivors, original order
  double initial_separability = 0.0;
};

// Requires >= 2 rows and no missing cells. Throws ValidationError.
double separability(const ResponseMatrix& d);

struct StepResult {
  std::size_t eliminated = 0;  // column index in the input
  double remaining_separability = 0.0;
  ResponseMatrix next;
};

// Ties on the remaining score go to the lowest column index.
StepResult eliminate_step(const ResponseMatrix& d);

// Reduces until n_or columns remain; 1 <= n_or <= cols.
EliminationTrace reduce(const ResponseMatrix& d, std::size_t n_or);

struct CurvePoint {
  std::string set;
  std::size_t n_or = 0;
  double raw = 0.0;
  double normalized = 0.0;  // raw / max over all sets and n
};

// For every set and every n in n_values, the separability of the greedy
// panel of size n, normalized by the global maximum.
std::vector<CurvePoint> separability_curve(const std::vector<std::pair<std::string, ResponseMatrix>>& sets,
                                           const std::vector<std::size_t>& n_values);

struct SubsetResult {
  std::vector<std::size_t> columns;
  double separability = 0.0;
};

// Exhaustive best k-subset. Diagnostic only; refuses more than 20 columns.
SubsetResult best_subset_exhaustive(const ResponseMatrix& d, std::size_t k);

}  // namespace olfsim::selection
