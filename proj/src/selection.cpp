#include "olfsim/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "olfsim/error.hpp"

namespace olfsim::selection {

namespace {

void require_scorable(const ResponseMatrix& d) {
  if (d.rows() < 2) throw ValidationError("separability needs at least 2 odor rows");
  if (d.missing_count() > 0) throw ValidationError("separability needs an imputed matrix (NA cells present)");
}

// Pair-sum over the columns listed in cols, in that order.
double separability_over(const ResponseMatrix& d, const std::vector<std::size_t>& cols) {
  double total = 0.0;
  for (std::size_t m = 0; m < d.rows(); ++m) {
    for (std::size_t n = m + 1; n < d.rows(); ++n) {
      double sq = 0.0;
      for (auto c : cols) {
        double diff = d.at(m, c) - d.at(n, c);
        sq += diff * diff;
      }
      total += std::sqrt(sq);
    }
  }
  return total;
}

std::vector<std::size_t> all_columns_except(std::size_t n, std::size_t skip) {
  std::vector<std::size_t> cols;
  cols.reserve(n);
  for (std::size_t c = 0; c < n; ++c)
    if (c != skip) cols.push_back(c);
  return cols;
}

}  // namespace

double separability(const ResponseMatrix& d) {
  require_scorable(d);
  std::vector<std::size_t> cols(d.cols());
  std::iota(cols.begin(), cols.end(), 0);
  return separability_over(d, cols);
}

StepResult eliminate_step(const ResponseMatrix& d) {
  require_scorable(d);
  if (d.cols() < 2) throw ValidationError("cannot eliminate the last remaining receptor");
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t j = 0; j < d.cols(); ++j) {
    double s = separability_over(d, all_columns_except(d.cols(), j));
    if (s > best_score) {
      best_score = s;
      best = j;
    }
  }
  auto keep = all_columns_except(d.cols(), best);
  return StepResult{best, best_score, d.with_columns(keep)};
}

EliminationTrace reduce(const ResponseMatrix& d, std::size_t n_or) {
  if (n_or < 1 || n_or > d.cols()) {
    throw ValidationError("n_or = " + std::to_string(n_or) + " outside [1, " + std::to_string(d.cols()) + "]");
  }
  EliminationTrace trace;
  trace.initial_separability = separability(d);
  ResponseMatrix cur = d;
  while (cur.cols() > n_or) {
    auto step = eliminate_step(cur);
    trace.removed_or_ids.push_back(cur.or_ids()[step.eliminated]);
    trace.separability_after_each.push_back(step.remaining_separability);
    cur = std::move(step.next);
  }
  trace.final_panel = cur.or_ids();
  return trace;
}

std::vector<CurvePoint> separability_curve(const std::vector<std::pair<std::string, ResponseMatrix>>& sets,
                                           const std::vector<std::size_t>& n_values) {
  if (n_values.empty()) throw ValidationError("empty n_or range");
  std::vector<CurvePoint> points;
  for (const auto& [name, d] : sets) {
    std::size_t n_min = *std::min_element(n_values.begin(), n_values.end());
    // Greedy panels are nested, so one reduction to the smallest n yields
    // every larger panel's score along the way.
    auto trace = reduce(d, n_min);
    for (auto n : n_values) {
      if (n > d.cols()) {
        throw ValidationError("n_or = " + std::to_string(n) + " exceeds panel size " + std::to_string(d.cols()) +
                              " for set '" + name + "'");
      }
      std::size_t removed = d.cols() - n;
      double raw = removed == 0 ? trace.initial_separability : trace.separability_after_each[removed - 1];
      points.push_back(CurvePoint{name, n, raw, 0.0});
    }
  }
  double max_raw = 0.0;
  for (const auto& p : points) max_raw = std::max(max_raw, p.raw);
  for (auto& p : points) p.normalized = max_raw > 0.0 ? p.raw / max_raw : 0.0;
  return points;
}

SubsetResult best_subset_exhaustive(const ResponseMatrix& d, std::size_t k) {
  require_scorable(d);
  if (d.cols() > 20) throw ValidationError("exhaustive subset search limited to 20 columns");
  if (k < 1 || k > d.cols()) throw ValidationError("subset size out of range");
  SubsetResult best{{}, -1.0};
  std::vector<bool> pick(d.cols(), false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
  // prev_permutation over a sorted-descending mask enumerates lexicographic subsets
  do {
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < d.cols(); ++c)
      if (pick[c]) cols.push_back(c);
    double s = separability_over(d, cols);
    if (s > best.separability) best = SubsetResult{cols, s};
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

}  // namespace olfsim::selection
