#pragma once

#include <map>
#include <string>
#include <vector>

#include "kippo/common.hpp"

namespace kippo {

// EWMA_t = alpha * EWMA_{t-1} + (1 - alpha) * G_t. The first observation
// initializes the average. `swapped` exchanges the two coefficients for
// comparison plots.
double ewma_update(double prev, double g, double alpha, bool swapped = false);

// Cumulative trajectory error over an H-step prediction:
//   (1/H) sum_h (1/h) sum_{k<=h} |pred_k - true_k|
// with the per-step error averaged over state dimensions. Rows are steps.
double cte(const Matrix& predicted, const Matrix& truth);

struct SeedAggregate {
  std::vector<double> values;  // one entry per seed
  double mean() const;
  double sd() const;  // sample SD (n-1)
};

struct ComparisonRow {
  std::string env;
  std::string method;
  double mean = 0.0;
  double sd = 0.0;
  bool is_baseline = false;
  double pct_mean = 0.0;  // (mean - base_mean) / |base_mean| * 100, positive = better
  double pct_sd = 0.0;    // (1 - sd/base_sd) * 100, positive = less spread
};

struct MethodRuns {
  std::string method;
  SeedAggregate finals;
  long total_steps = 0;
};

// Builds a comparison table against `baseline_method`. All runs must share
// one step budget; a mismatch is an explicit error.
std::vector<ComparisonRow> aggregate_and_compare(const std::string& env,
                                                 const std::vector<MethodRuns>& methods,
                                                 const std::string& baseline_method);

}  // namespace kippo
