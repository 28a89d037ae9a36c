#include "kippo/metrics.hpp"

#include <cmath>

namespace kippo {

double ewma_update(double prev, double g, double alpha, bool swapped) {
  if (alpha < 0.0 || alpha > 1.0) throw ContractError("ewma_update: alpha must be in [0, 1]");
  if (swapped) return (1.0 - alpha) * prev + alpha * g;
  return alpha * prev + (1.0 - alpha) * g;
}

double cte(const Matrix& predicted, const Matrix& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
    throw ShapeError("cte: sequence shapes disagree, " + shape_str(predicted) + " vs " +
                     shape_str(truth));
  Index H = predicted.rows();
  if (H < 1) throw ContractError("cte: empty sequence");
  Vector step_err = (predicted - truth).cwiseAbs().rowwise().mean();
  double outer = 0.0;
  double running = 0.0;
  for (Index h = 1; h <= H; ++h) {
    running += step_err[h - 1];
    outer += running / static_cast<double>(h);
  }
  return outer / static_cast<double>(H);
}

double SeedAggregate::mean() const {
  if (values.empty()) throw ContractError("SeedAggregate: no values");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double SeedAggregate::sd() const {
  if (values.size() < 2) return 0.0;
  double m = mean();
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(values.size() - 1));
}

std::vector<ComparisonRow> aggregate_and_compare(const std::string& env,
                                                 const std::vector<MethodRuns>& methods,
                                                 const std::string& baseline_method) {
  if (methods.empty()) throw MissingInput("aggregate_and_compare: no runs");
  long budget = methods[0].total_steps;
  const MethodRuns* base = nullptr;
  for (const auto& m : methods) {
    if (m.total_steps != budget)
      throw MissingInput("aggregate_and_compare: step budgets differ (" +
                         std::to_string(budget) + " vs " + std::to_string(m.total_steps) +
                         " for '" + m.method + "')");
    if (m.method == baseline_method) base = &m;
  }
  if (!base)
    throw MissingInput("aggregate_and_compare: baseline method '" + baseline_method +
                       "' not present");
  double base_mean = base->finals.mean();
  double base_sd = base->finals.sd();
  std::vector<ComparisonRow> rows;
  for (const auto& m : methods) {
    ComparisonRow r;
    r.env = env;
    r.method = m.method;
    r.mean = m.finals.mean();
    r.sd = m.finals.sd();
    r.is_baseline = m.method == baseline_method;
    r.pct_mean =
        base_mean == 0.0 ? 0.0 : (r.mean - base_mean) / std::abs(base_mean) * 100.0;
    r.pct_sd = base_sd == 0.0 ? 0.0 : (1.0 - r.sd / base_sd) * 100.0;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace kippo
