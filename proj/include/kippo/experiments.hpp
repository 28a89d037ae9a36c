#pragma once

#include <string>
#include <vector>

#include "kippo/config.hpp"
#include "kippo/metrics.hpp"
#include "kippo/trainer.hpp"

namespace kippo {

// One run of an experiment grid. Cells execute independently, each into its
// own directory; a DONE marker records completion so interrupted grids resume
// by skipping finished cells. A failing cell never aborts its siblings.
struct Cell {
  TrainConfig cfg;
  std::string label;
};

struct CellStatus {
  std::string dir;
  std::string label;
  long seed = 0;
  bool ok = false;
  bool cached = false;  // skipped: DONE marker already present
  std::string error;
};

std::vector<CellStatus> run_cells(const std::vector<Cell>& cells, int parallelism);

// Summary of a completed run directory.
struct RunInfo {
  std::string dir;
  TrainConfig cfg;
  std::string method;  // "kippo" or "ppo"
  double final_ewma = NAN;
  double final_cte = NAN;
  std::vector<double> ewma_curve;
  std::vector<double> cte_curve;
  std::vector<long> steps;
};
RunInfo read_run(const std::string& dir);

struct CompareOptions {
  TrainConfig base;                          // env, budget, and defaults for every cell
  std::vector<long> seeds{1, 2, 3, 4};
  std::vector<std::string> methods{"kippo", "ppo"};
  std::string out_root;
  int parallelism = 1;
  bool existing_only = false;  // do not train; missing runs are an error
};

struct CompareResult {
  std::vector<ComparisonRow> rows;
  std::string table_csv;
  std::string table_txt;
  std::string per_seed_csv;
  std::vector<std::string> plot_files;
};

// Trains (or reuses) every (method, seed) cell, aggregates final EWMA against
// the ppo baseline, and emits per-seed CSV, the comparison table (CSV + text),
// and a mean+/-SD learning-curve plot.
CompareResult cmd_compare(const CompareOptions& opt);

struct AblateOptions {
  TrainConfig base;
  std::vector<long> seeds{1, 2};
  std::string out_root;
  int parallelism = 1;
  bool existing_only = false;
  bool dry_run = false;  // list cells without running
};

struct AblateResult {
  std::vector<std::string> combos;  // row order
  std::string table_csv;
  std::string table_txt;
};

// Loss-component grid: baseline PPO first, then every non-empty subset of
// {rec, ls, ss} with the excluded weights zeroed. 8 cells per seed.
AblateResult cmd_ablate(const AblateOptions& opt);

struct SweepOptions {
  std::string manifest_path;
  std::string out_root_override;
  int parallelism_override = 0;
};

struct SweepResult {
  std::string results_csv;
  int completed = 0;
  int failed = 0;
  int cached = 0;
};

// Runs the Cartesian grid described by a manifest file; partial failures are
// recorded in the results and the sweep continues. When the manifest names a
// baseline run directory, standardized final returns are added.
SweepResult cmd_sweep(const SweepOptions& opt);

// Learning-curve plots for a set of completed runs, grouped by (env, method).
// Returns the emitted file paths.
std::vector<std::string> cmd_plot(const std::vector<std::string>& run_dirs,
                                  const std::string& out_dir);

// Rebuilds the comparison table from the stored per-seed values; used both by
// cmd_compare and by the aggregation self-check.
std::string comparison_table_csv(const std::vector<ComparisonRow>& rows);
std::string comparison_table_txt(const std::vector<ComparisonRow>& rows);

}  // namespace kippo
