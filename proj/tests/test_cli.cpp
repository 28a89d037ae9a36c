#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kippo/experiments.hpp"
#include "kippo/io.hpp"

using namespace kippo;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config(bool kippo = true) {
  TrainConfig cfg;
  cfg.env = "linpoly";
  cfg.kippo = kippo;
  cfg.rollout_len = 64;
  cfg.num_minibatches = 4;
  cfg.epochs = 2;
  cfg.horizon = 3;
  cfg.total_steps = 128;
  cfg.latent_dim = 4;
  cfg.action_latent_dim = 2;
  cfg.enc_hidden_layers = 1;
  cfg.enc_hidden_width = 16;
  cfg.agent_hidden_layers = 1;
  cfg.agent_hidden_width = 16;
  cfg.cte_windows = 8;
  cfg.probe_batch = 16;
  cfg.env_params["max_episode_steps"] = 40;  // several episodes complete per rollout
  return cfg;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(KIPPO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

// metrics.csv minus the wall-clock column, the one documented nondeterministic field
std::string strip_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    size_t cut = line.rfind(',');
    out << line.substr(0, cut) << '\n';
  }
  return out.str();
}

void write_tiny_config_file(const std::string& path, bool kippo = true) {
  atomic_write(path, serialize_config(tiny_config(kippo)));
}

}  // namespace

TEST_CASE("io primitives") {
  CHECK(parse_double(format_double(0.1)) == 0.1);
  CHECK(parse_double(format_double(-1.7976931348623157e308)) == -1.7976931348623157e308);
  CHECK(format_double(95.0) == "95");
  CHECK_THROWS_AS(parse_double("1.2.3"), SchemaError);
  CHECK(fnv1a64("abc") == fnv1a64("abc"));
  CHECK(fnv1a64("abc") != fnv1a64("abd"));
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");

  fs::remove_all("test_out/io");
  atomic_write("test_out/io/file.txt", "hello");
  CHECK(slurp("test_out/io/file.txt") == "hello");
  CHECK_FALSE(fs::exists("test_out/io/file.txt.tmp"));

  atomic_write("test_out/io/t.csv", "a,b\n1,\"x,y\"\n");
  CsvTable t = read_csv("test_out/io/t.csv");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.rows[0][1] == "x,y");
}

TEST_CASE("svg validator accepts our plots and rejects malformed content") {
  SvgSeries s;
  s.label = "demo";
  s.color = "#336699";
  for (int i = 0; i < 10; ++i) {
    s.x.push_back(i);
    s.y.push_back(std::sin(i * 0.5));
    s.y_lo.push_back(s.y.back() - 0.1);
    s.y_hi.push_back(s.y.back() + 0.1);
  }
  std::string svg = render_svg_plot("demo", "x", "y", {s});
  std::string why;
  CHECK(validate_svg(svg, &why));
  CHECK_FALSE(validate_svg("<svg><polyline points=\"0,0\"></svg>", &why));  // unbalanced
  CHECK_FALSE(validate_svg("<svg></svg>", &why));                           // no geometry
}

TEST_CASE("cli: train row count, determinism, and baseline columns") {
  fs::remove_all("test_out/cli_train");
  write_tiny_config_file("test_out/cli_train.ini");
  int rc = run_cli("train --config test_out/cli_train.ini --seed 1 --out test_out/cli_train/a");
  CHECK(rc == 0);
  CsvTable t = read_csv("test_out/cli_train/a/metrics.csv");
  CHECK(t.rows.size() >= 2);  // >= total_steps / rollout_len

  rc = run_cli("train --config test_out/cli_train.ini --seed 1 --out test_out/cli_train/b");
  CHECK(rc == 0);
  CHECK(strip_wall_time(slurp("test_out/cli_train/a/metrics.csv")) ==
        strip_wall_time(slurp("test_out/cli_train/b/metrics.csv")));
  CHECK(slurp("test_out/cli_train/a/checkpoint.txt") ==
        slurp("test_out/cli_train/b/checkpoint.txt"));

  rc = run_cli("train --config test_out/cli_train.ini --kippo false --out test_out/cli_train/c");
  CHECK(rc == 0);
  CsvTable base = read_csv("test_out/cli_train/c/metrics.csv");
  CHECK(base.header == read_csv("test_out/cli_train/a/metrics.csv").header);
  for (const auto& row : base.rows) {
    CHECK(row[static_cast<size_t>(base.col("L_rec"))].empty());
    CHECK(row[static_cast<size_t>(base.col("cte"))].empty());
    CHECK_FALSE(row[static_cast<size_t>(base.col("L_ppo_policy"))].empty());
  }
}

TEST_CASE("cli: invalid config key and missing input exit codes") {
  atomic_write("test_out/bad.ini", "[run]\nenv = linpoly\nnot_a_key = 1\n");
  CHECK(run_cli("validate-config --config test_out/bad.ini") == 1);
  write_tiny_config_file("test_out/good.ini");
  CHECK(run_cli("validate-config --config test_out/good.ini") == 0);
  CHECK(run_cli("compare --config test_out/good.ini --seeds 1 --existing-only --out "
                "test_out/nonexistent_compare") == 3);
}

TEST_CASE("cli: command line overrides the config file key-by-key") {
  write_tiny_config_file("test_out/prec.ini");  // file says seed = 1
  std::string cmd = std::string(KIPPO_CLI_PATH) +
                    " validate-config --config test_out/prec.ini --seed 7 --set kippo.w_rec=0.9"
                    " > test_out/prec_out.txt 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  std::string out = slurp("test_out/prec_out.txt");
  CHECK(out.find("seed = 7") != std::string::npos);
  CHECK(out.find("w_rec = 0.9") != std::string::npos);
  CHECK(out.find("override run.seed = 7") != std::string::npos);  // overrides are logged
}

TEST_CASE("compare emits per-seed data, tables, and a valid plot") {
  fs::remove_all("test_out/cmp");
  CompareOptions opt;
  opt.base = tiny_config();
  opt.seeds = {1, 2};
  opt.out_root = "test_out/cmp";
  opt.parallelism = 1;
  CompareResult res = cmd_compare(opt);
  REQUIRE(res.rows.size() == 2);
  CHECK(res.rows[0].method == "kippo");
  CHECK(res.rows[1].method == "ppo");
  CHECK(res.rows[1].is_baseline);

  std::string why;
  CHECK(validate_svg(slurp(res.plot_files[0]), &why));

  // the stored per-seed values reproduce the table bit-for-bit
  CsvTable per_seed = read_csv(res.per_seed_csv);
  std::vector<MethodRuns> methods(2);
  methods[0].method = "kippo";
  methods[1].method = "ppo";
  for (const auto& row : per_seed.rows) {
    int idx = row[1] == "kippo" ? 0 : 1;
    methods[static_cast<size_t>(idx)].finals.values.push_back(
        parse_double(row[static_cast<size_t>(per_seed.col("final_ewma"))]));
    methods[static_cast<size_t>(idx)].total_steps = tiny_config().total_steps;
  }
  auto rows2 = aggregate_and_compare("linpoly", methods, "ppo");
  CHECK(comparison_table_csv(rows2) == slurp(res.table_csv));

  // identical inputs aggregate to zero percent difference
  auto self_rows = aggregate_and_compare("linpoly", {methods[1], methods[1]}, "ppo");
  for (const auto& r : self_rows) {
    CHECK(r.pct_mean == 0.0);
    CHECK(r.pct_sd == 0.0);
  }

  // reusing completed runs: existing-only now succeeds
  opt.existing_only = true;
  CHECK_NOTHROW(cmd_compare(opt));
}

TEST_CASE("ablation grid: cardinality, weight mapping, table schema") {
  fs::remove_all("test_out/abl");
  AblateOptions opt;
  opt.base = tiny_config();
  opt.base.total_steps = 64;
  opt.base.w_rec = 0.5;
  opt.base.w_ls = 0.25;
  opt.base.w_ss = 0.5;
  opt.seeds = {1};
  opt.out_root = "test_out/abl";
  opt.dry_run = true;
  AblateResult dry = cmd_ablate(opt);
  CHECK(dry.combos.size() == 8);
  CsvTable cells = read_csv("test_out/abl/cells.csv");
  CHECK(cells.rows.size() == 8);  // 8 combos x 1 seed

  opt.dry_run = false;
  AblateResult res = cmd_ablate(opt);
  CsvTable table = read_csv(res.table_csv);
  CHECK(table.header ==
        std::vector<std::string>{"env", "losses", "ewma_mean", "ewma_sd", "cte_mean", "cte_sd"});
  REQUIRE(table.rows.size() == 8);
  CHECK(table.rows[0][1] == "baseline");
  CHECK(table.rows[0][4].empty());  // baseline has no prediction model, hence no CTE

  // rec-only cell trains with weights (w_rec, 0, 0)
  TrainConfig rec_cfg = parse_config_text(slurp("test_out/abl/linpoly/rec/seed1/resolved_config.ini"));
  CHECK(rec_cfg.kippo);
  CHECK(rec_cfg.w_rec == 0.5);
  CHECK(rec_cfg.w_ls == 0.0);
  CHECK(rec_cfg.w_ss == 0.0);
  TrainConfig lsss_cfg =
      parse_config_text(slurp("test_out/abl/linpoly/ls+ss/seed1/resolved_config.ini"));
  CHECK(lsss_cfg.w_rec == 0.0);
  CHECK(lsss_cfg.w_ls == 0.25);
  CHECK(lsss_cfg.w_ss == 0.5);
  TrainConfig base_cfg =
      parse_config_text(slurp("test_out/abl/linpoly/baseline/seed1/resolved_config.ini"));
  CHECK_FALSE(base_cfg.kippo);
}

TEST_CASE("sweep: product, resume, failure isolation, standardization") {
  fs::remove_all("test_out/sweep");
  fs::create_directories("test_out/sweep");
  atomic_write("test_out/sweep/base.ini", serialize_config(tiny_config()));
  std::string manifest =
      "[sweep]\n"
      "env = linpoly\n"
      "seeds = 1,2\n"
      "total_steps = 64\n"
      "out_root = test_out/sweep/out\n"
      "base_config = test_out/sweep/base.ini\n"
      "[grid]\n"
      "rollout.horizon = 1,4,8\n";
  atomic_write("test_out/sweep/manifest.ini", manifest);

  SweepOptions opt;
  opt.manifest_path = "test_out/sweep/manifest.ini";
  SweepResult res = cmd_sweep(opt);
  CHECK(res.completed == 6);  // 3 horizons x 2 seeds
  CHECK(res.failed == 0);
  int dirs = 0;
  for (const auto& e : fs::directory_iterator("test_out/sweep/out"))
    if (e.is_directory()) ++dirs;
  CHECK(dirs == 6);
  CHECK(fs::exists("test_out/sweep/out/manifest.ini"));

  // resume: wipe one DONE marker, rerun; only that cell re-executes
  fs::remove("test_out/sweep/out/cell1_seed2/DONE");
  SweepResult res2 = cmd_sweep(opt);
  CHECK(res2.completed == 1);
  CHECK(res2.cached == 5);

  // a failing cell is recorded and does not abort its siblings
  std::string bad_manifest =
      "[sweep]\n"
      "env = linpoly\n"
      "seeds = 1\n"
      "total_steps = 64\n"
      "out_root = test_out/sweep/bad\n"
      "base_config = test_out/sweep/base.ini\n"
      "[grid]\n"
      "kippo.latent_dim = 1,4\n";  // 1 < state_dim fails at model construction
  atomic_write("test_out/sweep/bad.ini", bad_manifest);
  SweepOptions bad_opt;
  bad_opt.manifest_path = "test_out/sweep/bad.ini";
  SweepResult bad_res = cmd_sweep(bad_opt);
  CHECK(bad_res.failed == 1);
  CHECK(bad_res.completed == 1);
  CsvTable results = read_csv(bad_res.results_csv);
  bool saw_failed = false, saw_ok = false;
  for (const auto& row : results.rows) {
    if (row[3].rfind("failed", 0) == 0) saw_failed = true;
    if (row[3] == "ok") saw_ok = true;
  }
  CHECK(saw_failed);
  CHECK(saw_ok);

  // standardization against a baseline directory is an affine transform:
  // the argmax over cells is unchanged
  std::string std_manifest =
      "[sweep]\n"
      "env = linpoly\n"
      "seeds = 1\n"
      "total_steps = 64\n"
      "out_root = test_out/sweep/std\n"
      "base_config = test_out/sweep/base.ini\n"
      "baseline = test_out/sweep/out\n"
      "[grid]\n"
      "rollout.horizon = 1,4\n";
  atomic_write("test_out/sweep/std.ini", std_manifest);
  SweepOptions std_opt;
  std_opt.manifest_path = "test_out/sweep/std.ini";
  SweepResult std_res = cmd_sweep(std_opt);
  CsvTable std_table = read_csv(std_res.results_csv);
  int c_raw = std_table.col("final_ewma"), c_std = std_table.col("standardized_ewma");
  REQUIRE(c_std >= 0);
  size_t best_raw = 0, best_std = 0;
  for (size_t i = 1; i < std_table.rows.size(); ++i) {
    if (parse_double(std_table.rows[i][static_cast<size_t>(c_raw)]) >
        parse_double(std_table.rows[best_raw][static_cast<size_t>(c_raw)]))
      best_raw = i;
    if (parse_double(std_table.rows[i][static_cast<size_t>(c_std)]) >
        parse_double(std_table.rows[best_std][static_cast<size_t>(c_std)]))
      best_std = i;
  }
  CHECK(best_raw == best_std);
}

TEST_CASE("plot command groups runs and emits valid svg") {
  // reuse the comparison runs from the compare test if present, else make one
  if (!fs::exists("test_out/cmp/linpoly/kippo/seed1/metrics.csv")) {
    CompareOptions opt;
    opt.base = tiny_config();
    opt.seeds = {1};
    opt.out_root = "test_out/cmp";
    cmd_compare(opt);
  }
  auto files = cmd_plot({"test_out/cmp/linpoly/kippo/seed1", "test_out/cmp/linpoly/ppo/seed1"},
                        "test_out/plots");
  REQUIRE(files.size() == 1);
  std::string why;
  CHECK(validate_svg(slurp(files[0]), &why));
  CHECK_THROWS_AS(cmd_plot({"test_out/does_not_exist"}, "test_out/plots"), MissingInput);
}
