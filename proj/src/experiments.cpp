#include "kippo/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "kippo/io.hpp"

namespace kippo {

namespace fs = std::filesystem;

std::vector<CellStatus> run_cells(const std::vector<Cell>& cells, int parallelism) {
  std::set<std::string> dirs;
  for (const auto& c : cells)
    if (!dirs.insert(c.cfg.out_dir).second)
      throw ConfigError("experiment cells share the output directory '" + c.cfg.out_dir + "'");
  std::vector<CellStatus> statuses(cells.size());
  std::atomic<size_t> next{0};
  int workers = std::max(1, parallelism);
  workers = std::min<int>(workers, static_cast<int>(cells.size()));

  auto work = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      CellStatus& st = statuses[i];
      st.dir = cell.cfg.out_dir;
      st.label = cell.label;
      st.seed = cell.cfg.seed;
      fs::path done = fs::path(cell.cfg.out_dir) / "DONE";
      if (fs::exists(done)) {
        st.ok = true;
        st.cached = true;
        continue;
      }
      try {
        train(cell.cfg);
        atomic_write(done, "ok\n");
        st.ok = true;
      } catch (const std::exception& e) {
        st.error = e.what();
      }
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return statuses;
}

RunInfo read_run(const std::string& dir) {
  RunInfo info;
  info.dir = dir;
  fs::path cfg_path = fs::path(dir) / "resolved_config.ini";
  fs::path metrics_path = fs::path(dir) / "metrics.csv";
  if (!fs::exists(cfg_path) || !fs::exists(metrics_path))
    throw MissingInput("run directory '" + dir + "' is missing resolved_config.ini/metrics.csv");
  info.cfg = parse_config_text(slurp(cfg_path));
  info.method = info.cfg.kippo ? "kippo" : "ppo";
  CsvTable t = read_csv(metrics_path);
  int c_step = t.col("global_step"), c_ewma = t.col("ewma"), c_cte = t.col("cte");
  if (c_step < 0 || c_ewma < 0 || c_cte < 0)
    throw SchemaError("metrics.csv in '" + dir + "' lacks expected columns");
  for (const auto& row : t.rows) {
    info.steps.push_back(std::stol(row[static_cast<size_t>(c_step)]));
    const std::string& e = row[static_cast<size_t>(c_ewma)];
    info.ewma_curve.push_back(e.empty() ? NAN : parse_double(e));
    const std::string& c = row[static_cast<size_t>(c_cte)];
    info.cte_curve.push_back(c.empty() ? NAN : parse_double(c));
  }
  for (auto it = info.ewma_curve.rbegin(); it != info.ewma_curve.rend(); ++it)
    if (!std::isnan(*it)) {
      info.final_ewma = *it;
      break;
    }
  for (auto it = info.cte_curve.rbegin(); it != info.cte_curve.rend(); ++it)
    if (!std::isnan(*it)) {
      info.final_cte = *it;
      break;
    }
  return info;
}

namespace {

TrainConfig cell_config(const TrainConfig& base, const std::string& method, long seed,
                        const std::string& dir) {
  TrainConfig cfg = base;
  cfg.seed = seed;
  cfg.kippo = method == "kippo";
  cfg.out_dir = dir;
  return cfg;
}

void require_or_train(std::vector<Cell>& cells, bool existing_only, int parallelism) {
  if (existing_only) {
    std::vector<std::string> missing;
    for (const auto& c : cells)
      if (!fs::exists(fs::path(c.cfg.out_dir) / "DONE"))
        missing.push_back(c.label + " seed " + std::to_string(c.cfg.seed) + " (" +
                          c.cfg.out_dir + ")");
    if (!missing.empty()) {
      std::string msg = "missing runs:";
      for (const auto& m : missing) msg += "\n  " + m;
      throw MissingInput(msg);
    }
    return;
  }
  auto statuses = run_cells(cells, parallelism);
  for (const auto& st : statuses)
    if (!st.ok)
      throw NanAbort("cell '" + st.label + "' seed " + std::to_string(st.seed) +
                     " failed: " + st.error);
}

std::string fmt(double v) { return std::isnan(v) ? "" : format_double(v); }

SvgSeries curve_series(const std::string& label, const std::string& color,
                       const std::vector<RunInfo>& runs) {
  SvgSeries s;
  s.label = label;
  s.color = color;
  if (runs.empty()) return s;
  size_t n = runs[0].steps.size();
  for (const auto& r : runs) n = std::min(n, r.steps.size());
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> vals;
    for (const auto& r : runs)
      if (!std::isnan(r.ewma_curve[i])) vals.push_back(r.ewma_curve[i]);
    if (vals.empty()) continue;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double sd = 0.0;
    if (vals.size() > 1) {
      for (double v : vals) sd += (v - mean) * (v - mean);
      sd = std::sqrt(sd / static_cast<double>(vals.size() - 1));
    }
    s.x.push_back(static_cast<double>(runs[0].steps[i]));
    s.y.push_back(mean);
    s.y_lo.push_back(mean - sd);
    s.y_hi.push_back(mean + sd);
  }
  return s;
}

const char* method_color(const std::string& method, size_t i) {
  if (method == "kippo") return "#d62728";
  if (method == "ppo") return "#1f77b4";
  static const char* palette[] = {"#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return palette[i % 5];
}

}  // namespace

std::string comparison_table_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream ss;
  ss << "env,method,mean,sd,pct_mean_vs_baseline,pct_sd_vs_baseline\n";
  for (const auto& r : rows) {
    ss << r.env << ',' << r.method << ',' << format_double(r.mean) << ','
       << format_double(r.sd) << ',';
    if (r.is_baseline) {
      ss << ",";
    } else {
      ss << format_double(r.pct_mean) << ',' << format_double(r.pct_sd);
    }
    ss << '\n';
  }
  return ss.str();
}

std::string comparison_table_txt(const std::vector<ComparisonRow>& rows) {
  std::vector<std::vector<std::string>> body;
  for (const auto& r : rows) {
    char mean_buf[64], sd_buf[64], pm[64], ps[64];
    std::snprintf(mean_buf, sizeof mean_buf, "%.2f", r.mean);
    std::snprintf(sd_buf, sizeof sd_buf, "%.2f", r.sd);
    std::snprintf(pm, sizeof pm, "%+.2f%%", r.pct_mean);
    std::snprintf(ps, sizeof ps, "%+.2f%%", r.pct_sd);
    body.push_back({r.env, r.method, mean_buf, sd_buf, r.is_baseline ? "-" : pm,
                    r.is_baseline ? "-" : ps});
  }
  return render_text_table({"env", "method", "mean", "SD", "%d-mean", "%d-SD"}, body);
}

CompareResult cmd_compare(const CompareOptions& opt) {
  const std::string& env = opt.base.env;
  std::vector<Cell> cells;
  for (const auto& method : opt.methods)
    for (long seed : opt.seeds) {
      std::string dir = opt.out_root + "/" + env + "/" + method + "/seed" + std::to_string(seed);
      cells.push_back({cell_config(opt.base, method, seed, dir), method});
    }
  require_or_train(cells, opt.existing_only, opt.parallelism);

  std::map<std::string, std::vector<RunInfo>> by_method;
  long budget = 0;
  for (const auto& c : cells) {
    RunInfo run = read_run(c.cfg.out_dir);
    if (budget == 0) budget = run.cfg.total_steps;
    if (run.cfg.total_steps != budget)
      throw MissingInput("run '" + c.cfg.out_dir + "' was trained for " +
                         std::to_string(run.cfg.total_steps) + " steps, expected " +
                         std::to_string(budget));
    by_method[c.label].push_back(std::move(run));
  }

  std::vector<MethodRuns> methods;
  std::ostringstream per_seed;
  per_seed << "env,method,seed,final_ewma,final_cte\n";
  for (const auto& method : opt.methods) {
    MethodRuns mr;
    mr.method = method;
    for (const auto& run : by_method[method]) {
      mr.finals.values.push_back(run.final_ewma);
      mr.total_steps = run.cfg.total_steps;
      per_seed << env << ',' << method << ',' << run.cfg.seed << ','
               << fmt(run.final_ewma) << ',' << fmt(run.final_cte) << '\n';
    }
    methods.push_back(std::move(mr));
  }

  CompareResult res;
  res.rows = aggregate_and_compare(env, methods, "ppo");
  res.per_seed_csv = opt.out_root + "/per_seed.csv";
  atomic_write(res.per_seed_csv, per_seed.str());
  res.table_csv = opt.out_root + "/table.csv";
  atomic_write(res.table_csv, comparison_table_csv(res.rows));
  res.table_txt = opt.out_root + "/table.txt";
  atomic_write(res.table_txt, comparison_table_txt(res.rows));

  std::vector<SvgSeries> series;
  size_t i = 0;
  for (const auto& method : opt.methods) {
    series.push_back(curve_series(method, method_color(method, i), by_method[method]));
    ++i;
  }
  std::string svg = render_svg_plot(env + " learning curves (mean +/- SD over " +
                                        std::to_string(opt.seeds.size()) + " seeds)",
                                    "environment steps", "EWMA return", series);
  std::string why;
  if (!validate_svg(svg, &why)) throw SchemaError("generated plot failed validation: " + why);
  std::string plot_path = opt.out_root + "/curves_" + env + ".svg";
  atomic_write(plot_path, svg);
  res.plot_files.push_back(plot_path);
  return res;
}

AblateResult cmd_ablate(const AblateOptions& opt) {
  const std::string& env = opt.base.env;
  struct Combo {
    std::string name;
    bool baseline;
    bool rec, ls, ss;
  };
  const std::vector<Combo> combos = {
      {"baseline", true, false, false, false},
      {"rec", false, true, false, false},
      {"ls", false, false, true, false},
      {"ss", false, false, false, true},
      {"rec+ls", false, true, true, false},
      {"rec+ss", false, true, false, true},
      {"ls+ss", false, false, true, true},
      {"rec+ls+ss", false, true, true, true},
  };

  std::vector<Cell> cells;
  for (const auto& combo : combos)
    for (long seed : opt.seeds) {
      TrainConfig cfg = opt.base;
      cfg.seed = seed;
      if (combo.baseline) {
        cfg.kippo = false;
      } else {
        cfg.kippo = true;
        cfg.w_rec = combo.rec ? opt.base.w_rec : 0.0;
        cfg.w_ls = combo.ls ? opt.base.w_ls : 0.0;
        cfg.w_ss = combo.ss ? opt.base.w_ss : 0.0;
      }
      cfg.out_dir =
          opt.out_root + "/" + env + "/" + combo.name + "/seed" + std::to_string(seed);
      cells.push_back({cfg, combo.name});
    }

  AblateResult res;
  for (const auto& c : combos) res.combos.push_back(c.name);
  if (opt.dry_run) {
    std::ostringstream ss;
    ss << "combo,seed,dir\n";
    for (const auto& c : cells)
      ss << c.label << ',' << c.cfg.seed << ',' << c.cfg.out_dir << '\n';
    res.table_csv = opt.out_root + "/cells.csv";
    atomic_write(res.table_csv, ss.str());
    return res;
  }

  require_or_train(cells, opt.existing_only, opt.parallelism);

  std::ostringstream csv;
  csv << "env,losses,ewma_mean,ewma_sd,cte_mean,cte_sd\n";
  std::vector<std::vector<std::string>> body;
  for (const auto& combo : combos) {
    SeedAggregate ewma_agg, cte_agg;
    bool has_cte = false;
    for (const auto& c : cells) {
      if (c.label != combo.name) continue;
      RunInfo run = read_run(c.cfg.out_dir);
      ewma_agg.values.push_back(run.final_ewma);
      if (!std::isnan(run.final_cte)) {
        cte_agg.values.push_back(run.final_cte);
        has_cte = true;
      }
    }
    std::string em = format_double(ewma_agg.mean()), es = format_double(ewma_agg.sd());
    std::string cm = has_cte ? format_double(cte_agg.mean()) : "";
    std::string cs = has_cte ? format_double(cte_agg.sd()) : "";
    csv << env << ',' << combo.name << ',' << em << ',' << es << ',' << cm << ',' << cs << '\n';
    body.push_back({env, combo.name, em, es, cm.empty() ? "-" : cm, cs.empty() ? "-" : cs});
  }
  res.table_csv = opt.out_root + "/ablation.csv";
  atomic_write(res.table_csv, csv.str());
  res.table_txt = opt.out_root + "/ablation.txt";
  atomic_write(res.table_txt,
               render_text_table({"env", "losses", "EWMA mean", "EWMA SD", "CTE mean", "CTE SD"},
                                 body));
  return res;
}

// --- sweep ---------------------------------------------------------------

namespace {

struct SweepManifest {
  std::string env;
  std::vector<long> seeds;
  long total_steps = 0;
  std::string out_root;
  int parallelism = 1;
  std::string base_config;
  std::string baseline_dir;
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;  // key -> values
};

SweepManifest parse_manifest(const std::string& path) {
  SweepManifest m;
  std::istringstream ss(slurp(path));
  std::string line, section;
  while (std::getline(ss, line)) {
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t\r");
      size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("manifest: expected key = value: " + t);
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    auto split_list = [&](const std::string& v) {
      std::vector<std::string> out;
      std::istringstream ls(v);
      std::string item;
      while (std::getline(ls, item, ',')) out.push_back(trim(item));
      return out;
    };
    if (section == "sweep") {
      if (key == "env") m.env = value;
      else if (key == "seeds") {
        for (const auto& s : split_list(value)) m.seeds.push_back(std::stol(s));
      } else if (key == "total_steps") m.total_steps = std::stol(value);
      else if (key == "out_root") m.out_root = value;
      else if (key == "parallelism") m.parallelism = std::stoi(value);
      else if (key == "base_config") m.base_config = value;
      else if (key == "baseline") m.baseline_dir = value;
      else throw ConfigError("manifest: unknown key 'sweep." + key + "'");
    } else if (section == "grid") {
      m.grid.emplace_back(key, split_list(value));
    } else {
      throw ConfigError("manifest: unknown section '" + section + "'");
    }
  }
  if (m.env.empty()) throw ConfigError("manifest: sweep.env is required");
  if (m.seeds.empty()) throw ConfigError("manifest: sweep.seeds is required");
  if (m.out_root.empty()) throw ConfigError("manifest: sweep.out_root is required");
  return m;
}

// Per-seed final EWMA of every completed run directory under `dir`.
std::vector<double> collect_finals(const std::string& dir) {
  std::vector<double> finals;
  std::vector<fs::path> candidates;
  if (fs::exists(fs::path(dir) / "metrics.csv")) candidates.push_back(dir);
  if (fs::exists(dir))
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file() && e.path().filename() == "metrics.csv")
        candidates.push_back(e.path().parent_path());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (const auto& c : candidates) {
    try {
      double v = read_run(c.string()).final_ewma;
      if (!std::isnan(v)) finals.push_back(v);
    } catch (const std::exception&) {
    }
  }
  return finals;
}

}  // namespace

SweepResult cmd_sweep(const SweepOptions& opt) {
  SweepManifest m = parse_manifest(opt.manifest_path);
  if (!opt.out_root_override.empty()) m.out_root = opt.out_root_override;
  if (opt.parallelism_override > 0) m.parallelism = opt.parallelism_override;

  TrainConfig base;
  if (!m.base_config.empty()) base = load_config_file(m.base_config);
  base.env = m.env;
  if (m.total_steps > 0) base.total_steps = m.total_steps;

  // Cartesian product over grid axes.
  std::vector<std::map<std::string, std::string>> combos{{}};
  for (const auto& [key, values] : m.grid) {
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& combo : combos)
      for (const auto& v : values) {
        auto c = combo;
        c[key] = v;
        next.push_back(std::move(c));
      }
    combos = std::move(next);
  }

  ensure_dir(m.out_root);
  fs::copy_file(opt.manifest_path, fs::path(m.out_root) / "manifest.ini",
                fs::copy_options::overwrite_existing);

  std::vector<Cell> cells;
  std::vector<std::map<std::string, std::string>> cell_params;
  int combo_idx = 0;
  for (const auto& combo : combos) {
    for (long seed : m.seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      std::vector<std::string> ovs;
      for (const auto& [k, v] : combo) ovs.push_back(k + "=" + v);
      apply_overrides(cfg, ovs);
      cfg.out_dir = m.out_root + "/cell" + std::to_string(combo_idx) + "_seed" +
                    std::to_string(seed);
      cells.push_back({cfg, "cell" + std::to_string(combo_idx)});
      cell_params.push_back(combo);
    }
    ++combo_idx;
  }

  auto statuses = run_cells(cells, m.parallelism);

  double base_mean = NAN, base_sd = NAN;
  if (!m.baseline_dir.empty()) {
    SeedAggregate agg;
    agg.values = collect_finals(m.baseline_dir);
    if (agg.values.empty())
      throw MissingInput("sweep baseline '" + m.baseline_dir + "' has no completed runs");
    base_mean = agg.mean();
    base_sd = agg.sd();
  }

  std::ostringstream csv;
  csv << "cell,seed,dir,status";
  for (const auto& [key, values] : m.grid) csv << ',' << key;
  csv << ",final_ewma,final_cte";
  if (!std::isnan(base_mean)) csv << ",standardized_ewma";
  csv << '\n';

  SweepResult res;
  for (size_t i = 0; i < cells.size(); ++i) {
    const CellStatus& st = statuses[i];
    csv << st.label << ',' << st.seed << ',' << st.dir << ','
        << (st.ok ? (st.cached ? "cached" : "ok") : "failed: " + st.error);
    for (const auto& [key, values] : m.grid) {
      auto it = cell_params[i].find(key);
      csv << ',' << (it == cell_params[i].end() ? "" : it->second);
    }
    if (st.ok) {
      if (st.cached)
        ++res.cached;
      else
        ++res.completed;
      RunInfo run = read_run(st.dir);
      csv << ',' << fmt(run.final_ewma) << ',' << fmt(run.final_cte);
      if (!std::isnan(base_mean)) {
        double std_ewma = base_sd > 0 ? (run.final_ewma - base_mean) / base_sd : NAN;
        csv << ',' << fmt(std_ewma);
      }
    } else {
      ++res.failed;
      csv << ",,";
      if (!std::isnan(base_mean)) csv << ',';
    }
    csv << '\n';
  }
  res.results_csv = m.out_root + "/results.csv";
  atomic_write(res.results_csv, csv.str());
  return res;
}

std::vector<std::string> cmd_plot(const std::vector<std::string>& run_dirs,
                                  const std::string& out_dir) {
  std::map<std::string, std::map<std::string, std::vector<RunInfo>>> by_env_method;
  for (const auto& dir : run_dirs) {
    RunInfo run = read_run(dir);
    by_env_method[run.cfg.env][run.method].push_back(std::move(run));
  }
  ensure_dir(out_dir);
  std::vector<std::string> files;
  for (const auto& [env, methods] : by_env_method) {
    std::vector<SvgSeries> series;
    size_t i = 0;
    for (const auto& [method, runs] : methods) {
      series.push_back(curve_series(method, method_color(method, i), runs));
      ++i;
    }
    std::string svg =
        render_svg_plot(env + " learning curves", "environment steps", "EWMA return", series);
    std::string why;
    if (!validate_svg(svg, &why)) throw SchemaError("generated plot failed validation: " + why);
    std::string path = out_dir + "/curves_" + env + ".svg";
    atomic_write(path, svg);
    files.push_back(path);
  }
  return files;
}

}  // namespace kippo
