#include "kippo/config.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "kippo/env.hpp"
#include "kippo/io.hpp"

namespace kippo {

std::vector<int> TrainConfig::encoder_hidden() const {
  return std::vector<int>(static_cast<size_t>(enc_hidden_layers), enc_hidden_width);
}

std::vector<int> TrainConfig::agent_hidden() const {
  return std::vector<int>(static_cast<size_t>(agent_hidden_layers), agent_hidden_width);
}

namespace {

enum class FieldType { integer, real, boolean, text };

struct FieldDef {
  const char* section;
  const char* key;
  FieldType type;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

std::string bool_str(bool v) { return v ? "true" : "false"; }

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("bad boolean value '" + s + "'");
}

long parse_long(const std::string& s) {
  try {
    size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value '" + s + "'");
  }
}

double parse_real(const std::string& s) {
  try {
    return parse_double(s);
  } catch (const SchemaError&) {
    throw ConfigError("bad numeric value '" + s + "'");
  }
}

#define INT_FIELD(sec, key, member)                                            \
  FieldDef{sec, key, FieldType::integer,                                       \
           [](const TrainConfig& c) { return std::to_string(c.member); },      \
           [](TrainConfig& c, const std::string& v) {                          \
             c.member = static_cast<decltype(c.member)>(parse_long(v));        \
           }}
#define REAL_FIELD(sec, key, member)                                           \
  FieldDef{sec, key, FieldType::real,                                          \
           [](const TrainConfig& c) { return format_double(c.member); },       \
           [](TrainConfig& c, const std::string& v) { c.member = parse_real(v); }}
#define BOOL_FIELD(sec, key, member)                                           \
  FieldDef{sec, key, FieldType::boolean,                                       \
           [](const TrainConfig& c) { return bool_str(c.member); },            \
           [](TrainConfig& c, const std::string& v) { c.member = parse_bool(v); }}
#define TEXT_FIELD(sec, key, member)                                           \
  FieldDef{sec, key, FieldType::text,                                          \
           [](const TrainConfig& c) { return c.member; },                      \
           [](TrainConfig& c, const std::string& v) { c.member = v; }}

const std::vector<FieldDef>& fields() {
  static const std::vector<FieldDef> defs = {
      TEXT_FIELD("run", "env", env),
      INT_FIELD("run", "seed", seed),
      INT_FIELD("run", "total_steps", total_steps),
      BOOL_FIELD("run", "kippo", kippo),
      TEXT_FIELD("run", "out_dir", out_dir),
      BOOL_FIELD("run", "dump_trajectories", dump_trajectories),
      INT_FIELD("rollout", "length", rollout_len),
      INT_FIELD("rollout", "horizon", horizon),
      INT_FIELD("optim", "minibatches", num_minibatches),
      INT_FIELD("optim", "epochs", epochs),
      REAL_FIELD("optim", "lr", lr),
      BOOL_FIELD("optim", "lr_decay", lr_decay),
      REAL_FIELD("optim", "adam_beta1", adam_beta1),
      REAL_FIELD("optim", "adam_beta2", adam_beta2),
      REAL_FIELD("optim", "adam_eps", adam_eps),
      REAL_FIELD("optim", "max_grad_norm", max_grad_norm),
      REAL_FIELD("ppo", "gamma", gamma),
      REAL_FIELD("ppo", "gae_lambda", gae_lambda),
      REAL_FIELD("ppo", "clip_eps", clip_eps),
      REAL_FIELD("ppo", "vf_coef", vf_coef),
      REAL_FIELD("ppo", "ent_coef", ent_coef),
      REAL_FIELD("ppo", "pg_coef", pg_coef),
      BOOL_FIELD("ppo", "norm_adv", norm_adv),
      BOOL_FIELD("ppo", "clip_vloss", clip_vloss),
      INT_FIELD("kippo", "latent_dim", latent_dim),
      INT_FIELD("kippo", "action_latent_dim", action_latent_dim),
      REAL_FIELD("kippo", "w_rec", w_rec),
      REAL_FIELD("kippo", "w_ls", w_ls),
      REAL_FIELD("kippo", "w_ss", w_ss),
      INT_FIELD("kippo", "hidden_layers", enc_hidden_layers),
      INT_FIELD("kippo", "hidden_width", enc_hidden_width),
      BOOL_FIELD("kippo", "mask_norm_sum", mask_norm_sum),
      INT_FIELD("agent", "hidden_layers", agent_hidden_layers),
      INT_FIELD("agent", "hidden_width", agent_hidden_width),
      REAL_FIELD("metrics", "ewma_alpha", ewma_alpha),
      BOOL_FIELD("metrics", "ewma_swapped", ewma_swapped),
      INT_FIELD("metrics", "cte_windows", cte_windows),
      INT_FIELD("metrics", "probe_batch", probe_batch),
      BOOL_FIELD("trainer", "obs_norm", obs_norm),
  };
  return defs;
}

const FieldDef* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (section == f.section && key == f.key) return &f;
  return nullptr;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  size_t e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace

void validate(const TrainConfig& cfg) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  bool known_env = false;
  for (const auto& n : env_names()) known_env = known_env || n == cfg.env;
  require(known_env, "unknown environment '" + cfg.env + "'");
  require(cfg.total_steps >= 1, "run.total_steps must be >= 1");
  require(cfg.rollout_len >= 1, "rollout.length must be >= 1");
  require(cfg.num_minibatches >= 1, "optim.minibatches must be >= 1");
  require(cfg.rollout_len % cfg.num_minibatches == 0,
          "rollout.length (" + std::to_string(cfg.rollout_len) +
              ") must be divisible by optim.minibatches (" +
              std::to_string(cfg.num_minibatches) + ")");
  require(cfg.horizon >= 1, "rollout.horizon must be >= 1");
  require(cfg.epochs >= 1, "optim.epochs must be >= 1");
  require(cfg.lr > 0, "optim.lr must be positive");
  require(cfg.w_rec >= 0 && cfg.w_ls >= 0 && cfg.w_ss >= 0,
          "kippo loss weights must be non-negative");
  require(cfg.latent_dim >= 0 && cfg.action_latent_dim >= 0,
          "kippo latent dimensions must be non-negative (0 = auto)");
  require(cfg.enc_hidden_layers >= 0 && cfg.agent_hidden_layers >= 0,
          "hidden layer counts must be non-negative");
  require(cfg.enc_hidden_width >= 1 && cfg.agent_hidden_width >= 1,
          "hidden widths must be positive");
  require(cfg.ewma_alpha >= 0.0 && cfg.ewma_alpha <= 1.0, "metrics.ewma_alpha must be in [0,1]");
  require(cfg.gamma >= 0.0 && cfg.gamma <= 1.0, "ppo.gamma must be in [0,1]");
  require(cfg.gae_lambda >= 0.0 && cfg.gae_lambda <= 1.0, "ppo.gae_lambda must be in [0,1]");
  require(cfg.clip_eps > 0.0 && cfg.clip_eps < 1.0, "ppo.clip_eps must be in (0,1)");
  require(cfg.horizon < cfg.rollout_len, "rollout.horizon must be smaller than rollout.length");
  // env params are validated by the factory, which rejects unknown keys
  make_env(cfg.env, cfg.env_params);
}

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream ss;
  std::string current;
  for (const auto& f : fields()) {
    if (current != f.section) {
      if (!current.empty()) ss << '\n';
      current = f.section;
      ss << '[' << current << "]\n";
    }
    ss << f.key << " = " << f.get(cfg) << '\n';
  }
  if (!cfg.env_params.empty()) {
    ss << "\n[env]\n";
    for (const auto& [k, v] : cfg.env_params) ss << k << " = " << format_double(v) << '\n';
  }
  return ss.str();
}

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream ss(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (section == "env") {
      cfg.env_params[key] = parse_real(value);
      continue;
    }
    const FieldDef* f = find_field(section, key);
    if (!f)
      throw ConfigError("unknown configuration key '" + section + "." + key + "'");
    f->set(cfg, value);
  }
  return cfg;
}

TrainConfig load_config_file(const std::string& path) {
  try {
    return parse_config_text(slurp(path));
  } catch (const MissingInput& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
}

std::vector<std::string> apply_overrides(TrainConfig& cfg,
                                         const std::vector<std::string>& overrides) {
  std::vector<std::string> log;
  for (const auto& ov : overrides) {
    size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + ov + "' is not of the form section.key=value");
    std::string path = trim(ov.substr(0, eq));
    std::string value = trim(ov.substr(eq + 1));
    size_t dot = path.find('.');
    if (dot == std::string::npos)
      throw ConfigError("override key '" + path + "' must be section.key");
    std::string section = path.substr(0, dot);
    std::string key = path.substr(dot + 1);
    if (section == "env") {
      cfg.env_params[key] = parse_real(value);
      log.push_back("override env." + key + " = " + value);
      continue;
    }
    const FieldDef* f = find_field(section, key);
    if (!f) throw ConfigError("unknown configuration key '" + path + "'");
    f->set(cfg, value);
    log.push_back("override " + path + " = " + value);
  }
  return log;
}

uint64_t config_hash(const TrainConfig& cfg) {
  // out_dir does not affect the trained artifact
  TrainConfig c = cfg;
  c.out_dir = "";
  return fnv1a64(serialize_config(c));
}

}  // namespace kippo
