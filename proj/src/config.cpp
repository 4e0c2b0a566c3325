#include <fstream>
#include <set>
#include <sstream>

#include "circe/harness.hpp"
#include "json.hpp"

namespace circe {

namespace {

using Json = nlohmann::json;

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const Json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_opt(const Json& obj, const std::string& key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get<T>(obj, key, where);
}

double positive(double v, const std::string& what) {
  if (!(v > 0.0)) throw ConfigError(what + " must be positive");
  return v;
}

// Enum parsers throw UsageError; inside a config file that is a ConfigError.
template <typename F>
auto config_enum(F&& parse, const std::string& s, const std::string& where) {
  try {
    return parse(s);
  } catch (const UsageError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root,
             {"cases", "methods", "gammas", "gamma_grid", "seeds", "n", "n_train", "d", "holdout", "reuse_holdout",
              "nonlinear", "train", "cme", "rff", "vcf"},
             "config");

  ExperimentConfig cfg;
  if (root.contains("cases")) {
    cfg.cases.clear();
    for (const auto& s : get<std::vector<std::string>>(root, "cases", "config")) {
      cfg.cases.push_back(config_enum([](const std::string& v) { return parse_case(v); }, s, "config.cases"));
    }
  }
  if (root.contains("methods")) {
    cfg.methods.clear();
    for (const auto& s : get<std::vector<std::string>>(root, "methods", "config")) {
      cfg.methods.push_back(config_enum([](const std::string& v) { return parse_method(v); }, s, "config.methods"));
    }
  }
  if (root.contains("gammas") && root.contains("gamma_grid")) {
    throw ConfigError("config: give either gammas or gamma_grid, not both");
  }
  read_opt(root, "gammas", "config", cfg.gammas);
  if (root.contains("gamma_grid")) {
    const Json& g = root.at("gamma_grid");
    check_keys(g, {"lo", "hi", "points", "include_zero"}, "config.gamma_grid");
    const double lo = positive(get<double>(g, "lo", "config.gamma_grid"), "gamma_grid.lo");
    const double hi = get<double>(g, "hi", "config.gamma_grid");
    const int points = get<int>(g, "points", "config.gamma_grid");
    if (hi < lo || points < 1) throw ConfigError("config.gamma_grid: need lo <= hi and points >= 1");
    cfg.gammas = log_grid(lo, hi, points);
    if (g.value("include_zero", false)) cfg.gammas.insert(cfg.gammas.begin(), 0.0);
  }
  for (double g : cfg.gammas) {
    if (!(g >= 0.0)) throw ConfigError("config.gammas: gamma must be nonnegative");
  }
  read_opt(root, "seeds", "config", cfg.seeds);
  read_opt(root, "n", "config", cfg.n);
  read_opt(root, "n_train", "config", cfg.n_train);
  read_opt(root, "d", "config", cfg.d);
  read_opt(root, "holdout", "config", cfg.holdout);
  read_opt(root, "reuse_holdout", "config", cfg.reuse_holdout);

  if (root.contains("nonlinear")) {
    const Json& nl = root.at("nonlinear");
    check_keys(nl, {"alpha", "sigma_z", "sigma_y"}, "config.nonlinear");
    read_opt(nl, "alpha", "config.nonlinear", cfg.nonlinear.alpha);
    read_opt(nl, "sigma_z", "config.nonlinear", cfg.nonlinear.sigma_z);
    read_opt(nl, "sigma_y", "config.nonlinear", cfg.nonlinear.sigma_y);
  }

  if (root.contains("train")) {
    const Json& t = root.at("train");
    const std::string w = "config.train";
    check_keys(t,
               {"hidden", "epochs", "batch_size", "lr", "weight_decay", "optimizer", "variant", "target", "sigma2_x"},
               w);
    if (t.contains("hidden")) cfg.train.hidden = get<std::vector<Index>>(t, "hidden", w);
    read_opt(t, "epochs", w, cfg.train.epochs);
    read_opt(t, "batch_size", w, cfg.train.batch_size);
    if (t.contains("lr")) cfg.lr = positive(get<double>(t, "lr", w), "train.lr");
    if (t.contains("weight_decay")) cfg.weight_decay = get<double>(t, "weight_decay", w);
    if (t.contains("optimizer")) {
      cfg.train.optimizer.kind = config_enum([](const std::string& v) { return parse_optimizer(v); },
                                             get<std::string>(t, "optimizer", w), w);
    }
    if (t.contains("variant")) {
      cfg.train.reg.variant =
          config_enum([](const std::string& v) { return parse_variant(v); }, get<std::string>(t, "variant", w), w);
    }
    if (t.contains("target")) {
      cfg.train.reg.target = config_enum([](const std::string& v) { return parse_reg_target(v); },
                                         get<std::string>(t, "target", w), w);
    }
    if (t.contains("sigma2_x")) {
      cfg.train.reg.x_params = KernelParams::gaussian(positive(get<double>(t, "sigma2_x", w), "train.sigma2_x"));
    }
  }

  if (root.contains("cme")) {
    const Json& c = root.at("cme");
    check_keys(c, {"lambda_grid", "sigma2_y_grid", "sigma2_z"}, "config.cme");
    read_opt(c, "lambda_grid", "config.cme", cfg.lambda_grid);
    read_opt(c, "sigma2_y_grid", "config.cme", cfg.sigma2_y_grid);
    if (c.contains("sigma2_z")) cfg.sigma2_z = positive(get<double>(c, "sigma2_z", "config.cme"), "cme.sigma2_z");
  }

  if (root.contains("rff")) {
    const Json& r = root.at("rff");
    check_keys(r, {"enabled", "d_total", "d_active", "refresh_period"}, "config.rff");
    read_opt(r, "enabled", "config.rff", cfg.use_rff);
    read_opt(r, "d_total", "config.rff", cfg.rff.d_total);
    cfg.rff.d_active = cfg.rff.d_total;
    read_opt(r, "d_active", "config.rff", cfg.rff.d_active);
    read_opt(r, "refresh_period", "config.rff", cfg.rff.refresh_period);
    if (cfg.rff.d_active < 1 || cfg.rff.d_active > cfg.rff.d_total) {
      throw ConfigError("config.rff: need 1 <= d_active <= d_total");
    }
  }

  if (root.contains("vcf")) {
    const Json& v = root.at("vcf");
    check_keys(v, {"n_interventions"}, "config.vcf");
    read_opt(v, "n_interventions", "config.vcf", cfg.vcf_interventions);
    if (cfg.vcf_interventions < 2) throw ConfigError("config.vcf: n_interventions must be at least 2");
  }

  if (cfg.train.batch_size < 2) throw ConfigError("config.train: batch_size must be at least 2");
  if (cfg.train.epochs < 0) throw ConfigError("config.train: epochs must be nonnegative");
  for (Index h : cfg.train.hidden) {
    if (h < 1) throw ConfigError("config.train: hidden widths must be positive");
  }
  if (cfg.lambda_grid.empty() || cfg.sigma2_y_grid.empty()) throw ConfigError("config.cme: grids must be nonempty");
  for (double v : cfg.lambda_grid) positive(v, "cme.lambda_grid entry");
  for (double v : cfg.sigma2_y_grid) positive(v, "cme.sigma2_y_grid entry");
  for (ScmCase c : cfg.cases) {
    if ((c == ScmCase::multi1 || c == ScmCase::multi2) && cfg.d < 2) {
      throw ConfigError("config: multivariate cases need d >= 2");
    }
  }
  if (cfg.n_train < 2 || cfg.n_train >= cfg.n) throw ConfigError("config: n_train must lie in [2, n)");
  if (cfg.holdout < 2 || cfg.holdout >= cfg.n_train) throw ConfigError("config: holdout must lie in [2, n_train)");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace circe
