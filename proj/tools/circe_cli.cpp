// circe: data generation, CME fitting, training runs, sweeps and reports.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical error,
// 4 sweep finished with unstable rows.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "circe/harness.hpp"
#include "circe/serialize.hpp"

namespace fs = std::filesystem;
using namespace circe;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitPartial = 4;

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_config(path);
}

fs::path output_dir(const std::string& out) {
  fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

int cmd_gen(const std::string& case_name, Index n, Index d, std::uint64_t seed, bool shifted,
            const std::string& config_path, const std::string& out) {
  const ScmCase c = parse_case(case_name);
  const ExperimentConfig cfg = config_or_default(config_path);
  ScmBatch batch;
  if (c == ScmCase::nonlinear) {
    batch = gen_nonlinear_gcm_case(n, cfg.nonlinear.alpha, cfg.nonlinear.sigma_z, cfg.nonlinear.sigma_y, seed, shifted);
  } else {
    batch = gen_scm(c, n, d, seed);
  }
  if (out.empty()) {
    write_batch_csv(std::cout, batch);
  } else {
    const fs::path p = output_dir(out) / (case_name + "_seed" + std::to_string(seed) + ".csv");
    auto os = open_out(p);
    write_batch_csv(os, batch);
    std::cerr << "wrote " << p.string() << "\n";
  }
  return 0;
}

int cmd_fit_cme(const std::string& config_path, std::uint64_t seed, const std::string& case_name,
                const std::string& out) {
  const ExperimentConfig cfg = config_or_default(config_path);
  const ScmCase c = case_name.empty() ? cfg.cases.front() : parse_case(case_name);
  const PreparedData data = prepare_data(cfg, c, seed);
  const auto [model, report] = fit_holdout_cme(cfg, data);

  std::printf("%-10s %-10s %s\n", "lambda", "sigma2_y", "loo_error");
  for (std::size_t i = 0; i < report.grid.size(); ++i) {
    std::printf("%-10g %-10g %.6g%s\n", report.grid[i].lambda, report.grid[i].sigma2_y, report.errors[i],
                i == report.best ? "  *" : "");
  }
  const fs::path p = output_dir(out) / "cme.json";
  write_text_file(p.string(), save_cme(model));
  std::cerr << "wrote " << p.string() << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, std::uint64_t seed, const std::string& case_name,
              const std::string& method_name, std::optional<double> gamma, const std::string& out) {
  const ExperimentConfig cfg = config_or_default(config_path);
  const ScmCase c = case_name.empty() ? cfg.cases.front() : parse_case(case_name);
  const Method m = method_name.empty() ? cfg.methods.back() : parse_method(method_name);
  const double g = gamma.value_or(cfg.gammas.back());

  const RunOutput run = run_single(cfg, c, m, g, seed);
  const fs::path dir = output_dir(out);
  {
    auto os = open_out(dir / "run.csv");
    write_csv_header(os);
    write_csv_row(os, run.record);
  }
  {
    auto os = open_out(dir / "log.csv");
    os << "epoch,train_loss,statistic,mse_in,mse_ood\n";
    os.precision(10);
    for (const EpochLog& e : run.trained.log) {
      os << e.epoch << ',' << e.train_loss << ',' << e.statistic << ',' << e.mse_in << ',' << e.mse_ood << '\n';
    }
  }
  write_text_file((dir / "model.json").string(), save_mlp(run.trained.model));
  const RunRecord& r = run.record;
  std::printf("case=%s method=%s gamma=%g seed=%llu mse_in=%.6g vcf=%.6g statistic=%.6g unstable=%d (%.1fs)\n",
              r.case_id.c_str(), r.method.c_str(), r.gamma, static_cast<unsigned long long>(r.seed), r.mse_in,
              r.vcf, r.statistic_final, r.unstable ? 1 : 0, r.wall_seconds);
  return r.unstable ? kExitNumerical : 0;
}

int cmd_sweep(const std::string& config_path, int workers, const std::string& out) {
  const ExperimentConfig cfg = config_or_default(config_path);
  const fs::path p = output_dir(out) / "results.csv";
  auto os = open_out(p);
  const SweepSummary s = run_sweep(cfg, os, workers);
  std::cerr << "wrote " << s.rows << " rows to " << p.string() << " (" << s.unstable << " unstable)\n";
  return s.unstable > 0 ? kExitPartial : 0;
}

int cmd_report(const std::string& input, const std::string& out) {
  std::ifstream in(input);
  if (!in) throw ConfigError("cannot open " + input);
  const std::vector<RunRecord> rows = read_csv(in);
  if (rows.empty()) throw ConfigError("no rows in " + input);

  using Key = std::tuple<std::string, std::string, double>;
  std::map<Key, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : rows) groups[{r.case_id, r.method, r.gamma}].push_back(&r);

  struct Summary {
    Key key;
    double mse;
    double vcf;
    double stat;
    std::size_t runs;
    std::size_t unstable;
  };
  std::map<std::string, std::vector<Summary>> by_case;
  for (const auto& [key, members] : groups) {
    std::vector<double> mse, vcf, stat;
    std::size_t bad = 0;
    for (const RunRecord* r : members) {
      mse.push_back(r->mse_in);
      vcf.push_back(r->vcf);
      stat.push_back(r->statistic_final);
      bad += r->unstable ? 1 : 0;
    }
    by_case[std::get<0>(key)].push_back({key, median(mse), median(vcf), median(stat), members.size(), bad});
  }

  std::ostream* csv = nullptr;
  std::ofstream file;
  if (!out.empty()) {
    file = open_out(output_dir(out) / "summary.csv");
    csv = &file;
    *csv << "case_id,method,gamma,runs,unstable,median_mse_in,median_vcf,median_statistic,pareto\n";
    csv->precision(10);
  }
  for (const auto& [case_id, items] : by_case) {
    std::vector<std::pair<double, double>> pts;
    for (const Summary& s : items) {
      pts.emplace_back(std::isnan(s.mse) ? HUGE_VAL : s.mse, std::isnan(s.vcf) ? HUGE_VAL : s.vcf);
    }
    const auto front = pareto_front(pts);
    std::vector<bool> on_front(items.size(), false);
    for (std::size_t i : front) on_front[i] = true;

    std::printf("case %s\n  %-8s %-10s %-5s %-12s %-12s %-12s %s\n", case_id.c_str(), "method", "gamma", "runs",
                "mse_in", "vcf", "statistic", "pareto");
    for (std::size_t i = 0; i < items.size(); ++i) {
      const Summary& s = items[i];
      std::printf("  %-8s %-10g %-5zu %-12.4g %-12.4g %-12.4g %s%s\n", std::get<1>(s.key).c_str(),
                  std::get<2>(s.key), s.runs, s.mse, s.vcf, s.stat, on_front[i] ? "*" : "",
                  s.unstable ? " (unstable runs)" : "");
      if (csv) {
        *csv << case_id << ',' << std::get<1>(s.key) << ',' << std::get<2>(s.key) << ',' << s.runs << ','
             << s.unstable << ',' << s.mse << ',' << s.vcf << ',' << s.stat << ',' << (on_front[i] ? 1 : 0) << '\n';
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CIRCE conditional-independence regularization experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  int workers = 1;

  auto* gen = app.add_subcommand("gen", "Write a synthetic dataset as CSV");
  std::string gen_case = "uni1";
  Index gen_n = 10000;
  Index gen_d = 2;
  bool gen_shifted = false;
  gen->add_option("--case", gen_case, "uni1, uni2, multi1, multi2 or nonlinear");
  gen->add_option("--n", gen_n, "Number of samples")->check(CLI::PositiveNumber);
  gen->add_option("--d", gen_d, "Z dimension (multi1) or Y dimension (multi2)");
  gen->add_flag("--shifted", gen_shifted, "Domain-shifted variant of the nonlinear case");
  gen->add_option("--config", config_path, "JSON config (nonlinear settings)");
  gen->add_option("--seed", seed, "Seed");
  gen->add_option("--out", out, "Output directory (stdout if omitted)");

  auto* fit = app.add_subcommand("fit-cme", "Select (lambda, sigma2_y) by LOO and save the CME model");
  std::string fit_case;
  fit->add_option("--config", config_path, "JSON config");
  fit->add_option("--case", fit_case, "Case (default: first configured)");
  fit->add_option("--seed", seed, "Seed");
  fit->add_option("--out", out, "Output directory");

  auto* tr = app.add_subcommand("train", "Run a single training job");
  std::string tr_case;
  std::string tr_method;
  std::optional<double> tr_gamma;
  tr->add_option("--config", config_path, "JSON config");
  tr->add_option("--case", tr_case, "Case (default: first configured)");
  tr->add_option("--method", tr_method, "none, circe, hscic or gcm (default: last configured)");
  tr->add_option("--gamma", tr_gamma, "Regularization weight (default: last configured)");
  tr->add_option("--seed", seed, "Seed");
  tr->add_option("--out", out, "Output directory");

  auto* sw = app.add_subcommand("sweep", "Run cases x methods x gammas x seeds");
  sw->add_option("--config", config_path, "JSON config")->required();
  sw->add_option("--workers", workers, "Concurrent runs")->check(CLI::PositiveNumber);
  sw->add_option("--out", out, "Output directory");

  auto* rep = app.add_subcommand("report", "Median summaries and Pareto fronts from a results CSV");
  std::string rep_in;
  rep->add_option("results", rep_in, "results.csv")->required();
  rep->add_option("--out", out, "Directory for summary.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen(gen_case, gen_n, gen_d, seed, gen_shifted, config_path, out);
    if (*fit) return cmd_fit_cme(config_path, seed, fit_case, out);
    if (*tr) return cmd_train(config_path, seed, tr_case, tr_method, tr_gamma, out);
    if (*sw) return cmd_sweep(config_path, workers, out);
    if (*rep) return cmd_report(rep_in, out);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
