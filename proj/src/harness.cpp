#include "circe/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "circe/rng.hpp"

namespace circe {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_double(const std::string& s) {
  if (s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw ConfigError("results csv: bad number '" + s + "'");
  return v;
}

bool is_univariate(ScmCase c) { return c == ScmCase::uni1 || c == ScmCase::uni2; }

}  // namespace

VcfResult eval_vcf(const BatchPredictor& predictor, const ScmBatch& batch, Index n_interventions,
                   std::uint64_t seed) {
  require(batch.has_noises, "eval_vcf: batch does not retain exogenous noises");
  require(n_interventions >= 2, "eval_vcf: need at least two interventions");
  const Index n = batch.size();
  require(n >= 1, "eval_vcf: empty batch");

  Rng rng(derive_seed(seed, {0x564346ULL}));
  std::uniform_int_distribution<Index> pick(0, n - 1);
  // Welford accumulators per point.
  Vector mean = Vector::Zero(n);
  Vector m2 = Vector::Zero(n);
  Matrix z_new(n, batch.z.cols());
  for (Index k = 0; k < n_interventions; ++k) {
    for (Index i = 0; i < n; ++i) z_new.row(i) = batch.z.row(pick(rng));
    const Vector pred = predictor(intervene_z_all(batch, z_new));
    require(pred.size() == n, "eval_vcf: predictor returned the wrong number of values");
    const Vector delta = pred - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta.cwiseProduct(pred - mean);
  }
  VcfResult r;
  r.value = (m2 / static_cast<double>(n_interventions - 1)).mean();
  r.n_interventions = n_interventions;
  r.n_points = n;
  return r;
}

std::vector<std::size_t> pareto_front(const std::vector<std::pair<double, double>>& points) {
  require(!points.empty(), "pareto_front: no points");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].first != points[b].first) return points[a].first < points[b].first;
    if (points[a].second != points[b].second) return points[a].second < points[b].second;
    return a < b;
  });
  std::vector<std::size_t> front;
  for (std::size_t i : order) {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
      const auto& p = points[j];
      const auto& q = points[i];
      dominated = p.first <= q.first && p.second <= q.second && (p.first < q.first || p.second < q.second);
    }
    if (!dominated) front.push_back(i);
  }
  return front;
}

void write_csv_header(std::ostream& os) {
  os << "schema_version,case_id,method,variant,gamma,seed,lambda,sigma2_y,sigma2_z,mse_in,mse_ood,vcf,"
        "statistic_final,unstable,wall_seconds\n";
}

void write_csv_row(std::ostream& os, const RunRecord& r) {
  os << kSchemaVersion << ',' << r.case_id << ',' << r.method << ',' << r.variant << ',' << format_double(r.gamma)
     << ',' << r.seed << ',' << format_double(r.lambda) << ',' << format_double(r.sigma2_y) << ','
     << format_double(r.sigma2_z) << ',' << format_double(r.mse_in) << ','
     << (r.mse_ood ? format_double(*r.mse_ood) : std::string()) << ',' << format_double(r.vcf) << ','
     << format_double(r.statistic_final) << ',' << (r.unstable ? 1 : 0) << ',' << format_double(r.wall_seconds)
     << '\n';
}

std::vector<RunRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("results csv: empty input");
  if (line.rfind("schema_version,", 0) != 0) throw ConfigError("results csv: missing header");
  std::vector<RunRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 15) throw ConfigError("results csv: expected 15 columns, got " + std::to_string(f.size()));
    if (std::stoi(f[0]) != kSchemaVersion) throw ConfigError("results csv: unsupported schema version " + f[0]);
    RunRecord r;
    r.case_id = f[1];
    r.method = f[2];
    r.variant = f[3];
    r.gamma = parse_double(f[4]);
    r.seed = std::stoull(f[5]);
    r.lambda = parse_double(f[6]);
    r.sigma2_y = parse_double(f[7]);
    r.sigma2_z = parse_double(f[8]);
    r.mse_in = parse_double(f[9]);
    if (!f[10].empty()) r.mse_ood = parse_double(f[10]);
    r.vcf = parse_double(f[11]);
    r.statistic_final = parse_double(f[12]);
    r.unstable = f[13] == "1";
    r.wall_seconds = parse_double(f[14]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<double> log_grid(double lo, double hi, int points) {
  require(lo > 0.0 && hi >= lo, "log_grid: need 0 < lo <= hi");
  require(points >= 1, "log_grid: need at least one point");
  if (points == 1) return {lo};
  std::vector<double> g(static_cast<std::size_t>(points));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (points - 1));
  return g;
}

TrainConfig effective_train_config(const ExperimentConfig& cfg, ScmCase c) {
  TrainConfig t = cfg.train;
  const bool uni = is_univariate(c);
  t.optimizer.lr = cfg.lr.value_or(uni ? 1e-4 : 3e-4);
  t.optimizer.weight_decay = cfg.weight_decay.value_or(uni ? 0.3 : 0.1);
  return t;
}

Dataset PreparedData::standardize(const ScmBatch& raw) const {
  Dataset d;
  d.inputs = inputs.apply(model_inputs(raw));
  d.target = target.apply(raw.b);
  d.y = y.apply(raw.y);
  d.z = z.apply(raw.z);
  return d;
}

PreparedData prepare_data(const ExperimentConfig& cfg, ScmCase c, std::uint64_t seed) {
  if (cfg.n_train < 2 || cfg.n_train >= cfg.n) throw ConfigError("n_train must lie in [2, n)");
  if (cfg.holdout < 2 || cfg.holdout >= cfg.n_train) throw ConfigError("holdout must lie in [2, n_train)");

  ScmBatch all;
  std::optional<ScmBatch> ood;
  if (c == ScmCase::nonlinear) {
    const auto& nl = cfg.nonlinear;
    all = gen_nonlinear_gcm_case(cfg.n, nl.alpha, nl.sigma_z, nl.sigma_y, seed);
    ood = gen_nonlinear_gcm_case(cfg.n - cfg.n_train, nl.alpha, nl.sigma_z, nl.sigma_y,
                                 derive_seed(seed, {0x4f4f44ULL}), true);
  } else {
    all = gen_scm(c, cfg.n, cfg.d, seed);
  }

  PreparedData p;
  const ScmBatch train_all = slice(all, 0, cfg.n_train);
  p.raw_eval = slice(all, cfg.n_train, cfg.n - cfg.n_train);
  p.raw_holdout = slice(train_all, 0, cfg.holdout);
  p.raw_train = cfg.reuse_holdout ? train_all : slice(train_all, cfg.holdout, cfg.n_train - cfg.holdout);
  p.raw_ood = std::move(ood);

  p.inputs = Standardizer::fit(model_inputs(train_all));
  p.target = Standardizer::fit(train_all.b);
  p.y = Standardizer::fit(train_all.y);
  p.z = Standardizer::fit(train_all.z);

  p.train = p.standardize(p.raw_train);
  p.holdout = p.standardize(p.raw_holdout);
  p.eval = p.standardize(p.raw_eval);
  if (p.raw_ood) p.ood = p.standardize(*p.raw_ood);
  return p;
}

std::pair<CmeModel, LooReport> fit_holdout_cme(const ExperimentConfig& cfg, const PreparedData& data) {
  return select_hyperparams(data.holdout.y, data.holdout.z, cfg.lambda_grid, cfg.sigma2_y_grid,
                            KernelParams::gaussian(cfg.sigma2_z));
}

RunOutput run_single(const ExperimentConfig& cfg, ScmCase c, Method method, double gamma, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const PreparedData data = prepare_data(cfg, c, seed);
  auto selected = fit_holdout_cme(cfg, data);
  auto cme_model = std::make_shared<const CmeModel>(std::move(selected.first));

  TrainConfig tc = effective_train_config(cfg, c);
  tc.seed = derive_seed(seed, {0x52554eULL});
  tc.reg.method = method;
  tc.reg.gamma = gamma;
  tc.reg.lambda = cme_model->lambda;
  tc.reg.y_params = cme_model->y_params;
  tc.reg.z_params = cme_model->z_params;

  CirceContext ctx;
  if (method == Method::circe) {
    ctx = cfg.use_rff ? CirceContext::rff(cme_model, cfg.rff, derive_seed(seed, {0x524646ULL}))
                      : CirceContext::exact(cme_model);
  }

  RunOutput out;
  out.trained = train(tc, data.train, ctx, &data.eval, data.ood ? &*data.ood : nullptr);
  const MlpModel& model = out.trained.model;

  RunRecord& r = out.record;
  r.case_id = std::string(to_string(c));
  r.method = std::string(to_string(method));
  r.variant = std::string(to_string(tc.reg.variant));
  r.gamma = gamma;
  r.seed = seed;
  r.lambda = cme_model->lambda;
  r.sigma2_y = cme_model->y_params.sigma2;
  r.sigma2_z = cme_model->z_params.sigma2;
  r.mse_in = mse(model, data.eval);
  if (data.ood) r.mse_ood = mse(model, *data.ood);
  const BatchPredictor predictor = [&](const ScmBatch& b) {
    return predict(model, data.inputs.apply(model_inputs(b)));
  };
  r.vcf = eval_vcf(predictor, data.raw_eval, cfg.vcf_interventions, derive_seed(seed, {0x455641ULL})).value;
  r.statistic_final = out.trained.log.empty() ? kNaN : out.trained.log.back().statistic;
  r.unstable = out.trained.unstable || !std::isfinite(r.mse_in) || !std::isfinite(r.vcf);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

SweepSummary run_sweep(const ExperimentConfig& cfg, std::ostream& csv, int workers) {
  if (cfg.cases.empty() || cfg.methods.empty() || cfg.gammas.empty() || cfg.seeds.empty()) {
    throw ConfigError("sweep: cases, methods, gammas and seeds must be nonempty");
  }
  struct Job {
    ScmCase c;
    Method m;
    double gamma;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (ScmCase c : cfg.cases) {
    for (Method m : cfg.methods) {
      for (double g : cfg.gammas) {
        for (std::uint64_t s : cfg.seeds) jobs.push_back({c, m, g, s});
      }
    }
  }

  std::vector<std::optional<RunRecord>> done(jobs.size());
  std::size_t next_job = 0;
  std::size_t next_write = 0;
  SweepSummary summary;
  std::mutex mutex;
  write_csv_header(csv);

  auto worker = [&] {
    for (;;) {
      std::size_t j = 0;
      {
        std::lock_guard lock(mutex);
        if (next_job >= jobs.size()) return;
        j = next_job++;
      }
      const Job& job = jobs[j];
      RunRecord rec;
      try {
        rec = run_single(cfg, job.c, job.m, job.gamma, job.seed).record;
      } catch (const std::exception&) {
        rec.case_id = std::string(to_string(job.c));
        rec.method = std::string(to_string(job.m));
        rec.variant = std::string(to_string(cfg.train.reg.variant));
        rec.gamma = job.gamma;
        rec.seed = job.seed;
        rec.lambda = rec.sigma2_y = rec.mse_in = rec.vcf = rec.statistic_final = kNaN;
        rec.sigma2_z = cfg.sigma2_z;
        rec.unstable = true;
      }
      std::lock_guard lock(mutex);
      done[j] = std::move(rec);
      while (next_write < done.size() && done[next_write]) {
        write_csv_row(csv, *done[next_write]);
        summary.unstable += done[next_write]->unstable ? 1 : 0;
        ++summary.rows;
        ++next_write;
      }
      csv.flush();
    }
  };

  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return summary;
}

}  // namespace circe
