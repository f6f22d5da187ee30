#include "prime/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "prime/cutoff.hpp"
#include "prime/error.hpp"
#include "prime/marginal_risk.hpp"
#include "prime/netgain.hpp"
#include "prime/numeric.hpp"

namespace prime {

using nlohmann::json;

namespace {

constexpr std::uint64_t kCalibrationStream = 0xC0FFEEULL;
constexpr std::uint64_t kBhmStreamBase = 0xB00000ULL;

const char* effect_name(Effect e) {
  switch (e) {
    case Effect::strong: return "strong";
    case Effect::weak: return "weak";
    case Effect::null: return "null";
  }
  return "?";
}

Effect parse_effect(const std::string& s) {
  if (s == "strong") return Effect::strong;
  if (s == "weak") return Effect::weak;
  if (s == "null") return Effect::null;
  throw UsageError("unknown effect '" + s + "'");
}

}  // namespace

void validate(const Scenario& sc) {
  if (sc.n < 10) throw UsageError("scenario needs n >= 10");
  if (sc.reps < 1) throw UsageError("scenario needs reps >= 1");
  if (!(sc.censor_target >= 0.0 && sc.censor_target < 1.0))
    throw UsageError("censor_target must lie in [0,1)");
  if (!(sc.baseline_hazard > 0.0) || !(sc.z_sd > 0.0))
    throw UsageError("baseline hazard and biomarker SD must be positive");
  if (sc.effect == Effect::null) {
    if (sc.beta_az != 0.0) throw UsageError("null scenarios need beta_az = 0");
  } else {
    if (sc.beta_az == 0.0) throw UsageError("non-null scenarios need beta_az != 0");
    if (std::fabs(-sc.beta_a / sc.beta_az - sc.true_cutoff) > 0.02)
      throw UsageError("scenario coefficients do not reproduce the stated true cut-off");
  }
}

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("scenario file is not valid JSON: ") + e.what());
  }
  Scenario sc;
  try {
    sc.name = j.value("name", std::string("scenario"));
    sc.n = j.value("n", sc.n);
    sc.beta_z = j.value("beta_z", sc.beta_z);
    sc.beta_x1 = j.value("beta_x1", sc.beta_x1);
    sc.beta_x2 = j.value("beta_x2", sc.beta_x2);
    sc.beta_a = j.at("beta_a").get<double>();
    sc.beta_az = j.at("beta_az").get<double>();
    sc.true_cutoff = j.value("true_cutoff", sc.true_cutoff);
    sc.effect = parse_effect(j.value("effect", std::string("strong")));
    sc.censor_target = j.value("censor_target", sc.censor_target);
    sc.reps = j.value("reps", sc.reps);
    sc.seed = j.value("seed", sc.seed);
    sc.baseline_hazard = j.value("baseline_hazard", sc.baseline_hazard);
    sc.z_mean = j.value("z_mean", sc.z_mean);
    sc.z_sd = j.value("z_sd", sc.z_sd);
  } catch (const json::exception& e) {
    throw UsageError(std::string("scenario file: ") + e.what());
  }
  validate(sc);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string to_json(const Scenario& sc) {
  json j = {{"name", sc.name},       {"n", sc.n},
            {"beta_z", sc.beta_z},   {"beta_x1", sc.beta_x1},
            {"beta_x2", sc.beta_x2}, {"beta_a", sc.beta_a},
            {"beta_az", sc.beta_az}, {"true_cutoff", sc.true_cutoff},
            {"effect", effect_name(sc.effect)}, {"censor_target", sc.censor_target},
            {"reps", sc.reps},       {"seed", sc.seed},
            {"baseline_hazard", sc.baseline_hazard}, {"z_mean", sc.z_mean},
            {"z_sd", sc.z_sd}};
  return j.dump(2);
}

namespace {

struct Setting {
  const char* kind;
  double cut;
  double beta_a, beta_az;
};

// Treatment main effects and interactions per cut-off (30%, 50%, 70% of Z).
constexpr Setting kSettings[] = {
    {"strong", -0.85, 0.5, 0.59},   {"strong", 0.2, -0.1, 0.5},    {"strong", 1.25, -0.55, 0.44},
    {"weak", -0.85, 0.25, 0.29},    {"weak", 0.2, -0.05, 0.25},    {"weak", 1.25, -0.275, 0.22},
    {"null", -0.85, 0.20, 0.0},     {"null", 0.2, -0.045, 0.0},    {"null", 1.25, -0.286, 0.0},
    {"power", -0.85, 0.20, 0.235},  {"power", 0.2, -0.045, 0.225}, {"power", 1.25, -0.286, 0.229},
};

std::string format_cut(double c) {
  std::ostringstream s;
  s << c;
  return s.str();
}

}  // namespace

std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> v;
  for (const auto& s : kSettings) v.push_back(std::string(s.kind) + "-" + format_cut(s.cut));
  return v;
}

Scenario builtin_scenario(const std::string& name) {
  for (const auto& s : kSettings) {
    if (name != std::string(s.kind) + "-" + format_cut(s.cut)) continue;
    Scenario sc;
    sc.name = name;
    sc.beta_a = s.beta_a;
    sc.beta_az = s.beta_az;
    sc.true_cutoff = s.cut;
    const std::string kind = s.kind;
    sc.effect = kind == "null" ? Effect::null : kind == "weak" ? Effect::weak : Effect::strong;
    return sc;
  }
  throw UsageError("unknown built-in scenario '" + name + "'");
}

namespace {

struct Covariates {
  std::vector<double> z, x1, x2;
  std::vector<int> a;
};

Covariates draw_covariates(const Scenario& sc, int n, Rng& rng) {
  std::normal_distribution<double> zdist(sc.z_mean, sc.z_sd), xdist(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Covariates c;
  c.z.resize(n);
  c.x1.resize(n);
  c.x2.resize(n);
  for (auto& v : c.z) v = zdist(rng);
  for (auto& v : c.x1) v = xdist(rng);
  for (auto& v : c.x2) v = coin(rng) ? 1.0 : 0.0;
  c.a.assign(n, 0);
  std::fill(c.a.begin(), c.a.begin() + n / 2, 1);
  std::shuffle(c.a.begin(), c.a.end(), rng);
  return c;
}

double hazard(const Scenario& sc, const Covariates& c, int i) {
  const double a = c.a[i];
  const double eta = sc.beta_a * a + sc.beta_z * c.z[i] + sc.beta_az * a * c.z[i] +
                     sc.beta_x1 * c.x1[i] + sc.beta_x2 * c.x2[i];
  return sc.baseline_hazard * std::exp(eta);
}

}  // namespace

double calibrate_censoring(const Scenario& sc) {
  validate(sc);
  if (sc.censor_target == 0.0) return std::numeric_limits<double>::infinity();
  auto rng = make_rng(sc.seed, kCalibrationStream);
  constexpr int kDraws = 100000;
  const auto cov = draw_covariates(sc, kDraws, rng);
  std::vector<double> h(kDraws);
  for (int i = 0; i < kDraws; ++i) h[i] = hazard(sc, cov, i);
  // P(C < T | h) for C ~ U(0, E), T ~ Exp(h)
  auto censored = [&](double E) {
    double s = 0.0;
    for (double hi : h) {
      const double x = hi * E;
      s += x < 1e-8 ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
    }
    return s / kDraws - sc.censor_target;
  };
  double lo = 1e-6, hi = 1.0;
  while (censored(lo) < 0) lo *= 0.1;
  int guard = 0;
  while (censored(hi) > 0) {
    hi *= 4.0;
    if (++guard > 200) throw NumericalError("censoring calibration failed to bracket the target");
  }
  return brent_root(censored, lo, hi, RootOptions{1e-12, 1e-12, 500});
}

AnalysisDataset generate_dataset(const Scenario& sc, int rep, std::optional<double> censor_limit) {
  const double E = censor_limit ? *censor_limit : calibrate_censoring(sc);
  auto rng = make_rng(sc.seed, static_cast<std::uint64_t>(rep));
  const auto cov = draw_covariates(sc, sc.n, rng);
  std::exponential_distribution<double> unit_exp(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AnalysisDataset ds;
  ds.spec.family = OutcomeFamily::survival;
  ds.covariates = {Covariate{"x1", false, cov.x1, {}, {}}, Covariate{"x2", false, cov.x2, {}, {}}};
  ds.treatment = cov.a;
  ds.biomarker = cov.z;
  for (int i = 0; i < sc.n; ++i) {
    const double t = unit_exp(rng) / hazard(sc, cov, i);
    const double c = std::isfinite(E) ? E * unit(rng) : std::numeric_limits<double>::infinity();
    ds.outcome.push_back(std::min(t, c));
    ds.event.push_back(t <= c ? 1 : 0);
    ds.ids.push_back(std::to_string(i + 1));
  }
  return ds;
}

const char* to_string(Method m) {
  switch (m) {
    case Method::prime: return "prime";
    case Method::minp: return "minp";
    case Method::bhm: return "bhm";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "prime") return Method::prime;
  if (s == "minp" || s == "min-p") return Method::minp;
  if (s == "bhm") return Method::bhm;
  throw UsageError("unknown method '" + s + "'");
}

MethodMetrics aggregate(const std::string& method, const std::vector<ReplicateResult>& reps,
                        double truth, bool use_fdr_reject) {
  MethodMetrics m;
  m.method = method;
  std::vector<double> err, gains;
  int covered = 0, with_ci = 0, rejected = 0;
  for (const auto& r : reps) {
    if (!r.ok) {
      ++m.failures;
      continue;
    }
    ++m.reps;
    err.push_back(r.estimate - truth);
    if (r.ci) {
      ++with_ci;
      covered += r.ci->lo <= truth && truth <= r.ci->hi;
    }
    if (r.net_gain_ok) gains.push_back(r.net_gain);
    rejected += use_fdr_reject ? r.reject_fdr : r.reject;
  }
  if (m.reps > 0) {
    m.bias = mean(err);
    m.sd = std::sqrt(variance_pop(err));
    m.sqrt_mse = std::sqrt(m.bias * m.bias + m.sd * m.sd);
    m.reject_rate = static_cast<double>(rejected) / m.reps;
    if (with_ci > 0) m.coverage = static_cast<double>(covered) / with_ci;
    if (!gains.empty()) m.mean_net_gain = mean(gains);
  }
  const int total = m.reps + m.failures;
  m.valid = total > 0 && m.failures * 20 <= total;
  return m;
}

const MethodMetrics& MetricsReport::metrics(const std::string& method) const {
  for (const auto& m : methods)
    if (m.method == method) return m;
  throw UsageError("no metrics for method '" + method + "'");
}

namespace {

struct RepOutput {
  ReplicateResult prime, minp, bhm;
  double censored_fraction = 0.0;
};

RepOutput run_replicate(const Scenario& sc, const HarnessOptions& opt, double E, int rep) {
  RepOutput out;
  const auto ds = generate_dataset(sc, rep, E);
  out.censored_fraction =
      1.0 - std::accumulate(ds.event.begin(), ds.event.end(), 0.0) / static_cast<double>(ds.size());

  std::optional<RiskModel> prime_risk;
  try {
    auto pf = fit_prime(ds);
    prime_risk = std::move(pf.risk);
  } catch (const Error& e) {
    out.prime.error = e.what();
  }
  // Net gain of a fixed cut-off under the continuous-interaction model.
  auto gain_at = [&](ReplicateResult& r, double cut, Side side) {
    if (!prime_risk || !std::isfinite(cut)) return;
    r.net_gain = net_gain(*prime_risk, ds.biomarker, FixedCutoffRule{cut, side}).theta;
    r.net_gain_ok = true;
  };

  if (opt.methods.count(Method::prime) && prime_risk) {
    const auto& m = prime_risk->model;
    const auto w = interaction_test(m);
    out.prime.reject = w.p < opt.alpha;
    try {
      const double cut = formula_cutoff(m.beta(m.index.treatment), m.beta(m.index.interaction));
      const double se = cutoff_se(m);
      out.prime.estimate = cut;
      out.prime.ci = Interval{cut - kZ95 * se, cut + kZ95 * se};
      gain_at(out.prime, cut, rule_from_cutoff(m, cut).negative_side);
      out.prime.ok = std::isfinite(cut) && std::isfinite(se);
    } catch (const Error& e) {
      out.prime.error = e.what();
    }
  }
  if (opt.methods.count(Method::minp)) {
    try {
      const auto cands = candidate_cutoffs(ds.biomarker, opt.candidates);
      const auto r = scan(ds, cands);
      out.minp.estimate = r.chosen.c;
      out.minp.reject = r.chosen.p_raw < opt.alpha;
      out.minp.reject_fdr = r.chosen.p_fdr < opt.alpha;
      gain_at(out.minp, r.chosen.c, r.chosen.estimate > 0 ? Side::above : Side::below);
      out.minp.ok = true;
    } catch (const Error& e) {
      out.minp.error = e.what();
    }
  }
  if (opt.methods.count(Method::bhm) && (opt.bhm_reps < 0 || rep < opt.bhm_reps)) {
    try {
      BhmConfig cfg = opt.bhm;
      cfg.seed = derive_seed(sc.seed, kBhmStreamBase + static_cast<std::uint64_t>(rep));
      const auto post = run_mcmc(ds, cfg);
      out.bhm.estimate = post.c_hat_biomarker;
      out.bhm.ci = post.c_ci_biomarker;
      // credible interval for the dichotomized interaction at level 1 - alpha
      const auto& S = post.samples;
      std::vector<double> b3(S.beta.rows());
      for (Eigen::Index k = 0; k < S.beta.rows(); ++k) b3[k] = S.beta(k, post.interaction_index);
      std::sort(b3.begin(), b3.end());
      const double lo = quantile_sorted(b3, opt.alpha / 2), hi = quantile_sorted(b3, 1 - opt.alpha / 2);
      out.bhm.reject = lo > 0.0 || hi < 0.0;
      gain_at(out.bhm, post.c_hat_biomarker,
              post.beta_mean(post.interaction_index) > 0 ? Side::above : Side::below);
      out.bhm.ok = true;
    } catch (const Error& e) {
      out.bhm.error = e.what();
    }
  }
  return out;
}

}  // namespace

CandidateSpec study_candidates() {
  CandidateSpec s;
  s.mode = CandidateSpec::Mode::observed;
  s.lo_frac = 0.02;
  return s;
}

MetricsReport run_scenario(const Scenario& sc, const HarnessOptions& opt) {
  validate(sc);
  if (!(opt.alpha > 0.0 && opt.alpha <= 1.0)) throw UsageError("alpha must lie in (0,1]");
  if (opt.methods.count(Method::bhm)) validate(opt.bhm);
  MetricsReport rep;
  rep.scenario = sc;
  rep.censor_limit = calibrate_censoring(sc);
  std::vector<RepOutput> outs(static_cast<std::size_t>(sc.reps));
  parallel_for(outs.size(), opt.threads, [&](std::size_t r) {
    outs[r] = run_replicate(sc, opt, rep.censor_limit, static_cast<int>(r));
  });
  double cens = 0.0;
  for (const auto& o : outs) cens += o.censored_fraction;
  rep.realized_censoring = cens / static_cast<double>(outs.size());

  auto collect = [&](ReplicateResult RepOutput::*field) {
    std::vector<ReplicateResult> v;
    for (const auto& o : outs) v.push_back(o.*field);
    return v;
  };
  if (opt.methods.count(Method::prime)) {
    rep.replicates["prime"] = collect(&RepOutput::prime);
    rep.methods.push_back(aggregate("prime", rep.replicates["prime"], sc.true_cutoff));
  }
  if (opt.methods.count(Method::minp)) {
    rep.replicates["minp"] = collect(&RepOutput::minp);
    rep.methods.push_back(aggregate("minp", rep.replicates["minp"], sc.true_cutoff));
    rep.methods.push_back(aggregate("minp_fdr", rep.replicates["minp"], sc.true_cutoff, true));
  }
  if (opt.methods.count(Method::bhm)) {
    auto v = collect(&RepOutput::bhm);
    if (opt.bhm_reps >= 0 && opt.bhm_reps < sc.reps) v.resize(static_cast<std::size_t>(opt.bhm_reps));
    rep.replicates["bhm"] = v;
    rep.methods.push_back(aggregate("bhm", v, sc.true_cutoff));
  }
  for (const auto& m : rep.methods) rep.valid = rep.valid && m.valid;
  return rep;
}

std::map<std::string, double> power_study(const Scenario& sc, const HarnessOptions& opt) {
  const auto rep = run_scenario(sc, opt);
  std::map<std::string, double> out;
  for (const auto& m : rep.methods) out[m.method] = m.reject_rate;
  return out;
}

void write_metrics_csv(const std::vector<MetricsReport>& reports, std::ostream& out) {
  out << "scenario,n,true_cutoff,beta_a,beta_az,method,reps,failures,bias,sd,sqrt_mse,coverage,"
         "net_gain,reject_rate,realized_censoring,valid\n";
  out.precision(6);
  for (const auto& r : reports) {
    for (const auto& m : r.methods) {
      out << r.scenario.name << ',' << r.scenario.n << ',' << r.scenario.true_cutoff << ','
          << r.scenario.beta_a << ',' << r.scenario.beta_az << ',' << m.method << ',' << m.reps
          << ',' << m.failures << ',' << m.bias << ',' << m.sd << ',' << m.sqrt_mse << ',';
      if (m.coverage) out << *m.coverage;
      out << ',';
      if (m.mean_net_gain) out << *m.mean_net_gain;
      out << ',' << m.reject_rate << ',' << r.realized_censoring << ',' << (m.valid ? 1 : 0)
          << '\n';
    }
  }
}

}  // namespace prime
