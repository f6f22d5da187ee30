#include "prime/bhm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prime/error.hpp"
#include "prime/numeric.hpp"

namespace prime {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void validate(const BhmConfig& cfg) {
  if (!(cfg.iterations > cfg.burn_in) || cfg.burn_in < 0)
    throw UsageError("MCMC needs iterations > burn_in >= 0");
  if (cfg.thin < 1) throw UsageError("thinning interval must be at least 1");
  if (!(cfg.proposal_sd_c > 0) || !(cfg.proposal_sd_q > 0) || !(cfg.proposal_sd_beta > 0))
    throw UsageError("proposal standard deviations must be positive");
}

double prior_c_density(double c, double q) {
  if (!(c >= 0.0 && c <= 1.0) || !(q >= 1.0)) throw UsageError("prior_c_density: domain is c in [0,1], q >= 1");
  if (c == 0.0) return 0.0;
  if (c == 1.0) return q == 1.0 ? 2.0 : 0.0;
  return q * (q + 1.0) * c * std::pow(1.0 - c, q - 1.0);
}

double prior_q_density(double q) {
  if (!(q > 1.0)) throw UsageError("prior_q_density: q must exceed 1");
  return (q - 1.0) / (q * (q + 1.0));
}

namespace {

double log_prior_c(double c, double q) {
  return std::log(q * (q + 1.0)) + std::log(c) + (q - 1.0) * std::log1p(-c);
}

double logit(double c) { return std::log(c / (1.0 - c)); }
double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

ChainSamples run_threshold_chain(const ThresholdLogLik& loglik, ChainState s,
                                 const BhmConfig& cfg) {
  validate(cfg);
  if (!(s.c > 0.0 && s.c < 1.0) || !(s.q > 1.0)) throw UsageError("chain must start inside (0,1) x (1,inf)");
  auto rng = make_rng(cfg.seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto accept = [&](double log_ratio) { return std::log(unif(rng)) < log_ratio; };

  auto ll0 = loglik(s.beta, s.c);
  if (!ll0) throw NumericalError("initial threshold is inadmissible");
  double ll = *ll0;
  const Index p = s.beta.size();
  const int kept = (cfg.iterations - cfg.burn_in) / cfg.thin;
  ChainSamples out;
  out.beta.resize(kept, p);
  out.c.reserve(kept);
  out.q.reserve(kept);
  long acc_b = 0, acc_c = 0, acc_q = 0;

  for (int it = 1; it <= cfg.iterations; ++it) {
    // beta | c, one coordinate at a time
    for (Index j = 0; j < p; ++j) {
      VectorXd prop = s.beta;
      prop(j) += cfg.proposal_sd_beta * gauss(rng);
      const auto llp = loglik(prop, s.c);
      if (llp && accept(*llp - ll)) {
        s.beta = std::move(prop);
        ll = *llp;
        ++acc_b;
      }
    }
    // c | beta, q on the logit scale
    {
      const double cp = expit(logit(s.c) + cfg.proposal_sd_c * gauss(rng));
      if (cp > 0.0 && cp < 1.0) {
        const auto llp = loglik(s.beta, cp);
        if (llp) {
          const double r = *llp - ll + log_prior_c(cp, s.q) - log_prior_c(s.c, s.q) +
                           std::log(cp * (1.0 - cp)) - std::log(s.c * (1.0 - s.c));
          if (accept(r)) {
            s.c = cp;
            ll = *llp;
            ++acc_c;
          }
        }
      }
    }
    // q | c on log(q - 1)
    {
      const double qp = 1.0 + std::exp(std::log(s.q - 1.0) + cfg.proposal_sd_q * gauss(rng));
      if (qp > 1.0 && std::isfinite(qp)) {
        const double r = (qp - s.q) * std::log1p(-s.c) + 2.0 * (std::log(qp - 1.0) - std::log(s.q - 1.0));
        if (accept(r)) {
          s.q = qp;
          ++acc_q;
        }
      }
    }
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      const auto row = static_cast<Index>(out.c.size());
      out.beta.row(row) = s.beta.transpose();
      out.c.push_back(s.c);
      out.q.push_back(s.q);
    }
  }
  const double iters = cfg.iterations;
  out.accept_beta = p > 0 ? acc_b / (iters * p) : 0.0;
  out.accept_c = acc_c / iters;
  out.accept_q = acc_q / iters;
  return out;
}

double percentile_to_biomarker(const std::vector<double>& z, double c) {
  std::vector<double> s = z;
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  const double k = std::clamp(c * (n + 1.0), 1.0, n);
  const auto lo = static_cast<std::size_t>(std::floor(k));
  const auto hi = std::min(lo + 1, s.size());
  return s[lo - 1] + (k - std::floor(k)) * (s[hi - 1] - s[lo - 1]);
}

namespace {

std::vector<double> split_marker(const std::vector<double>& u, double c, int& above) {
  std::vector<double> m(u.size());
  above = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    m[i] = u[i] > c ? 1.0 : 0.0;
    above += u[i] > c;
  }
  return m;
}

// Dichotomized-model likelihood with the design cached per threshold value.
class DichotomizedLikelihood {
public:
  DichotomizedLikelihood(const AnalysisDataset& ds, std::vector<double> u)
      : ds_(ds), u_(std::move(u)), survival_(ds.spec.family == OutcomeFamily::survival) {
    if (survival_) cox_.emplace(ds.outcome, ds.event);
    else y_ = ds.response();
  }

  std::optional<double> operator()(const VectorXd& beta, double c) {
    if (c != cached_c_) {
      int above = 0;
      const auto m = split_marker(u_, c, above);
      valid_ = above > 0 && above < static_cast<int>(u_.size());
      if (valid_) W_ = build_design(ds_, m, !survival_).W;
      cached_c_ = c;
    }
    if (!valid_) return std::nullopt;
    const double ll = survival_ ? cox_->evaluate(W_, beta) : logistic_log_likelihood(W_, y_, beta);
    if (!std::isfinite(ll)) return std::nullopt;
    return ll;
  }

private:
  const AnalysisDataset& ds_;
  std::vector<double> u_;
  bool survival_;
  std::optional<CoxPartialLikelihood> cox_;
  std::vector<double> y_;
  double cached_c_ = std::numeric_limits<double>::quiet_NaN();
  bool valid_ = false;
  MatrixXd W_;
};

Interval equal_tailed(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return {quantile_sorted(v, 0.025), quantile_sorted(v, 0.975)};
}

}  // namespace

ConditionalInference conditional_inference(const AnalysisDataset& ds, double c_hat,
                                           const FitOptions& opt) {
  if (!(c_hat > 0.0 && c_hat < 1.0)) throw UsageError("threshold percentile must lie in (0,1)");
  if (ds.spec.family == OutcomeFamily::continuous)
    throw UsageError("threshold model supports survival and binary outcomes");
  ConditionalInference ci;
  const auto u = percentile_rescale(ds.biomarker);
  const auto m = split_marker(u, c_hat, ci.n_above);
  ci.n_below = static_cast<int>(ds.size()) - ci.n_above;
  if (ci.n_above == 0 || ci.n_below == 0) throw DataError("threshold leaves an empty group");
  const auto design = build_design(ds, m, ds.spec.family != OutcomeFamily::survival);
  ci.model = fit_for_family(ds, design, opt);
  ci.interaction = interaction_test(ci.model);
  return ci;
}

BhmPosterior run_mcmc(const AnalysisDataset& ds, const BhmConfig& cfg, const FitOptions& opt) {
  validate(cfg);
  if (ds.spec.family == OutcomeFamily::continuous)
    throw UsageError("threshold model supports survival and binary outcomes");
  BhmPosterior post;
  const auto u = percentile_rescale(ds.biomarker);
  DichotomizedLikelihood lik(ds, u);

  ChainState init;
  init.c = 0.5;
  init.q = 2.0;
  try {
    auto start = conditional_inference(ds, init.c, opt);
    init.beta = start.model.beta;
    post.names = start.model.names;
    post.interaction_index = start.model.index.interaction;
  } catch (const Error&) {
    int above = 0;
    const auto d = build_design(ds, split_marker(u, init.c, above),
                                ds.spec.family != OutcomeFamily::survival);
    init.beta = VectorXd::Zero(d.W.cols());
    post.names = d.names;
    post.interaction_index = d.index.interaction;
  }
  for (auto& n : post.names)
    if (n == "Z") n = "I(Z>c)";
    else if (n == "A:Z") n = "A:I(Z>c)";

  post.samples = run_threshold_chain([&](const VectorXd& b, double c) { return lik(b, c); }, init, cfg);
  const auto& S = post.samples;
  post.c_hat = mean(S.c);
  post.c_ci = equal_tailed(S.c);
  post.c_hat_biomarker = percentile_to_biomarker(ds.biomarker, post.c_hat);
  post.c_ci_biomarker = {percentile_to_biomarker(ds.biomarker, post.c_ci.lo),
                         percentile_to_biomarker(ds.biomarker, post.c_ci.hi)};
  post.beta_mean = S.beta.colwise().mean().transpose();
  for (Index j = 0; j < S.beta.cols(); ++j) {
    std::vector<double> col(S.beta.col(j).data(), S.beta.col(j).data() + S.beta.rows());
    post.beta_ci.push_back(equal_tailed(std::move(col)));
  }
  auto check = [&](double rate, const char* block) {
    if (!(rate > 0.05 && rate < 0.95))
      post.warnings.push_back(std::string("acceptance rate for ") + block + " is " +
                              std::to_string(rate) + "; consider retuning its proposal SD");
  };
  check(S.accept_beta, "beta");
  check(S.accept_c, "c");
  check(S.accept_q, "q");
  try {
    post.conditional = conditional_inference(ds, post.c_hat, opt);
  } catch (const Error& e) {
    post.warnings.push_back(std::string("conditional inference failed: ") + e.what());
  }
  return post;
}

void write_samples_csv(const BhmPosterior& post, std::ostream& out) {
  out << "iteration";
  for (const auto& n : post.names) out << ",beta[" << n << ']';
  out << ",c,q\n";
  out.precision(10);
  const auto& S = post.samples;
  for (std::size_t k = 0; k < S.c.size(); ++k) {
    out << k + 1;
    for (Index j = 0; j < S.beta.cols(); ++j) out << ',' << S.beta(static_cast<Index>(k), j);
    out << ',' << S.c[k] << ',' << S.q[k] << '\n';
  }
}

}  // namespace prime
