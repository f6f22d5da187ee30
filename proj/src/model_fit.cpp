#include "prime/model_fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prime/error.hpp"
#include "prime/numeric.hpp"

namespace prime {

const char* to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::linear: return "linear";
    case ModelFamily::logistic: return "logistic";
    case ModelFamily::cox: return "cox";
  }
  return "?";
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_rows(const MatrixXd& W, std::size_t n_obs) {
  if (static_cast<std::size_t>(W.rows()) != n_obs)
    throw DataError("design and outcome lengths differ");
}

void require_full_rank(const MatrixXd& W) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(W);
  if (qr.rank() < W.cols())
    throw NumericalError("singular design: rank " + std::to_string(qr.rank()) + " < " +
                         std::to_string(W.cols()) + " columns");
}

MatrixXd symmetric_inverse(const MatrixXd& A, const char* what) {
  Eigen::LDLT<MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff()))
    throw NumericalError(std::string(what) + " is singular");
  MatrixXd inv = ldlt.solve(MatrixXd::Identity(A.rows(), A.cols()));
  return 0.5 * (inv + inv.transpose());
}

// max_j |beta_j| * sd(W_j) over non-constant columns
double standardized_max(const MatrixXd& W, const VectorXd& beta) {
  double worst = 0.0;
  for (Index j = 0; j < W.cols(); ++j) {
    const double m = W.col(j).mean();
    const double sd = std::sqrt((W.col(j).array() - m).square().mean());
    if (sd == 0.0) continue;
    worst = std::max(worst, std::fabs(beta(j)) * sd);
  }
  return worst;
}

void stamp(FittedModel& m, const DesignMatrix& d) {
  m.names = d.names;
  m.index = d.index;
  m.n = static_cast<int>(d.W.rows());
}

double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double inv_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

CoxPartialLikelihood::CoxPartialLikelihood(std::span<const double> time,
                                           std::span<const int> event, TieMethod ties)
    : time_(time.begin(), time.end()), event_(event.begin(), event.end()), ties_(ties) {
  if (event.size() != time.size()) throw DataError("time and event lengths differ");
  order_.resize(time.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::stable_sort(order_.begin(), order_.end(),
                   [&](auto a, auto b) { return time_[a] > time_[b]; });
}

double CoxPartialLikelihood::evaluate(const Eigen::MatrixXd& W, const Eigen::VectorXd& beta,
                                      Eigen::VectorXd* score, Eigen::MatrixXd* info) const {
  check_rows(W, time_.size());
  const Index p = W.cols();
  const std::size_t n = order_.size();
  const VectorXd eta = W * beta;
  const double shift = n > 0 ? eta.maxCoeff() : 0.0;
  const bool first = score || info;
  double S0 = 0.0;
  VectorXd S1 = VectorXd::Zero(first ? p : 0);
  MatrixXd S2 = MatrixXd::Zero(info ? p : 0, info ? p : 0);
  VectorXd D1(first ? p : 0);
  MatrixXd D2(info ? p : 0, info ? p : 0);
  double ll = 0.0;
  if (score) score->setZero(p);
  if (info) info->setZero(p, p);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    const double t = time_[order_[i]];
    double D0 = 0.0;
    if (first) D1.setZero();
    if (info) D2.setZero();
    int d = 0;
    for (; j < n && time_[order_[j]] == t; ++j) {
      const auto r = static_cast<Index>(order_[j]);
      const double w = std::exp(eta(r) - shift);
      S0 += w;
      if (first) S1 += w * W.row(r).transpose();
      if (info) S2.noalias() += w * W.row(r).transpose() * W.row(r);
      if (event_[r]) {
        ++d;
        D0 += w;
        ll += eta(r) - shift;
        if (first) D1 += w * W.row(r).transpose();
        if (info) D2.noalias() += w * W.row(r).transpose() * W.row(r);
        if (score) *score += W.row(r).transpose();
      }
    }
    for (int l = 0; l < d; ++l) {
      const double frac = ties_ == TieMethod::efron ? static_cast<double>(l) / d : 0.0;
      const double phi = S0 - frac * D0;
      ll -= std::log(phi);
      if (first) {
        const VectorXd m1 = (S1 - frac * D1) / phi;
        if (score) *score -= m1;
        if (info) *info += (S2 - frac * D2) / phi - m1 * m1.transpose();
      }
    }
    i = j;
  }
  return ll;
}

StepFunction CoxPartialLikelihood::breslow(const Eigen::MatrixXd& W,
                                           const Eigen::VectorXd& beta) const {
  const VectorXd eta = W * beta;
  std::vector<double> t_ev, jump;
  double S0 = 0.0;
  std::size_t i = 0;
  const std::size_t n = order_.size();
  while (i < n) {
    std::size_t j = i;
    const double t = time_[order_[i]];
    int d = 0;
    for (; j < n && time_[order_[j]] == t; ++j) {
      S0 += std::exp(eta(static_cast<Index>(order_[j])));
      d += event_[order_[j]];
    }
    if (d > 0) {
      t_ev.push_back(t);
      jump.push_back(d / S0);
    }
    i = j;
  }
  StepFunction h;
  double acc = 0.0;
  for (std::size_t k = t_ev.size(); k-- > 0;) {
    acc += jump[k];
    h.knots.push_back(t_ev[k]);
    h.values.push_back(acc);
  }
  return h;
}

FittedModel fit_linear(const DesignMatrix& design, std::span<const double> y) {
  const MatrixXd& W = design.W;
  check_rows(W, y.size());
  if (W.rows() <= W.cols()) throw DataError("linear fit needs more rows than columns");
  require_full_rank(W);
  const VectorXd yv = Eigen::Map<const VectorXd>(y.data(), static_cast<Index>(y.size()));
  FittedModel m;
  m.family = ModelFamily::linear;
  stamp(m, design);
  const MatrixXd xtx = W.transpose() * W;
  const MatrixXd xtx_inv = symmetric_inverse(xtx, "design cross-product");
  m.beta = xtx.ldlt().solve(W.transpose() * yv);
  // one refinement step against cancellation in the normal equations
  m.beta += xtx.ldlt().solve(W.transpose() * (yv - W * m.beta));
  const VectorXd resid = yv - W * m.beta;
  m.sigma2 = resid.squaredNorm() / static_cast<double>(W.rows() - W.cols());
  m.cov_model = m.sigma2 * xtx_inv;
  m.loglik = -0.5 * static_cast<double>(W.rows()) *
             (std::log(2.0 * M_PI * resid.squaredNorm() / static_cast<double>(W.rows())) + 1.0);
  m.convergence = {1, (W.transpose() * resid).cwiseAbs().maxCoeff(), true};
  m.cov_robust = sandwich_covariance(m, W, y);
  return m;
}

double logistic_log_likelihood(const MatrixXd& W, std::span<const double> y, const VectorXd& beta) {
  const VectorXd eta = W * beta;
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) ll += y[i] * eta(i) - log1pexp(eta(i));
  return ll;
}

FittedModel fit_logistic(const DesignMatrix& design, std::span<const double> y,
                         const FitOptions& opt) {
  const MatrixXd& W = design.W;
  check_rows(W, y.size());
  const double ybar = mean(y);
  if (!(ybar > 0.0 && ybar < 1.0)) throw DataError("logistic fit needs both outcome classes");
  require_full_rank(W);
  const Index n = W.rows(), p = W.cols();
  const VectorXd yv = Eigen::Map<const VectorXd>(y.data(), n);

  FittedModel m;
  m.family = ModelFamily::logistic;
  stamp(m, design);
  VectorXd beta = VectorXd::Zero(p);
  if (design.index.intercept >= 0) beta(design.index.intercept) = std::log(ybar / (1.0 - ybar));

  auto derivs = [&](const VectorXd& b, VectorXd& score, MatrixXd& info) {
    const VectorXd eta = W * b;
    VectorXd mu(n), w(n);
    for (Index i = 0; i < n; ++i) {
      mu(i) = inv_logit(eta(i));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    score = W.transpose() * (yv - mu);
    info = W.transpose() * w.asDiagonal() * W;
  };

  VectorXd score;
  MatrixXd info;
  double ll = logistic_log_likelihood(W, y, beta);
  int it = 0;
  derivs(beta, score, info);
  while (it < opt.max_iter_logistic) {
    const VectorXd step = info.ldlt().solve(score);
    if (!step.allFinite()) throw NumericalError("logistic information matrix is singular");
    // Under separation the score vanishes while Newton steps stay O(1), so a
    // small score alone is not convergence.
    if (score.cwiseAbs().maxCoeff() < opt.score_tol && standardized_max(W, step) < 1e-6) break;
    ++it;
    double scale = 1.0;
    VectorXd cand = beta + step;
    double ll_new = logistic_log_likelihood(W, y, cand);
    for (int h = 0; h < 30 && !(ll_new >= ll - 1e-12 * std::fabs(ll)); ++h) {
      scale *= 0.5;
      cand = beta + scale * step;
      ll_new = logistic_log_likelihood(W, y, cand);
    }
    beta = cand;
    ll = ll_new;
    derivs(beta, score, info);
    if (standardized_max(W, beta) > opt.separation_bound)
      throw NumericalError("complete or quasi-complete separation: coefficients diverge");
  }
  m.beta = beta;
  m.loglik = ll;
  m.convergence = {it, score.cwiseAbs().maxCoeff(), it < opt.max_iter_logistic};
  if (!m.convergence.converged && standardized_max(W, beta) > 0.5 * opt.separation_bound)
    throw NumericalError("complete or quasi-complete separation: coefficients diverge");
  m.cov_model = symmetric_inverse(info, "logistic information matrix");
  m.cov_robust = sandwich_covariance(m, W, y);
  return m;
}

FittedModel fit_cox(const DesignMatrix& design, std::span<const double> time,
                    std::span<const int> event, const FitOptions& opt) {
  const MatrixXd& W = design.W;
  if (design.index.intercept >= 0) throw UsageError("Cox designs carry no intercept column");
  if (std::accumulate(event.begin(), event.end(), 0) == 0)
    throw DataError("Cox fit needs at least one event");
  require_full_rank(W);
  CoxPartialLikelihood prob(time, event, opt.ties);
  const Index p = W.cols();
  FittedModel m;
  m.family = ModelFamily::cox;
  stamp(m, design);

  VectorXd beta = VectorXd::Zero(p), score(p);
  MatrixXd info(p, p);
  double ll = prob.evaluate(W, beta, &score, &info);
  int it = 0;
  while (it < opt.max_iter_cox) {
    const VectorXd step = info.ldlt().solve(score);
    if (!step.allFinite()) throw NumericalError("Cox information matrix is singular");
    if (score.cwiseAbs().maxCoeff() < opt.score_tol && standardized_max(W, step) < 1e-6) break;
    ++it;
    double scale = 1.0;
    VectorXd cand = beta + step;
    double ll_new = prob.evaluate(W, cand, nullptr, nullptr);
    for (int h = 0; h < 30 && !(ll_new >= ll - 1e-12 * std::fabs(ll)); ++h) {
      scale *= 0.5;
      cand = beta + scale * step;
      ll_new = prob.evaluate(W, cand, nullptr, nullptr);
    }
    beta = cand;
    ll = prob.evaluate(W, beta, &score, &info);
  }
  m.beta = beta;
  m.loglik = ll;
  m.convergence = {it, score.cwiseAbs().maxCoeff(), it < opt.max_iter_cox};
  if (!m.convergence.converged && standardized_max(W, beta) > 0.5 * opt.separation_bound)
    throw NumericalError("monotone partial likelihood: coefficients diverge");
  m.cov_model = symmetric_inverse(info, "Cox information matrix");
  m.cov_robust = m.cov_model;
  m.baseline_cumhaz = prob.breslow(W, beta);
  const auto [lo, hi] = std::minmax_element(time.begin(), time.end());
  m.min_time = *lo;
  m.max_time = *hi;
  return m;
}

FittedModel fit_for_family(const AnalysisDataset& ds, const DesignMatrix& design,
                           const FitOptions& opt) {
  switch (ds.spec.family) {
    case OutcomeFamily::continuous: {
      const auto y = ds.response();
      return fit_linear(design, y);
    }
    case OutcomeFamily::binary: {
      const auto y = ds.response();
      return fit_logistic(design, y, opt);
    }
    case OutcomeFamily::survival:
      return fit_cox(design, ds.outcome, ds.event, opt);
  }
  throw UsageError("unknown outcome family");
}

Eigen::MatrixXd sandwich_covariance(const FittedModel& model, const Eigen::MatrixXd& W,
                                    std::span<const double> y) {
  check_rows(W, y.size());
  const Index n = W.rows();
  VectorXd resid(n), work(n);
  const VectorXd eta = W * model.beta;
  switch (model.family) {
    case ModelFamily::linear:
      for (Index i = 0; i < n; ++i) {
        resid(i) = y[i] - eta(i);
        work(i) = 1.0;
      }
      break;
    case ModelFamily::logistic:
      for (Index i = 0; i < n; ++i) {
        const double mu = inv_logit(eta(i));
        resid(i) = y[i] - mu;
        work(i) = mu * (1.0 - mu);
      }
      break;
    case ModelFamily::cox:
      throw UsageError("sandwich covariance applies to GLM families only");
  }
  const MatrixXd bread = symmetric_inverse(W.transpose() * work.asDiagonal() * W, "bread matrix");
  MatrixXd meat = MatrixXd::Zero(W.cols(), W.cols());
  for (Index i = 0; i < n; ++i) {
    const auto x = W.row(i).transpose();
    const double h = work(i) * x.dot(bread * x);
    if (h >= 1.0 - 1e-10)
      throw NumericalError("leverage of row " + std::to_string(i + 1) +
                           " is 1; sandwich covariance undefined");
    const double u = resid(i) / (1.0 - h);
    meat.noalias() += (u * u) * x * x.transpose();
  }
  MatrixXd v = bread * meat * bread;
  return 0.5 * (v + v.transpose());
}

WaldTest interaction_test(const FittedModel& model) {
  const int j = model.index.interaction;
  if (j < 0 || j >= model.beta.size()) throw UsageError("model has no interaction column");
  WaldTest t;
  t.estimate = model.beta(j);
  t.se = std::sqrt(model.cov_model(j, j));
  t.z = t.se > 0 ? t.estimate / t.se : 0.0;
  t.p = two_sided_p(t.z);
  return t;
}

double cox_log_partial_likelihood(const Eigen::MatrixXd& W, std::span<const double> time,
                                  std::span<const int> event, const Eigen::VectorXd& beta,
                                  TieMethod ties) {
  return CoxPartialLikelihood(time, event, ties).evaluate(W, beta, nullptr, nullptr);
}

Eigen::VectorXd cox_score(const Eigen::MatrixXd& W, std::span<const double> time,
                          std::span<const int> event, const Eigen::VectorXd& beta,
                          TieMethod ties) {
  VectorXd s;
  CoxPartialLikelihood(time, event, ties).evaluate(W, beta, &s, nullptr);
  return s;
}

}  // namespace prime
