#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "prime/error.hpp"
#include "prime/model_fit.hpp"
#include "prime/numeric.hpp"
#include "prime/survival.hpp"
#include "support.hpp"

using namespace prime;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DesignMatrix raw_design(MatrixXd W, bool intercept) {
  DesignMatrix d;
  d.W = std::move(W);
  for (Eigen::Index j = 0; j < d.W.cols(); ++j) d.names.push_back("w" + std::to_string(j));
  d.index.intercept = intercept ? 0 : -1;
  d.index.first_covariate = static_cast<int>(d.W.cols());
  return d;
}

// Dense 2-D grid, re-centred and shrunk around the best cell until the
// spacing falls below tol.
VectorXd dense_grid_2d(const std::function<double(const VectorXd&)>& f, VectorXd center,
                       double half_width, double tol) {
  constexpr int k = 40;
  while (half_width / k > tol) {
    double best = -1e300;
    VectorXd arg = center;
    for (int i = -k; i <= k; ++i) {
      for (int j = -k; j <= k; ++j) {
        VectorXd b(2);
        b << center(0) + half_width * i / k, center(1) + half_width * j / k;
        const double v = f(b);
        if (v > best) {
          best = v;
          arg = b;
        }
      }
    }
    center = arg;
    half_width *= 4.0 / k;
  }
  return center;
}

// Efron partial likelihood evaluated by scanning every risk set directly.
double naive_cox_loglik(const MatrixXd& W, const std::vector<double>& t, const std::vector<int>& d,
                        const VectorXd& beta) {
  const VectorXd eta = W * beta;
  std::vector<double> times;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (d[i]) times.push_back(t[i]);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  double ll = 0;
  for (double s : times) {
    double risk = 0, tied = 0;
    int m = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] >= s) risk += std::exp(eta(i));
      if (t[i] == s && d[i]) {
        tied += std::exp(eta(i));
        ll += eta(i);
        ++m;
      }
    }
    for (int l = 0; l < m; ++l) ll -= std::log(risk - static_cast<double>(l) / m * tied);
  }
  return ll;
}

bool symmetric_psd(const MatrixXd& M) {
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10) return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
  return es.eigenvalues().minCoeff() >= -1e-10;
}

}  // namespace

TEST_CASE("linear fit reproduces an exact line") {
  MatrixXd W(5, 2);
  std::vector<double> y;
  for (int i = 0; i < 5; ++i) {
    W(i, 0) = 1;
    W(i, 1) = i * 0.7 - 1;
    y.push_back(2 + 3 * W(i, 1));
  }
  const auto m = fit_linear(raw_design(W, true), y);
  CHECK(m.beta(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(m.beta(1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(m.sigma2 < 1e-20);
}

TEST_CASE("linear fit matches hand-solved normal equations") {
  const std::vector<double> x = {0, 1, 2, 4, 5, 7}, y = {1.2, 1.9, 3.2, 4.8, 6.1, 8.3};
  MatrixXd W(6, 2);
  for (int i = 0; i < 6; ++i) W.row(i) << 1, x[i];
  const double n = 6, sx = std::accumulate(x.begin(), x.end(), 0.0),
               sy = std::accumulate(y.begin(), y.end(), 0.0);
  double sxx = 0, sxy = 0;
  for (int i = 0; i < 6; ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icept = (sy - slope * sx) / n;
  const auto m = fit_linear(raw_design(W, true), y);
  CHECK(std::fabs(m.beta(0) - icept) < 1e-10);
  CHECK(std::fabs(m.beta(1) - slope) < 1e-10);
}

TEST_CASE("constant outcome and rank deficiency") {
  MatrixXd W(4, 2);
  W << 1, 0, 1, 1, 1, 2, 1, 3;
  const auto m = fit_linear(raw_design(W, true), std::vector<double>(4, 2.5));
  CHECK(m.beta(0) == doctest::Approx(2.5));
  CHECK(std::fabs(m.beta(1)) < 1e-12);
  MatrixXd S(4, 3);
  S << 1, 0, 0, 1, 1, 2, 1, 2, 4, 1, 3, 6;
  CHECK_THROWS_AS(fit_linear(raw_design(S, true), std::vector<double>{1, 2, 3, 4}), NumericalError);
}

TEST_CASE("sandwich covariance on three points matches hand arithmetic") {
  const double x[3] = {0, 1, 3}, y[3] = {1, 2, 2};
  MatrixXd W(3, 2);
  for (int i = 0; i < 3; ++i) W.row(i) << 1, x[i];
  const auto m = fit_linear(raw_design(W, true), std::vector<double>(y, y + 3));

  const double xbar = (x[0] + x[1] + x[2]) / 3, ybar = (y[0] + y[1] + y[2]) / 3;
  double sxx = 0, sxy = 0, s2 = 0;
  for (int i = 0; i < 3; ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
    s2 += x[i] * x[i];
  }
  const double b = sxy / sxx, a = ybar - b * xbar;
  double m00 = 0, m01 = 0, m11 = 0;
  for (int i = 0; i < 3; ++i) {
    const double h = 1.0 / 3 + (x[i] - xbar) * (x[i] - xbar) / sxx;
    const double u = (y[i] - a - b * x[i]) / (1 - h);
    m00 += u * u;
    m01 += u * u * x[i];
    m11 += u * u * x[i] * x[i];
  }
  const double det = 3 * sxx;  // n * sum (x - xbar)^2 = det(X'X)
  const double i00 = s2 / det, i01 = -(x[0] + x[1] + x[2]) / det, i11 = 3 / det;
  // bread * meat * bread for 2x2 symmetric matrices
  const double t00 = i00 * m00 + i01 * m01, t01 = i00 * m01 + i01 * m11;
  const double t10 = i01 * m00 + i11 * m01, t11 = i01 * m01 + i11 * m11;
  const double v00 = t00 * i00 + t01 * i01, v01 = t00 * i01 + t01 * i11;
  const double v11 = t10 * i01 + t11 * i11;
  CHECK(std::fabs(m.cov_robust(0, 0) - v00) < 1e-12);
  CHECK(std::fabs(m.cov_robust(0, 1) - v01) < 1e-12);
  CHECK(std::fabs(m.cov_robust(1, 0) - v01) < 1e-12);
  CHECK(std::fabs(m.cov_robust(1, 1) - v11) < 1e-12);
}

TEST_CASE("sandwich rejects a leverage-one row") {
  MatrixXd W(4, 3);
  W << 1, 0, 0, 1, 1, 0, 1, 2, 0, 1, 0, 1;  // last column only in row 4
  CHECK_THROWS_WITH_AS(fit_linear(raw_design(W, true), std::vector<double>{1, 2, 2.5, 7}),
                       doctest::Contains("row 4"), NumericalError);
}

TEST_CASE("robust and model SEs agree for homoskedastic data") {
  const auto ds = test::simulate(OutcomeFamily::continuous, 5000, 21);
  const auto d = build_design(ds);
  const auto m = fit_linear(d, ds.response());
  for (Eigen::Index j = 0; j < m.beta.size(); ++j)
    CHECK(std::sqrt(m.cov_robust(j, j)) == doctest::Approx(std::sqrt(m.cov_model(j, j))).epsilon(0.1));
  CHECK(symmetric_psd(m.cov_model));
  CHECK(symmetric_psd(m.cov_robust));
}

TEST_CASE("duplicating every row halves the sandwich up to the leverage correction") {
  const auto ds = test::simulate(OutcomeFamily::binary, 2000, 8);
  std::vector<std::size_t> rows(2 * ds.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i % ds.size();
  const auto twice = ds.subset(rows);
  const auto a = fit_logistic(build_design(ds), ds.response());
  const auto b = fit_logistic(build_design(twice), twice.response());
  for (Eigen::Index j = 0; j < a.beta.size(); ++j) {
    CHECK(b.cov_model(j, j) == doctest::Approx(a.cov_model(j, j) / 2).epsilon(1e-9));
    // HC3 halves each leverage, so the ratio is 1/2 only to O(p/n)
    CHECK(b.cov_robust(j, j) == doctest::Approx(a.cov_robust(j, j) / 2).epsilon(0.01));
  }
}

TEST_CASE("logistic intercept-only fit") {
  MatrixXd W = MatrixXd::Ones(8, 1);
  const std::vector<double> y = {1, 0, 0, 0, 1, 0, 0, 0};
  const auto m = fit_logistic(raw_design(W, true), y);
  CHECK(m.beta(0) == doctest::Approx(std::log(0.25 / 0.75)).epsilon(1e-10));
}

TEST_CASE("logistic fit matches a brute-force likelihood grid") {
  MatrixXd W(8, 2);
  const double x[8] = {-1.5, -0.7, -0.2, 0.1, 0.4, 0.9, 1.3, 2.0};
  const std::vector<double> y = {0, 0, 1, 0, 1, 0, 1, 1};
  for (int i = 0; i < 8; ++i) W.row(i) << 1, x[i];
  const auto m = fit_logistic(raw_design(W, true), y);
  auto ll = [&](const VectorXd& b) {
    double s = 0;
    for (int i = 0; i < 8; ++i) {
      const double eta = b(0) + b(1) * x[i];
      s += y[i] * eta - std::log(1 + std::exp(eta));
    }
    return s;
  };
  const VectorXd best = dense_grid_2d(ll, VectorXd::Zero(2), 8.0, 1e-6);
  CHECK(std::fabs(m.beta(0) - best(0)) < 1e-4);
  CHECK(std::fabs(m.beta(1) - best(1)) < 1e-4);
  CHECK(m.convergence.converged);
  CHECK(m.convergence.gradient_norm < 1e-6);
}

TEST_CASE("logistic fitted means reproduce the outcome mean") {
  const auto ds = test::simulate(OutcomeFamily::binary, 400, 4);
  const auto d = build_design(ds);
  const auto y = ds.response();
  const auto m = fit_logistic(d, y);
  const VectorXd eta = d.W * m.beta;
  double s = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double p = 1 / (1 + std::exp(-eta(i)));
    CHECK(p > 0);
    CHECK(p < 1);
    s += p;
  }
  CHECK(s / eta.size() == doctest::Approx(mean(y)).epsilon(1e-9));
  CHECK(symmetric_psd(m.cov_robust));
}

TEST_CASE("balanced outcome independent of the covariate") {
  MatrixXd W(4, 2);
  W << 1, -1, 1, -1, 1, 1, 1, 1;
  const auto m = fit_logistic(raw_design(W, true), std::vector<double>{0, 1, 0, 1});
  CHECK(std::fabs(m.beta(1)) < 1e-10);
}

TEST_CASE("logistic separation is detected") {
  MatrixXd W(6, 2);
  W << 1, -3, 1, -2, 1, -1, 1, 1, 1, 2, 1, 3;
  CHECK_THROWS_AS(fit_logistic(raw_design(W, true), std::vector<double>{0, 0, 0, 1, 1, 1}), NumericalError);
  CHECK_THROWS_AS(fit_logistic(raw_design(W, true), std::vector<double>(6, 1.0)), DataError);
}

TEST_CASE("Cox fit matches a brute-force partial likelihood grid") {
  // seven subjects, two covariates, one tied event time
  MatrixXd W(7, 2);
  W << 1, 0.5, 0, -1.0, 1, 1.5, 0, 0.3, 1, -0.4, 0, 2.0, 1, 0.0;
  const std::vector<double> t = {2.0, 1.0, 4.0, 2.0, 5.5, 3.0, 6.0};
  const std::vector<int> d = {1, 1, 1, 1, 0, 1, 1};
  for (auto ties : {TieMethod::efron, TieMethod::breslow}) {
    FitOptions opt;
    opt.ties = ties;
    const auto m = fit_cox(raw_design(W, false), t, d, opt);
    auto ll = [&](const VectorXd& b) {
      if (ties == TieMethod::efron) return naive_cox_loglik(W, t, d, b);
      // Breslow: every tied event sees the full risk set
      const VectorXd eta = W * b;
      double s = 0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (!d[i]) continue;
        double risk = 0;
        for (std::size_t j = 0; j < t.size(); ++j)
          if (t[j] >= t[i]) risk += std::exp(eta(j));
        s += eta(i) - std::log(risk);
      }
      return s;
    };
    const VectorXd best = dense_grid_2d(ll, VectorXd::Zero(2), 8.0, 1e-6);
    CHECK(std::fabs(m.beta(0) - best(0)) < 1e-4);
    CHECK(std::fabs(m.beta(1) - best(1)) < 1e-4);
    CHECK(m.loglik == doctest::Approx(ll(m.beta)).epsilon(1e-10));
  }
}

TEST_CASE("Cox score matches finite differences of the partial likelihood") {
  const auto ds = test::simulate(OutcomeFamily::survival, 150, 9);
  auto d = build_design(ds, false);
  VectorXd beta(d.W.cols());
  beta.setLinSpaced(-0.3, 0.4);
  for (auto ties : {TieMethod::efron, TieMethod::breslow}) {
    const VectorXd s = cox_score(d.W, ds.outcome, ds.event, beta, ties);
    const VectorXd fd = test::numeric_gradient(
        [&](const VectorXd& b) { return cox_log_partial_likelihood(d.W, ds.outcome, ds.event, b, ties); }, beta);
    CHECK(test::relative_error(s, fd) < 1e-5);
  }
  const auto m = fit_cox(d, ds.outcome, ds.event);
  CHECK(m.convergence.gradient_norm < 1e-6);
  CHECK(symmetric_psd(m.cov_model));
}

TEST_CASE("Cox recovers a log rate ratio of ln 2") {
  auto fit = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> e(1.0);
    const int n = 2000;
    MatrixXd W(n, 1);
    std::vector<double> t(n);
    std::vector<int> d(n, 1);
    for (int i = 0; i < n; ++i) {
      W(i, 0) = i % 2;
      t[i] = e(rng) / (W(i, 0) ? 2.0 : 1.0);
    }
    return fit_cox(raw_design(W, false), t, d);
  };
  const auto m = fit(2);
  CHECK(std::fabs(m.beta(0) - std::log(2.0)) < 0.1);
  // the SE is about 0.047, so the average of 20 fits pins the bias much tighter
  double s = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) s += fit(seed).beta(0);
  CHECK(std::fabs(s / 20 - std::log(2.0)) < 0.035);
}

TEST_CASE("Breslow baseline at beta = 0 is the Nelson-Aalen estimator") {
  const std::vector<double> t = {3, 1, 4, 1.5, 2};
  const std::vector<int> d = {1, 1, 0, 1, 1};
  MatrixXd W(5, 1);
  W << 0.2, -1, 0.5, 1, 0;
  CoxPartialLikelihood pl(t, d);
  const auto h = pl.breslow(W, VectorXd::Zero(1));
  // at risk 5, 4, 3, 2 at times 1, 1.5, 2, 3
  CHECK(h(1.0) == doctest::Approx(1.0 / 5));
  CHECK(h(1.7) == doctest::Approx(1.0 / 5 + 1.0 / 4));
  CHECK(h(2.0) == doctest::Approx(1.0 / 5 + 1.0 / 4 + 1.0 / 3));
  CHECK(h(3.5) == doctest::Approx(1.0 / 5 + 1.0 / 4 + 1.0 / 3 + 1.0 / 2));
  const auto na = nelson_aalen(t, d);
  for (double s : {0.5, 1.0, 1.2, 2.0, 3.0, 9.0}) CHECK(h(s) == doctest::Approx(na(s)));
}

TEST_CASE("Cox baseline is nondecreasing and jumps at event times only") {
  const auto ds = test::simulate(OutcomeFamily::survival, 120, 12);
  const auto m = fit_cox(build_design(ds, false), ds.outcome, ds.event);
  const auto& h = *m.baseline_cumhaz;
  CHECK(h(0.0) == 0.0);
  for (std::size_t k = 0; k < h.knots.size(); ++k) {
    if (k) CHECK(h.values[k] > h.values[k - 1]);
    bool is_event = false;
    for (std::size_t i = 0; i < ds.size(); ++i) is_event |= ds.event[i] && ds.outcome[i] == h.knots[k];
    CHECK(is_event);
  }
}

TEST_CASE("Cox input errors") {
  MatrixXd W(3, 1);
  W << 1, 0, 1;
  CHECK_THROWS_AS(fit_cox(raw_design(W, false), std::vector<double>{1, 2, 3}, std::vector<int>{0, 0, 0}), DataError);
  CHECK_THROWS_AS(fit_cox(raw_design(W, true), std::vector<double>{1, 2, 3}, std::vector<int>{1, 0, 0}), UsageError);
}

TEST_CASE("interaction Wald test") {
  FittedModel m;
  m.beta = VectorXd::Zero(3);
  m.cov_model = MatrixXd::Identity(3, 3);
  m.index.interaction = 2;
  m.beta(2) = 1.959963984540054;
  CHECK(interaction_test(m).p == doctest::Approx(0.05).epsilon(1e-9));
  m.beta(2) = 0;
  CHECK(interaction_test(m).p == 1.0);
  m.index.interaction = -1;
  CHECK_THROWS_AS(interaction_test(m), UsageError);
}

TEST_CASE("Cox monotone likelihood is detected") {
  MatrixXd W(6, 1);
  W << 1, 1, 1, 0, 0, 0;
  // every treated subject fails before any control
  CHECK_THROWS_AS(fit_cox(raw_design(W, false), std::vector<double>{1, 2, 3, 4, 5, 6},
                          std::vector<int>{1, 1, 1, 1, 1, 1}),
                  NumericalError);
}
