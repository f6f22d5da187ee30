#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "prime/dataset.hpp"

namespace prime::test {

// Small two-arm dataset with one continuous and one binary covariate. The
// outcome follows a logistic, linear or exponential model with a treatment x
// biomarker interaction.
inline AnalysisDataset simulate(OutcomeFamily family, int n, unsigned seed, double b_a = -0.8,
                                double b_z = 0.2, double b_az = 0.6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  AnalysisDataset ds;
  ds.spec.family = family;
  Covariate x1{"x1", false, {}, {}, {}}, x2{"x2", false, {}, {}, {}};
  for (int i = 0; i < n; ++i) {
    const int a = i % 2;
    const double z = gauss(rng);
    const double v1 = gauss(rng);
    const double v2 = unif(rng) < 0.5 ? 1.0 : 0.0;
    const double eta = b_a * a + b_z * z + b_az * a * z + 0.3 * v1 - 0.2 * v2;
    ds.ids.push_back(std::to_string(i));
    ds.treatment.push_back(a);
    ds.biomarker.push_back(z);
    x1.values.push_back(v1);
    x2.values.push_back(v2);
    switch (family) {
      case OutcomeFamily::binary:
        ds.outcome.push_back(unif(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0);
        break;
      case OutcomeFamily::continuous:
        ds.outcome.push_back(eta + gauss(rng));
        break;
      case OutcomeFamily::survival: {
        const double t = -std::log(unif(rng)) / (0.5 * std::exp(eta));
        const double c = 4.0 * unif(rng);
        ds.outcome.push_back(std::min(t, c));
        ds.event.push_back(t <= c ? 1 : 0);
        break;
      }
    }
  }
  ds.covariates = {x1, x2};
  return ds;
}

// Central differences of a scalar function of a vector.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd lo = x, hi = x;
    lo(j) -= h;
    hi(j) += h;
    g(j) = (f(hi) - f(lo)) / (2 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1e-12, b.norm());
}

// Coordinate-wise grid search with shrinking spacing. Each pass scans
// `points` values per coordinate around the incumbent and keeps the best.
inline Eigen::VectorXd grid_maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                                     Eigen::VectorXd x, double span, double tol) {
  double best = f(x);
  for (double h = span; h > tol; h *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        for (int k = -10; k <= 10; ++k) {
          if (k == 0) continue;
          Eigen::VectorXd y = x;
          y(j) += k * h / 10.0;
          const double v = f(y);
          if (v > best) {
            best = v;
            x = y;
            moved = true;
          }
        }
      }
    }
  }
  return x;
}

}  // namespace prime::test
