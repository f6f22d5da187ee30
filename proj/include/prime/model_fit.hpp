#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prime/dataset.hpp"
#include "prime/survival.hpp"

namespace prime {

enum class ModelFamily { linear, logistic, cox };
enum class TieMethod { efron, breslow };

const char* to_string(ModelFamily f);

struct Convergence {
  int iterations = 0;
  double gradient_norm = 0.0;  // max |score| at the returned estimate
  bool converged = false;
};

struct FittedModel {
  ModelFamily family = ModelFamily::linear;
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov_model;
  // Leverage-corrected sandwich for GLM families; a copy of cov_model for Cox.
  Eigen::MatrixXd cov_robust;
  std::optional<StepFunction> baseline_cumhaz;
  Convergence convergence;
  std::vector<std::string> names;
  ColumnIndex index;
  double sigma2 = 0.0;      // residual variance (linear)
  double loglik = 0.0;      // log (partial) likelihood at beta
  double min_time = 0.0;    // observed follow-up range (Cox)
  double max_time = 0.0;
  int n = 0;
};

struct FitOptions {
  double score_tol = 1e-8;
  int max_iter_logistic = 25;
  int max_iter_cox = 50;
  double separation_bound = 50.0;
  TieMethod ties = TieMethod::efron;
};

FittedModel fit_linear(const DesignMatrix& design, std::span<const double> y);
FittedModel fit_logistic(const DesignMatrix& design, std::span<const double> y,
                         const FitOptions& opt = {});
FittedModel fit_cox(const DesignMatrix& design, std::span<const double> time,
                    std::span<const int> event, const FitOptions& opt = {});

// Fits the family implied by the dataset's outcome on `design`.
FittedModel fit_for_family(const AnalysisDataset& ds, const DesignMatrix& design,
                           const FitOptions& opt = {});

// Leverage-corrected (HC3) sandwich. For logistic models the bread and hat
// matrix use the IRLS working weights p(1 - p).
Eigen::MatrixXd sandwich_covariance(const FittedModel& model, const Eigen::MatrixXd& W,
                                    std::span<const double> y);

struct WaldTest {
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
};

// Wald test of the treatment x biomarker coefficient against cov_model.
WaldTest interaction_test(const FittedModel& model);

// Cox log partial likelihood for fixed (time, event) data; subjects are sorted
// once so repeated evaluations over changing designs stay linear in n.
class CoxPartialLikelihood {
public:
  CoxPartialLikelihood(std::span<const double> time, std::span<const int> event,
                       TieMethod ties = TieMethod::efron);

  double evaluate(const Eigen::MatrixXd& W, const Eigen::VectorXd& beta,
                  Eigen::VectorXd* score = nullptr, Eigen::MatrixXd* info = nullptr) const;

  // Breslow cumulative baseline hazard at beta.
  StepFunction breslow(const Eigen::MatrixXd& W, const Eigen::VectorXd& beta) const;

  std::size_t size() const { return time_.size(); }

private:
  std::vector<double> time_;
  std::vector<int> event_;
  TieMethod ties_;
  std::vector<std::size_t> order_;
};

// Log partial likelihood and its score, exposed for gradient checks.
double cox_log_partial_likelihood(const Eigen::MatrixXd& W, std::span<const double> time,
                                  std::span<const int> event, const Eigen::VectorXd& beta,
                                  TieMethod ties = TieMethod::efron);
Eigen::VectorXd cox_score(const Eigen::MatrixXd& W, std::span<const double> time,
                          std::span<const int> event, const Eigen::VectorXd& beta,
                          TieMethod ties = TieMethod::efron);

double logistic_log_likelihood(const Eigen::MatrixXd& W, std::span<const double> y,
                               const Eigen::VectorXd& beta);

}  // namespace prime
