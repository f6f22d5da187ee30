#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "prime/dataset.hpp"
#include "prime/model_fit.hpp"

namespace prime {

enum class Arm { control = 0, treated = 1 };

// Everything needed to turn a fitted model into marginalized risks: the model,
// the encoded covariate rows averaged over, and the landmark time (Cox only).
struct RiskModel {
  FittedModel model;
  Eigen::MatrixXd covariates;
  double landmark = 0.0;
  double cumhaz_at_landmark = 0.0;
};

// Builds a RiskModel. For Cox models `landmark` must lie inside the observed
// follow-up range.
RiskModel make_risk_model(FittedModel model, Eigen::MatrixXd covariates,
                          std::optional<double> landmark = std::nullopt);

double conditional_risk(const RiskModel& rm, Arm a, double z,
                        const Eigen::Ref<const Eigen::RowVectorXd>& x);

struct MarginalPoint {
  double risk = 0.0;
  Eigen::VectorXd gradient;  // d risk / d beta
};

// G-computation average over every covariate row, with its beta gradient.
MarginalPoint marginal_point(const RiskModel& rm, Arm a, double z);

// Covariance used for the delta method: cov_robust (GLM) or cov_model (Cox).
const Eigen::MatrixXd& delta_covariance(const FittedModel& model);

struct ArmCurve {
  std::vector<double> risk;
  std::vector<double> se;
};

ArmCurve marginalize(const RiskModel& rm, Arm a, std::span<const double> grid);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct RiskCurves {
  std::vector<double> grid;
  std::vector<double> risk0, risk1, se0, se1;
  std::vector<Interval> ci0, ci1;
  std::vector<double> diff, se_diff;
  std::vector<Interval> ci_diff;
  std::optional<double> landmark;
  int n_marginalized = 0;
};

inline constexpr double kZ95 = 1.959963984540054;

RiskCurves risk_difference_curve(const RiskModel& rm, std::span<const double> grid);

// Marginalized risk difference control - treated at a single biomarker value.
double marginal_difference(const RiskModel& rm, double z);

std::vector<double> default_grid(std::span<const double> z, int n_points = 100);

struct ModelOptions {
  FitOptions fit;
  // Continuous outcomes only: replace Y by its empirical normal scores.
  bool normal_scores = false;
};

struct PrimeFit {
  DesignMatrix design;
  RiskModel risk;
};

// Fits the continuous-interaction model matching the dataset's outcome family
// and prepares it for G-computation. The landmark defaults to the pooled
// Kaplan-Meier median.
PrimeFit fit_prime(const AnalysisDataset& ds, const ModelOptions& opt = {});

void write_curves_csv(const RiskCurves& curves, std::ostream& out);

}  // namespace prime
