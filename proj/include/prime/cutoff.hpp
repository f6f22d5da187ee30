#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prime/marginal_risk.hpp"
#include "prime/model_fit.hpp"

namespace prime {

enum class CutoffMethod { formula, interpolation, root };
const char* to_string(CutoffMethod m);

double formula_cutoff(double beta_treatment, double beta_interaction);

struct InterpolatedCut {
  double z_cut = 0.0;
  double predicted_risk = 0.0;
  // Secant coefficients for the bracketing interval: treated arm b0 + b1 z,
  // control arm r0 + r1 z.
  double b0 = 0.0, b1 = 0.0, r0 = 0.0, r1 = 0.0;
  std::vector<double> all_sign_changes;  // left grid point of each bracket
};

// Crossing of the per-arm secants over the first grid interval where the
// difference changes sign. Absent when the difference never changes sign.
std::optional<InterpolatedCut> interpolation_cutoff(const RiskCurves& curves);

double root_cutoff(const std::function<double(double)>& diff, double lo, double hi);

struct CutoffReport {
  std::optional<double> theoretical;
  std::optional<double> positive_threshold;
  std::optional<double> negative_threshold;
  std::optional<double> formula;
  bool formula_within_range = false;
  std::optional<double> root;
  CutoffMethod method = CutoffMethod::interpolation;
  bool within_range = false;
  std::optional<double> se_formula;
  std::optional<double> predicted_risk_at_cut;
  int direction = 0;  // sign of the difference at the smallest grid value
  std::vector<std::string> warnings;
};

struct ThresholdOptions {
  // Count a grid point as positive/negative only when the confidence band of
  // the difference excludes zero.
  bool use_confidence_band = false;
};

CutoffReport classify_thresholds(const RiskCurves& curves, const ThresholdOptions& opt = {});

// Brent root of `diff` on the first grid interval where the curves cross.
void attach_root(CutoffReport& report, const RiskCurves& curves,
                 const std::function<double(double)>& diff);

// Adds formula cut-off, its delta-method SE and the range check for a model.
void attach_formula(CutoffReport& report, const FittedModel& model, double z_min, double z_max);

double cutoff_se(double beta_treatment, double beta_interaction, double var_treatment,
                 double var_interaction, double cov_treatment_interaction);
double cutoff_se(const FittedModel& model);

}  // namespace prime
