#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "prime/marginal_risk.hpp"

namespace prime {

// Biomarker-negative subjects are those with a negative marginalized risk
// difference at their own biomarker value.
struct DeltaSignRule {};

enum class Side { below, above };

// Biomarker-negative subjects lie on `negative_side` of z_cut.
struct FixedCutoffRule {
  double z_cut = 0.0;
  Side negative_side = Side::above;
};

using TreatmentRule = std::variant<DeltaSignRule, FixedCutoffRule>;

std::string describe(const TreatmentRule& rule);

// Side of the formula cut-off where treatment stops helping, read off the
// interaction sign (risk difference falls with z when beta_AZ > 0).
FixedCutoffRule rule_from_cutoff(const FittedModel& model, double z_cut);

struct BootstrapInterval {
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int reps = 0;
  int dropped = 0;
  std::uint64_t seed = 0;
};

struct NetGainSummary {
  double b_neg = 0.0;
  double p_neg = 0.0;
  double theta = 0.0;
  TreatmentRule rule;
  int n_neg = 0;
  bool empty_negative = false;  // b_neg reported as 0
  std::optional<BootstrapInterval> bootstrap;
};

// From precomputed differences delta[i] = Delta(z[i]).
NetGainSummary net_gain(std::span<const double> delta, std::span<const double> z,
                        const TreatmentRule& rule);

NetGainSummary net_gain(const RiskModel& rm, std::span<const double> biomarker,
                        const TreatmentRule& rule);

struct MarkerSummary {
  std::string name;
  double theta = 0.0;
  BootstrapInterval interval;
};

struct MarkerComparison {
  double delta_theta = 0.0;  // theta_A - theta_B
  BootstrapInterval interval;
  MarkerSummary marker_a, marker_b;
};

struct CompareOptions {
  int reps = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  ModelOptions model;
};

// Pairs bootstrap: resample subjects, refit both marker models (landmark
// included) and recompute theta under the delta-sign rule.
MarkerComparison bootstrap_compare(const AnalysisDataset& ds, const std::vector<double>& marker_a,
                                   const std::vector<double>& marker_b,
                                   const CompareOptions& opt,
                                   const std::string& name_a = "A",
                                   const std::string& name_b = "B");

}  // namespace prime
