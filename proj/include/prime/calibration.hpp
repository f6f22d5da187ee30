#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "prime/dataset.hpp"
#include "prime/marginal_risk.hpp"

namespace prime {

struct CalibrationRow {
  int group = 0;
  int n = 0;
  double mean_predicted = 0.0;
  std::optional<double> observed;  // absent when no stratum has both arms
  int n_strata = 0;
  int n_excluded = 0;  // strata missing one of the arms
  double z_min = 0.0, z_max = 0.0, z_mean = 0.0;
};

struct CalibrationTable {
  std::vector<CalibrationRow> rows;
  int groups = 5;
  int bins = 4;
  std::optional<double> landmark;
  double overall_predicted = 0.0;
  std::vector<std::string> warnings;
};

// Observed control - treated contrast over `members`: event proportions
// (binary), means of the direction-adjusted response (continuous), or
// Kaplan-Meier event probabilities at `landmark` (survival).
double observed_effect(const AnalysisDataset& ds, const std::vector<std::size_t>& members,
                       double landmark = 0.0);

// Subjects are ordered by their marginalized predicted effect (ties broken by
// row index) and split into `groups` groups whose sizes differ by at most one.
// Observed effects average within-stratum contrasts, weighting strata by size;
// strata combine categorical levels with `bins` quantile bins of each
// continuous covariate.
CalibrationTable calibrate(const RiskModel& rm, const AnalysisDataset& ds, int groups = 5,
                           int bins = 4);

void write_calibration_csv(const CalibrationTable& t, std::ostream& out);

}  // namespace prime
