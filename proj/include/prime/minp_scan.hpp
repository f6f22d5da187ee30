#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "prime/dataset.hpp"
#include "prime/model_fit.hpp"

namespace prime {

struct CandidateSpec {
  enum class Mode { percentile, observed };
  Mode mode = Mode::percentile;
  double lo_frac = 0.10;
  double hi_frac = 0.90;
  double step = 0.01;  // percentile mode
};

// Percentile mode: sample quantiles from lo_frac to hi_frac. Observed mode:
// distinct observed values leaving at least lo_frac * n subjects on each side
// (Z <= c versus Z > c). Sorted, duplicates removed.
std::vector<double> candidate_cutoffs(std::span<const double> z, const CandidateSpec& spec = {});

// Benjamini-Hochberg step-up adjusted p-values in the original order.
std::vector<double> bh_adjust(std::span<const double> p);

struct CandidateFit {
  double c = 0.0;
  double p_raw = 1.0;
  double p_fdr = 1.0;
  double estimate = 0.0;  // dichotomized interaction coefficient
  double se = 0.0;
  int n_above = 0;
  int iterations = 0;
};

struct ScanResult {
  std::vector<CandidateFit> fits;  // retained candidates in ascending c
  CandidateFit chosen;
  std::vector<double> dropped;
  std::vector<std::string> warnings;

  std::vector<double> candidates() const;
  std::vector<double> p_raw() const;
  std::vector<double> p_fdr() const;
};

// Fits outcome ~ A + I(Z > c) + A*I(Z > c) + X at every candidate, keeps the
// smallest interaction p-value (ties toward the smaller c) and applies BH over
// the retained candidates.
ScanResult scan(const AnalysisDataset& ds, std::vector<double> candidates,
                const FitOptions& opt = {});

void write_scan_csv(const ScanResult& r, std::ostream& out);

}  // namespace prime
