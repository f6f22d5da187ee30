#include "prime/cutoff.hpp"

#include <cmath>
#include <sstream>

#include "prime/error.hpp"
#include "prime/numeric.hpp"

namespace prime {

const char* to_string(CutoffMethod m) {
  switch (m) {
    case CutoffMethod::formula: return "formula";
    case CutoffMethod::interpolation: return "interpolation";
    case CutoffMethod::root: return "root";
  }
  return "?";
}

double formula_cutoff(double beta_treatment, double beta_interaction) {
  if (!(std::fabs(beta_interaction) > 1e-12))
    throw NumericalError("no treatment x biomarker interaction: cut-off undefined");
  return -beta_treatment / beta_interaction;
}

std::optional<InterpolatedCut> interpolation_cutoff(const RiskCurves& c) {
  const auto& d = c.diff;
  std::optional<std::size_t> first;
  std::vector<double> changes;
  for (std::size_t g = 0; g + 1 < d.size(); ++g) {
    const bool crosses = (d[g] > 0 && d[g + 1] < 0) || (d[g] < 0 && d[g + 1] > 0) ||
                         (d[g] == 0.0 && d[g + 1] != 0.0 && g == 0) ||
                         (d[g] != 0.0 && d[g + 1] == 0.0);
    if (!crosses) continue;
    changes.push_back(c.grid[g]);
    if (!first) first = g;
  }
  if (!first) {
    bool all_zero = !d.empty();
    for (double v : d) all_zero = all_zero && v == 0.0;
    if (all_zero) throw NumericalError("degenerate crossing: arm curves coincide");
    return std::nullopt;
  }
  const std::size_t g = *first;
  const double x1 = c.grid[g], x2 = c.grid[g + 1];
  InterpolatedCut out;
  out.r1 = (c.risk0[g + 1] - c.risk0[g]) / (x2 - x1);
  out.r0 = c.risk0[g] - out.r1 * x1;
  out.b1 = (c.risk1[g + 1] - c.risk1[g]) / (x2 - x1);
  out.b0 = c.risk1[g] - out.b1 * x1;
  if (out.r1 == out.b1) throw NumericalError("degenerate crossing: parallel secants");
  out.z_cut = (out.b0 - out.r0) / (out.r1 - out.b1);
  out.predicted_risk = out.b0 + out.b1 * out.z_cut;
  out.all_sign_changes = std::move(changes);
  return out;
}

double root_cutoff(const std::function<double(double)>& diff, double lo, double hi) {
  const double flo = diff(lo), fhi = diff(hi);
  if (flo * fhi > 0) throw NumericalError("risk difference does not change sign over the range");
  return brent_root(diff, lo, hi, RootOptions{1e-10, 1e-8, 500});
}

CutoffReport classify_thresholds(const RiskCurves& c, const ThresholdOptions& opt) {
  if (c.grid.empty()) throw UsageError("empty risk curves");
  CutoffReport r;
  const auto& d = c.diff;
  int s = 0;
  for (double v : d) {
    if (v != 0.0) {
      s = v > 0 ? 1 : -1;
      break;
    }
  }
  r.direction = d.front() > 0 ? 1 : (d.front() < 0 ? -1 : s);
  auto positive = [&](std::size_t g) {
    return opt.use_confidence_band ? c.ci_diff[g].lo > 0 : d[g] > 0;
  };
  auto negative = [&](std::size_t g) {
    return opt.use_confidence_band ? c.ci_diff[g].hi < 0 : d[g] < 0;
  };
  for (std::size_t g = 0; g < d.size(); ++g) {
    const double z = c.grid[g];
    if (positive(g)) {
      if (!r.positive_threshold || (r.direction > 0 ? z > *r.positive_threshold
                                                    : z < *r.positive_threshold))
        r.positive_threshold = z;
    }
    if (negative(g)) {
      if (!r.negative_threshold || (r.direction > 0 ? z < *r.negative_threshold
                                                    : z > *r.negative_threshold))
        r.negative_threshold = z;
    }
  }
  if (auto cut = interpolation_cutoff(c)) {
    r.theoretical = cut->z_cut;
    r.predicted_risk_at_cut = cut->predicted_risk;
    r.method = CutoffMethod::interpolation;
    r.within_range = cut->z_cut > c.grid.front() && cut->z_cut < c.grid.back();
    if (cut->all_sign_changes.size() > 1) {
      std::ostringstream w;
      w << "risk difference changes sign " << cut->all_sign_changes.size()
        << " times; first crossing reported (intervals starting at";
      for (double z : cut->all_sign_changes) w << ' ' << z;
      w << ')';
      r.warnings.push_back(w.str());
    }
  }
  return r;
}

void attach_root(CutoffReport& report, const RiskCurves& c,
                 const std::function<double(double)>& diff) {
  for (std::size_t g = 0; g + 1 < c.diff.size(); ++g) {
    if (c.diff[g] * c.diff[g + 1] > 0 || (c.diff[g] == 0.0 && c.diff[g + 1] == 0.0)) continue;
    report.root = root_cutoff(diff, c.grid[g], c.grid[g + 1]);
    return;
  }
}

void attach_formula(CutoffReport& report, const FittedModel& model, double z_min, double z_max) {
  const double b1 = model.beta(model.index.treatment);
  const double b3 = model.beta(model.index.interaction);
  if (!(std::fabs(b3) > 1e-12)) {
    report.warnings.push_back("interaction coefficient is zero; formula cut-off undefined");
    return;
  }
  report.formula = formula_cutoff(b1, b3);
  report.formula_within_range = *report.formula > z_min && *report.formula < z_max;
  report.se_formula = cutoff_se(model);
}

double cutoff_se(double b1, double b3, double s11, double s33, double s13) {
  if (!(std::fabs(b3) > 1e-12)) throw NumericalError("cut-off SE undefined without interaction");
  const double v = s11 / (b3 * b3) + b1 * b1 * s33 / std::pow(b3, 4) - 2.0 * b1 * s13 / std::pow(b3, 3);
  return std::sqrt(std::max(0.0, v));
}

double cutoff_se(const FittedModel& m) {
  const int i = m.index.treatment, j = m.index.interaction;
  return cutoff_se(m.beta(i), m.beta(j), m.cov_model(i, i), m.cov_model(j, j), m.cov_model(i, j));
}

}  // namespace prime
