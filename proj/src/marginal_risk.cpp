#include "prime/marginal_risk.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "prime/error.hpp"
#include "prime/numeric.hpp"
#include "prime/survival.hpp"

namespace prime {

namespace {

using Eigen::Index;
using Eigen::VectorXd;

double inv_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Linear predictor without the covariate part.
double base_predictor(const FittedModel& m, Arm a, double z) {
  const double av = a == Arm::treated ? 1.0 : 0.0;
  double eta = m.beta(m.index.treatment) * av + m.beta(m.index.biomarker) * z +
               m.beta(m.index.interaction) * av * z;
  if (m.index.intercept >= 0) eta += m.beta(m.index.intercept);
  return eta;
}

// Risk and d risk / d eta for one linear predictor value.
std::pair<double, double> link(const RiskModel& rm, double eta) {
  switch (rm.model.family) {
    case ModelFamily::linear:
      return {eta, 1.0};
    case ModelFamily::logistic: {
      const double p = inv_logit(eta);
      return {p, p * (1.0 - p)};
    }
    case ModelFamily::cox: {
      const double h = rm.cumhaz_at_landmark * std::exp(eta);
      const double s = std::exp(-h);
      return {1.0 - s, s * h};
    }
  }
  return {0.0, 0.0};
}

}  // namespace

RiskModel make_risk_model(FittedModel model, Eigen::MatrixXd covariates,
                          std::optional<double> landmark) {
  const Index p_cov = model.beta.size() - model.index.first_covariate;
  if (covariates.cols() != p_cov)
    throw UsageError("covariate rows do not match the model's covariate columns");
  if (covariates.rows() == 0) throw DataError("no covariate rows to marginalize over");
  RiskModel rm;
  if (model.family == ModelFamily::cox) {
    if (!landmark) throw UsageError("Cox risks need a landmark time");
    if (!(*landmark >= model.min_time && *landmark <= model.max_time) || !(*landmark > 0.0))
      throw DataError("landmark time outside the observed follow-up range");
    rm.landmark = *landmark;
    rm.cumhaz_at_landmark = (*model.baseline_cumhaz)(*landmark);
  }
  rm.model = std::move(model);
  rm.covariates = std::move(covariates);
  return rm;
}

double conditional_risk(const RiskModel& rm, Arm a, double z,
                        const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const auto& m = rm.model;
  double eta = base_predictor(m, a, z);
  if (x.size() > 0) eta += x.dot(m.beta.tail(x.size()));
  return link(rm, eta).first;
}

MarginalPoint marginal_point(const RiskModel& rm, Arm a, double z) {
  const auto& m = rm.model;
  const Index n = rm.covariates.rows();
  const Index pc = rm.covariates.cols();
  const double base = base_predictor(m, a, z);
  const VectorXd eta = (rm.covariates * m.beta.tail(pc)).array() + base;
  double risk = 0.0, dsum = 0.0;
  VectorXd dcov = VectorXd::Zero(pc);
  for (Index i = 0; i < n; ++i) {
    const auto [r, d] = link(rm, eta(i));
    risk += r;
    dsum += d;
    if (pc > 0) dcov += d * rm.covariates.row(i).transpose();
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double av = a == Arm::treated ? 1.0 : 0.0;
  MarginalPoint out;
  out.risk = risk * inv_n;
  out.gradient = VectorXd::Zero(m.beta.size());
  if (m.index.intercept >= 0) out.gradient(m.index.intercept) = dsum * inv_n;
  out.gradient(m.index.treatment) = av * dsum * inv_n;
  out.gradient(m.index.biomarker) = z * dsum * inv_n;
  out.gradient(m.index.interaction) = av * z * dsum * inv_n;
  if (pc > 0) out.gradient.tail(pc) = dcov * inv_n;
  return out;
}

const Eigen::MatrixXd& delta_covariance(const FittedModel& model) {
  return model.family == ModelFamily::cox ? model.cov_model : model.cov_robust;
}

ArmCurve marginalize(const RiskModel& rm, Arm a, std::span<const double> grid) {
  if (grid.empty()) throw UsageError("empty biomarker grid");
  const auto& V = delta_covariance(rm.model);
  ArmCurve c;
  c.risk.resize(grid.size());
  c.se.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto pt = marginal_point(rm, a, grid[g]);
    c.risk[g] = pt.risk;
    c.se[g] = std::sqrt(std::max(0.0, pt.gradient.dot(V * pt.gradient)));
  }
  return c;
}

double marginal_difference(const RiskModel& rm, double z) {
  return marginal_point(rm, Arm::control, z).risk - marginal_point(rm, Arm::treated, z).risk;
}

RiskCurves risk_difference_curve(const RiskModel& rm, std::span<const double> grid) {
  if (grid.empty()) throw UsageError("empty biomarker grid");
  const auto& V = delta_covariance(rm.model);
  RiskCurves rc;
  const std::size_t G = grid.size();
  rc.grid.assign(grid.begin(), grid.end());
  for (auto* v : {&rc.risk0, &rc.risk1, &rc.se0, &rc.se1, &rc.diff, &rc.se_diff}) v->resize(G);
  rc.ci0.resize(G);
  rc.ci1.resize(G);
  rc.ci_diff.resize(G);
  if (rm.model.family == ModelFamily::cox) rc.landmark = rm.landmark;
  rc.n_marginalized = static_cast<int>(rm.covariates.rows());
  for (std::size_t g = 0; g < G; ++g) {
    const auto p0 = marginal_point(rm, Arm::control, grid[g]);
    const auto p1 = marginal_point(rm, Arm::treated, grid[g]);
    const VectorXd gd = p0.gradient - p1.gradient;
    rc.risk0[g] = p0.risk;
    rc.risk1[g] = p1.risk;
    rc.diff[g] = p0.risk - p1.risk;
    rc.se0[g] = std::sqrt(std::max(0.0, p0.gradient.dot(V * p0.gradient)));
    rc.se1[g] = std::sqrt(std::max(0.0, p1.gradient.dot(V * p1.gradient)));
    rc.se_diff[g] = std::sqrt(std::max(0.0, gd.dot(V * gd)));
    rc.ci0[g] = {rc.risk0[g] - kZ95 * rc.se0[g], rc.risk0[g] + kZ95 * rc.se0[g]};
    rc.ci1[g] = {rc.risk1[g] - kZ95 * rc.se1[g], rc.risk1[g] + kZ95 * rc.se1[g]};
    rc.ci_diff[g] = {rc.diff[g] - kZ95 * rc.se_diff[g], rc.diff[g] + kZ95 * rc.se_diff[g]};
  }
  return rc;
}

std::vector<double> default_grid(std::span<const double> z, int n_points) {
  if (n_points < 2) throw UsageError("grid needs at least 2 points");
  if (z.empty()) throw DataError("empty biomarker");
  const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
  if (!(*hi > *lo)) throw DataError("degenerate biomarker: minimum equals maximum");
  std::vector<double> g(static_cast<std::size_t>(n_points));
  const double step = (*hi - *lo) / (n_points - 1);
  for (int k = 0; k < n_points; ++k) g[k] = *lo + k * step;
  g.back() = *hi;
  return g;
}

PrimeFit fit_prime(const AnalysisDataset& ds, const ModelOptions& opt) {
  const bool survival = ds.spec.family == OutcomeFamily::survival;
  PrimeFit pf;
  pf.design = build_design(ds, !survival);
  FittedModel model;
  if (opt.normal_scores && ds.spec.family == OutcomeFamily::continuous) {
    const auto y = ds.response();
    model = fit_linear(pf.design, normal_scores(y));
  } else {
    model = fit_for_family(ds, pf.design, opt.fit);
  }
  std::optional<double> landmark;
  if (survival) landmark = ds.spec.landmark ? *ds.spec.landmark : km_median(ds.outcome, ds.event);
  pf.risk = make_risk_model(std::move(model), pf.design.covariate_block(), landmark);
  return pf;
}

void write_curves_csv(const RiskCurves& c, std::ostream& out) {
  out << "z,risk0,se0,lo0,hi0,risk1,se1,lo1,hi1,diff,se_diff,lo_diff,hi_diff\n";
  out.precision(10);
  for (std::size_t g = 0; g < c.grid.size(); ++g) {
    out << c.grid[g] << ',' << c.risk0[g] << ',' << c.se0[g] << ',' << c.ci0[g].lo << ','
        << c.ci0[g].hi << ',' << c.risk1[g] << ',' << c.se1[g] << ',' << c.ci1[g].lo << ','
        << c.ci1[g].hi << ',' << c.diff[g] << ',' << c.se_diff[g] << ',' << c.ci_diff[g].lo
        << ',' << c.ci_diff[g].hi << '\n';
  }
}

}  // namespace prime
