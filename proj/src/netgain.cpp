#include "prime/netgain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "prime/error.hpp"
#include "prime/numeric.hpp"

namespace prime {

std::string describe(const TreatmentRule& rule) {
  if (std::holds_alternative<DeltaSignRule>(rule)) return "delta-sign";
  const auto& f = std::get<FixedCutoffRule>(rule);
  std::ostringstream s;
  s << "fixed-cutoff(" << f.z_cut << ", negative " << (f.negative_side == Side::above ? "above" : "below")
    << ')';
  return s.str();
}

FixedCutoffRule rule_from_cutoff(const FittedModel& model, double z_cut) {
  // Delta = control - treated falls with z when treated risk rises with z,
  // i.e. when beta_AZ > 0 for every supported link.
  const double b3 = model.beta(model.index.interaction);
  return {z_cut, b3 > 0 ? Side::above : Side::below};
}

NetGainSummary net_gain(std::span<const double> delta, std::span<const double> z,
                        const TreatmentRule& rule) {
  if (delta.size() != z.size()) throw UsageError("net gain: delta and biomarker lengths differ");
  if (delta.empty()) throw DataError("net gain: no subjects");
  const auto* fixed = std::get_if<FixedCutoffRule>(&rule);
  if (fixed && !std::isfinite(fixed->z_cut)) throw UsageError("net gain: cut-off not finite");
  NetGainSummary s;
  s.rule = rule;
  double benefit = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    bool negative;
    if (fixed)
      negative = fixed->negative_side == Side::above ? z[i] > fixed->z_cut : z[i] < fixed->z_cut;
    else
      negative = delta[i] < 0.0;
    if (!negative) continue;
    ++s.n_neg;
    benefit += -delta[i];
  }
  s.p_neg = static_cast<double>(s.n_neg) / static_cast<double>(delta.size());
  s.empty_negative = s.n_neg == 0;
  s.b_neg = s.empty_negative ? 0.0 : benefit / s.n_neg;
  s.theta = s.b_neg * s.p_neg;
  return s;
}

NetGainSummary net_gain(const RiskModel& rm, std::span<const double> biomarker,
                        const TreatmentRule& rule) {
  std::vector<double> delta(biomarker.size());
  for (std::size_t i = 0; i < biomarker.size(); ++i) delta[i] = marginal_difference(rm, biomarker[i]);
  return net_gain(delta, biomarker, rule);
}

namespace {

double theta_for(const AnalysisDataset& ds, const ModelOptions& opt) {
  const auto pf = fit_prime(ds, opt);
  return net_gain(pf.risk, ds.biomarker, DeltaSignRule{}).theta;
}

BootstrapInterval summarize(std::vector<double> v, int reps, int dropped, std::uint64_t seed) {
  BootstrapInterval b;
  b.reps = reps;
  b.dropped = dropped;
  b.seed = seed;
  b.se = std::sqrt(variance_pop(v) * v.size() / std::max<std::size_t>(1, v.size() - 1));
  std::sort(v.begin(), v.end());
  b.ci_lo = quantile_sorted(v, 0.025);
  b.ci_hi = quantile_sorted(v, 0.975);
  return b;
}

}  // namespace

MarkerComparison bootstrap_compare(const AnalysisDataset& ds, const std::vector<double>& marker_a,
                                   const std::vector<double>& marker_b, const CompareOptions& opt,
                                   const std::string& name_a, const std::string& name_b) {
  if (opt.reps < 100) throw UsageError("bootstrap comparison needs at least 100 replicates");
  const auto ds_a = ds.with_biomarker(marker_a);
  const auto ds_b = ds.with_biomarker(marker_b);
  MarkerComparison out;
  out.marker_a.name = name_a;
  out.marker_b.name = name_b;
  out.marker_a.theta = theta_for(ds_a, opt.model);
  out.marker_b.theta = theta_for(ds_b, opt.model);
  out.delta_theta = out.marker_a.theta - out.marker_b.theta;

  const std::size_t n = ds.size();
  const auto R = static_cast<std::size_t>(opt.reps);
  std::vector<double> ta(R), tb(R);
  std::vector<char> ok(R, 0);
  parallel_for(R, opt.threads, [&](std::size_t r) {
    auto rng = make_rng(opt.seed, r);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(n);
    for (auto& i : rows) i = pick(rng);
    try {
      const auto sa = ds_a.subset(rows);
      const auto sb = ds_b.subset(rows);
      validate(sa);
      ta[r] = theta_for(sa, opt.model);
      tb[r] = theta_for(sb, opt.model);
      ok[r] = 1;
    } catch (const Error&) {
    }
  });
  std::vector<double> va, vb, vd;
  for (std::size_t r = 0; r < R; ++r) {
    if (!ok[r]) continue;
    va.push_back(ta[r]);
    vb.push_back(tb[r]);
    vd.push_back(ta[r] - tb[r]);
  }
  const int dropped = static_cast<int>(R - vd.size());
  if (dropped * 10 > opt.reps)
    throw NumericalError("bootstrap: " + std::to_string(dropped) + " of " +
                         std::to_string(opt.reps) + " replicate fits failed");
  out.interval = summarize(vd, opt.reps, dropped, opt.seed);
  out.marker_a.interval = summarize(va, opt.reps, dropped, opt.seed);
  out.marker_b.interval = summarize(vb, opt.reps, dropped, opt.seed);
  return out;
}

}  // namespace prime
