#include "prime/minp_scan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prime/error.hpp"
#include "prime/numeric.hpp"

namespace prime {

std::vector<double> candidate_cutoffs(std::span<const double> z, const CandidateSpec& spec) {
  if (!(spec.lo_frac > 0.0 && spec.lo_frac < 1.0) || !(spec.hi_frac > 0.0 && spec.hi_frac < 1.0) ||
      !(spec.lo_frac < spec.hi_frac))
    throw UsageError("candidate range needs 0 < lo_frac < hi_frac < 1");
  std::vector<double> sorted(z.begin(), z.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  if (spec.mode == CandidateSpec::Mode::percentile) {
    if (!(spec.step > 0.0)) throw UsageError("candidate step must be positive");
    const int k = static_cast<int>(std::floor((spec.hi_frac - spec.lo_frac) / spec.step + 1e-9));
    for (int i = 0; i <= k; ++i) out.push_back(quantile_sorted(sorted, spec.lo_frac + i * spec.step));
  } else {
    const double need = spec.lo_frac * static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
      const double below = static_cast<double>(i + 1);
      const double above = static_cast<double>(sorted.size() - i - 1);
      if (below >= need && above >= need) out.push_back(sorted[i]);
    }
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.size() < 2) throw UsageError("fewer than 2 candidate cut-offs");
  return out;
}

std::vector<double> bh_adjust(std::span<const double> p) {
  const std::size_t K = p.size();
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError("p-value outside [0,1]");
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<double> adj(K);
  double running = 1.0;
  for (std::size_t r = K; r-- > 0;) {
    // ratio first so the top rank multiplies by exactly 1
    const double v = p[order[r]] * (static_cast<double>(K) / static_cast<double>(r + 1));
    running = std::min(running, v);
    adj[order[r]] = std::min(1.0, running);
  }
  return adj;
}

std::vector<double> ScanResult::candidates() const {
  std::vector<double> v;
  for (const auto& f : fits) v.push_back(f.c);
  return v;
}
std::vector<double> ScanResult::p_raw() const {
  std::vector<double> v;
  for (const auto& f : fits) v.push_back(f.p_raw);
  return v;
}
std::vector<double> ScanResult::p_fdr() const {
  std::vector<double> v;
  for (const auto& f : fits) v.push_back(f.p_fdr);
  return v;
}

ScanResult scan(const AnalysisDataset& ds, std::vector<double> candidates, const FitOptions& opt) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.empty()) throw UsageError("no candidate cut-offs");
  const bool intercept = ds.spec.family != OutcomeFamily::survival;
  ScanResult r;
  std::vector<double> marker(ds.size());
  for (double c : candidates) {
    int above = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      marker[i] = ds.biomarker[i] > c ? 1.0 : 0.0;
      above += ds.biomarker[i] > c;
    }
    try {
      const auto design = build_design(ds, marker, intercept);
      const auto model = fit_for_family(ds, design, opt);
      if (!model.convergence.converged) throw NumericalError("fit did not converge");
      const auto w = interaction_test(model);
      CandidateFit f;
      f.c = c;
      f.p_raw = w.p;
      f.estimate = w.estimate;
      f.se = w.se;
      f.n_above = above;
      f.iterations = model.convergence.iterations;
      r.fits.push_back(f);
    } catch (const Error& e) {
      r.dropped.push_back(c);
      r.warnings.push_back("candidate " + std::to_string(c) + " dropped: " + e.what());
    }
  }
  if (r.fits.empty()) throw NumericalError("every candidate cut-off failed to fit");
  const auto adj = bh_adjust(r.p_raw());
  for (std::size_t k = 0; k < r.fits.size(); ++k) r.fits[k].p_fdr = adj[k];
  r.chosen = r.fits.front();
  for (const auto& f : r.fits)
    if (f.p_raw < r.chosen.p_raw) r.chosen = f;
  return r;
}

void write_scan_csv(const ScanResult& r, std::ostream& out) {
  out << "c,p_raw,p_fdr,estimate,se,n_above\n";
  out.precision(10);
  for (const auto& f : r.fits)
    out << f.c << ',' << f.p_raw << ',' << f.p_fdr << ',' << f.estimate << ',' << f.se << ','
        << f.n_above << '\n';
}

}  // namespace prime
