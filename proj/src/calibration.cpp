#include "prime/calibration.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "prime/error.hpp"
#include "prime/numeric.hpp"
#include "prime/survival.hpp"

namespace prime {

double observed_effect(const AnalysisDataset& ds, const std::vector<std::size_t>& members,
                       double landmark) {
  std::vector<std::size_t> arm[2];
  for (auto i : members) arm[ds.treatment[i]].push_back(i);
  if (arm[0].empty() || arm[1].empty())
    throw DataError("observed effect needs subjects from both arms");
  double risk[2];
  if (ds.spec.family == OutcomeFamily::survival) {
    for (int a = 0; a < 2; ++a) {
      std::vector<double> t;
      std::vector<int> e;
      for (auto i : arm[a]) {
        t.push_back(ds.outcome[i]);
        e.push_back(ds.event[i]);
      }
      risk[a] = 1.0 - km_survival(kaplan_meier(t, e), landmark);
    }
  } else {
    const auto y = ds.response();
    for (int a = 0; a < 2; ++a) {
      double s = 0.0;
      for (auto i : arm[a]) s += y[i];
      risk[a] = s / static_cast<double>(arm[a].size());
    }
  }
  return risk[0] - risk[1];
}

namespace {

// Stratum code per subject: categorical level index, or quantile bin of a
// continuous covariate.
std::vector<std::vector<int>> strata_codes(const AnalysisDataset& ds, int bins) {
  const std::size_t n = ds.size();
  std::vector<std::vector<int>> codes(n);
  for (const auto& c : ds.covariates) {
    if (c.categorical) {
      std::map<std::string, int> lv;
      for (const auto& s : c.codes) lv.emplace(s, 0);
      int k = 0;
      for (auto& [_, v] : lv) v = k++;
      for (std::size_t i = 0; i < n; ++i) codes[i].push_back(lv[c.codes[i]]);
    } else {
      std::vector<double> sorted = c.values;
      std::sort(sorted.begin(), sorted.end());
      std::vector<double> cuts;
      for (int b = 1; b < bins; ++b) cuts.push_back(quantile_sorted(sorted, double(b) / bins));
      for (std::size_t i = 0; i < n; ++i) {
        const auto it = std::lower_bound(cuts.begin(), cuts.end(), c.values[i]);
        codes[i].push_back(static_cast<int>(it - cuts.begin()));
      }
    }
  }
  return codes;
}

}  // namespace

CalibrationTable calibrate(const RiskModel& rm, const AnalysisDataset& ds, int groups, int bins) {
  const std::size_t n = ds.size();
  if (groups < 2) throw UsageError("calibration needs at least 2 groups");
  if (bins < 1) throw UsageError("calibration needs at least 1 covariate bin");
  if (n < 2 * static_cast<std::size_t>(groups))
    throw DataError("calibration needs at least two subjects per group");
  CalibrationTable t;
  t.groups = groups;
  t.bins = bins;
  if (rm.model.family == ModelFamily::cox) t.landmark = rm.landmark;

  std::vector<double> pred(n);
  for (std::size_t i = 0; i < n; ++i) pred[i] = marginal_difference(rm, ds.biomarker[i]);
  t.overall_predicted = mean(pred);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return pred[a] < pred[b] || (pred[a] == pred[b] && a < b);
  });
  const auto codes = strata_codes(ds, bins);

  const std::size_t base = n / groups, extra = n % groups;
  std::size_t pos = 0;
  for (int g = 0; g < groups; ++g) {
    const std::size_t size = base + (static_cast<std::size_t>(g) < extra ? 1 : 0);
    std::vector<std::size_t> members(order.begin() + pos, order.begin() + pos + size);
    pos += size;
    CalibrationRow row;
    row.group = g + 1;
    row.n = static_cast<int>(size);
    double sp = 0.0, sz = 0.0;
    row.z_min = row.z_max = ds.biomarker[members.front()];
    for (auto i : members) {
      sp += pred[i];
      sz += ds.biomarker[i];
      row.z_min = std::min(row.z_min, ds.biomarker[i]);
      row.z_max = std::max(row.z_max, ds.biomarker[i]);
    }
    row.mean_predicted = sp / size;
    row.z_mean = sz / size;

    std::map<std::vector<int>, std::vector<std::size_t>> strata;
    for (auto i : members) strata[codes[i]].push_back(i);
    row.n_strata = static_cast<int>(strata.size());
    double weighted = 0.0, weight = 0.0;
    for (const auto& [key, idx] : strata) {
      bool has[2] = {false, false};
      for (auto i : idx) has[ds.treatment[i]] = true;
      if (!has[0] || !has[1]) {
        ++row.n_excluded;
        continue;
      }
      weighted += idx.size() * observed_effect(ds, idx, rm.landmark);
      weight += idx.size();
    }
    if (weight > 0) {
      row.observed = weighted / weight;
    } else {
      t.warnings.push_back("group " + std::to_string(g + 1) + " has no stratum with both arms");
    }
    t.rows.push_back(row);
  }
  return t;
}

void write_calibration_csv(const CalibrationTable& t, std::ostream& out) {
  out << "group,n,predicted,observed,excluded_strata,strata,z_mean\n";
  out.precision(10);
  for (const auto& r : t.rows) {
    out << r.group << ',' << r.n << ',' << r.mean_predicted << ',';
    if (r.observed) out << *r.observed;
    out << ',' << r.n_excluded << ',' << r.n_strata << ',' << r.z_mean << '\n';
  }
}

}  // namespace prime
