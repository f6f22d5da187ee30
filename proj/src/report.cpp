#include "prime/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <boost/tokenizer.hpp>

#include "prime/error.hpp"

namespace prime {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json interval(const Interval& i) { return {{"lo", i.lo}, {"hi", i.hi}}; }

const char* side_name(Side s) { return s == Side::above ? "above" : "below"; }

}  // namespace

InputFingerprint fingerprint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  InputFingerprint f;
  f.path = path;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  f.checksum = buf;
  std::istringstream lines(bytes);
  std::string line;
  bool header = true;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      boost::tokenizer<boost::escaped_list_separator<char>> tok(line);
      f.columns.assign(tok.begin(), tok.end());
      header = false;
    } else {
      ++f.rows;
    }
  }
  return f;
}

json to_json(const InputFingerprint& f) {
  return {{"path", f.path}, {"rows", f.rows}, {"columns", f.columns}, {"checksum", f.checksum}};
}

json to_json(const FittedModel& m) {
  json coefs = json::array();
  for (Eigen::Index j = 0; j < m.beta.size(); ++j) {
    coefs.push_back({{"name", m.names[static_cast<std::size_t>(j)]},
                     {"estimate", m.beta(j)},
                     {"se", std::sqrt(m.cov_model(j, j))},
                     {"robust_se", std::sqrt(m.cov_robust(j, j))}});
  }
  json j = {{"family", to_string(m.family)},
            {"n", m.n},
            {"coefficients", coefs},
            {"log_likelihood", m.loglik},
            {"convergence",
             {{"iterations", m.convergence.iterations},
              {"gradient_norm", m.convergence.gradient_norm},
              {"converged", m.convergence.converged}}}};
  if (m.index.interaction >= 0) {
    const auto w = interaction_test(m);
    j["interaction"] = {{"estimate", w.estimate}, {"se", w.se}, {"z", w.z}, {"p", w.p}};
  } else {
    j["interaction"] = nullptr;
  }
  j["residual_variance"] = m.family == ModelFamily::linear ? json(m.sigma2) : json(nullptr);
  return j;
}

json to_json(const CutoffReport& r) {
  return {{"theoretical", opt(r.theoretical)},
          {"method", to_string(r.method)},
          {"within_range", r.within_range},
          {"positive_threshold", opt(r.positive_threshold)},
          {"negative_threshold", opt(r.negative_threshold)},
          {"formula", opt(r.formula)},
          {"formula_se", opt(r.se_formula)},
          {"formula_within_range", r.formula_within_range},
          {"root", opt(r.root)},
          {"predicted_risk_at_cut", opt(r.predicted_risk_at_cut)},
          {"direction", r.direction},
          {"warnings", r.warnings}};
}

json to_json(const BootstrapInterval& b) {
  return {{"se", b.se},     {"ci_lo", b.ci_lo},     {"ci_hi", b.ci_hi},
          {"reps", b.reps}, {"dropped", b.dropped}, {"seed", b.seed}};
}

json to_json(const NetGainSummary& s) {
  json rule;
  if (const auto* f = std::get_if<FixedCutoffRule>(&s.rule))
    rule = {{"type", "fixed_cutoff"}, {"z_cut", f->z_cut}, {"negative_side", side_name(f->negative_side)}};
  else
    rule = {{"type", "delta_sign"}};
  return {{"rule", rule},
          {"b_neg", s.b_neg},
          {"p_neg", s.p_neg},
          {"theta", s.theta},
          {"n_neg", s.n_neg},
          {"empty_negative", s.empty_negative},
          {"bootstrap", s.bootstrap ? to_json(*s.bootstrap) : json(nullptr)}};
}

json to_json(const MarkerComparison& c) {
  auto marker = [](const MarkerSummary& m) {
    return json{{"name", m.name}, {"theta", m.theta}, {"bootstrap", to_json(m.interval)}};
  };
  return {{"delta_theta", c.delta_theta},
          {"bootstrap", to_json(c.interval)},
          {"markers", {marker(c.marker_a), marker(c.marker_b)}}};
}

json to_json(const CalibrationTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"group", r.group},
                    {"n", r.n},
                    {"predicted", r.mean_predicted},
                    {"observed", opt(r.observed)},
                    {"strata", r.n_strata},
                    {"excluded_strata", r.n_excluded},
                    {"z_min", r.z_min},
                    {"z_max", r.z_max},
                    {"z_mean", r.z_mean}});
  }
  return {{"groups", t.groups},
          {"bins", t.bins},
          {"landmark", opt(t.landmark)},
          {"overall_predicted", t.overall_predicted},
          {"rows", rows},
          {"warnings", t.warnings}};
}

json to_json(const ScanResult& r) {
  auto fit = [](const CandidateFit& f) {
    return json{{"c", f.c},       {"p_raw", f.p_raw}, {"p_fdr", f.p_fdr},
                {"estimate", f.estimate}, {"se", f.se}, {"n_above", f.n_above}};
  };
  return {{"chosen", fit(r.chosen)},
          {"candidates", r.fits.size()},
          {"dropped", r.dropped},
          {"warnings", r.warnings}};
}

json to_json(const BhmPosterior& p) {
  json coefs = json::array();
  for (std::size_t j = 0; j < p.names.size(); ++j) {
    coefs.push_back({{"name", p.names[j]},
                     {"mean", p.beta_mean(static_cast<Eigen::Index>(j))},
                     {"ci", interval(p.beta_ci[j])}});
  }
  json cond = nullptr;
  if (p.conditional) {
    const auto& c = *p.conditional;
    cond = {{"model", to_json(c.model)},
            {"interaction",
             {{"estimate", c.interaction.estimate},
              {"se", c.interaction.se},
              {"z", c.interaction.z},
              {"p", c.interaction.p}}},
            {"n_above", c.n_above},
            {"n_below", c.n_below}};
  }
  const auto& S = p.samples;
  return {{"threshold",
           {{"percentile", p.c_hat},
            {"percentile_ci", interval(p.c_ci)},
            {"biomarker", p.c_hat_biomarker},
            {"biomarker_ci", interval(p.c_ci_biomarker)}}},
          {"q_mean", S.q.empty() ? 0.0 : std::accumulate(S.q.begin(), S.q.end(), 0.0) / static_cast<double>(S.q.size())},
          {"marginal", coefs},
          {"conditional", cond},
          {"retained", S.c.size()},
          {"acceptance", {{"beta", S.accept_beta}, {"c", S.accept_c}, {"q", S.accept_q}}},
          {"warnings", p.warnings}};
}

json to_json(const MethodMetrics& m) {
  return {{"method", m.method},     {"reps", m.reps},         {"failures", m.failures},
          {"bias", m.bias},         {"sd", m.sd},             {"sqrt_mse", m.sqrt_mse},
          {"coverage", opt(m.coverage)}, {"net_gain", opt(m.mean_net_gain)},
          {"reject_rate", m.reject_rate}, {"valid", m.valid}};
}

json to_json(const MetricsReport& r) {
  json methods = json::array();
  for (const auto& m : r.methods) methods.push_back(to_json(m));
  return {{"scenario", json::parse(to_json(r.scenario))},
          {"censor_limit", r.censor_limit},
          {"realized_censoring", r.realized_censoring},
          {"methods", methods},
          {"valid", r.valid}};
}

void write_comparison_csv(const MarkerComparison& c, std::ostream& out) {
  out.precision(10);
  out << "marker,theta,se,ci_lo,ci_hi\n";
  for (const auto* m : {&c.marker_a, &c.marker_b})
    out << m->name << ',' << m->theta << ',' << m->interval.se << ',' << m->interval.ci_lo << ','
        << m->interval.ci_hi << '\n';
  out << c.marker_a.name << '-' << c.marker_b.name << ',' << c.delta_theta << ',' << c.interval.se
      << ',' << c.interval.ci_lo << ',' << c.interval.ci_hi << '\n';
}

void write_table_csv(const std::vector<MetricsReport>& reports, std::ostream& out) {
  const std::vector<std::string> order = {"prime", "minp", "minp_fdr", "bhm"};
  out.precision(4);
  out << "scenario,n,true_cutoff,metric";
  for (const auto& m : order) out << ',' << m;
  out << '\n';
  using Getter = std::optional<double> (*)(const MethodMetrics&);
  const std::vector<std::pair<const char*, Getter>> rows = {
      {"bias", [](const MethodMetrics& m) -> std::optional<double> { return m.bias; }},
      {"sd", [](const MethodMetrics& m) -> std::optional<double> { return m.sd; }},
      {"sqrt_mse", [](const MethodMetrics& m) -> std::optional<double> { return m.sqrt_mse; }},
      {"coverage", [](const MethodMetrics& m) { return m.coverage; }},
      {"net_gain", [](const MethodMetrics& m) { return m.mean_net_gain; }},
      {"reject_rate", [](const MethodMetrics& m) -> std::optional<double> { return m.reject_rate; }},
  };
  for (const auto& r : reports) {
    for (const auto& [label, get] : rows) {
      out << r.scenario.name << ',' << r.scenario.n << ',' << r.scenario.true_cutoff << ',' << label;
      for (const auto& name : order) {
        out << ',';
        const auto it = std::find_if(r.methods.begin(), r.methods.end(),
                                     [&](const MethodMetrics& m) { return m.method == name; });
        if (it == r.methods.end()) continue;
        // minp_fdr differs from minp only in its rejection rule
        if (name == "minp_fdr" && std::string(label) != "reject_rate") continue;
        if (const auto v = get(*it)) out << *v;
      }
      out << '\n';
    }
  }
}

void write_curves_svg(const RiskCurves& c, const CutoffReport& cut, std::ostream& out) {
  constexpr double W = 640, H = 420, L = 60, R = 20, T = 20, B = 50;
  if (c.grid.size() < 2) throw UsageError("curve needs at least two grid points");
  const double x0 = c.grid.front(), x1 = c.grid.back();
  double y0 = 1e300, y1 = -1e300;
  for (std::size_t k = 0; k < c.grid.size(); ++k) {
    for (const auto& iv : {c.ci0[k], c.ci1[k]}) {
      y0 = std::min(y0, iv.lo);
      y1 = std::max(y1, iv.hi);
    }
  }
  if (!(y1 > y0)) y1 = y0 + 1.0;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  auto path = [&](auto value) {
    std::ostringstream s;
    for (std::size_t k = 0; k < c.grid.size(); ++k)
      s << (k ? " L" : "M") << px(c.grid[k]) << ',' << py(value(k));
    return s.str();
  };
  auto band = [&](const std::vector<Interval>& ci) {
    std::ostringstream s;
    for (std::size_t k = 0; k < c.grid.size(); ++k) s << (k ? " L" : "M") << px(c.grid[k]) << ',' << py(ci[k].hi);
    for (std::size_t k = c.grid.size(); k-- > 0;) s << " L" << px(c.grid[k]) << ',' << py(ci[k].lo);
    return s.str() + " Z";
  };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<path d=\"" << band(c.ci0) << "\" fill=\"#1f77b4\" fill-opacity=\"0.2\"/>\n";
  out << "<path d=\"" << band(c.ci1) << "\" fill=\"#d62728\" fill-opacity=\"0.2\"/>\n";
  out << "<path d=\"" << path([&](std::size_t k) { return c.risk0[k]; })
      << "\" stroke=\"#1f77b4\" fill=\"none\" stroke-width=\"2\"/>\n";
  out << "<path d=\"" << path([&](std::size_t k) { return c.risk1[k]; })
      << "\" stroke=\"#d62728\" fill=\"none\" stroke-width=\"2\"/>\n";
  auto marker = [&](const std::optional<double>& z, const char* color, const char* label) {
    if (!z || *z < x0 || *z > x1) return;
    out << "<line x1=\"" << px(*z) << "\" x2=\"" << px(*z) << "\" y1=\"" << T << "\" y2=\"" << H - B
        << "\" stroke=\"" << color << "\" stroke-dasharray=\"4 3\"/>\n";
    out << "<text x=\"" << px(*z) + 3 << "\" y=\"" << T + 12 << "\" fill=\"" << color << "\">" << label
        << "</text>\n";
  };
  marker(cut.theoretical, "black", "cut-off");
  marker(cut.positive_threshold, "#2ca02c", "positive");
  marker(cut.negative_threshold, "#9467bd", "negative");
  out << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << H - B << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" x2=\"" << L << "\" y1=\"" << T << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << L << "\" y=\"" << H - B + 18 << "\">" << x0 << "</text>\n";
  out << "<text x=\"" << W - R << "\" y=\"" << H - B + 18 << "\" text-anchor=\"end\">" << x1 << "</text>\n";
  out << "<text x=\"" << L - 4 << "\" y=\"" << H - B << "\" text-anchor=\"end\">" << y0 << "</text>\n";
  out << "<text x=\"" << L - 4 << "\" y=\"" << T + 10 << "\" text-anchor=\"end\">" << y1 << "</text>\n";
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">biomarker</text>\n";
  out << "<text x=\"" << W - R - 90 << "\" y=\"" << T + 30 << "\" fill=\"#1f77b4\">control</text>\n";
  out << "<text x=\"" << W - R - 90 << "\" y=\"" << T + 46 << "\" fill=\"#d62728\">treated</text>\n";
  out << "</svg>\n";
}

}  // namespace prime
