#include "prime/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "prime/error.hpp"
#include "prime/numeric.hpp"
#include "prime/report.hpp"

namespace prime {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DataFlags {
  std::string data;
  std::string outcome_type;
  std::string outcome;
  std::string time;
  std::string event;
  std::string id;
  std::string treatment;
  std::string biomarker;
  std::vector<std::string> covariates;
  std::vector<std::string> categorical;
  std::string direction = "higher";
  double landmark = 0.0;
  CLI::Option* landmark_opt = nullptr;
};

void add_data_flags(CLI::App* app, DataFlags& f, bool needs_biomarker) {
  app->add_option("--data", f.data, "input CSV file")->required();
  app->add_option("--outcome-type", f.outcome_type, "continuous, binary or survival")->required();
  app->add_option("--outcome", f.outcome, "response column (continuous/binary)");
  app->add_option("--time", f.time, "follow-up time column (survival)");
  app->add_option("--event", f.event, "event indicator column (survival)");
  app->add_option("--id", f.id, "subject id column");
  app->add_option("--treatment", f.treatment, "0/1 treatment column")->required();
  auto* b = app->add_option("--biomarker", f.biomarker, "biomarker column");
  if (needs_biomarker) b->required();
  app->add_option("--covariates", f.covariates, "adjustment covariates")->delimiter(',');
  app->add_option("--categorical", f.categorical, "covariates to treat as categorical")->delimiter(',');
  app->add_option("--direction", f.direction, "higher (higher outcome is worse) or lower");
  f.landmark_opt = app->add_option("--landmark", f.landmark, "survival landmark time");
}

AnalysisDataset load(const DataFlags& f, const std::string& biomarker) {
  OutcomeSpec spec;
  spec.family = parse_family(f.outcome_type);
  spec.direction = parse_direction(f.direction);
  CsvSchema schema;
  schema.id = f.id;
  schema.treatment = f.treatment;
  schema.biomarker = biomarker;
  schema.covariates = f.covariates;
  schema.categorical = f.categorical;
  for (const auto& c : f.categorical)
    if (std::find(schema.covariates.begin(), schema.covariates.end(), c) == schema.covariates.end())
      schema.covariates.push_back(c);
  if (spec.family == OutcomeFamily::survival) {
    if (f.time.empty() && f.outcome.empty()) throw UsageError("survival outcomes need --time");
    if (f.event.empty()) throw UsageError("survival outcomes need --event");
    schema.outcome = f.time.empty() ? f.outcome : f.time;
    schema.event = f.event;
    if (f.landmark_opt->count() > 0) spec.landmark = f.landmark;
  } else {
    if (f.outcome.empty()) throw UsageError("--outcome is required for " + f.outcome_type + " outcomes");
    if (f.landmark_opt->count() > 0) throw UsageError("--landmark applies to survival outcomes only");
    schema.outcome = f.outcome;
  }
  auto ds = load_csv(f.data, schema, spec);
  validate(ds);
  return ds;
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

template <class Writer>
void write_file(const fs::path& p, Writer&& w) {
  std::ofstream out(p);
  if (!out) throw UsageError("cannot write '" + p.string() + "'");
  w(out);
  if (!out) throw UsageError("failed writing '" + p.string() + "'");
}

json envelope(const std::string& command, std::uint64_t seed) {
  return {{"schema_version", kReportSchemaVersion},
          {"tool", {{"name", "prime"}, {"version", kToolVersion}}},
          {"command", command},
          {"seed", seed}};
}

json outcome_block(const AnalysisDataset& ds) {
  return {{"family", to_string(ds.spec.family)},
          {"direction", ds.spec.direction == Direction::higher_is_worse ? "higher" : "lower"},
          {"landmark", ds.spec.landmark ? json(*ds.spec.landmark) : json(nullptr)}};
}

void write_report(const fs::path& dir, const json& report) {
  write_file(dir / "report.json", [&](std::ostream& o) { o << std::setw(2) << report << '\n'; });
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "none"; }

TieMethod parse_ties(const std::string& s) {
  if (s == "efron") return TieMethod::efron;
  if (s == "breslow") return TieMethod::breslow;
  throw UsageError("unknown tie method '" + s + "'");
}

CandidateSpec::Mode parse_mode(const std::string& s) {
  if (s == "percentile") return CandidateSpec::Mode::percentile;
  if (s == "observed") return CandidateSpec::Mode::observed;
  throw UsageError("unknown candidate mode '" + s + "'");
}

struct CandidateFlags {
  std::string mode = "percentile";
  CandidateSpec spec;

  CandidateFlags() = default;
  explicit CandidateFlags(const CandidateSpec& s)
      : mode(s.mode == CandidateSpec::Mode::observed ? "observed" : "percentile"), spec(s) {}
};

void add_candidate_flags(CLI::App* app, CandidateFlags& f) {
  app->add_option("--candidate-mode", f.mode, "percentile or observed");
  app->add_option("--lo", f.spec.lo_frac, "lowest candidate percentile / minimum side fraction");
  app->add_option("--hi", f.spec.hi_frac, "highest candidate percentile");
  app->add_option("--step", f.spec.step, "percentile step");
}

CandidateSpec resolve(const CandidateFlags& f) {
  CandidateSpec s = f.spec;
  s.mode = parse_mode(f.mode);
  return s;
}

// ---------------------------------------------------------------------------

struct AnalyzeFlags {
  DataFlags data;
  int grid = 100;
  int groups = 5;
  int bins = 4;
  std::string ties = "efron";
  bool normal_scores = false;
  bool band = false;
  bool svg = false;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
};

void cmd_analyze(const AnalyzeFlags& f, std::ostream& out) {
  if (f.grid < 2) throw UsageError("--grid needs at least 2 points");
  const auto ds = load(f.data, f.data.biomarker);
  const auto dir = prepare_out_dir(f.out_dir);

  ModelOptions mopt;
  mopt.fit.ties = parse_ties(f.ties);
  mopt.normal_scores = f.normal_scores;
  const auto pf = fit_prime(ds, mopt);
  const auto& model = pf.risk.model;
  const auto grid = default_grid(ds.biomarker, f.grid);
  const auto curves = risk_difference_curve(pf.risk, grid);
  auto cut = classify_thresholds(curves, ThresholdOptions{f.band});
  const auto [zmin, zmax] = std::minmax_element(ds.biomarker.begin(), ds.biomarker.end());
  attach_formula(cut, model, *zmin, *zmax);
  attach_root(cut, curves, [&](double z) { return marginal_difference(pf.risk, z); });

  const auto gain = net_gain(pf.risk, ds.biomarker, DeltaSignRule{});
  std::optional<NetGainSummary> gain_cut;
  if (cut.theoretical)
    gain_cut = net_gain(pf.risk, ds.biomarker, rule_from_cutoff(model, *cut.theoretical));
  const auto calib = calibrate(pf.risk, ds, f.groups, f.bins);

  write_file(dir / "curves.csv", [&](std::ostream& o) { write_curves_csv(curves, o); });
  write_file(dir / "calibration.csv", [&](std::ostream& o) { write_calibration_csv(calib, o); });
  json artifacts = {"report.json", "curves.csv", "calibration.csv"};
  if (f.svg) {
    write_file(dir / "curves.svg", [&](std::ostream& o) { write_curves_svg(curves, cut, o); });
    artifacts.push_back("curves.svg");
  }

  auto report = envelope("analyze", f.seed);
  report["input"] = to_json(fingerprint_file(f.data.data));
  auto outcome = outcome_block(ds);
  if (curves.landmark) outcome["landmark"] = *curves.landmark;
  report["outcome"] = outcome;
  report["model"] = to_json(model);
  report["curves"] = {{"file", "curves.csv"},
                      {"points", curves.grid.size()},
                      {"n_marginalized", curves.n_marginalized},
                      {"landmark", curves.landmark ? json(*curves.landmark) : json(nullptr)}};
  report["cutoff"] = to_json(cut);
  report["net_gain"] = {{"delta_sign", to_json(gain)},
                        {"fixed_cutoff", gain_cut ? to_json(*gain_cut) : json(nullptr)}};
  auto cal = to_json(calib);
  cal["file"] = "calibration.csv";
  report["calibration"] = cal;
  report["artifacts"] = artifacts;
  report["warnings"] = pf.design.warnings;
  write_report(dir, report);

  const auto w = interaction_test(model);
  out << "prime analyze: n=" << ds.size() << " family=" << to_string(model.family);
  if (curves.landmark) out << " landmark=" << fmt(*curves.landmark);
  out << "\n  interaction: estimate " << fmt(w.estimate) << " (SE " << fmt(w.se) << "), p = " << fmt(w.p)
      << "\n  cut-off: " << fmt(cut.theoretical) << " [" << to_string(cut.method) << "]"
      << "  root " << fmt(cut.root) << "  formula " << fmt(cut.formula) << " (SE "
      << fmt(cut.se_formula) << ")"
      << "\n  thresholds: positive " << fmt(cut.positive_threshold) << ", negative "
      << fmt(cut.negative_threshold) << "\n  net gain (delta-sign rule): " << fmt(gain.theta)
      << " = " << fmt(gain.b_neg) << " x " << fmt(gain.p_neg) << "\n  outputs in " << dir.string()
      << "\n";
}

// ---------------------------------------------------------------------------

struct CompareFlags {
  DataFlags data;
  std::string marker_a, marker_b;
  int reps = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_dir = ".";
};

void cmd_compare(const CompareFlags& f, std::ostream& out) {
  const auto ds = load(f.data, f.marker_a);
  const auto other = load(f.data, f.marker_b);
  const auto dir = prepare_out_dir(f.out_dir);
  CompareOptions opt;
  opt.reps = f.reps;
  opt.seed = f.seed;
  opt.threads = f.threads ? f.threads : default_threads();
  const auto cmp = bootstrap_compare(ds, ds.biomarker, other.biomarker, opt, f.marker_a, f.marker_b);
  write_file(dir / "comparison.csv", [&](std::ostream& o) { write_comparison_csv(cmp, o); });
  auto report = envelope("compare", f.seed);
  report["input"] = to_json(fingerprint_file(f.data.data));
  report["outcome"] = outcome_block(ds);
  report["comparison"] = to_json(cmp);
  report["artifacts"] = {"report.json", "comparison.csv"};
  write_report(dir, report);
  out << "prime compare: theta(" << f.marker_a << ") = " << fmt(cmp.marker_a.theta) << ", theta("
      << f.marker_b << ") = " << fmt(cmp.marker_b.theta) << "\n  difference " << fmt(cmp.delta_theta)
      << " 95% CI [" << fmt(cmp.interval.ci_lo) << ", " << fmt(cmp.interval.ci_hi) << "] from "
      << cmp.interval.reps - cmp.interval.dropped << " bootstrap fits\n";
}

// ---------------------------------------------------------------------------

struct ScanFlags {
  DataFlags data;
  CandidateFlags candidates;
  std::string ties = "efron";
  std::uint64_t seed = 1;
  std::string out_dir = ".";
};

void cmd_scan(const ScanFlags& f, std::ostream& out) {
  const auto ds = load(f.data, f.data.biomarker);
  const auto dir = prepare_out_dir(f.out_dir);
  FitOptions fo;
  fo.ties = parse_ties(f.ties);
  const auto r = scan(ds, candidate_cutoffs(ds.biomarker, resolve(f.candidates)), fo);
  write_file(dir / "scan.csv", [&](std::ostream& o) { write_scan_csv(r, o); });
  auto report = envelope("scan-minp", f.seed);
  report["input"] = to_json(fingerprint_file(f.data.data));
  report["outcome"] = outcome_block(ds);
  report["scan"] = to_json(r);
  report["artifacts"] = {"report.json", "scan.csv"};
  write_report(dir, report);
  out << "prime scan-minp: " << r.fits.size() << " candidates, chosen c = " << fmt(r.chosen.c)
      << " (p = " << fmt(r.chosen.p_raw) << ", FDR-adjusted " << fmt(r.chosen.p_fdr) << ")\n";
}

// ---------------------------------------------------------------------------

struct BhmFlags {
  DataFlags data;
  BhmConfig cfg;
  bool samples = false;
  std::string out_dir = ".";
};

void cmd_bhm(const BhmFlags& f, std::ostream& out) {
  validate(f.cfg);
  const auto ds = load(f.data, f.data.biomarker);
  const auto dir = prepare_out_dir(f.out_dir);
  const auto post = run_mcmc(ds, f.cfg);
  json artifacts = {"report.json"};
  if (f.samples) {
    write_file(dir / "samples.csv", [&](std::ostream& o) { write_samples_csv(post, o); });
    artifacts.push_back("samples.csv");
  }
  auto report = envelope("bhm", f.cfg.seed);
  report["input"] = to_json(fingerprint_file(f.data.data));
  report["outcome"] = outcome_block(ds);
  report["bhm"] = to_json(post);
  report["bhm"]["config"] = {{"iterations", f.cfg.iterations},
                             {"burn_in", f.cfg.burn_in},
                             {"thin", f.cfg.thin},
                             {"proposal_sd_c", f.cfg.proposal_sd_c},
                             {"proposal_sd_q", f.cfg.proposal_sd_q},
                             {"proposal_sd_beta", f.cfg.proposal_sd_beta}};
  report["artifacts"] = artifacts;
  write_report(dir, report);
  out << "prime bhm: threshold " << fmt(post.c_hat_biomarker) << " (percentile " << fmt(post.c_hat)
      << "), 95% CrI [" << fmt(post.c_ci_biomarker.lo) << ", " << fmt(post.c_ci_biomarker.hi) << "]\n";
  if (post.conditional)
    out << "  conditional interaction p = " << fmt(post.conditional->interaction.p) << "\n";
  for (const auto& w : post.warnings) out << "  warning: " << w << "\n";
}

// ---------------------------------------------------------------------------

struct SimulateFlags {
  std::vector<std::string> scenario_files;
  std::vector<std::string> builtin;
  std::vector<std::string> methods = {"prime", "minp", "bhm"};
  int reps = 0;
  int n = 0;
  int bhm_reps = -1;
  int iterations = 5000;
  int burn_in = 1000;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  double alpha = 0.05;
  unsigned threads = 0;
  CandidateFlags candidates{study_candidates()};
  std::string out_dir = ".";
};

void cmd_simulate(const SimulateFlags& f, std::ostream& out) {
  std::vector<Scenario> scenarios;
  for (const auto& p : f.scenario_files) scenarios.push_back(load_scenario(p));
  for (const auto& b : f.builtin) scenarios.push_back(builtin_scenario(b));
  if (scenarios.empty()) throw UsageError("simulate needs --scenario or --builtin");
  HarnessOptions opt;
  opt.methods.clear();
  for (const auto& m : f.methods) opt.methods.insert(parse_method(m));
  opt.bhm_reps = f.bhm_reps;
  opt.bhm.iterations = f.iterations;
  opt.bhm.burn_in = f.burn_in;
  opt.alpha = f.alpha;
  opt.threads = f.threads ? f.threads : default_threads();
  opt.candidates = resolve(f.candidates);
  const auto dir = prepare_out_dir(f.out_dir);

  std::vector<MetricsReport> reports;
  for (auto sc : scenarios) {
    if (f.reps > 0) sc.reps = f.reps;
    if (f.n > 0) sc.n = f.n;
    if (f.seed_opt->count() > 0) sc.seed = f.seed;
    reports.push_back(run_scenario(sc, opt));
  }
  write_file(dir / "metrics.csv", [&](std::ostream& o) { write_metrics_csv(reports, o); });
  write_file(dir / "table.csv", [&](std::ostream& o) { write_table_csv(reports, o); });
  auto report = envelope("simulate", reports.front().scenario.seed);
  json sims = json::array();
  for (const auto& r : reports) sims.push_back(to_json(r));
  report["simulation"] = sims;
  report["artifacts"] = {"report.json", "metrics.csv", "table.csv"};
  write_report(dir, report);

  out << "prime simulate\n";
  for (const auto& r : reports) {
    out << "  " << r.scenario.name << " (n=" << r.scenario.n << ", reps=" << r.scenario.reps
        << ", censoring " << fmt(r.realized_censoring, 3) << ")" << (r.valid ? "" : " INVALID") << "\n";
    for (const auto& m : r.methods) {
      out << "    " << std::left << std::setw(9) << m.method << " bias " << fmt(m.bias) << "  sd "
          << fmt(m.sd) << "  rmse " << fmt(m.sqrt_mse) << "  coverage " << fmt(m.coverage)
          << "  net gain " << fmt(m.mean_net_gain) << "  reject " << fmt(m.reject_rate) << "\n";
    }
  }
}

int fail(std::ostream& err, ErrorKind kind, const std::string& message) {
  const char* name = kind == ErrorKind::usage ? "usage" : kind == ErrorKind::data ? "data" : "numerical";
  const json e = {{"error", {{"kind", name}, {"exit_code", static_cast<int>(kind)}, {"message", message}}}};
  err << e.dump() << '\n';
  return static_cast<int>(kind);
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Predictive biomarker analysis: risk curves, cut-offs, net gain and comparators", "prime"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  AnalyzeFlags analyze;
  auto* a = app.add_subcommand("analyze", "fit the interaction model and summarize the biomarker");
  add_data_flags(a, analyze.data, true);
  a->add_option("--grid", analyze.grid, "number of biomarker grid points");
  a->add_option("--groups", analyze.groups, "calibration groups");
  a->add_option("--bins", analyze.bins, "quantile bins per continuous covariate in calibration strata");
  a->add_option("--ties", analyze.ties, "Cox tie handling: efron or breslow");
  a->add_flag("--normal-scores", analyze.normal_scores, "continuous outcome: model normal scores of Y");
  a->add_flag("--threshold-band", analyze.band, "thresholds require the confidence band to exclude 0");
  a->add_flag("--svg", analyze.svg, "also write curves.svg");
  a->add_option("--out-dir", analyze.out_dir, "output directory");
  a->add_option("--seed", analyze.seed, "seed recorded in the report");

  CompareFlags compare;
  auto* c = app.add_subcommand("compare", "bootstrap comparison of two biomarkers by net gain");
  add_data_flags(c, compare.data, false);
  c->add_option("--marker-a", compare.marker_a, "first biomarker column")->required();
  c->add_option("--marker-b", compare.marker_b, "second biomarker column")->required();
  c->add_option("--reps", compare.reps, "bootstrap replicates (>= 100)");
  c->add_option("--seed", compare.seed, "bootstrap seed");
  c->add_option("--threads", compare.threads, "worker threads (default: all cores)");
  c->add_option("--out-dir", compare.out_dir, "output directory");

  ScanFlags scanf;
  auto* s = app.add_subcommand("scan-minp", "minimum p-value cut-off scan");
  add_data_flags(s, scanf.data, true);
  add_candidate_flags(s, scanf.candidates);
  s->add_option("--ties", scanf.ties, "Cox tie handling: efron or breslow");
  s->add_option("--seed", scanf.seed, "seed recorded in the report");
  s->add_option("--out-dir", scanf.out_dir, "output directory");

  BhmFlags bhm;
  auto* b = app.add_subcommand("bhm", "Bayesian threshold model by MCMC");
  add_data_flags(b, bhm.data, true);
  b->add_option("--iterations", bhm.cfg.iterations, "MCMC iterations");
  b->add_option("--burn-in", bhm.cfg.burn_in, "discarded initial iterations");
  b->add_option("--thin", bhm.cfg.thin, "keep every k-th draw");
  b->add_option("--sd-c", bhm.cfg.proposal_sd_c, "proposal SD on logit(c)");
  b->add_option("--sd-q", bhm.cfg.proposal_sd_q, "proposal SD on log(q - 1)");
  b->add_option("--sd-beta", bhm.cfg.proposal_sd_beta, "proposal SD per coefficient");
  b->add_option("--seed", bhm.cfg.seed, "chain seed");
  b->add_flag("--samples", bhm.samples, "write samples.csv");
  b->add_option("--out-dir", bhm.out_dir, "output directory");

  SimulateFlags sim;
  auto* m = app.add_subcommand("simulate", "operating characteristics by simulation");
  m->add_option("--scenario", sim.scenario_files, "scenario JSON file (repeatable)");
  m->add_option("--builtin", sim.builtin, "built-in scenario name (repeatable)");
  m->add_option("--methods", sim.methods, "prime,minp,bhm")->delimiter(',');
  m->add_option("--reps", sim.reps, "override replicate count");
  m->add_option("--n", sim.n, "override sample size");
  m->add_option("--bhm-reps", sim.bhm_reps, "replicates analysed by the BHM (default: all)");
  m->add_option("--iterations", sim.iterations, "BHM iterations per replicate");
  m->add_option("--burn-in", sim.burn_in, "BHM burn-in per replicate");
  sim.seed_opt = m->add_option("--seed", sim.seed, "override scenario seed");
  m->add_option("--alpha", sim.alpha, "significance level");
  m->add_option("--threads", sim.threads, "worker threads (default: all cores)");
  add_candidate_flags(m, sim.candidates);
  m->add_option("--out-dir", sim.out_dir, "output directory");

  std::vector<const char*> args;
  for (const auto& x : argv) args.push_back(x.c_str());
  try {
    try {
      app.parse(static_cast<int>(args.size()), args.data());
    } catch (const CLI::Success& e) {
      std::ostringstream o, eo;
      const int code = app.exit(e, o, eo);
      out << o.str();
      return code;
    } catch (const CLI::ParseError& e) {
      return fail(err, ErrorKind::usage, e.what());
    }
    if (a->parsed()) cmd_analyze(analyze, out);
    else if (c->parsed()) cmd_compare(compare, out);
    else if (s->parsed()) cmd_scan(scanf, out);
    else if (b->parsed()) cmd_bhm(bhm, out);
    else if (m->parsed()) cmd_simulate(sim, out);
    return 0;
  } catch (const Error& e) {
    return fail(err, e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail(err, ErrorKind::numerical, e.what());
  }
}

}  // namespace prime
