#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "prime/bhm.hpp"
#include "prime/dataset.hpp"
#include "prime/minp_scan.hpp"

namespace prime {

enum class Effect { strong, weak, null };

struct Scenario {
  std::string name;
  int n = 200;
  double beta_z = 0.1;
  double beta_x1 = 0.1;
  double beta_x2 = 0.2;
  double beta_a = 0.0;
  double beta_az = 0.0;
  double true_cutoff = 0.0;
  Effect effect = Effect::strong;
  double censor_target = 0.2;
  int reps = 1000;
  std::uint64_t seed = 1;
  double baseline_hazard = 1.0;
  double z_mean = 0.2;
  double z_sd = 2.0;
};

void validate(const Scenario& sc);
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);
std::string to_json(const Scenario& sc);

// Named scenarios for the strong/weak cut-off settings and the type-I/power
// settings, e.g. "strong-0.2", "weak-1.25", "null-0.2", "power--0.85".
Scenario builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();

// Upper limit E of the uniform censoring law giving the target censoring
// fraction, found by root search on the analytic per-subject censoring
// probability averaged over 1e5 simulated covariate draws. Infinite for a
// zero target.
double calibrate_censoring(const Scenario& sc);

// Deterministic in (sc.seed, rep). Pass a precomputed E to skip calibration.
AnalysisDataset generate_dataset(const Scenario& sc, int rep,
                                 std::optional<double> censor_limit = std::nullopt);

enum class Method { prime, minp, bhm };
const char* to_string(Method m);
Method parse_method(const std::string& s);

struct ReplicateResult {
  bool ok = false;
  double estimate = 0.0;
  std::optional<Interval> ci;
  double net_gain = 0.0;
  bool net_gain_ok = false;
  bool reject = false;
  bool reject_fdr = false;  // min-p only
  std::string error;
};

struct MethodMetrics {
  std::string method;
  int reps = 0;
  int failures = 0;
  double bias = 0.0;
  double sd = 0.0;
  double sqrt_mse = 0.0;
  std::optional<double> coverage;
  std::optional<double> mean_net_gain;
  double reject_rate = 0.0;
  bool valid = true;  // at most 5% failed replicates
};

// Population identities over successful replicates: sqrt_mse^2 = bias^2 + sd^2.
MethodMetrics aggregate(const std::string& method, const std::vector<ReplicateResult>& reps,
                        double truth, bool use_fdr_reject = false);

// Candidate set used for min-p in simulation studies: every observed value
// leaving at least 2% of subjects on each side. The narrower library default
// (percentiles 10-90) understates the comparator's type I inflation.
CandidateSpec study_candidates();

struct HarnessOptions {
  std::set<Method> methods = {Method::prime, Method::minp, Method::bhm};
  int bhm_reps = -1;  // -1: all replicates
  BhmConfig bhm;
  CandidateSpec candidates = study_candidates();
  double alpha = 0.05;
  unsigned threads = 1;
};

struct MetricsReport {
  Scenario scenario;
  double censor_limit = 0.0;
  double realized_censoring = 0.0;
  std::vector<MethodMetrics> methods;
  std::map<std::string, std::vector<ReplicateResult>> replicates;
  bool valid = true;

  const MethodMetrics& metrics(const std::string& method) const;
};

MetricsReport run_scenario(const Scenario& sc, const HarnessOptions& opt);

// Rejection rates per method ("prime", "minp", "minp_fdr", "bhm").
std::map<std::string, double> power_study(const Scenario& sc, const HarnessOptions& opt);

void write_metrics_csv(const std::vector<MetricsReport>& reports, std::ostream& out);

}  // namespace prime
