#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "prime/error.hpp"
#include "prime/numeric.hpp"
#include "prime/sim_harness.hpp"

using namespace prime;

namespace {

HarnessOptions quick_options() {
  HarnessOptions opt;
  opt.bhm.iterations = 600;
  opt.bhm.burn_in = 200;
  opt.bhm_reps = 4;
  return opt;
}

double censored_share(const AnalysisDataset& ds) {
  return 1.0 - std::accumulate(ds.event.begin(), ds.event.end(), 0.0) / ds.size();
}

}  // namespace

TEST_CASE("biomarker law puts the 30th percentile at -0.85") {
  auto sc = builtin_scenario("strong--0.85");
  sc.n = 1000000;
  const auto ds = generate_dataset(sc, 0, 5.0);
  CHECK(std::fabs(quantile(ds.biomarker, 0.3) - (0.2 + 2 * normal_quantile(0.3))) < 0.01);
  CHECK(std::fabs(quantile(ds.biomarker, 0.3) + 0.849) < 0.01);
  const int treated = std::accumulate(ds.treatment.begin(), ds.treatment.end(), 0);
  CHECK(treated == 500000);
}

TEST_CASE("censoring calibration hits the target") {
  for (const char* name : {"strong--0.85", "strong-1.25", "null-0.2"}) {
    auto sc = builtin_scenario(name);
    sc.n = 100000;
    const double E = calibrate_censoring(sc);
    CHECK(std::fabs(censored_share(generate_dataset(sc, 3, E)) - 0.2) < 0.02);
  }
  auto none = builtin_scenario("weak-0.2");
  none.censor_target = 0.0;
  none.n = 500;
  CHECK(std::isinf(calibrate_censoring(none)));
  CHECK(censored_share(generate_dataset(none, 0)) == 0.0);
}

TEST_CASE("datasets are deterministic in seed and replicate") {
  const auto sc = builtin_scenario("strong-0.2");
  const double E = calibrate_censoring(sc);
  const auto a = generate_dataset(sc, 7, E), b = generate_dataset(sc, 7, E);
  CHECK(a.outcome == b.outcome);
  CHECK(a.biomarker == b.biomarker);
  CHECK(a.treatment == b.treatment);
  CHECK(generate_dataset(sc, 8, E).outcome != a.outcome);
  CHECK(calibrate_censoring(sc) == E);
}

TEST_CASE("built-in coefficients reproduce the stated cut-offs") {
  const std::vector<std::pair<const char*, double>> strong = {
      {"strong--0.85", -0.8475}, {"strong-0.2", 0.2}, {"strong-1.25", 1.25}};
  for (const auto& [name, cut] : strong) {
    const auto sc = builtin_scenario(name);
    CHECK(-sc.beta_a / sc.beta_az == doctest::Approx(cut).epsilon(1e-4));
  }
  CHECK(builtin_scenario("weak--0.85").beta_a == 0.25);
  CHECK(builtin_scenario("weak--0.85").beta_az == 0.29);
  CHECK(builtin_scenario("weak-0.2").beta_az == 0.25);
  CHECK(builtin_scenario("weak-1.25").beta_a == -0.275);
  CHECK(builtin_scenario("null--0.85").beta_az == 0.0);
  CHECK(builtin_scenario("power--0.85").beta_az == 0.235);
  CHECK(builtin_scenario_names().size() == 12);
  for (const auto& name : builtin_scenario_names()) CHECK_NOTHROW(validate(builtin_scenario(name)));
  CHECK_THROWS_AS(builtin_scenario("strong-9"), UsageError);
}

TEST_CASE("scenario files") {
  const auto sc = parse_scenario(R"({"name": "s", "n": 150, "beta_a": 0.5, "beta_az": 0.59,
                                     "true_cutoff": -0.85, "reps": 12, "seed": 4})");
  CHECK(sc.n == 150);
  CHECK(sc.reps == 12);
  CHECK(sc.beta_z == 0.1);
  const auto back = parse_scenario(to_json(sc));
  CHECK(back.beta_az == sc.beta_az);
  CHECK(back.seed == 4);
  CHECK(back.name == "s");
  CHECK_THROWS_AS(parse_scenario("{not json"), UsageError);
  CHECK_THROWS_AS(parse_scenario(R"({"beta_a": 0.5})"), UsageError);
  CHECK_THROWS_AS(parse_scenario(R"({"beta_a": 0.5, "beta_az": 0.59, "true_cutoff": 0.3})"), UsageError);
  CHECK_THROWS_AS(parse_scenario(R"({"beta_a": 0.5, "beta_az": 0.59, "true_cutoff": -0.85, "censor_target": 1.0})"),
                  UsageError);
  CHECK_THROWS_AS(parse_scenario(R"({"beta_a": 0.2, "beta_az": 0.1, "effect": "null"})"), UsageError);
  CHECK_THROWS_AS(parse_scenario(R"({"beta_a": 0.5, "beta_az": 0.59, "true_cutoff": -0.85, "n": 5})"), UsageError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), UsageError);
}

TEST_CASE("method names") {
  CHECK(parse_method("min-p") == Method::minp);
  CHECK(parse_method("minp") == Method::minp);
  CHECK(std::string(to_string(parse_method("bhm"))) == "bhm");
  CHECK_THROWS_AS(parse_method("lasso"), UsageError);
}

TEST_CASE("aggregate identities") {
  std::vector<ReplicateResult> reps(6);
  const double est[] = {0.1, -0.4, 0.3, 0.25, -0.2, 0.0};
  for (int i = 0; i < 6; ++i) {
    reps[i].ok = true;
    reps[i].estimate = est[i];
    reps[i].ci = Interval{est[i] - 0.3, est[i] + 0.3};
    reps[i].reject = i % 2;
    reps[i].net_gain = 0.1 * i;
    reps[i].net_gain_ok = true;
  }
  const auto m = aggregate("x", reps, 0.05);
  CHECK(m.sqrt_mse * m.sqrt_mse == doctest::Approx(m.bias * m.bias + m.sd * m.sd).epsilon(1e-12));
  // estimates sum to 0.05
  CHECK(m.bias == doctest::Approx(0.05 / 6 - 0.05));
  CHECK(*m.coverage == doctest::Approx(5.0 / 6));
  CHECK(m.reject_rate == doctest::Approx(0.5));
  CHECK(*m.mean_net_gain == doctest::Approx(0.25));
  CHECK(m.valid);

  reps.push_back(ReplicateResult{});
  const auto f = aggregate("x", reps, 0.05);
  CHECK(f.failures == 1);
  CHECK(f.reps == 6);
  CHECK_FALSE(f.valid);  // 1 of 7 exceeds 5%

  const auto one = aggregate("x", {reps[1]}, 0.05);
  CHECK(one.sd == 0.0);
  CHECK(one.bias == doctest::Approx(-0.45));
}

TEST_CASE("single replicate scenario") {
  auto sc = builtin_scenario("strong-0.2");
  sc.reps = 1;
  auto opt = quick_options();
  const auto r = run_scenario(sc, opt);
  for (const char* m : {"prime", "minp", "bhm"}) {
    const auto& mm = r.metrics(m);
    CHECK(mm.reps == 1);
    CHECK(mm.sd == 0.0);
    CHECK(mm.bias == doctest::Approx(r.replicates.at(m)[0].estimate - sc.true_cutoff));
  }
}

TEST_CASE("scenario runs are reproducible and independent of threads") {
  auto sc = builtin_scenario("strong--0.85");
  sc.reps = 12;
  auto opt = quick_options();
  const auto a = run_scenario(sc, opt);
  opt.threads = 3;
  const auto b = run_scenario(sc, opt);
  REQUIRE(a.methods.size() == b.methods.size());
  for (std::size_t k = 0; k < a.methods.size(); ++k) {
    CHECK(a.methods[k].method == b.methods[k].method);
    CHECK(a.methods[k].bias == b.methods[k].bias);
    CHECK(a.methods[k].sd == b.methods[k].sd);
    CHECK(a.methods[k].reject_rate == b.methods[k].reject_rate);
  }
  CHECK(a.realized_censoring == b.realized_censoring);
  CHECK(a.replicates.at("bhm").size() == 4);
  for (const auto& m : a.methods) CHECK(m.sqrt_mse * m.sqrt_mse == doctest::Approx(m.bias * m.bias + m.sd * m.sd));

  std::ostringstream csv;
  write_metrics_csv({a}, csv);
  CHECK(csv.str().rfind("scenario,n,true_cutoff,beta_a,beta_az,method,", 0) == 0);
}

TEST_CASE("alpha of one rejects everywhere") {
  auto sc = builtin_scenario("null--0.85");
  sc.reps = 5;
  auto opt = quick_options();
  opt.alpha = 1.0;
  const auto rates = power_study(sc, opt);
  for (const char* m : {"prime", "minp", "minp_fdr", "bhm"}) CHECK(rates.at(m) == 1.0);
}
