#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prime/dataset.hpp"
#include "prime/marginal_risk.hpp"
#include "prime/model_fit.hpp"

namespace prime {

struct BhmConfig {
  int iterations = 10000;
  int burn_in = 2000;
  int thin = 1;
  double proposal_sd_c = 0.3;     // on logit(c)
  double proposal_sd_q = 0.3;     // on log(q - 1)
  double proposal_sd_beta = 0.3;  // per coefficient
  std::uint64_t seed = 1;
};

// Throws UsageError unless iterations > burn_in >= 0, thin >= 1 and every
// proposal SD is positive.
void validate(const BhmConfig& cfg);

// Beta(2, q) density q(q + 1) c (1 - c)^(q - 1) of the threshold percentile.
double prior_c_density(double c, double q);

// Unnormalized hyperprior (q - 1) / (q (q + 1)), q > 1.
double prior_q_density(double q);

// Log-likelihood of (beta, c); nullopt marks an inadmissible threshold (an
// empty side of the split), which the sampler rejects outright.
using ThresholdLogLik = std::function<std::optional<double>(const Eigen::VectorXd&, double)>;

struct ChainState {
  Eigen::VectorXd beta;
  double c = 0.5;
  double q = 2.0;
};

struct ChainSamples {
  Eigen::MatrixXd beta;  // retained draws, one row each
  std::vector<double> c;
  std::vector<double> q;
  double accept_beta = 0.0;
  double accept_c = 0.0;
  double accept_q = 0.0;
};

// Metropolis-within-Gibbs over (beta | c), (c | beta, q) and (q | c) with
// random-walk proposals on beta, logit(c) and log(q - 1). Flat prior on beta.
ChainSamples run_threshold_chain(const ThresholdLogLik& loglik, ChainState init,
                                 const BhmConfig& cfg);

struct ConditionalInference {
  FittedModel model;
  WaldTest interaction;
  int n_above = 0;
  int n_below = 0;
};

// Fits the dichotomized model with I(percentile(Z) > c_hat) by the matching
// regression routine.
ConditionalInference conditional_inference(const AnalysisDataset& ds, double c_hat,
                                           const FitOptions& opt = {});

struct BhmPosterior {
  ChainSamples samples;
  std::vector<std::string> names;
  double c_hat = 0.0;            // percentile scale
  double c_hat_biomarker = 0.0;  // biomarker scale
  Interval c_ci;
  Interval c_ci_biomarker;
  Eigen::VectorXd beta_mean;
  std::vector<Interval> beta_ci;
  int interaction_index = 0;
  std::optional<ConditionalInference> conditional;
  std::vector<std::string> warnings;
};

// Biomarker value matching a percentile-scale threshold: I(u > c) equals
// I(z > value) when u = rank / (n + 1).
double percentile_to_biomarker(const std::vector<double>& z, double c);

BhmPosterior run_mcmc(const AnalysisDataset& ds, const BhmConfig& cfg,
                      const FitOptions& opt = {});

void write_samples_csv(const BhmPosterior& post, std::ostream& out);

}  // namespace prime
