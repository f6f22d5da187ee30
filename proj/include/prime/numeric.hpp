#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace prime {

double normal_cdf(double x);
double normal_quantile(double p);

// Two-sided p-value of a standard normal test statistic.
double two_sided_p(double z);

double mean(std::span<const double> x);

// Population variance (divides by n).
double variance_pop(std::span<const double> x);

// Sample quantile, linear interpolation between order statistics (R type 7).
double quantile(std::span<const double> x, double prob);
double quantile_sorted(std::span<const double> sorted, double prob);

// Midranks (1-based); ties receive the average of their positions.
std::vector<double> midranks(std::span<const double> x);

// Empirical normal scores: Phi^-1(midrank / (n + 1)).
std::vector<double> normal_scores(std::span<const double> x);

struct RootOptions {
  double f_tol = 1e-10;
  double rel_x_tol = 1e-8;
  int max_iter = 200;
};

// Brent's method on a sign-changing bracket. Throws NumericalError when
// f(lo) and f(hi) share a sign.
double brent_root(const std::function<double(double)>& f, double lo, double hi,
                  const RootOptions& opt = {});

// Counter-based seed derivation: a stream seed that depends only on
// (seed, stream), never on scheduling order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

using Rng = std::mt19937_64;
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

// Runs body(i) for i in [0, n) on up to `threads` workers. Callers write to
// preallocated disjoint slots, so results do not depend on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

unsigned default_threads();

}  // namespace prime
