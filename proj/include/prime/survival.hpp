#pragma once

#include <span>
#include <vector>

namespace prime {

// Right-continuous step function: value(t) is the value at the last knot <= t,
// and 0 before the first knot.
struct StepFunction {
  std::vector<double> knots;
  std::vector<double> values;

  double operator()(double t) const;
};

// Kaplan-Meier survival estimate with jumps at the distinct event times.
StepFunction kaplan_meier(std::span<const double> time, std::span<const int> event);

// S(t) from a Kaplan-Meier fit (1 before the first event).
double km_survival(const StepFunction& km, double t);

// Smallest event time with S(t) <= 0.5. When the curve never reaches 0.5 the
// last event time is returned.
double km_median(std::span<const double> time, std::span<const int> event);

StepFunction nelson_aalen(std::span<const double> time, std::span<const int> event);

}  // namespace prime
