#include "prime/survival.hpp"

#include <algorithm>
#include <numeric>

#include "prime/error.hpp"

namespace prime {

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return 0.0;
  return values[static_cast<std::size_t>(it - knots.begin()) - 1];
}

namespace {

// Distinct event times with event counts and at-risk counts.
struct EventTable {
  std::vector<double> time;
  std::vector<double> events;
  std::vector<double> at_risk;
};

EventTable event_table(std::span<const double> time, std::span<const int> event) {
  if (time.size() != event.size()) throw DataError("time and event lengths differ");
  std::vector<std::size_t> order(time.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return time[a] < time[b]; });
  EventTable tab;
  const std::size_t n = time.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    double d = 0.0;
    while (j < n && time[order[j]] == time[order[i]]) d += event[order[j++]];
    if (d > 0) {
      tab.time.push_back(time[order[i]]);
      tab.events.push_back(d);
      tab.at_risk.push_back(static_cast<double>(n - i));
    }
    i = j;
  }
  return tab;
}

}  // namespace

StepFunction kaplan_meier(std::span<const double> time, std::span<const int> event) {
  const auto tab = event_table(time, event);
  StepFunction km;
  double s = 1.0;
  for (std::size_t k = 0; k < tab.time.size(); ++k) {
    s *= 1.0 - tab.events[k] / tab.at_risk[k];
    km.knots.push_back(tab.time[k]);
    km.values.push_back(s);
  }
  return km;
}

double km_survival(const StepFunction& km, double t) {
  auto it = std::upper_bound(km.knots.begin(), km.knots.end(), t);
  if (it == km.knots.begin()) return 1.0;
  return km.values[static_cast<std::size_t>(it - km.knots.begin()) - 1];
}

double km_median(std::span<const double> time, std::span<const int> event) {
  const auto km = kaplan_meier(time, event);
  if (km.knots.empty()) throw DataError("median survival undefined without events");
  for (std::size_t k = 0; k < km.knots.size(); ++k)
    if (km.values[k] <= 0.5) return km.knots[k];
  return km.knots.back();
}

StepFunction nelson_aalen(std::span<const double> time, std::span<const int> event) {
  const auto tab = event_table(time, event);
  StepFunction na;
  double h = 0.0;
  for (std::size_t k = 0; k < tab.time.size(); ++k) {
    h += tab.events[k] / tab.at_risk[k];
    na.knots.push_back(tab.time[k]);
    na.values.push_back(h);
  }
  return na;
}

}  // namespace prime
