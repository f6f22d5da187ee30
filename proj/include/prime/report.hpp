#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "prime/bhm.hpp"
#include "prime/calibration.hpp"
#include "prime/cutoff.hpp"
#include "prime/marginal_risk.hpp"
#include "prime/minp_scan.hpp"
#include "prime/netgain.hpp"
#include "prime/sim_harness.hpp"

namespace prime {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

// Row count, header and a 64-bit FNV-1a checksum of the raw file bytes.
struct InputFingerprint {
  std::string path;
  std::size_t rows = 0;
  std::vector<std::string> columns;
  std::string checksum;
};

InputFingerprint fingerprint_file(const std::string& path);

nlohmann::json to_json(const InputFingerprint& f);
nlohmann::json to_json(const FittedModel& m);
nlohmann::json to_json(const CutoffReport& r);
nlohmann::json to_json(const NetGainSummary& s);
nlohmann::json to_json(const BootstrapInterval& b);
nlohmann::json to_json(const MarkerComparison& c);
nlohmann::json to_json(const CalibrationTable& t);
nlohmann::json to_json(const ScanResult& r);
nlohmann::json to_json(const BhmPosterior& p);
nlohmann::json to_json(const MethodMetrics& m);
nlohmann::json to_json(const MetricsReport& r);

// marker,theta,se,ci_lo,ci_hi with a final row for the difference.
void write_comparison_csv(const MarkerComparison& c, std::ostream& out);

// One row per (scenario, metric) with a column per method, the layout of the
// published operating-characteristics tables.
void write_table_csv(const std::vector<MetricsReport>& reports, std::ostream& out);

// Lines for both arms with their confidence bands and markers at the
// cut-off and the positive/negative thresholds.
void write_curves_svg(const RiskCurves& curves, const CutoffReport& cut, std::ostream& out);

}  // namespace prime
