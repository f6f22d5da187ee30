#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace prime {

enum class OutcomeFamily { continuous, binary, survival };
enum class Direction { higher_is_worse, lower_is_worse };

const char* to_string(OutcomeFamily f);
OutcomeFamily parse_family(const std::string& s);
Direction parse_direction(const std::string& s);

struct OutcomeSpec {
  OutcomeFamily family = OutcomeFamily::binary;
  Direction direction = Direction::higher_is_worse;
  // Survival only. Absent means "use the pooled Kaplan-Meier median".
  std::optional<double> landmark;
};

struct Covariate {
  std::string name;
  bool categorical = false;
  std::vector<double> values;        // continuous covariates
  std::vector<std::string> codes;    // categorical covariates, one per subject
  std::vector<std::string> levels;   // sorted observed levels (categorical)
};

// One row per subject. `outcome` holds the response for continuous and
// binary families and the observed time min(T, C) for survival.
struct AnalysisDataset {
  std::vector<std::string> ids;
  std::vector<int> treatment;
  std::vector<double> biomarker;
  std::vector<Covariate> covariates;
  std::vector<double> outcome;
  std::vector<int> event;  // survival only
  OutcomeSpec spec;

  std::size_t size() const { return treatment.size(); }

  // Outcome oriented so that larger means worse: binary Y is flipped and
  // continuous Y negated under lower-is-worse. Survival times are returned
  // unchanged.
  std::vector<double> response() const;

  // Rows selected by index (with repetition), e.g. a bootstrap resample.
  AnalysisDataset subset(const std::vector<std::size_t>& rows) const;

  // Same subjects with a different biomarker column.
  AnalysisDataset with_biomarker(std::vector<double> z) const;
};

// Throws DataError on any violated invariant.
void validate(const AnalysisDataset& ds);

struct CsvSchema {
  std::string id;  // optional; row number used when empty
  std::string treatment;
  std::string biomarker;
  std::string outcome;  // response, or time for survival
  std::string event;    // survival only
  std::vector<std::string> covariates;
  std::vector<std::string> categorical;
};

AnalysisDataset load_csv(const std::string& path, const CsvSchema& schema, const OutcomeSpec& spec);
AnalysisDataset parse_csv(std::istream& in, const CsvSchema& schema, const OutcomeSpec& spec);

// Which columns of a design hold treatment, biomarker and their product.
struct ColumnIndex {
  int intercept = -1;
  int treatment = -1;
  int biomarker = -1;
  int interaction = -1;
  int first_covariate = -1;
};

struct DesignMatrix {
  Eigen::MatrixXd W;
  std::vector<std::string> names;
  ColumnIndex index;
  std::vector<std::string> warnings;

  Eigen::Index covariate_count() const { return W.cols() - index.first_covariate; }
  // Encoded covariate rows (n x p), the population G-computation averages over.
  Eigen::MatrixXd covariate_block() const {
    return W.rightCols(covariate_count());
  }
};

struct EncodedCovariates {
  Eigen::MatrixXd X;
  std::vector<std::string> names;
  std::vector<std::string> warnings;
};

// Continuous covariates pass through; categorical ones become indicators for
// every level except the first in sorted order. Constant columns are dropped.
EncodedCovariates encode_covariates(const AnalysisDataset& ds);

// (1, A, Z, A*Z, X...) with an intercept; (A, Z, A*Z, X...) without (Cox).
DesignMatrix build_design(const AnalysisDataset& ds, bool intercept = true);

// Same layout with `marker` in place of the biomarker column, e.g. I(Z > c).
DesignMatrix build_design(const AnalysisDataset& ds, const std::vector<double>& marker,
                          bool intercept);

// rank / (n + 1) with midranks; strictly inside (0, 1) and order preserving.
std::vector<double> percentile_rescale(const std::vector<double>& z);

}  // namespace prime
