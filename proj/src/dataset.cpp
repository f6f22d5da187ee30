#include "prime/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/tokenizer.hpp>

#include "prime/error.hpp"
#include "prime/numeric.hpp"

namespace prime {

const char* to_string(OutcomeFamily f) {
  switch (f) {
    case OutcomeFamily::continuous: return "continuous";
    case OutcomeFamily::binary: return "binary";
    case OutcomeFamily::survival: return "survival";
  }
  return "?";
}

OutcomeFamily parse_family(const std::string& s) {
  if (s == "continuous") return OutcomeFamily::continuous;
  if (s == "binary") return OutcomeFamily::binary;
  if (s == "survival") return OutcomeFamily::survival;
  throw UsageError("unknown outcome type '" + s + "'");
}

Direction parse_direction(const std::string& s) {
  if (s == "higher-is-worse" || s == "higher") return Direction::higher_is_worse;
  if (s == "lower-is-worse" || s == "lower") return Direction::lower_is_worse;
  throw UsageError("unknown direction '" + s + "'");
}

std::vector<double> AnalysisDataset::response() const {
  std::vector<double> y = outcome;
  if (spec.direction == Direction::lower_is_worse) {
    if (spec.family == OutcomeFamily::binary)
      for (auto& v : y) v = 1.0 - v;
    else if (spec.family == OutcomeFamily::continuous)
      for (auto& v : y) v = -v;
  }
  return y;
}

AnalysisDataset AnalysisDataset::subset(const std::vector<std::size_t>& rows) const {
  AnalysisDataset out;
  out.spec = spec;
  out.covariates.resize(covariates.size());
  for (std::size_t k = 0; k < covariates.size(); ++k) {
    out.covariates[k].name = covariates[k].name;
    out.covariates[k].categorical = covariates[k].categorical;
    out.covariates[k].levels = covariates[k].levels;
  }
  for (auto r : rows) {
    out.ids.push_back(ids[r]);
    out.treatment.push_back(treatment[r]);
    out.biomarker.push_back(biomarker[r]);
    out.outcome.push_back(outcome[r]);
    if (!event.empty()) out.event.push_back(event[r]);
    for (std::size_t k = 0; k < covariates.size(); ++k) {
      if (covariates[k].categorical)
        out.covariates[k].codes.push_back(covariates[k].codes[r]);
      else
        out.covariates[k].values.push_back(covariates[k].values[r]);
    }
  }
  return out;
}

AnalysisDataset AnalysisDataset::with_biomarker(std::vector<double> z) const {
  if (z.size() != size()) throw DataError("replacement biomarker has the wrong length");
  AnalysisDataset out = *this;
  out.biomarker = std::move(z);
  return out;
}

void validate(const AnalysisDataset& ds) {
  const std::size_t n = ds.size();
  if (n == 0) throw DataError("dataset is empty");
  if (ds.biomarker.size() != n || ds.outcome.size() != n || ds.ids.size() != n)
    throw DataError("column lengths differ");
  std::size_t treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ds.treatment[i] != 0 && ds.treatment[i] != 1)
      throw DataError("treatment outside {0,1} at row " + std::to_string(i + 1));
    treated += static_cast<std::size_t>(ds.treatment[i]);
    if (!std::isfinite(ds.biomarker[i]))
      throw DataError("biomarker not finite at row " + std::to_string(i + 1));
    if (!std::isfinite(ds.outcome[i]))
      throw DataError("outcome not finite at row " + std::to_string(i + 1));
  }
  if (treated == 0 || treated == n) throw DataError("both treatment arms must be non-empty");
  switch (ds.spec.family) {
    case OutcomeFamily::binary:
      for (std::size_t i = 0; i < n; ++i)
        if (ds.outcome[i] != 0.0 && ds.outcome[i] != 1.0)
          throw DataError("binary outcome outside {0,1} at row " + std::to_string(i + 1));
      break;
    case OutcomeFamily::survival: {
      if (ds.event.size() != n) throw DataError("survival outcome requires an event column");
      for (std::size_t i = 0; i < n; ++i) {
        if (!(ds.outcome[i] > 0.0))
          throw DataError("survival time must be positive at row " + std::to_string(i + 1));
        if (ds.event[i] != 0 && ds.event[i] != 1)
          throw DataError("event indicator outside {0,1} at row " + std::to_string(i + 1));
      }
      if (ds.spec.landmark) {
        const double t = *ds.spec.landmark;
        const auto [lo, hi] = std::minmax_element(ds.outcome.begin(), ds.outcome.end());
        if (!(t > 0.0) || t > *hi || t < *lo)
          throw DataError("landmark time outside the observed follow-up range");
      }
      break;
    }
    case OutcomeFamily::continuous:
      break;
  }
  if (ds.spec.family != OutcomeFamily::survival && ds.spec.landmark)
    throw DataError("a landmark time applies only to survival outcomes");
  for (const auto& c : ds.covariates) {
    if (c.categorical ? c.codes.size() != n : c.values.size() != n)
      throw DataError("covariate '" + c.name + "' has the wrong length");
    if (!c.categorical)
      for (double v : c.values)
        if (!std::isfinite(v)) throw DataError("covariate '" + c.name + "' not finite");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  using Tok = boost::tokenizer<boost::escaped_list_separator<char>>;
  Tok tok(line, boost::escaped_list_separator<char>('\\', ',', '"'));
  std::vector<std::string> out;
  for (const auto& t : tok) out.push_back(trim(t));
  return out;
}

double parse_number(const std::string& cell, const std::string& column, std::size_t row) {
  if (cell.empty() || cell == "NA" || cell == "NaN")
    throw DataError("missing value in column '" + column + "' at row " + std::to_string(row));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != cell.size())
    throw DataError("non-numeric value '" + cell + "' in column '" + column + "' at row " +
                    std::to_string(row));
  return v;
}

int parse_indicator(const std::string& cell, const std::string& column, std::size_t row,
                    const char* what) {
  const double v = parse_number(cell, column, row);
  if (v != 0.0 && v != 1.0)
    throw DataError(std::string(what) + " outside {0,1} in column '" + column + "' at row " +
                    std::to_string(row));
  return static_cast<int>(v);
}

}  // namespace

AnalysisDataset parse_csv(std::istream& in, const CsvSchema& schema, const OutcomeSpec& spec) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input has no header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < header.size(); ++j) col[header[j]] = j;

  auto require = [&](const std::string& name) -> std::size_t {
    auto it = col.find(name);
    if (it == col.end()) throw DataError("missing column '" + name + "'");
    return it->second;
  };
  if (spec.family == OutcomeFamily::survival && schema.event.empty())
    throw UsageError("survival outcomes need an event column");

  const std::size_t c_trt = require(schema.treatment);
  const std::size_t c_z = require(schema.biomarker);
  const std::size_t c_y = require(schema.outcome);
  const std::optional<std::size_t> c_id =
      schema.id.empty() ? std::nullopt : std::optional(require(schema.id));
  const std::optional<std::size_t> c_ev = spec.family == OutcomeFamily::survival
                                              ? std::optional(require(schema.event))
                                              : std::nullopt;

  AnalysisDataset ds;
  ds.spec = spec;
  std::vector<std::size_t> c_cov;
  for (const auto& name : schema.covariates) {
    c_cov.push_back(require(name));
    Covariate c;
    c.name = name;
    c.categorical = std::find(schema.categorical.begin(), schema.categorical.end(), name) !=
                    schema.categorical.end();
    ds.covariates.push_back(std::move(c));
  }
  for (const auto& name : schema.categorical) {
    if (std::find(schema.covariates.begin(), schema.covariates.end(), name) ==
        schema.covariates.end()) {
      c_cov.push_back(require(name));
      Covariate c;
      c.name = name;
      c.categorical = true;
      ds.covariates.push_back(std::move(c));
    }
  }

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " fields, header has " + std::to_string(header.size()));
    ds.ids.push_back(c_id ? cells[*c_id] : std::to_string(row));
    if (c_id && cells[*c_id].empty())
      throw DataError("missing value in column '" + schema.id + "' at row " + std::to_string(row));
    const double a = parse_number(cells[c_trt], schema.treatment, row);
    if (a != 0.0 && a != 1.0)
      throw DataError("treatment outside {0,1} in column '" + schema.treatment + "' at row " +
                      std::to_string(row));
    ds.treatment.push_back(static_cast<int>(a));
    ds.biomarker.push_back(parse_number(cells[c_z], schema.biomarker, row));
    if (spec.family == OutcomeFamily::binary)
      ds.outcome.push_back(parse_indicator(cells[c_y], schema.outcome, row, "binary outcome"));
    else
      ds.outcome.push_back(parse_number(cells[c_y], schema.outcome, row));
    if (c_ev) ds.event.push_back(parse_indicator(cells[*c_ev], schema.event, row, "event indicator"));
    for (std::size_t k = 0; k < c_cov.size(); ++k) {
      auto& cov = ds.covariates[k];
      const auto& cell = cells[c_cov[k]];
      if (cov.categorical) {
        if (cell.empty() || cell == "NA")
          throw DataError("missing value in column '" + cov.name + "' at row " +
                          std::to_string(row));
        cov.codes.push_back(cell);
      } else {
        cov.values.push_back(parse_number(cell, cov.name, row));
      }
    }
  }
  for (auto& cov : ds.covariates) {
    if (!cov.categorical) continue;
    std::set<std::string> lv(cov.codes.begin(), cov.codes.end());
    cov.levels.assign(lv.begin(), lv.end());
  }
  validate(ds);
  return ds;
}

AnalysisDataset load_csv(const std::string& path, const CsvSchema& schema, const OutcomeSpec& spec) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, schema, spec);
}

EncodedCovariates encode_covariates(const AnalysisDataset& ds) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  std::vector<Eigen::VectorXd> cols;
  EncodedCovariates out;
  auto push = [&](Eigen::VectorXd v, std::string name) {
    if (n > 0 && (v.array() == v(0)).all()) {
      out.warnings.push_back("covariate column '" + name + "' is constant and was dropped");
      return;
    }
    cols.push_back(std::move(v));
    out.names.push_back(std::move(name));
  };
  for (const auto& c : ds.covariates) {
    if (!c.categorical) {
      push(Eigen::Map<const Eigen::VectorXd>(c.values.data(), n), c.name);
      continue;
    }
    auto levels = c.levels;
    if (levels.empty()) {
      std::set<std::string> lv(c.codes.begin(), c.codes.end());
      levels.assign(lv.begin(), lv.end());
    }
    for (std::size_t l = 1; l < levels.size(); ++l) {
      Eigen::VectorXd v(n);
      for (Eigen::Index i = 0; i < n; ++i) v(i) = c.codes[i] == levels[l] ? 1.0 : 0.0;
      push(std::move(v), c.name + "=" + levels[l]);
    }
  }
  out.X.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.X.col(static_cast<Eigen::Index>(j)) = cols[j];
  return out;
}

DesignMatrix build_design(const AnalysisDataset& ds, const std::vector<double>& marker,
                          bool intercept) {
  const auto n = static_cast<Eigen::Index>(ds.size());
  if (marker.size() != ds.size()) throw DataError("marker column has the wrong length");
  auto enc = encode_covariates(ds);
  const Eigen::Index lead = intercept ? 4 : 3;
  DesignMatrix d;
  d.W.resize(n, lead + enc.X.cols());
  Eigen::Index j = 0;
  if (intercept) {
    d.W.col(j).setOnes();
    d.names.push_back("(Intercept)");
    d.index.intercept = static_cast<int>(j++);
  }
  d.index.treatment = static_cast<int>(j++);
  d.index.biomarker = static_cast<int>(j++);
  d.index.interaction = static_cast<int>(j++);
  d.index.first_covariate = static_cast<int>(j);
  d.names.insert(d.names.end(), {"A", "Z", "A:Z"});
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = ds.treatment[i];
    const double z = marker[i];
    d.W(i, d.index.treatment) = a;
    d.W(i, d.index.biomarker) = z;
    d.W(i, d.index.interaction) = a * z;
  }
  d.W.rightCols(enc.X.cols()) = enc.X;
  d.names.insert(d.names.end(), enc.names.begin(), enc.names.end());
  d.warnings = std::move(enc.warnings);
  return d;
}

DesignMatrix build_design(const AnalysisDataset& ds, bool intercept) {
  return build_design(ds, ds.biomarker, intercept);
}

std::vector<double> percentile_rescale(const std::vector<double>& z) {
  auto r = midranks(z);
  const double denom = static_cast<double>(z.size()) + 1.0;
  for (auto& v : r) v /= denom;
  return r;
}

}  // namespace prime
