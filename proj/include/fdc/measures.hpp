#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdc/ale.hpp"
#include "fdc/dataset.hpp"
#include "fdc/error.hpp"
#include "fdc/predictor.hpp"
#include "fdc/rng.hpp"
#include "fdc/segmented.hpp"

namespace fdc {

struct NfConfig {
  std::size_t samples = 500;  // M
  double tolerance = 0.0;     // tau; a feature counts as used when some |delta f| > tau
  std::uint64_t seed = 42;
};

struct NfResult {
  std::size_t count = 0;
  std::vector<bool> used;
  NfConfig config;
};

/// Number of features used, by perturbation.
///
/// For feature j, M rows are drawn (substream ("nf", j)); each gets x_j
/// replaced by a different observed value of the column. The feature is used
/// iff some prediction moves by more than tau. Rows whose value has no
/// alternative are skipped.
inline NfResult compute_nf(const Predictor& f, const Dataset& data, const NfConfig& config = {}) {
  if (config.samples == 0) throw ConfigError("NF sample count must be positive");
  if (!(config.tolerance >= 0.0)) throw ConfigError("NF tolerance must be nonnegative");
  const Rng root(config.seed);
  NfResult result;
  result.config = config;
  result.used.assign(data.features(), false);
  for (std::size_t j = 0; j < data.features(); ++j) {
    Rng rng = root.substream("nf", j);
    const auto indices = sample_row_indices(data, config.samples, rng);
    const ReplacementSampler sampler(data.column(j));
    RowBatch original(data.schema_ptr(), 0);
    RowBatch perturbed(data.schema_ptr(), 0);
    const RowBatch drawn = data.row_batch(indices);
    std::vector<double> row(data.features());
    for (std::size_t m = 0; m < indices.size(); ++m) {
      const auto source = drawn.row(m);
      const auto replacement = sampler.sample(source[j], rng);
      if (!replacement) continue;
      original.push_back(source);
      std::copy(source.begin(), source.end(), row.begin());
      row[j] = *replacement;
      perturbed.push_back(row);
    }
    if (original.empty()) continue;
    const auto before = f.predict_batch(original);
    const auto after = f.predict_batch(perturbed);
    for (std::size_t m = 0; m < before.size(); ++m) {
      if (std::fabs(after[m] - before[m]) > config.tolerance) {
        result.used[j] = true;
        break;
      }
    }
  }
  for (bool u : result.used) result.count += u ? 1 : 0;
  return result;
}

struct IasResult {
  double value = 0.0;
  double numerator = 0.0;    // sum (f - f_ALE1st)^2
  double denominator = 0.0;  // sum (f - f0)^2
};

/// Interaction strength: the squared-error of the first-order ALE surrogate
/// relative to the intercept-only model, over the dataset rows. Constant
/// predictions give 0.
inline IasResult compute_ias(const Predictor& f, const Dataset& data, const AleModel& ale) {
  if (ale.dataset_fingerprint != data.fingerprint()) {
    throw FingerprintMismatch("ALE model was built on a different dataset");
  }
  const RowBatch rows = data.row_batch();
  const auto preds = f.predict_batch(rows);
  if (predictions_fingerprint(preds) != ale.prediction_fingerprint) {
    throw FingerprintMismatch("ALE model was built from a different predictor");
  }
  IasResult result;
  bool constant = true;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double surrogate = ale.evaluate(rows.row(i));
    result.numerator += (preds[i] - surrogate) * (preds[i] - surrogate);
    result.denominator += (preds[i] - ale.f0) * (preds[i] - ale.f0);
    constant = constant && preds[i] == preds.front();
  }
  if (constant || result.denominator <= 0.0) {
    result.value = 0.0;
  } else {
    result.value = result.numerator / result.denominator;
  }
  return result;
}

struct MecFeature {
  std::size_t feature = 0;
  double variance = 0.0;
  int mec = 0;
  std::optional<SegmentedFit> fit;  // absent for zero-variance curves
};

struct MecResult {
  double value = 0.0;
  std::vector<MecFeature> per_feature;
  double epsilon = 0.05;
  std::size_t max_seg = 5;
};

/// Main effect complexity: per-feature segment fits, averaged with the curve
/// variances as weights. Zero-variance curves get MEC_j = 0 and no weight.
inline MecResult compute_mec(const AleModel& ale, const Dataset& data, double epsilon = 0.05, std::size_t max_seg = 5) {
  if (ale.dataset_fingerprint != data.fingerprint()) {
    throw FingerprintMismatch("ALE model was built on a different dataset");
  }
  MecResult result;
  result.epsilon = epsilon;
  result.max_seg = max_seg;
  double weight = 0.0;
  double weighted = 0.0;
  for (const auto& curve : ale.curves) {
    MecFeature mf;
    mf.feature = curve.feature;
    mf.variance = curve.variance;
    if (curve.variance > 0.0) {
      mf.fit = fit_segmented(curve, data.column(curve.feature), epsilon, max_seg);
      mf.mec = mf.fit->mec;
      weight += curve.variance;
      weighted += curve.variance * mf.mec;
    }
    result.per_feature.push_back(std::move(mf));
  }
  result.value = weight > 0.0 ? weighted / weight : 0.0;
  return result;
}

struct MeasureConfig {
  std::size_t grid_size = 100;
  double epsilon = 0.05;
  std::size_t max_seg = 5;
  std::size_t nf_samples = 500;
  double nf_tolerance = 0.0;
  std::uint64_t seed = 42;
  std::size_t workers = 1;

  AleConfig ale() const { return {grid_size, workers}; }
  NfConfig nf() const { return {nf_samples, nf_tolerance, seed}; }
};

struct Timing {
  double ale_ms = 0.0;
  double nf_ms = 0.0;
  double ias_ms = 0.0;
  double mec_ms = 0.0;
};

struct ComplexityReport {
  double f0 = 0.0;
  NfResult nf;
  IasResult ias;
  MecResult mec;
  AleModel ale;
  MeasureConfig config;
  Timing timing;
};

inline ComplexityReport compute_report(const Predictor& f, const Dataset& data, const MeasureConfig& config = {}) {
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };
  ComplexityReport report;
  report.config = config;
  auto t0 = Clock::now();
  report.ale = build_ale_model(f, data, config.ale());
  report.f0 = report.ale.f0;
  report.timing.ale_ms = ms_since(t0);
  t0 = Clock::now();
  report.nf = compute_nf(f, data, config.nf());
  report.timing.nf_ms = ms_since(t0);
  t0 = Clock::now();
  report.ias = compute_ias(f, data, report.ale);
  report.timing.ias_ms = ms_since(t0);
  t0 = Clock::now();
  report.mec = compute_mec(report.ale, data, config.epsilon, config.max_seg);
  report.timing.mec_ms = ms_since(t0);
  return report;
}

/// Curve export: [{"feature", "kind", "x", "value", "variance", "centering"}],
/// where x holds the grid boundaries or the level names in curve order.
inline nlohmann::ordered_json curves_to_json(const AleModel& ale, const Schema& schema) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& c : ale.curves) {
    nlohmann::ordered_json entry;
    entry["feature"] = c.name;
    entry["kind"] = to_string(c.kind);
    if (c.kind == Kind::Numeric) {
      entry["x"] = c.grid.boundaries;
    } else {
      auto levels = nlohmann::ordered_json::array();
      for (std::size_t l : c.levels) levels.push_back(schema[c.feature].kind.levels[l]);
      entry["x"] = std::move(levels);
    }
    entry["value"] = c.values;
    entry["variance"] = c.variance;
    entry["centering"] = c.centering;
    out.push_back(std::move(entry));
  }
  return out;
}

inline nlohmann::ordered_json config_to_json(const MeasureConfig& c) {
  nlohmann::ordered_json out;
  out["seed"] = c.seed;
  out["grid_size"] = c.grid_size;
  out["epsilon"] = c.epsilon;
  out["max_seg"] = c.max_seg;
  out["nf_samples"] = c.nf_samples;
  out["nf_tol"] = c.nf_tolerance;
  return out;
}

/// Report JSON. Timing is excluded unless requested so that identical inputs
/// produce identical bytes.
inline nlohmann::ordered_json report_to_json(const ComplexityReport& r, const Schema& schema,
                                             bool include_timing = false) {
  using J = nlohmann::ordered_json;
  J out;
  out["f0"] = r.f0;
  J used = J::object();
  for (std::size_t j = 0; j < schema.size(); ++j) used[schema[j].name] = static_cast<bool>(r.nf.used[j]);
  out["nf"] = {{"count", r.nf.count}, {"used", std::move(used)}};
  out["ias"] = {{"value", r.ias.value}, {"numerator", r.ias.numerator}, {"denominator", r.ias.denominator}};

  J per_feature = J::array();
  for (const auto& mf : r.mec.per_feature) {
    const auto& curve = r.ale.curves[mf.feature];
    J entry;
    entry["feature"] = schema[mf.feature].name;
    entry["kind"] = to_string(schema[mf.feature].kind.tag);
    entry["mec_j"] = mf.mec;
    entry["variance"] = mf.variance;
    entry["centering"] = curve.centering;
    J segments = J::array();
    if (mf.fit) {
      for (const auto& s : mf.fit->segments) {
        J seg = {{"lo", s.lo}, {"hi", s.hi}, {"intercept", s.intercept}, {"slope", s.slope}};
        if (curve.kind == Kind::Categorical) {
          J levels = J::array();
          for (auto k = static_cast<std::size_t>(s.lo); k <= static_cast<std::size_t>(s.hi); ++k) {
            levels.push_back(schema[mf.feature].kind.levels[curve.levels[k]]);
          }
          seg["levels"] = std::move(levels);
        }
        segments.push_back(std::move(seg));
      }
    }
    entry["segments"] = std::move(segments);
    entry["r2"] = mf.fit ? mf.fit->r2 : 1.0;
    per_feature.push_back(std::move(entry));
  }
  out["mec"] = {{"value", r.mec.value},
                {"per_feature", std::move(per_feature)},
                {"epsilon", r.mec.epsilon},
                {"max_seg", r.mec.max_seg}};
  out["config"] = config_to_json(r.config);
  if (include_timing) {
    out["timing_ms"] = {{"ale", r.timing.ale_ms}, {"nf", r.timing.nf_ms}, {"ias", r.timing.ias_ms},
                        {"mec", r.timing.mec_ms}};
  }
  return out;
}

}  // namespace fdc
