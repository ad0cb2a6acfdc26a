#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fdc/dataset.hpp"
#include "fdc/error.hpp"
#include "fdc/predictor.hpp"

namespace fdc {

/// Interval grid for one numeric feature. Interval k (1-based) is
/// (z_{k-1}, z_k]; values equal to z_0 belong to interval 1.
struct Grid {
  std::size_t feature = 0;
  std::vector<double> boundaries;          // z_0 < ... < z_K
  std::vector<std::size_t> interval_counts;  // K entries
  bool degenerate = false;                 // constant column, single boundary

  std::size_t intervals() const noexcept { return degenerate ? 0 : boundaries.size() - 1; }

  /// 1-based interval of x under the (z_{k-1}, z_k] convention, clamped to [1, K].
  std::size_t interval_of(double x) const {
    const auto it = std::lower_bound(boundaries.begin() + 1, boundaries.end(), x);
    const auto k = static_cast<std::size_t>(it - boundaries.begin());
    return std::clamp<std::size_t>(k, 1, boundaries.size() - 1);
  }
};

namespace ale_detail {

inline std::vector<double> sorted_copy(std::span<const double> column) {
  std::vector<double> v(column.begin(), column.end());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace ale_detail

/// Quantile grid with K = min(max_intervals, distinct - 1) intervals.
///
/// When K reaches distinct - 1 the boundaries are exactly the distinct values.
/// Otherwise they are the inverse-ECDF quantiles (the smallest observation x
/// with F(x) >= k/K) for k = 0..K, deduplicated, so every boundary is an
/// observed value.
inline Grid build_grid(const Dataset& data, std::size_t feature, std::size_t max_intervals) {
  if (!data.feature(feature).kind.is_numeric()) {
    throw ConfigError("build_grid needs a numeric feature, got '" + data.feature(feature).name + "'");
  }
  if (max_intervals == 0) throw ConfigError("max_intervals must be positive");
  Grid grid;
  grid.feature = feature;
  const auto sorted = ale_detail::sorted_copy(data.column(feature));
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() == 1) {
    grid.boundaries = distinct;
    grid.degenerate = true;
    return grid;
  }
  const std::size_t k_max = std::min(max_intervals, distinct.size() - 1);
  if (k_max == distinct.size() - 1) {
    grid.boundaries = distinct;
  } else {
    const std::size_t n = sorted.size();
    for (std::size_t k = 0; k <= k_max; ++k) {
      // smallest index i (1-based) with i/n >= k/K  <=>  i = ceil(k*n/K)
      const std::size_t i = (k * n + k_max - 1) / k_max;
      const double q = sorted[i == 0 ? 0 : i - 1];
      if (grid.boundaries.empty() || q > grid.boundaries.back()) grid.boundaries.push_back(q);
    }
  }
  grid.interval_counts.assign(grid.boundaries.size() - 1, 0);
  for (double x : data.column(feature)) ++grid.interval_counts[grid.interval_of(x) - 1];
  return grid;
}

/// One feature's centered first-order ALE main effect.
///
/// Numeric curves hold values at the grid boundaries and interpolate linearly
/// in between, clamping outside [z_0, z_K]. Categorical curves hold one effect
/// per observed level, ordered by ascending effect.
struct AleCurve {
  std::size_t feature = 0;
  std::string name;
  Kind kind = Kind::Numeric;
  Grid grid;                       // numeric only
  std::vector<std::size_t> levels;  // categorical only: level indices, sorted by effect
  std::vector<double> values;      // centered curve at boundaries / per level
  double centering = 0.0;          // c_j
  double variance = 0.0;           // V_j = mean over data of curve(x)^2

  double eval(double x) const {
    if (kind == Kind::Categorical) {
      for (std::size_t k = 0; k < levels.size(); ++k) {
        if (static_cast<double>(levels[k]) == x) return values[k];
      }
      throw DataError(DataErrc::UnseenLevel, "level index " + std::to_string(x) + " of '" + name + "'");
    }
    return interpolate(grid.boundaries, values, x);
  }

  /// Position of a categorical level in the curve's effect order.
  std::size_t level_position(double x) const {
    for (std::size_t k = 0; k < levels.size(); ++k) {
      if (static_cast<double>(levels[k]) == x) return k;
    }
    throw DataError(DataErrc::UnseenLevel, "level index " + std::to_string(x) + " of '" + name + "'");
  }

  bool is_zero() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
  }

  static double interpolate(std::span<const double> xs, std::span<const double> ys, double x) {
    if (xs.size() == 1 || x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::lower_bound(xs.begin(), xs.end(), x);
    const auto k = static_cast<std::size_t>(it - xs.begin());
    if (xs[k] == x) return ys[k];
    const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return ys[k - 1] + t * (ys[k] - ys[k - 1]);
  }
};

/// Centers an accumulated curve so its mean over `data_values` is zero and
/// fills in centering and variance. The centering constant is the mean of the
/// interpolated uncentered curve at the data values.
inline AleCurve make_numeric_curve(std::size_t feature, std::string name, Grid grid, std::vector<double> uncentered,
                                   std::span<const double> data_values) {
  AleCurve curve;
  curve.feature = feature;
  curve.name = std::move(name);
  curve.kind = Kind::Numeric;
  const double n = static_cast<double>(data_values.size());
  double c = 0.0;
  for (double x : data_values) c += AleCurve::interpolate(grid.boundaries, uncentered, x);
  c /= n;
  curve.values.resize(uncentered.size());
  for (std::size_t k = 0; k < uncentered.size(); ++k) curve.values[k] = uncentered[k] - c;
  curve.grid = std::move(grid);
  curve.centering = c;
  double v = 0.0;
  for (double x : data_values) {
    const double a = curve.eval(x);
    v += a * a;
  }
  curve.variance = v / n;
  return curve;
}

inline AleCurve zero_curve(const Dataset& data, std::size_t feature, Grid grid) {
  AleCurve curve;
  curve.feature = feature;
  curve.name = data.feature(feature).name;
  curve.kind = Kind::Numeric;
  curve.values.assign(grid.boundaries.size(), 0.0);
  curve.grid = std::move(grid);
  return curve;
}

/// Finite-difference ALE for a numeric feature. Each row in interval k
/// contributes f(row, x_j := z_k) - f(row, x_j := z_{k-1}); increments are
/// averaged per interval (empty intervals contribute 0) and accumulated from
/// 0 at z_0. All lower and upper substitutions go out as two batches of n rows.
inline AleCurve estimate_ale_numeric(const Predictor& f, const Dataset& data, std::size_t feature, const Grid& grid) {
  if (grid.degenerate) throw ConfigError("degenerate grid for '" + data.feature(feature).name + "'");
  const std::size_t n = data.rows();
  const auto column = data.column(feature);
  RowBatch lower = data.row_batch();
  RowBatch upper = lower;
  std::vector<std::size_t> interval(n);
  for (std::size_t i = 0; i < n; ++i) {
    interval[i] = grid.interval_of(column[i]);
    lower.at(i, feature) = grid.boundaries[interval[i] - 1];
    upper.at(i, feature) = grid.boundaries[interval[i]];
  }
  const auto f_lower = f.predict_batch(lower);
  const auto f_upper = f.predict_batch(upper);

  const std::size_t k_count = grid.intervals();
  std::vector<double> sum(k_count + 1, 0.0);
  std::vector<std::size_t> count(k_count + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    sum[interval[i]] += f_upper[i] - f_lower[i];
    ++count[interval[i]];
  }
  std::vector<double> accumulated(k_count + 1, 0.0);
  for (std::size_t k = 1; k <= k_count; ++k) {
    const double d = count[k] ? sum[k] / static_cast<double>(count[k]) : 0.0;
    accumulated[k] = accumulated[k - 1] + d;
  }
  return make_numeric_curve(feature, data.feature(feature).name, grid, std::move(accumulated), column);
}

/// Categorical main effect as frequency-centered interventional level means:
/// m_l = mean_i f(row_i, x_j := l), e_l = m_l - sum_l w_l m_l with w_l the
/// level frequency. Only observed levels appear; they are stored in ascending
/// order of effect (ties by level index). One batch of n * L rows.
inline AleCurve estimate_ale_categorical(const Predictor& f, const Dataset& data, std::size_t feature) {
  if (!data.feature(feature).kind.is_categorical()) {
    throw ConfigError("'" + data.feature(feature).name + "' is not categorical");
  }
  const std::size_t n = data.rows();
  const auto column = data.column(feature);
  const std::size_t level_count = data.feature(feature).kind.levels.size();
  std::vector<std::size_t> freq(level_count, 0);
  for (double v : column) ++freq[static_cast<std::size_t>(v)];
  std::vector<std::size_t> observed;
  for (std::size_t l = 0; l < level_count; ++l) {
    if (freq[l]) observed.push_back(l);
  }

  const RowBatch base = data.row_batch();
  RowBatch batch(data.schema_ptr(), 0);
  for (std::size_t l : observed) {
    RowBatch copy = base;
    for (std::size_t i = 0; i < n; ++i) copy.at(i, feature) = static_cast<double>(l);
    batch.append(copy);
  }
  const auto preds = f.predict_batch(batch);

  std::vector<double> means(observed.size(), 0.0);
  double weighted = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += preds[k * n + i];
    means[k] = s / static_cast<double>(n);
    weighted += static_cast<double>(freq[observed[k]]) * means[k];
  }
  weighted /= static_cast<double>(n);

  std::vector<std::size_t> order(observed.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return means[a] < means[b]; });

  AleCurve curve;
  curve.feature = feature;
  curve.name = data.feature(feature).name;
  curve.kind = Kind::Categorical;
  curve.centering = weighted;
  double v = 0.0;
  for (std::size_t k : order) {
    const double effect = means[k] - weighted;
    curve.levels.push_back(observed[k]);
    curve.values.push_back(effect);
    v += static_cast<double>(freq[observed[k]]) * effect * effect;
  }
  curve.variance = v / static_cast<double>(n);
  return curve;
}

struct AleConfig {
  std::size_t max_intervals = 100;
  std::size_t workers = 1;  // features estimated concurrently; forced to 1 for SerialOnly predictors
};

/// f0 plus one centered main effect per feature: the first-order surrogate
/// f_ALE1st(x) = f0 + sum_j curve_j(x_j).
struct AleModel {
  double f0 = 0.0;
  std::vector<AleCurve> curves;
  std::uint64_t dataset_fingerprint = 0;
  std::uint64_t prediction_fingerprint = 0;  // hash of f over the dataset rows
  AleConfig config;

  double evaluate(std::span<const double> row) const {
    double y = f0;
    for (const auto& c : curves) y += c.eval(row[c.feature]);
    return y;
  }
};

inline std::uint64_t predictions_fingerprint(std::span<const double> predictions) {
  std::uint64_t h = detail::fnv1a("fdc-predictions");
  for (double v : predictions) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFFu;
      h *= 0x100000001B3ull;
    }
  }
  return h;
}

inline AleCurve estimate_feature_curve(const Predictor& f, const Dataset& data, std::size_t j,
                                       std::size_t max_intervals) {
  if (data.feature(j).kind.is_categorical()) return estimate_ale_categorical(f, data, j);
  Grid grid = build_grid(data, j, max_intervals);
  if (grid.degenerate) return zero_curve(data, j, std::move(grid));
  return estimate_ale_numeric(f, data, j, grid);
}

/// Estimates every main effect. Results do not depend on `config.workers`:
/// each feature's curve is computed independently with a fixed summation order.
inline AleModel build_ale_model(const Predictor& f, const Dataset& data, const AleConfig& config = {}) {
  AleModel model;
  model.config = config;
  model.dataset_fingerprint = data.fingerprint();
  const auto preds = f.predict_batch(data.row_batch());
  double s = 0.0;
  for (double v : preds) s += v;
  model.f0 = s / static_cast<double>(preds.size());
  model.prediction_fingerprint = predictions_fingerprint(preds);

  const std::size_t p = data.features();
  model.curves.resize(p);
  std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, p));
  if (f.concurrency() == Concurrency::SerialOnly) workers = 1;
  if (workers == 1) {
    for (std::size_t j = 0; j < p; ++j) model.curves[j] = estimate_feature_curve(f, data, j, config.max_intervals);
    return model;
  }
  std::vector<std::future<void>> tasks;
  for (std::size_t w = 0; w < workers; ++w) {
    tasks.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t j = w; j < p; j += workers) {
        model.curves[j] = estimate_feature_curve(f, data, j, config.max_intervals);
      }
    }));
  }
  for (auto& t : tasks) t.get();
  return model;
}

}  // namespace fdc
