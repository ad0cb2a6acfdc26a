#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fdc/error.hpp"
#include "fdc/rng.hpp"

namespace fdc {

enum class Kind { Numeric, Categorical };

inline const char* to_string(Kind kind) { return kind == Kind::Numeric ? "numeric" : "categorical"; }

/// Numeric, or categorical with an ordered duplicate-free level list.
struct FeatureKind {
  Kind tag = Kind::Numeric;
  std::vector<std::string> levels;

  static FeatureKind numeric() { return {}; }
  static FeatureKind categorical(std::vector<std::string> levels = {}) {
    return {Kind::Categorical, std::move(levels)};
  }

  bool is_numeric() const noexcept { return tag == Kind::Numeric; }
  bool is_categorical() const noexcept { return tag == Kind::Categorical; }

  std::optional<std::size_t> level_index(std::string_view level) const {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] == level) return i;
    }
    return std::nullopt;
  }

  friend bool operator==(const FeatureKind&, const FeatureKind&) = default;
};

struct Feature {
  std::string name;
  FeatureKind kind;

  friend bool operator==(const Feature&, const Feature&) = default;
};

/// Ordered feature list shared by datasets, row batches and predictors.
///
/// Cells are stored as doubles everywhere: numeric features hold their value,
/// categorical features hold the index into `kind.levels`.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Feature> features) : features_(std::move(features)) {
    for (std::size_t i = 0; i < features_.size(); ++i) {
      const auto& f = features_[i];
      if (f.kind.is_categorical()) {
        if (f.kind.levels.empty()) {
          throw DataError(DataErrc::InvalidDataset, "categorical feature '" + f.name + "' has no levels");
        }
        for (std::size_t a = 0; a < f.kind.levels.size(); ++a) {
          for (std::size_t b = a + 1; b < f.kind.levels.size(); ++b) {
            if (f.kind.levels[a] == f.kind.levels[b]) {
              throw DataError(DataErrc::InvalidDataset,
                              "duplicate level '" + f.kind.levels[a] + "' in '" + f.name + "'");
            }
          }
        }
      }
      for (std::size_t k = 0; k < i; ++k) {
        if (features_[k].name == f.name) throw DataError(DataErrc::DuplicateName, f.name);
      }
    }
  }

  std::size_t size() const noexcept { return features_.size(); }
  const Feature& operator[](std::size_t j) const { return features_[j]; }
  const std::vector<Feature>& features() const noexcept { return features_; }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t j = 0; j < features_.size(); ++j) {
      if (features_[j].name == name) return j;
    }
    return std::nullopt;
  }

  friend bool operator==(const Schema&, const Schema&) = default;

 private:
  std::vector<Feature> features_;
};

using SchemaPtr = std::shared_ptr<const Schema>;

/// Row-major block of feature rows tied to a schema.
class RowBatch {
 public:
  RowBatch() : schema_(std::make_shared<const Schema>()) {}
  RowBatch(SchemaPtr schema, std::size_t rows)
      : schema_(std::move(schema)), width_(schema_->size()), cells_(rows * width_, 0.0) {}

  const Schema& schema() const noexcept { return *schema_; }
  const SchemaPtr& schema_ptr() const noexcept { return schema_; }
  std::size_t size() const noexcept { return width_ == 0 ? 0 : cells_.size() / width_; }
  std::size_t width() const noexcept { return width_; }
  bool empty() const noexcept { return cells_.empty(); }

  std::span<double> row(std::size_t i) { return {cells_.data() + i * width_, width_}; }
  std::span<const double> row(std::size_t i) const { return {cells_.data() + i * width_, width_}; }
  double& at(std::size_t i, std::size_t j) { return cells_[i * width_ + j]; }
  double at(std::size_t i, std::size_t j) const { return cells_[i * width_ + j]; }

  void push_back(std::span<const double> row) {
    cells_.insert(cells_.end(), row.begin(), row.end());
  }

  /// Rows [first, first + count) as a new batch.
  RowBatch slice(std::size_t first, std::size_t count) const {
    RowBatch out(schema_, 0);
    out.cells_.assign(cells_.begin() + static_cast<std::ptrdiff_t>(first * width_),
                      cells_.begin() + static_cast<std::ptrdiff_t>((first + count) * width_));
    return out;
  }

  void append(const RowBatch& other) { cells_.insert(cells_.end(), other.cells_.begin(), other.cells_.end()); }

  std::span<const double> cells() const noexcept { return cells_; }

 private:
  SchemaPtr schema_;
  std::size_t width_ = 0;
  std::vector<double> cells_;
};

/// Immutable tabular data: n rows of p typed features plus an optional target.
class Dataset {
 public:
  Dataset(Schema schema, std::vector<std::vector<double>> columns,
          std::optional<std::vector<double>> target = std::nullopt, std::string target_name = {})
      : schema_(std::make_shared<const Schema>(std::move(schema))),
        columns_(std::move(columns)),
        target_(std::move(target)),
        target_name_(std::move(target_name)) {
    validate();
  }

  Dataset(SchemaPtr schema, std::vector<std::vector<double>> columns,
          std::optional<std::vector<double>> target, std::string target_name)
      : schema_(std::move(schema)),
        columns_(std::move(columns)),
        target_(std::move(target)),
        target_name_(std::move(target_name)) {
    validate();
  }

  std::size_t rows() const noexcept { return columns_.front().size(); }
  std::size_t features() const noexcept { return columns_.size(); }
  const Schema& schema() const noexcept { return *schema_; }
  const SchemaPtr& schema_ptr() const noexcept { return schema_; }
  const Feature& feature(std::size_t j) const { return (*schema_)[j]; }

  std::span<const double> column(std::size_t j) const { return columns_[j]; }
  double cell(std::size_t i, std::size_t j) const { return columns_[j][i]; }

  bool has_target() const noexcept { return target_.has_value(); }
  std::span<const double> target() const {
    if (!target_) throw DataError(DataErrc::InvalidDataset, "dataset has no target");
    return *target_;
  }
  const std::string& target_name() const noexcept { return target_name_; }

  RowBatch row_batch() const {
    RowBatch batch(schema_, rows());
    for (std::size_t j = 0; j < features(); ++j) {
      for (std::size_t i = 0; i < rows(); ++i) batch.at(i, j) = columns_[j][i];
    }
    return batch;
  }

  RowBatch row_batch(std::span<const std::size_t> indices) const {
    RowBatch batch(schema_, indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
      for (std::size_t j = 0; j < features(); ++j) batch.at(r, j) = columns_[j][indices[r]];
    }
    return batch;
  }

  /// Row subset sharing this dataset's schema (level lists are kept whole).
  Dataset select(std::span<const std::size_t> indices) const {
    std::vector<std::vector<double>> cols(features());
    for (std::size_t j = 0; j < features(); ++j) {
      cols[j].reserve(indices.size());
      for (std::size_t i : indices) cols[j].push_back(columns_[j][i]);
    }
    std::optional<std::vector<double>> tgt;
    if (target_) {
      tgt.emplace();
      tgt->reserve(indices.size());
      for (std::size_t i : indices) tgt->push_back((*target_)[i]);
    }
    return Dataset(schema_, std::move(cols), std::move(tgt), target_name_);
  }

  /// Same rows and schema, different target.
  Dataset with_target(std::vector<double> target, std::string name = "y") const {
    return Dataset(schema_, columns_, std::move(target), std::move(name));
  }

  /// FNV-1a over names, kinds, levels and the bit patterns of every cell.
  std::uint64_t fingerprint() const {
    std::uint64_t h = detail::fnv1a("fdc-dataset");
    auto mix_u64 = [&h](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xFFu;
        h *= 0x100000001B3ull;
      }
    };
    mix_u64(rows());
    for (std::size_t j = 0; j < features(); ++j) {
      const auto& f = feature(j);
      h = detail::fnv1a(f.name, h);
      mix_u64(static_cast<std::uint64_t>(f.kind.tag));
      for (const auto& level : f.kind.levels) h = detail::fnv1a(level, h);
      for (double v : columns_[j]) mix_u64(std::bit_cast<std::uint64_t>(v));
    }
    return h;
  }

 private:
  void validate() const {
    if (columns_.empty()) throw DataError(DataErrc::InvalidDataset, "no feature columns");
    if (columns_.size() != schema_->size()) {
      throw DataError(DataErrc::InvalidDataset, "column count does not match schema");
    }
    const std::size_t n = columns_.front().size();
    if (n == 0) throw DataError(DataErrc::EmptyBody, "dataset has no rows");
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      const auto& f = (*schema_)[j];
      if (columns_[j].size() != n) throw DataError(DataErrc::RaggedRow, "column '" + f.name + "' length differs");
      for (double v : columns_[j]) {
        if (!std::isfinite(v)) throw DataError(DataErrc::NonFiniteValue, "column '" + f.name + "'");
        if (f.kind.is_categorical()) {
          if (v < 0 || v != std::floor(v) || v >= static_cast<double>(f.kind.levels.size())) {
            throw DataError(DataErrc::UnseenLevel, "column '" + f.name + "' holds an invalid level index");
          }
        }
      }
    }
    if (target_) {
      if (target_->size() != n) throw DataError(DataErrc::RaggedRow, "target length differs");
      for (double v : *target_) {
        if (!std::isfinite(v)) throw DataError(DataErrc::NonFiniteValue, "target");
      }
    }
  }

  SchemaPtr schema_;
  std::vector<std::vector<double>> columns_;
  std::optional<std::vector<double>> target_;
  std::string target_name_;
};

/// Row indices for a sample of size m: without replacement when m <= n,
/// with replacement otherwise.
inline std::vector<std::size_t> sample_row_indices(const Dataset& data, std::size_t m, Rng& rng) {
  if (m == 0) throw ConfigError("sample size must be positive");
  const std::size_t n = data.rows();
  std::vector<std::size_t> out;
  out.reserve(m);
  if (m <= n) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    // partial Fisher-Yates
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k = i + static_cast<std::size_t>(rng.uniform_index(n - i));
      std::swap(pool[i], pool[k]);
      out.push_back(pool[i]);
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) out.push_back(static_cast<std::size_t>(rng.uniform_index(n)));
  }
  return out;
}

/// Draws replacement values for one column uniformly from the observed
/// multiset, excluding copies of the current value.
class ReplacementSampler {
 public:
  explicit ReplacementSampler(std::span<const double> column) : sorted_(column.begin(), column.end()) {
    std::sort(sorted_.begin(), sorted_.end());
  }

  /// nullopt when every observed value equals `current`.
  std::optional<double> sample(double current, Rng& rng) const {
    const auto [lo, hi] = std::equal_range(sorted_.begin(), sorted_.end(), current);
    const auto skip = static_cast<std::size_t>(hi - lo);
    const std::size_t eligible = sorted_.size() - skip;
    if (eligible == 0) return std::nullopt;
    std::size_t r = static_cast<std::size_t>(rng.uniform_index(eligible));
    const auto before = static_cast<std::size_t>(lo - sorted_.begin());
    if (r >= before) r += skip;
    return sorted_[r];
  }

 private:
  std::vector<double> sorted_;
};

inline std::optional<double> sample_replacement_value(const Dataset& data, std::size_t feature, double current,
                                                      Rng& rng) {
  return ReplacementSampler(data.column(feature)).sample(current, rng);
}

}  // namespace fdc
