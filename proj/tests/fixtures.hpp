#pragma once

// Small synthetic datasets shared by the test binaries.

#include <cstddef>
#include <string>
#include <vector>

#include "fdc/dataset.hpp"
#include "fdc/rng.hpp"

namespace fdc::fx {

inline Schema numeric_schema(std::size_t p, const std::string& prefix = "x") {
  std::vector<Feature> features;
  for (std::size_t j = 0; j < p; ++j) features.push_back({prefix + std::to_string(j + 1), FeatureKind::numeric()});
  return Schema(std::move(features));
}

/// Columns drawn i.i.d. N(0, 1), named x1..xp.
inline Dataset gaussian_dataset(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) cols[j][i] = rng.normal();
  }
  return Dataset(numeric_schema(p), std::move(cols));
}

/// Columns drawn i.i.d. Uniform(lo, hi), named x1..xp.
inline Dataset uniform_dataset(std::size_t n, std::size_t p, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) cols[j][i] = rng.uniform(lo, hi);
  }
  return Dataset(numeric_schema(p), std::move(cols));
}

/// x1, x2, x3 uniform on [-2, 2] rounded to 0.1 (so grids can cover every
/// distinct value) and c1 categorical over {a, b, c}.
inline Dataset mixed_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> cols(4, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) cols[j][i] = static_cast<double>(rng.uniform_int(-20, 20)) / 10.0;
    cols[3][i] = static_cast<double>(rng.uniform_index(3));
  }
  Schema schema({{"x1", FeatureKind::numeric()},
                 {"x2", FeatureKind::numeric()},
                 {"x3", FeatureKind::numeric()},
                 {"c1", FeatureKind::categorical({"a", "b", "c"})}});
  return Dataset(std::move(schema), std::move(cols));
}

/// Dataset with a single numeric column x1.
inline Dataset column_dataset(std::vector<double> values, const std::string& name = "x1") {
  return Dataset(Schema({{name, FeatureKind::numeric()}}), {std::move(values)});
}

/// Random expression over the mixed_dataset schema: a signed sum of 1 to 4
/// terms drawn from a pool mixing linear, curved, interaction and categorical
/// pieces. Every term is finite on that dataset's range.
inline std::string random_expression(Rng& rng) {
  static const char* pool[] = {"x1",           "x2^2",         "sin(x3)",          "x1*x2",
                               "abs(x2)",      "(c1 == \"b\")", "x3*(c1 == \"c\")", "max(x1, x3)",
                               "exp(x2/2)",    "x1*x2*x3",     "min(x3, 0.5)",     "cos(2*x1)",
                               "sqrt(x2 + 2)", "x3"};
  const std::size_t terms = 1 + static_cast<std::size_t>(rng.uniform_index(4));
  std::string src;
  for (std::size_t t = 0; t < terms; ++t) {
    const double coef = static_cast<double>(rng.uniform_int(1, 12)) / 4.0;
    if (t == 0) src += rng.uniform_index(2) ? "-" : "";
    else src += rng.uniform_index(2) ? " - " : " + ";
    src += std::to_string(coef) + "*" + pool[rng.uniform_index(std::size(pool))];
  }
  return src;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

}  // namespace fdc::fx
