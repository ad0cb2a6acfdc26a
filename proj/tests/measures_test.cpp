#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fdc/ale.hpp"
#include "fdc/expression.hpp"
#include "fdc/linear.hpp"
#include "fdc/measures.hpp"
#include "fdc/segmented.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fdc;
using fx::exhaustive_two_segment_r2;
using fx::manual_curve;

namespace {

ExpressionModel expr(const std::string& src, const Dataset& d) { return ExpressionModel::parse(src, d.schema()); }

constexpr std::size_t kFullGrid = 1'000'000;

std::vector<double> symmetric_values(int half) {
  std::vector<double> v;
  for (int i = -half; i <= half; ++i) v.push_back(i);
  return v;
}

}  // namespace

// ---------------------------------------------------------------- NF

TEST(Nf, ConstantPredictorUsesNothing) {
  const Dataset d = fx::mixed_dataset(100, 1);
  const auto r = compute_nf(expr("4", d), d);
  EXPECT_EQ(r.count, 0u);
}

TEST(Nf, ExactDependence) {
  const Dataset d = fx::gaussian_dataset(200, 5, 2);
  const auto r = compute_nf(expr("x1 + x3", d), d, {500, 0.0, 42});
  EXPECT_EQ(r.count, 2u);
  EXPECT_EQ(r.used, (std::vector<bool>{true, false, true, false, false}));
}

TEST(Nf, CategoricalAndConstantColumns) {
  const Dataset base = fx::mixed_dataset(100, 3);
  const auto r = compute_nf(expr("x2 * (c1 == \"c\")", base), base);
  EXPECT_EQ(r.used, (std::vector<bool>{false, true, false, true}));
  const Dataset flat(fx::numeric_schema(2), {std::vector<double>(9, 1.0), symmetric_values(4)});
  EXPECT_EQ(compute_nf(expr("x1 + x2", flat), flat).used, (std::vector<bool>{false, true}));
}

TEST(Nf, DeterministicAndToleranceMonotone) {
  const Dataset d = fx::mixed_dataset(300, 4);
  const auto f = expr("x1 + 0.01*x2 + 0.0001*x3 + 1e-6*(c1 == \"a\")", d);
  const auto a = compute_nf(f, d, {50, 0.0, 7});
  EXPECT_EQ(a.used, compute_nf(f, d, {50, 0.0, 7}).used);
  EXPECT_EQ(a.count, 4u);
  std::vector<bool> previous = a.used;
  for (double tau : {1e-7, 1e-5, 1e-3, 0.1, 10.0}) {
    const auto r = compute_nf(f, d, {50, tau, 7});
    EXPECT_LE(r.count, d.features());
    for (std::size_t j = 0; j < r.used.size(); ++j) {
      if (r.used[j]) {
        EXPECT_TRUE(previous[j]) << tau;
      }
    }
    previous = r.used;
  }
  EXPECT_EQ(compute_nf(f, d, {50, 10.0, 7}).count, 0u);
}

TEST(Nf, RejectsBadConfig) {
  const Dataset d = fx::mixed_dataset(10, 4);
  EXPECT_THROW(compute_nf(expr("x1", d), d, {0, 0.0, 1}), ConfigError);
  EXPECT_THROW(compute_nf(expr("x1", d), d, {5, -1.0, 1}), ConfigError);
}

TEST(Nf, MatchesLassoNonzeroCount) {
  Dataset x = fx::gaussian_dataset(200, 8, 5);
  Rng rng(6);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = 3 * x.cell(i, 0) - 2 * x.cell(i, 1) + x.cell(i, 2) + rng.normal();
  const Dataset d = x.with_target(y);
  for (double lambda : {10.0, 1.0, 0.1, 0.001}) {
    const auto m = fit_lasso(d, lambda);
    EXPECT_EQ(compute_nf(m, d).count, m.nonzero_coefficients()) << lambda;
  }
}

// ---------------------------------------------------------------- IAS

TEST(Ias, AdditiveIsZeroOnFullGrid) {
  const Dataset d = fx::mixed_dataset(400, 7);
  const auto f = expr("x1 + x2^2", d);
  const auto ale = build_ale_model(f, d, {kFullGrid, 1});
  EXPECT_LE(compute_ias(f, d, ale).value, 1e-10);
}

TEST(Ias, ConstantPredictorIsZero) {
  const Dataset d = fx::mixed_dataset(50, 8);
  const auto f = expr("2", d);
  const auto r = compute_ias(f, d, build_ale_model(f, d));
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.denominator, 0.0);
}

TEST(Ias, PureInteractionNearOne) {
  const Dataset d = fx::uniform_dataset(2000, 2, 9);
  const auto f = expr("x1*x2", d);
  EXPECT_GE(compute_ias(f, d, build_ale_model(f, d)).value, 0.95);
}

TEST(Ias, FingerprintChecks) {
  const Dataset d = fx::mixed_dataset(80, 10);
  const Dataset other = fx::mixed_dataset(80, 11);
  const auto f = expr("x1*x2", d);
  const auto ale = build_ale_model(f, d);
  EXPECT_THROW(compute_ias(f, other, ale), FingerprintMismatch);
  EXPECT_THROW(compute_ias(expr("x1*x3", d), d, ale), FingerprintMismatch);
  EXPECT_THROW(compute_mec(ale, other), FingerprintMismatch);
}

TEST(Ias, InvariantUnderAffineMaps) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset d = fx::mixed_dataset(250, static_cast<std::uint64_t>(100 + trial));
    const std::string src = fx::random_expression(rng);
    SCOPED_TRACE(src);
    const auto f = expr(src, d);
    const auto g = expr("-2.5*(" + src + ") + 11", d);
    const double a = compute_ias(f, d, build_ale_model(f, d, {20, 1})).value;
    const double b = compute_ias(g, d, build_ale_model(g, d, {20, 1})).value;
    EXPECT_NEAR(a, b, 1e-9);
  }
}

// ---------------------------------------------------------------- segmented fit

TEST(Segmented, LinearCurve) {
  const auto xs = symmetric_values(10);
  const AleCurve c = manual_curve(xs, [&] {
    std::vector<double> v;
    for (double x : xs) v.push_back(2 * x - 3);
    return v;
  }(), xs);
  const auto fit = fit_segmented(c, xs, 0.05, 5);
  EXPECT_EQ(fit.segments_used, 1u);
  EXPECT_EQ(fit.mec, 1);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
}

TEST(Segmented, AbsoluteValue) {
  const auto xs = symmetric_values(10);
  std::vector<double> v;
  for (double x : xs) v.push_back(std::fabs(x));
  const auto fit = fit_segmented(manual_curve(xs, v, xs), xs, 0.05, 5);
  EXPECT_EQ(fit.segments_used, 2u);
  EXPECT_EQ(fit.nonzero_slopes(), 2u);
  EXPECT_EQ(fit.mec, 3);
  // Splitting after -1 or after 0 both fit exactly; either is correct.
  ASSERT_EQ(fit.breakpoints.size(), 1u);
  EXPECT_TRUE(fit.breakpoints[0] == -1.0 || fit.breakpoints[0] == 0.0) << fit.breakpoints[0];
}

TEST(Segmented, NumericStep) {
  const auto xs = symmetric_values(10);
  std::vector<double> v;
  for (double x : xs) v.push_back(x > 0 ? 1.0 : 0.0);
  const auto fit = fit_segmented(manual_curve(xs, v, xs), xs, 0.05, 5);
  EXPECT_EQ(fit.segments_used, 2u);
  EXPECT_EQ(fit.nonzero_slopes(), 0u);
  EXPECT_EQ(fit.mec, 1);
}

TEST(Segmented, CategoricalTwoLevels) {
  const Dataset d(Schema({{"c", FeatureKind::categorical({"a", "b"})}}), {{0, 1, 1, 0, 1}});
  const AleCurve c = estimate_ale_categorical(expr("3*(c == \"b\")", d), d, 0);
  const auto fit = fit_segmented(c, d.column(0), 0.05, 5);
  EXPECT_EQ(fit.segments_used, 2u);
  EXPECT_EQ(fit.mec, 1);
}

TEST(Segmented, CategoricalSlopesAlwaysZero) {
  const Dataset d = fx::mixed_dataset(300, 13);
  const AleCurve c = estimate_ale_categorical(expr("(c1 == \"a\") + 2*(c1 == \"b\")", d), d, 3);
  const auto fit = fit_segmented(c, d.column(3), 0.0, 5);
  EXPECT_EQ(fit.nonzero_slopes(), 0u);
  EXPECT_EQ(fit.segments_used, 3u);
  EXPECT_EQ(fit.mec, 2);
}

TEST(Segmented, GreedyMatchesExhaustiveOracleAtTwoSegments) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t nb = 3 + rng.uniform_index(10);  // 3..12 boundaries
    std::vector<double> z(nb), a(nb);
    double x = rng.uniform(-2, 0);
    for (std::size_t k = 0; k < nb; ++k) {
      z[k] = x;
      x += rng.uniform(0.1, 1.0);
      a[k] = rng.uniform(-3, 3);
    }
    std::vector<double> data(z.begin(), z.end());
    for (int i = 0; i < 40; ++i) data.push_back(rng.uniform(z.front(), z.back()));
    const AleCurve c = manual_curve(z, a, data);
    for (std::size_t max_seg : {2u, 3u}) {
      const auto fit = fit_segmented(c, data, 0.0, max_seg);
      ASSERT_GE(fit.r2_path.size(), 2u);
      EXPECT_NEAR(fit.r2_path[1], exhaustive_two_segment_r2(c, data), 1e-9) << "trial " << trial;
    }
  }
}

TEST(Segmented, GrowthLoopProperties) {
  Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nb = 2 + rng.uniform_index(30);
    std::vector<double> z(nb), a(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      z[k] = static_cast<double>(k) + rng.uniform(0, 0.5);
      a[k] = (k ? a[k - 1] : 0.0) + rng.normal();
    }
    std::vector<double> data(z.begin(), z.end());
    for (int i = 0; i < 60; ++i) data.push_back(rng.uniform(z.front(), z.back()));
    const AleCurve c = manual_curve(z, a, data);
    const double eps = rng.uniform(0.0, 0.2);
    const std::size_t max_seg = 1 + rng.uniform_index(6);
    const auto fit = fit_segmented(c, data, eps, max_seg);
    for (std::size_t k = 1; k < fit.r2_path.size(); ++k) EXPECT_GE(fit.r2_path[k], fit.r2_path[k - 1] - 1e-12);
    EXPECT_TRUE(fit.r2 >= 1 - eps || fit.segments_used == max_seg || fit.breakpoints.size() + 2 > nb)
        << fit.r2 << " K=" << fit.segments_used;
    EXPECT_LE(fit.segments_used, max_seg);
    EXPECT_EQ(fit.breakpoints.size() + 1, fit.segments_used);
    for (const auto& s : fit.segments) EXPECT_GE(s.rows, 2u);
    std::size_t total = 0;
    for (const auto& s : fit.segments) total += s.rows;
    EXPECT_EQ(total, data.size());
    EXPECT_EQ(fit.mec, static_cast<int>(fit.segments_used + fit.nonzero_slopes()) - 1);
    for (double b : fit.breakpoints) {
      EXPECT_NE(std::find(z.begin() + 1, z.end() - 1, b), z.end() - 1);
    }
  }
}

TEST(Segmented, RejectsBadParameters) {
  const auto xs = symmetric_values(3);
  const AleCurve c = manual_curve(xs, xs, xs);
  EXPECT_THROW(fit_segmented(c, xs, 0.05, 0), ConfigError);
  EXPECT_THROW(fit_segmented(c, xs, 1.5, 3), ConfigError);
}

// ---------------------------------------------------------------- MEC

TEST(Mec, LinearAdditiveIsOneExactly) {
  const Dataset d = fx::gaussian_dataset(300, 4, 16);
  const auto f = expr("3*x1 - 2*x2 + 0.5*x3 + 7", d);
  const auto ale = build_ale_model(f, d);
  const auto r = compute_mec(ale, d);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_EQ(r.per_feature[3].mec, 0);
  EXPECT_FALSE(r.per_feature[3].fit);
}

TEST(Mec, SingleFeatureIgnoresMagnitude) {
  const Dataset d = fx::column_dataset(symmetric_values(20));
  for (const char* src : {"abs(x1)", "1e-6*abs(x1)", "1e6*abs(x1)"}) {
    const auto r = compute_mec(build_ale_model(expr(src, d), d, {kFullGrid, 1}), d);
    EXPECT_EQ(r.value, 3.0) << src;
  }
}

TEST(Mec, VarianceWeightedMean) {
  // x and |x| main effects rescaled to equal variance: mec = (1 + 3) / 2.
  const auto xs = symmetric_values(20);
  const Dataset d(fx::numeric_schema(2), {xs, xs});
  double var_x = 0, mean_abs = 0, var_abs = 0;
  for (double x : xs) var_x += x * x, mean_abs += std::fabs(x);
  var_x /= static_cast<double>(xs.size());
  mean_abs /= static_cast<double>(xs.size());
  for (double x : xs) var_abs += (std::fabs(x) - mean_abs) * (std::fabs(x) - mean_abs);
  var_abs /= static_cast<double>(xs.size());
  char src[128];
  std::snprintf(src, sizeof src, "x1 + %.17g*abs(x2)", std::sqrt(var_x / var_abs));
  const auto r = compute_mec(build_ale_model(expr(src, d), d, {kFullGrid, 1}), d);
  EXPECT_EQ(r.per_feature[0].mec, 1);
  EXPECT_EQ(r.per_feature[1].mec, 3);
  EXPECT_NEAR(r.per_feature[0].variance, r.per_feature[1].variance, 1e-9);
  EXPECT_NEAR(r.value, 2.0, 1e-9);
}

TEST(Mec, CategoricalOneHotTerm) {
  const Dataset d = fx::mixed_dataset(300, 17);
  const auto r = compute_mec(build_ale_model(expr("x1 + 2*(c1 == \"b\") - (c1 == \"c\")", d), d), d);
  EXPECT_EQ(r.per_feature[0].mec, 1);
  EXPECT_EQ(r.per_feature[3].mec, 2);
}

TEST(Mec, BoundsAndAffineInvariance) {
  Rng rng(18);
  for (int trial = 0; trial < 15; ++trial) {
    const Dataset d = fx::mixed_dataset(250, static_cast<std::uint64_t>(200 + trial));
    const std::string src = fx::random_expression(rng);
    SCOPED_TRACE(src);
    const auto base = compute_mec(build_ale_model(expr(src, d), d, {30, 1}), d);
    const auto moved = compute_mec(build_ale_model(expr("0.01*(" + src + ") - 40", d), d, {30, 1}), d);
    int lo = std::numeric_limits<int>::max(), hi = 0;
    double wsum = 0, vsum = 0;
    for (std::size_t j = 0; j < base.per_feature.size(); ++j) {
      EXPECT_EQ(base.per_feature[j].mec, moved.per_feature[j].mec) << j;
      const auto& pf = base.per_feature[j];
      if (pf.variance > 0) {
        lo = std::min(lo, pf.mec);
        hi = std::max(hi, pf.mec);
        wsum += pf.variance * pf.mec;
        vsum += pf.variance;
      }
    }
    if (vsum > 0) {
      EXPECT_GE(base.value, lo - 1e-12);
      EXPECT_LE(base.value, hi + 1e-12);
      EXPECT_NEAR(base.value, wsum / vsum, 1e-12);
    }
  }
}

// ---------------------------------------------------------------- report

TEST(Report, ConstantPredictor) {
  const Dataset d = fx::mixed_dataset(60, 19);
  const auto r = compute_report(expr("3.5", d), d);
  EXPECT_EQ(r.f0, 3.5);
  EXPECT_EQ(r.nf.count, 0u);
  EXPECT_EQ(r.ias.value, 0.0);
  EXPECT_EQ(r.mec.value, 0.0);
}

TEST(Report, LinearSingleFeature) {
  const Dataset d = fx::mixed_dataset(300, 20);
  MeasureConfig config;
  config.grid_size = kFullGrid;
  const auto r = compute_report(expr("2*x1 + 1", d), d, config);
  EXPECT_EQ(r.nf.count, 1u);
  EXPECT_LE(r.ias.value, 1e-10);
  EXPECT_EQ(r.mec.value, 1.0);
}

TEST(Report, JsonIsDeterministicAndWorkerIndependent) {
  const Dataset d = fx::mixed_dataset(300, 21);
  const auto f = expr("x1*x2 + abs(x3) + (c1 == \"a\")", d);
  MeasureConfig config;
  config.seed = 5;
  const auto a = report_to_json(compute_report(f, d, config), d.schema()).dump();
  config.workers = 4;
  const auto b = report_to_json(compute_report(f, d, config), d.schema()).dump();
  EXPECT_EQ(a, b);
  const auto j = nlohmann::ordered_json::parse(a);
  EXPECT_EQ(j["config"]["seed"], 5);
  EXPECT_FALSE(j.contains("timing_ms"));
  EXPECT_EQ(j["nf"]["used"]["x1"], true);
  EXPECT_EQ(j["mec"]["per_feature"].size(), 4u);
  EXPECT_TRUE(report_to_json(compute_report(f, d, config), d.schema(), true).contains("timing_ms"));
}

TEST(Report, CurveExport) {
  const Dataset d = fx::mixed_dataset(100, 22);
  const auto ale = build_ale_model(expr("x1 + (c1 == \"b\")", d), d);
  const auto j = curves_to_json(ale, d.schema());
  ASSERT_EQ(j.size(), 4u);
  EXPECT_EQ(j[0]["kind"], "numeric");
  EXPECT_EQ(j[0]["x"].size(), j[0]["value"].size());
  EXPECT_EQ(j[3]["kind"], "categorical");
  EXPECT_EQ(j[3]["x"].back(), "b");
}
