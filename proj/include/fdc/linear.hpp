#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fdc/dataset.hpp"
#include "fdc/error.hpp"
#include "fdc/predictor.hpp"

namespace fdc {

/// One column of the encoded design: a numeric feature, or the indicator of one
/// non-reference level of a categorical feature.
struct LinearTerm {
  std::size_t feature = 0;
  std::optional<std::size_t> level;
  double coefficient = 0.0;

  friend bool operator==(const LinearTerm&, const LinearTerm&) = default;
};

/// Design columns for a schema; categorical features are one-hot encoded with
/// the first level as reference.
inline std::vector<LinearTerm> design_terms(const Schema& schema) {
  std::vector<LinearTerm> terms;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& kind = schema[j].kind;
    if (kind.is_numeric()) {
      terms.push_back({j, std::nullopt, 0.0});
    } else {
      for (std::size_t l = 1; l < kind.levels.size(); ++l) terms.push_back({j, l, 0.0});
    }
  }
  return terms;
}

inline double term_value(const LinearTerm& t, std::span<const double> row) {
  if (!t.level) return row[t.feature];
  return row[t.feature] == static_cast<double>(*t.level) ? 1.0 : 0.0;
}

/// Ordinary least squares or lasso fit: intercept + sum of term coefficients.
class LinearModel final : public Predictor {
 public:
  enum class Method { Ols, Lasso };

  LinearModel(Schema schema, Method method, double intercept, std::vector<LinearTerm> terms, double lambda = 0.0)
      : schema_(std::move(schema)), method_(method), intercept_(intercept), terms_(std::move(terms)), lambda_(lambda) {
    validate();
  }

  const Schema& schema() const override { return schema_; }
  Method method() const noexcept { return method_; }
  double intercept() const noexcept { return intercept_; }
  const std::vector<LinearTerm>& terms() const noexcept { return terms_; }
  double lambda() const noexcept { return lambda_; }

  double predict_row(std::span<const double> row) const {
    double y = intercept_;
    for (const auto& t : terms_) y += t.coefficient * term_value(t, row);
    return y;
  }

  std::size_t nonzero_coefficients() const {
    return static_cast<std::size_t>(
        std::count_if(terms_.begin(), terms_.end(), [](const LinearTerm& t) { return t.coefficient != 0.0; }));
  }

  /// Per feature: does any of its coefficients differ from zero?
  std::vector<bool> features_used() const {
    std::vector<bool> used(schema_.size(), false);
    for (const auto& t : terms_) {
      if (t.coefficient != 0.0) used[t.feature] = true;
    }
    return used;
  }

  friend bool operator==(const LinearModel& a, const LinearModel& b) {
    return a.schema_ == b.schema_ && a.method_ == b.method_ && a.intercept_ == b.intercept_ && a.terms_ == b.terms_ &&
           a.lambda_ == b.lambda_;
  }

 protected:
  std::vector<double> do_predict(const RowBatch& rows) const override {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = predict_row(rows.row(i));
    return out;
  }

 private:
  void validate() const {
    if (!std::isfinite(intercept_)) throw ModelError(ModelErrc::InvariantViolation, "non-finite intercept");
    if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) throw ModelError(ModelErrc::InvariantViolation, "invalid lambda");
    for (const auto& t : terms_) {
      if (t.feature >= schema_.size()) throw ModelError(ModelErrc::InvariantViolation, "term feature out of range");
      const auto& kind = schema_[t.feature].kind;
      if (kind.is_numeric() == t.level.has_value()) {
        throw ModelError(ModelErrc::InvariantViolation, "term kind does not match feature '" + schema_[t.feature].name + "'");
      }
      if (t.level && *t.level >= kind.levels.size()) {
        throw ModelError(ModelErrc::InvariantViolation, "term level out of range");
      }
      if (!std::isfinite(t.coefficient)) throw ModelError(ModelErrc::InvariantViolation, "non-finite coefficient");
    }
  }

  Schema schema_;
  Method method_;
  double intercept_;
  std::vector<LinearTerm> terms_;
  double lambda_;
};

namespace linear_detail {

/// Encoded design without the intercept column. Indicator columns for levels
/// absent from the data are dropped (their coefficient stays 0), so fitting on
/// a row subset never fails merely because a level is missing from it.
struct Design {
  std::vector<LinearTerm> terms;
  Eigen::MatrixXd x;
};

inline Design encode(const Dataset& data) {
  Design d;
  const auto candidates = design_terms(data.schema());
  const std::size_t n = data.rows();
  std::vector<std::vector<double>> cols;
  for (const auto& t : candidates) {
    std::vector<double> col(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = data.cell(i, t.feature);
      col[i] = t.level ? (v == static_cast<double>(*t.level) ? 1.0 : 0.0) : v;
      any = any || col[i] != 0.0;
    }
    if (t.level && !any) continue;
    d.terms.push_back(t);
    cols.push_back(std::move(col));
  }
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t i = 0; i < n; ++i) d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = cols[c][i];
  }
  return d;
}

inline std::vector<LinearTerm> merge(const Schema& schema, const std::vector<LinearTerm>& fitted) {
  auto all = design_terms(schema);
  for (auto& t : all) {
    for (const auto& f : fitted) {
      if (f.feature == t.feature && f.level == t.level) t.coefficient = f.coefficient;
    }
  }
  return all;
}

}  // namespace linear_detail

/// Least squares with intercept. Throws ModelErrc::RankDeficient when the
/// encoded design (intercept included) is not of full column rank.
inline LinearModel fit_ols(const Dataset& data) {
  const auto y_span = data.target();
  auto design = linear_detail::encode(data);
  const auto n = static_cast<Eigen::Index>(data.rows());
  const auto k = design.x.cols();
  Eigen::MatrixXd a(n, k + 1);
  a.col(0).setOnes();
  a.rightCols(k) = design.x;
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(y_span.data(), n);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < k + 1) {
    throw ModelError(ModelErrc::RankDeficient, "design has rank " + std::to_string(qr.rank()) + " < " +
                                                   std::to_string(k + 1) + " columns");
  }
  const Eigen::VectorXd beta = qr.solve(y);
  for (Eigen::Index c = 0; c < k; ++c) design.terms[static_cast<std::size_t>(c)].coefficient = beta(c + 1);
  return LinearModel(data.schema(), LinearModel::Method::Ols, beta(0),
                     linear_detail::merge(data.schema(), design.terms));
}

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

struct LassoOptions {
  double tolerance = 1e-10;  // max standardized coefficient change per sweep
  std::size_t max_sweeps = 1'000'000;
};

/// Lasso by cyclic coordinate descent on standardized columns:
///
///   minimize (1/2n) * sum_i (y_i - b0 - x~_i . b)^2 + lambda * sum_j |b_j|
///
/// with x~ = (x - mean) / sd (population sd) and the target centered.
/// Coefficients are reported on the original scale. Constant columns keep a
/// zero coefficient.
inline LinearModel fit_lasso(const Dataset& data, double lambda, const LassoOptions& opts = {}) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a nonnegative real");
  const auto y_span = data.target();
  auto design = linear_detail::encode(data);
  const std::size_t n = data.rows();
  const std::size_t k = static_cast<std::size_t>(design.x.cols());
  const double inv_n = 1.0 / static_cast<double>(n);

  double y_mean = 0.0;
  for (double v : y_span) y_mean += v;
  y_mean *= inv_n;

  std::vector<double> mean(k, 0.0), sd(k, 0.0);
  std::vector<std::vector<double>> xs(k, std::vector<double>(n));
  for (std::size_t c = 0; c < k; ++c) {
    const auto col = design.x.col(static_cast<Eigen::Index>(c));
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += col(static_cast<Eigen::Index>(i));
    m *= inv_n;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = col(static_cast<Eigen::Index>(i)) - m;
      ss += d * d;
    }
    mean[c] = m;
    sd[c] = std::sqrt(ss * inv_n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[c][i] = sd[c] > 0.0 ? (col(static_cast<Eigen::Index>(i)) - m) / sd[c] : 0.0;
    }
  }

  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y_span[i] - y_mean;
  std::vector<double> beta(k, 0.0);

  bool converged = false;
  for (std::size_t sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
    double max_change = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (sd[c] == 0.0) continue;
      const auto& xc = xs[c];
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) rho += xc[i] * residual[i];
      rho = rho * inv_n + beta[c];
      const double updated = soft_threshold(rho, lambda);
      const double delta = updated - beta[c];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) residual[i] -= delta * xc[i];
        beta[c] = updated;
      }
      max_change = std::max(max_change, std::fabs(delta));
    }
    converged = max_change < opts.tolerance;
  }
  if (!converged) throw ModelError(ModelErrc::Training, "lasso coordinate descent did not converge");

  double intercept = y_mean;
  for (std::size_t c = 0; c < k; ++c) {
    const double coef = sd[c] > 0.0 ? beta[c] / sd[c] : 0.0;
    design.terms[c].coefficient = coef;
    intercept -= coef * mean[c];
  }
  return LinearModel(data.schema(), LinearModel::Method::Lasso, intercept,
                     linear_detail::merge(data.schema(), design.terms), lambda);
}

}  // namespace fdc
