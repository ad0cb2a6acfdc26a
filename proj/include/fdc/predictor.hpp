#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fdc/dataset.hpp"
#include "fdc/error.hpp"

namespace fdc {

enum class Concurrency { ConcurrentSafe, SerialOnly };

/// Black-box prediction contract: a batch of rows in, one finite real per row out.
///
/// Callers may pass rows under any schema whose feature names and kinds match
/// the predictor's schema in order. Categorical cells are re-mapped by level
/// name; a level the predictor does not know raises PredictErrc::UnknownLevel.
/// Implementations override do_predict and only ever see rows expressed in
/// their own schema.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual const Schema& schema() const = 0;
  virtual Concurrency concurrency() const { return Concurrency::ConcurrentSafe; }

  std::vector<double> predict_batch(const RowBatch& rows) const {
    if (rows.empty()) {
      check_compatible(rows.schema());
      return {};
    }
    std::vector<double> out;
    if (&rows.schema() == &schema() || rows.schema() == schema()) {
      out = do_predict(rows);
    } else {
      out = do_predict(translate(rows));
    }
    if (out.size() != rows.size()) {
      throw PredictError(PredictErrc::LengthMismatch, "backend returned " + std::to_string(out.size()) +
                                                          " predictions for " + std::to_string(rows.size()) + " rows");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!std::isfinite(out[i])) throw PredictError(PredictErrc::NonFinite, "row " + std::to_string(i));
    }
    return out;
  }

  void check_compatible(const Schema& other) const {
    const Schema& own = schema();
    if (other.size() != own.size()) {
      throw PredictError(PredictErrc::SchemaMismatch, "expected " + std::to_string(own.size()) + " features, got " +
                                                          std::to_string(other.size()));
    }
    for (std::size_t j = 0; j < own.size(); ++j) {
      if (own[j].name != other[j].name || own[j].kind.tag != other[j].kind.tag) {
        throw PredictError(PredictErrc::SchemaMismatch,
                           "feature " + std::to_string(j) + " is '" + other[j].name + "' (" +
                               to_string(other[j].kind.tag) + "), expected '" + own[j].name + "' (" +
                               to_string(own[j].kind.tag) + ")");
      }
    }
  }

 protected:
  Predictor() = default;
  Predictor(const Predictor&) = default;
  Predictor& operator=(const Predictor&) = default;
  Predictor(Predictor&&) = default;
  Predictor& operator=(Predictor&&) = default;

  virtual std::vector<double> do_predict(const RowBatch& rows) const = 0;

 private:
  RowBatch translate(const RowBatch& rows) const {
    check_compatible(rows.schema());
    const Schema& own = schema();
    const Schema& theirs = rows.schema();
    std::vector<std::vector<double>> level_map(own.size());
    for (std::size_t j = 0; j < own.size(); ++j) {
      if (!own[j].kind.is_categorical()) continue;
      for (const auto& level : theirs[j].kind.levels) {
        const auto idx = own[j].kind.level_index(level);
        level_map[j].push_back(idx ? static_cast<double>(*idx) : -1.0);
      }
    }
    RowBatch out = rows;
    RowBatch mapped(std::make_shared<const Schema>(own), 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto r = out.row(i);
      for (std::size_t j = 0; j < own.size(); ++j) {
        if (!own[j].kind.is_categorical()) continue;
        const auto from = static_cast<std::size_t>(r[j]);
        const double to = from < level_map[j].size() ? level_map[j][from] : -1.0;
        if (to < 0) {
          throw PredictError(PredictErrc::UnknownLevel,
                             "feature '" + own[j].name + "' level index " + std::to_string(from));
        }
        r[j] = to;
      }
      mapped.push_back(r);
    }
    return mapped;
  }
};

}  // namespace fdc
