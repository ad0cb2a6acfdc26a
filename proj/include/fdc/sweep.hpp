#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdc/cart.hpp"
#include "fdc/dataset.hpp"
#include "fdc/error.hpp"
#include "fdc/linear.hpp"
#include "fdc/measures.hpp"
#include "fdc/model.hpp"
#include "fdc/pareto.hpp"
#include "fdc/rng.hpp"

namespace fdc {

enum class Learner { Ols, Lasso, Cart };

inline const char* to_string(Learner l) {
  switch (l) {
    case Learner::Ols: return "ols";
    case Learner::Lasso: return "lasso";
    case Learner::Cart: return "cart";
  }
  return "?";
}

inline std::optional<Learner> learner_from_string(std::string_view name) {
  if (name == "ols") return Learner::Ols;
  if (name == "lasso") return Learner::Lasso;
  if (name == "cart") return Learner::Cart;
  return std::nullopt;
}

/// A learner with concrete hyperparameters.
struct LearnerSpec {
  Learner learner = Learner::Ols;
  double lambda = 0.0;
  int max_depth = 0;
  std::size_t min_leaf = 0;
};

inline BuiltinModel fit_learner(const LearnerSpec& spec, const Dataset& data) {
  switch (spec.learner) {
    case Learner::Ols: return fit_ols(data);
    case Learner::Lasso: return fit_lasso(data, spec.lambda);
    case Learner::Cart: return fit_cart(data, spec.max_depth, spec.min_leaf);
  }
  throw ConfigError("unknown learner");
}

/// Hyperparameter ranges for one learner. Lasso lambda is drawn log-uniformly.
struct LearnerRange {
  Learner learner = Learner::Ols;
  double lambda_lo = 1e-4;
  double lambda_hi = 1e2;
  int depth_lo = 1;
  int depth_hi = 30;
  std::size_t leaf_lo = 1;
  std::size_t leaf_hi = 50;

  void validate() const {
    if (learner == Learner::Lasso &&
        !(lambda_lo > 0.0 && lambda_lo <= lambda_hi && std::isfinite(lambda_hi))) {
      throw ConfigError("lasso lambda range must satisfy 0 < lo <= hi < inf");
    }
    if (learner == Learner::Cart && !(depth_lo >= 1 && depth_lo <= depth_hi && leaf_lo >= 1 && leaf_lo <= leaf_hi)) {
      throw ConfigError("cart ranges must be non-empty and positive");
    }
  }

  LearnerSpec sample(Rng& rng) const {
    LearnerSpec spec;
    spec.learner = learner;
    if (learner == Learner::Lasso) spec.lambda = rng.log_uniform(lambda_lo, lambda_hi);
    if (learner == Learner::Cart) {
      spec.max_depth = static_cast<int>(rng.uniform_int(depth_lo, depth_hi));
      spec.min_leaf = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(leaf_lo), static_cast<std::int64_t>(leaf_hi)));
    }
    return spec;
  }
};

using SearchSpace = std::vector<LearnerRange>;

inline SearchSpace default_search_space() {
  return {LearnerRange{Learner::Ols}, LearnerRange{Learner::Lasso}, LearnerRange{Learner::Cart}};
}

/// k-fold cross-validated mean absolute error. Rows are shuffled with `rng`
/// and row at shuffled position i goes to fold i mod k.
inline double kfold_mae(const LearnerSpec& spec, const Dataset& data, std::size_t k, Rng rng) {
  const std::size_t n = data.rows();
  if (k < 2) throw ConfigError("k-fold needs at least 2 folds");
  if (n < k) throw ConfigError("k-fold needs at least as many rows as folds");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_index(i + 1))]);
  }
  const auto y = data.target();
  double total = 0.0;
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<std::size_t> train, test;
    for (std::size_t pos = 0; pos < n; ++pos) (pos % k == fold ? test : train).push_back(order[pos]);
    std::vector<double> preds;
    try {
      const BuiltinModel model = fit_learner(spec, data.select(train));
      preds = as_predictor(model).predict_batch(data.row_batch(test));
    } catch (const Error& e) {
      throw FoldError(fold, e.what());
    }
    for (std::size_t t = 0; t < test.size(); ++t) total += std::fabs(y[test[t]] - preds[t]);
  }
  return total / static_cast<double>(n);
}

struct Candidate {
  std::size_t iteration = 0;
  LearnerSpec spec;
  double mae = 0.0;
  std::size_t nf = 0;
  double mec = 0.0;
  double ias = 0.0;
  std::uint64_t model_fingerprint = 0;
  std::optional<std::string> error;
  bool pareto_optimal = false;

  Objectives objectives() const { return {mae, static_cast<double>(nf), mec, ias}; }
};

struct SweepConfig {
  std::size_t iterations = 100;
  std::size_t folds = 5;
  std::uint64_t seed = 42;
  MeasureConfig measures;
};

/// Marks pareto_optimal on the successful candidates.
inline void mark_pareto(std::vector<Candidate>& candidates) {
  std::vector<Objectives> points;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].pareto_optimal = false;
    if (candidates[i].error) continue;
    points.push_back(candidates[i].objectives());
    owner.push_back(i);
  }
  for (std::size_t f : pareto_front(points)) candidates[owner[f]].pareto_optimal = true;
}

/// Random search over the space. Iteration i draws from substream
/// ("sweep", i); every candidate is scored on the same folds (substream
/// ("folds", 0)). NF, MEC and IAS are measured on a refit over all rows.
/// Failures are recorded on the candidate.
inline std::vector<Candidate> run_sweep(const Dataset& data, const SearchSpace& space, const SweepConfig& config) {
  if (config.iterations == 0) throw ConfigError("iterations must be positive");
  if (space.empty()) throw ConfigError("search space is empty");
  for (const auto& r : space) r.validate();
  data.target();
  if (config.folds < 2 || data.rows() < config.folds) throw ConfigError("invalid fold count");

  const Rng root(config.seed);
  const Rng folds = root.substream("folds", 0);
  std::vector<Candidate> out;
  out.reserve(config.iterations);
  for (std::size_t i = 0; i < config.iterations; ++i) {
    Rng rng = root.substream("sweep", i);
    Candidate c;
    c.iteration = i;
    const auto& range = space[static_cast<std::size_t>(rng.uniform_index(space.size()))];
    c.spec = range.sample(rng);
    try {
      c.mae = kfold_mae(c.spec, data, config.folds, folds);
      const BuiltinModel model = fit_learner(c.spec, data);
      c.model_fingerprint = detail::fnv1a(model_to_json(model).dump());
      const auto report = compute_report(as_predictor(model), data, config.measures);
      c.nf = report.nf.count;
      c.mec = report.mec.value;
      c.ias = report.ias.value;
    } catch (const Error& e) {
      c.error = e.what();
    }
    out.push_back(std::move(c));
  }
  mark_pareto(out);
  return out;
}

inline nlohmann::ordered_json params_to_json(const LearnerSpec& spec) {
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  if (spec.learner == Learner::Lasso) params["lambda"] = spec.lambda;
  if (spec.learner == Learner::Cart) {
    params["max_depth"] = spec.max_depth;
    params["min_leaf"] = spec.min_leaf;
  }
  return params;
}

/// [{"learner", "params", "mae", "nf", "mec", "ias", "pareto"}] by iteration;
/// failed candidates carry "error" and null objectives.
inline nlohmann::ordered_json candidates_to_json(const std::vector<Candidate>& candidates) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& c : candidates) {
    nlohmann::ordered_json entry;
    entry["learner"] = to_string(c.spec.learner);
    entry["params"] = params_to_json(c.spec);
    if (c.error) {
      entry["mae"] = nullptr;
      entry["nf"] = nullptr;
      entry["mec"] = nullptr;
      entry["ias"] = nullptr;
      entry["error"] = *c.error;
    } else {
      entry["mae"] = c.mae;
      entry["nf"] = c.nf;
      entry["mec"] = c.mec;
      entry["ias"] = c.ias;
    }
    entry["pareto"] = c.pareto_optimal;
    out.push_back(std::move(entry));
  }
  return out;
}

/// Plain-text table of the Pareto-optimal candidates, sorted by MAE.
inline std::string format_pareto_table(const std::vector<Candidate>& candidates) {
  std::vector<const Candidate*> front;
  for (const auto& c : candidates) {
    if (c.pareto_optimal) front.push_back(&c);
  }
  std::stable_sort(front.begin(), front.end(), [](const Candidate* a, const Candidate* b) { return a->mae < b->mae; });
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%5s  %-6s %-28s %10s %4s %7s %7s\n", "iter", "model", "params", "MAE", "NF", "MEC",
                "IAS");
  out += line;
  for (const Candidate* c : front) {
    std::string params;
    if (c->spec.learner == Learner::Lasso) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "lambda=%.4g", c->spec.lambda);
      params = buf;
    } else if (c->spec.learner == Learner::Cart) {
      params = "max_depth=" + std::to_string(c->spec.max_depth) + " min_leaf=" + std::to_string(c->spec.min_leaf);
    }
    std::snprintf(line, sizeof line, "%5zu  %-6s %-28s %10.4f %4zu %7.2f %7.3f\n", c->iteration, to_string(c->spec.learner),
                  params.c_str(), c->mae, c->nf, c->mec, c->ias);
    out += line;
  }
  return out;
}

}  // namespace fdc
