// fdc: command-line frontend for the complexity measures.
//
// Exit codes: 0 success, 1 usage/configuration, 2 data, 3 predictor/transport.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <pthread.h>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "fdc/fdc.hpp"

namespace {

using namespace fdc;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kPredict = 3 };

struct Common {
  std::string data;
  std::string target;
  std::string out;
};

struct Source {
  std::string expr;
  std::string model;
  std::string endpoint;
  std::size_t batch_size = 1000;
  int timeout_ms = 30000;
  int retries = 2;
};

struct MeasureFlags {
  MeasureConfig config;
  std::string curves;
  bool timing = false;
  std::string feature;  // ale only
};

struct TrainFlags {
  std::string learner;
  double lambda = 1.0;
  int max_depth = 5;
  std::size_t min_leaf = 5;
};

struct SweepFlags {
  std::size_t iterations = 100;
  std::size_t folds = 5;
  std::vector<std::string> learners;
};

struct ServerFlags {
  std::string model;
  std::string host = "127.0.0.1";
  int port = 8080;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("FDC_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("FDC_SEED is not an unsigned integer: '") + env + "'");
  }
  return 42;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrc::MissingFile, path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

BuiltinModel load_model(const std::string& path) { return deserialize_model(read_file(path)); }

/// Columns the model knows get its kinds, so categorical levels parse in
/// the model's order even when they look numeric.
KindOverrides overrides_from(const Schema& schema) {
  KindOverrides out;
  for (const auto& f : schema.features()) out.emplace(f.name, f.kind);
  return out;
}

/// The dataset plus the predictor the flags select.
struct Loaded {
  Dataset data;
  std::optional<BuiltinModel> builtin;
  std::unique_ptr<Predictor> owned;

  const Predictor& predictor() const { return builtin ? as_predictor(*builtin) : *owned; }
};

Loaded load(const Common& c, const Source& s) {
  const int sources = !s.expr.empty() + !s.model.empty() + !s.endpoint.empty();
  if (sources != 1) throw ConfigError("exactly one of --expr, --model, --endpoint is required");
  if (!s.model.empty()) {
    auto model = load_model(s.model);
    const auto overrides = overrides_from(as_predictor(model).schema());
    return {load_csv(c.data, c.target, overrides), std::move(model), nullptr};
  }
  Loaded l{load_csv(c.data, c.target), std::nullopt, nullptr};
  if (!s.expr.empty()) {
    l.owned = std::make_unique<ExpressionModel>(ExpressionModel::parse(s.expr, l.data.schema()));
  } else {
    l.owned = std::make_unique<HttpPredictor>(s.endpoint, l.data.schema(),
                                              HttpOptions{s.batch_size, s.timeout_ms, s.retries});
  }
  return l;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--data", c.data, "input CSV")->required();
  cmd->add_option("--target", c.target, "target column name")->required();
  cmd->add_option("--out", c.out, "output file (default: standard output)");
}

void add_source(CLI::App* cmd, Source& s) {
  auto* e = cmd->add_option("--expr", s.expr, "expression model over the data's columns");
  auto* m = cmd->add_option("--model", s.model, "model JSON written by `fdc train`");
  auto* p = cmd->add_option("--endpoint", s.endpoint, "base URL of an HTTP predict server");
  e->excludes(m)->excludes(p);
  m->excludes(p);
  cmd->add_option("--batch-size", s.batch_size, "rows per HTTP request")->capture_default_str();
  cmd->add_option("--timeout-ms", s.timeout_ms, "HTTP timeout")->capture_default_str();
  cmd->add_option("--retries", s.retries, "HTTP retries after transport failures")->capture_default_str();
}

void add_measure_options(CLI::App* cmd, MeasureFlags& f) {
  auto& c = f.config;
  cmd->add_option("--grid-size", c.grid_size, "maximum ALE intervals per feature")->capture_default_str();
  cmd->add_option("--seed", c.seed, "seed (default 42, or FDC_SEED)")->capture_default_str();
  cmd->add_option("--workers", c.workers, "features estimated concurrently")->capture_default_str();
}

int cmd_measure(const Common& c, const Source& s, const MeasureFlags& f) {
  const auto l = load(c, s);
  const auto report = compute_report(l.predictor(), l.data, f.config);
  if (!f.curves.empty()) write_output(f.curves, dump(curves_to_json(report.ale, l.data.schema())));
  write_output(c.out, dump(report_to_json(report, l.data.schema(), f.timing)));
  return kOk;
}

int cmd_ale(const Common& c, const Source& s, const MeasureFlags& f) {
  const auto l = load(c, s);
  AleModel ale;
  if (f.feature.empty()) {
    ale = build_ale_model(l.predictor(), l.data, f.config.ale());
  } else {
    const auto j = l.data.schema().index_of(f.feature);
    if (!j) throw ConfigError("unknown feature '" + f.feature + "'");
    ale.curves.push_back(estimate_feature_curve(l.predictor(), l.data, *j, f.config.grid_size));
  }
  write_output(c.out, dump(curves_to_json(ale, l.data.schema())));
  return kOk;
}

int cmd_train(const Common& c, const TrainFlags& t) {
  const auto learner = learner_from_string(t.learner);
  if (!learner) throw ConfigError("unknown learner '" + t.learner + "' (expected ols, lasso or cart)");
  const auto data = load_csv(c.data, c.target);
  const auto model = fit_learner({*learner, t.lambda, t.max_depth, t.min_leaf}, data);
  const auto preds = as_predictor(model).predict_batch(data.row_batch());
  double sse = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sse += (preds[i] - data.target()[i]) * (preds[i] - data.target()[i]);
  std::cerr << "training MSE: " << sse / static_cast<double>(preds.size()) << "\n";
  write_output(c.out, serialize_model(model));
  return kOk;
}

int cmd_sweep(const Common& c, const SweepFlags& f, const MeasureFlags& m) {
  SearchSpace space;
  if (f.learners.empty()) {
    space = default_search_space();
  } else {
    for (const auto& name : f.learners) {
      const auto learner = learner_from_string(name);
      if (!learner) throw ConfigError("unknown learner '" + name + "'");
      space.push_back(LearnerRange{*learner});
    }
  }
  const auto data = load_csv(c.data, c.target);
  SweepConfig cfg{f.iterations, f.folds, m.config.seed, m.config};
  const auto cands = run_sweep(data, space, cfg);
  const std::string table = format_pareto_table(cands);
  if (c.out.empty() || c.out == "-") {
    // Candidates own standard output; the table moves to the error stream.
    std::cerr << table;
  } else {
    std::cout << table << std::flush;
  }
  write_output(c.out, dump(candidates_to_json(cands)));
  return kOk;
}

int cmd_mock_server(const ServerFlags& f) {
  // Signals are blocked before any thread starts and collected by sigwait.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  const auto model = load_model(f.model);
  PredictServer server(as_predictor(model));
  const int port = server.bind(f.host, f.port);
  std::cerr << "listening on " << f.host << ":" << port << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  server.listen();
  // listen() only returns early if the server failed; wake the waiter either way.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  std::cerr << "shut down" << std::endl;
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Functional complexity measures for black-box predictors"};
  app.require_subcommand(1);

  Common common;
  Source source;
  MeasureFlags mflags;
  mflags.config.seed = default_seed();
  TrainFlags tflags;
  SweepFlags sflags;
  ServerFlags server;

  auto* measure = app.add_subcommand("measure", "compute NF, IAS and MEC");
  add_common(measure, common);
  add_source(measure, source);
  add_measure_options(measure, mflags);
  measure->add_option("--epsilon", mflags.config.epsilon, "MEC approximation tolerance")->capture_default_str();
  measure->add_option("--max-seg", mflags.config.max_seg, "maximum segments per feature")->capture_default_str();
  measure->add_option("--nf-samples", mflags.config.nf_samples, "rows sampled for NF")->capture_default_str();
  measure->add_option("--nf-tol", mflags.config.nf_tolerance, "NF change tolerance")->capture_default_str();
  measure->add_option("--curves", mflags.curves, "also write the ALE curves here");
  measure->add_flag("--timing", mflags.timing, "include wall-clock timings in the report");

  auto* ale = app.add_subcommand("ale", "export ALE main-effect curves");
  add_common(ale, common);
  add_source(ale, source);
  add_measure_options(ale, mflags);
  ale->add_option("--feature", mflags.feature, "only this feature");

  auto* train = app.add_subcommand("train", "fit a builtin learner and write model JSON");
  add_common(train, common);
  train->add_option("--learner", tflags.learner, "ols, lasso or cart")->required();
  train->add_option("--lambda", tflags.lambda, "lasso penalty")->capture_default_str();
  train->add_option("--max-depth", tflags.max_depth, "cart depth limit")->capture_default_str();
  train->add_option("--min-leaf", tflags.min_leaf, "cart minimum leaf size")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "random hyperparameter search with a Pareto front");
  add_common(sweep, common);
  sweep->add_option("--iterations", sflags.iterations, "candidates to evaluate")->capture_default_str();
  sweep->add_option("--folds", sflags.folds, "cross-validation folds")->capture_default_str();
  sweep->add_option("--learners", sflags.learners, "subset of ols, lasso, cart")->delimiter(',');
  add_measure_options(sweep, mflags);
  sweep->add_option("--nf-samples", mflags.config.nf_samples, "rows sampled for NF")->capture_default_str();

  auto* mock = app.add_subcommand("mock-server", "serve a model over the HTTP predict protocol");
  mock->add_option("--model", server.model, "model JSON")->required();
  mock->add_option("--port", server.port, "port (0 picks a free one)")->capture_default_str();
  mock->add_option("--host", server.host, "bind address")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*measure) return cmd_measure(common, source, mflags);
  if (*ale) return cmd_ale(common, source, mflags);
  if (*train) return cmd_train(common, tflags);
  if (*sweep) return cmd_sweep(common, sflags, mflags);
  return cmd_mock_server(server);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const fdc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const fdc::ParseError& e) {
    std::cerr << "expression error: " << e.what() << "\n";
    return kUsage;
  } catch (const fdc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fdc::ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kData;
  } catch (const fdc::FoldError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kData;
  } catch (const fdc::PredictError& e) {
    std::cerr << "predictor error: " << e.what() << "\n";
    return kPredict;
  } catch (const fdc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPredict;
  }
}
