#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

// <resolv.h>, pulled in by httplib, defines a `_res` macro that breaks Eigen
// headers parsed after it; include Eigen first.
#include <Eigen/Core>

#include "httplib.h"
#include "json.hpp"

#include "fdc/dataset.hpp"
#include "fdc/error.hpp"
#include "fdc/predictor.hpp"

namespace fdc {

struct HttpOptions {
  std::size_t batch_size = 1000;
  int timeout_ms = 30000;
  int retries = 2;  // extra attempts after a transport failure
};

namespace http_detail {

using Json = nlohmann::ordered_json;

/// Splits "http://host:port/base" into ("http://host:port", "/base").
inline std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = endpoint.find('/', host_start);
  std::string origin = path_start == std::string::npos ? endpoint : endpoint.substr(0, path_start);
  std::string base = path_start == std::string::npos ? "" : endpoint.substr(path_start);
  while (!base.empty() && base.back() == '/') base.pop_back();
  if (scheme_end == std::string::npos) origin = "http://" + origin;
  return {origin, base};
}

/// {"instances": [[...], ...]} with numbers for numeric and level names for
/// categorical cells, in schema column order.
inline std::string encode_instances(const RowBatch& rows, std::size_t first, std::size_t count) {
  const Schema& schema = rows.schema();
  Json instances = Json::array();
  for (std::size_t i = first; i < first + count; ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const double v = rows.at(i, j);
      if (schema[j].kind.is_numeric()) row.push_back(v);
      else row.push_back(schema[j].kind.levels[static_cast<std::size_t>(v)]);
    }
    instances.push_back(std::move(row));
  }
  Json body;
  body["instances"] = std::move(instances);
  return body.dump();
}

}  // namespace http_detail

/// Remote black box speaking the JSON predict protocol:
///
///   POST {endpoint}/predict   {"instances": [[v1, v2, ...], ...]}
///   200                       {"predictions": [p1, ...]}
///
/// Rows are sent in chunks of at most batch_size, in order, one request in
/// flight at a time.
class HttpPredictor final : public Predictor {
 public:
  HttpPredictor(std::string endpoint, Schema schema, HttpOptions options = {})
      : endpoint_(std::move(endpoint)), schema_(std::move(schema)), options_(options) {
    if (options_.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (options_.retries < 0) throw ConfigError("retries must be nonnegative");
    std::tie(origin_, base_path_) = http_detail::split_endpoint(endpoint_);
  }

  const Schema& schema() const override { return schema_; }
  Concurrency concurrency() const override { return Concurrency::SerialOnly; }
  const HttpOptions& options() const noexcept { return options_; }
  const std::string& endpoint() const noexcept { return endpoint_; }

 protected:
  std::vector<double> do_predict(const RowBatch& rows) const override {
    httplib::Client client(origin_);
    const auto timeout = std::chrono::milliseconds(options_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    client.set_keep_alive(true);
    client.set_tcp_nodelay(true);  // small request bodies otherwise stall on delayed ACKs

    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t first = 0; first < rows.size(); first += options_.batch_size) {
      const std::size_t count = std::min(options_.batch_size, rows.size() - first);
      const auto chunk = post_chunk(client, http_detail::encode_instances(rows, first, count), count);
      out.insert(out.end(), chunk.begin(), chunk.end());
    }
    return out;
  }

 private:
  std::vector<double> post_chunk(httplib::Client& client, const std::string& body, std::size_t expected) const {
    const std::string path = base_path_ + "/predict";
    httplib::Result res;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      res = client.Post(path, body, "application/json");
      if (res) break;
    }
    if (!res) {
      throw PredictError(PredictErrc::Transport, endpoint_ + ": " + httplib::to_string(res.error()) + " after " +
                                                     std::to_string(options_.retries + 1) + " attempts");
    }
    if (res->status != 200) {
      throw PredictError(PredictErrc::HttpStatus,
                         std::to_string(res->status) + " from " + endpoint_ + ": " + res->body.substr(0, 200));
    }
    http_detail::Json doc;
    try {
      doc = http_detail::Json::parse(res->body);
    } catch (const http_detail::Json::parse_error& e) {
      throw PredictError(PredictErrc::MalformedResponse, e.what());
    }
    if (!doc.is_object() || !doc.contains("predictions") || !doc["predictions"].is_array()) {
      throw PredictError(PredictErrc::MalformedResponse, "missing predictions array");
    }
    const auto& preds = doc["predictions"];
    if (preds.size() != expected) {
      throw PredictError(PredictErrc::LengthMismatch, "server returned " + std::to_string(preds.size()) +
                                                          " predictions for " + std::to_string(expected) + " rows");
    }
    std::vector<double> out;
    out.reserve(expected);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (!preds[i].is_number() || !std::isfinite(preds[i].get<double>())) {
        throw PredictError(PredictErrc::NonFinite, "prediction " + std::to_string(i) + " is " + preds[i].dump());
      }
      out.push_back(preds[i].get<double>());
    }
    return out;
  }

  std::string endpoint_;
  Schema schema_;
  HttpOptions options_;
  std::string origin_;
  std::string base_path_;
};

struct PredictResponse {
  int status = 200;
  std::string body;
};

/// Decodes a predict request against the model's schema, runs the model and
/// encodes the reply. Malformed bodies yield 400, prediction failures 500.
inline PredictResponse handle_predict_request(const Predictor& model, const std::string& body) {
  using http_detail::Json;
  auto error = [](int status, const std::string& what) {
    Json doc;
    doc["error"] = what;
    return PredictResponse{status, doc.dump()};
  };
  Json doc;
  try {
    doc = Json::parse(body);
  } catch (const Json::parse_error& e) {
    return error(400, std::string("malformed json: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("instances") || !doc["instances"].is_array()) {
    return error(400, "body must be an object with an 'instances' array");
  }
  const Schema& schema = model.schema();
  const auto& instances = doc["instances"];
  RowBatch rows(std::make_shared<const Schema>(schema), instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (!inst.is_array() || inst.size() != schema.size()) {
      return error(400, "instance " + std::to_string(i) + " must be an array of " + std::to_string(schema.size()) +
                            " values");
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const auto& cell = inst[j];
      if (schema[j].kind.is_numeric()) {
        if (!cell.is_number()) return error(400, "instance " + std::to_string(i) + ": '" + schema[j].name + "' must be a number");
        rows.at(i, j) = cell.get<double>();
      } else {
        if (!cell.is_string()) return error(400, "instance " + std::to_string(i) + ": '" + schema[j].name + "' must be a string");
        const auto idx = schema[j].kind.level_index(cell.get<std::string>());
        if (!idx) return error(400, "instance " + std::to_string(i) + ": unknown level '" + cell.get<std::string>() + "'");
        rows.at(i, j) = static_cast<double>(*idx);
      }
    }
  }
  std::vector<double> preds;
  try {
    preds = model.predict_batch(rows);
  } catch (const Error& e) {
    return error(500, e.what());
  }
  Json reply;
  reply["predictions"] = preds;
  return {200, reply.dump()};
}

/// In-process predict server over any Predictor. Requests are handled one at
/// a time.
class PredictServer {
 public:
  explicit PredictServer(const Predictor& model) : model_(model) {
    // Several connection threads so an idle keep-alive client cannot starve
    // others; the model itself is only ever called under the lock.
    server_.new_task_queue = [] { return new httplib::ThreadPool(4); };
    // httplib's default adds SO_REUSEPORT, which lets a second server share
    // the port instead of failing to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    server_.set_tcp_nodelay(true);
    server_.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      ++requests_;
      const auto reply = handle_predict_request(model_, req.body);
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
    });
  }

  PredictServer(const PredictServer&) = delete;
  PredictServer& operator=(const PredictServer&) = delete;

  /// Binds to host:port (port 0 picks a free port) and returns the bound
  /// port. Throws PredictErrc::Transport when the address is unavailable.
  int bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
      bound = server_.bind_to_any_port(host);
    } else if (!server_.bind_to_port(host, port)) {
      bound = -1;
    }
    if (bound < 0) throw PredictError(PredictErrc::Transport, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  /// Serves until stop() is called.
  void listen() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  bool running() const { return server_.is_running(); }
  std::size_t requests() const noexcept { return requests_.load(); }

 private:
  const Predictor& model_;
  httplib::Server server_;
  std::mutex mutex_;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace fdc
