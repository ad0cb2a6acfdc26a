#include <gtest/gtest.h>

#include <thread>

#include "fdc/cart.hpp"
#include "fdc/expression.hpp"
#include "fdc/http.hpp"
#include "fdc/measures.hpp"
#include "fixtures.hpp"

using namespace fdc;

namespace {

/// PredictServer running on a background thread for the lifetime of the object.
class RunningServer {
 public:
  explicit RunningServer(const Predictor& model) : server_(model) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.listen(); });
    server_.wait_until_ready();
  }
  ~RunningServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::size_t requests() const { return server_.requests(); }

 private:
  PredictServer server_;
  int port_ = 0;
  std::thread thread_;
};

/// Raw httplib server answering every predict request with a fixed body.
class CannedServer {
 public:
  CannedServer(int status, std::string body) {
    server_.Post("/predict", [status, body](const httplib::Request&, httplib::Response& res) {
      res.status = status;
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~CannedServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

PredictErrc predict_error(const Predictor& p, const RowBatch& rows) {
  try {
    p.predict_batch(rows);
  } catch (const PredictError& e) {
    return e.code();
  }
  ADD_FAILURE() << "prediction succeeded";
  return PredictErrc::Evaluation;
}

int unused_port() {
  httplib::Server probe;
  const int port = probe.bind_to_any_port("127.0.0.1");
  return port;  // closed again when probe goes out of scope
}

}  // namespace

TEST(Http, SplitEndpoint) {
  EXPECT_EQ(http_detail::split_endpoint("http://h:9/base/"), (std::pair<std::string, std::string>{"http://h:9", "/base"}));
  EXPECT_EQ(http_detail::split_endpoint("localhost:80"), (std::pair<std::string, std::string>{"http://localhost:80", ""}));
}

TEST(Http, EchoServer) {
  const Dataset d = fx::column_dataset({4});
  const auto echo = ExpressionModel::parse("x1", d.schema());
  RunningServer server(echo);
  HttpPredictor remote(server.endpoint(), d.schema());
  EXPECT_EQ(remote.predict_batch(d.row_batch()), (std::vector<double>{4.0}));
  EXPECT_EQ(remote.concurrency(), Concurrency::SerialOnly);
}

TEST(Http, ChunkingPreservesOrder) {
  std::vector<double> v(250);
  for (std::size_t i = 0; i < 250; ++i) v[i] = static_cast<double>(i) * 0.5;
  const Dataset d = fx::column_dataset(v);
  const auto echo = ExpressionModel::parse("x1", d.schema());
  RunningServer server(echo);
  HttpPredictor remote(server.endpoint(), d.schema(), {100, 5000, 0});
  EXPECT_EQ(remote.predict_batch(d.row_batch()), v);
  EXPECT_EQ(server.requests(), 3u);
}

TEST(Http, AgreesWithInProcessModel) {
  const Dataset x = fx::mixed_dataset(300, 1);
  std::vector<double> y(300);
  Rng rng(2);
  for (std::size_t i = 0; i < 300; ++i) y[i] = x.cell(i, 0) * x.cell(i, 1) + x.cell(i, 3) + 0.1 * rng.normal();
  const Dataset d = x.with_target(y);
  const auto model = fit_cart(d, 8, 3);
  RunningServer server(model);
  HttpPredictor remote(server.endpoint(), d.schema(), {64, 5000, 0});
  const auto expected = model.predict_batch(d.row_batch());
  const auto got = remote.predict_batch(d.row_batch());
  ASSERT_EQ(got.size(), expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-12);
}

TEST(Http, NamedFailures) {
  const Dataset d(fx::numeric_schema(1), {{1, 2}});
  const RowBatch rows = d.row_batch();
  {
    CannedServer s(200, R"({"predictions": [1, 2, 3]})");
    EXPECT_EQ(predict_error(HttpPredictor(s.endpoint(), d.schema()), rows), PredictErrc::LengthMismatch);
  }
  {
    CannedServer s(503, R"({"error": "busy"})");
    EXPECT_EQ(predict_error(HttpPredictor(s.endpoint(), d.schema()), rows), PredictErrc::HttpStatus);
  }
  {
    CannedServer s(200, "not json");
    EXPECT_EQ(predict_error(HttpPredictor(s.endpoint(), d.schema()), rows), PredictErrc::MalformedResponse);
  }
  {
    CannedServer s(200, R"({"predictions": [1, null]})");
    EXPECT_EQ(predict_error(HttpPredictor(s.endpoint(), d.schema()), rows), PredictErrc::NonFinite);
  }
  {
    CannedServer s(200, R"({"result": [1, 2]})");
    EXPECT_EQ(predict_error(HttpPredictor(s.endpoint(), d.schema()), rows), PredictErrc::MalformedResponse);
  }
  const std::string dead = "http://127.0.0.1:" + std::to_string(unused_port());
  EXPECT_EQ(predict_error(HttpPredictor(dead, d.schema(), {10, 500, 1}), rows), PredictErrc::Transport);
}

TEST(Http, EmptyBatchMakesNoRequest) {
  const Dataset d = fx::column_dataset({1});
  const auto echo = ExpressionModel::parse("x1", d.schema());
  RunningServer server(echo);
  HttpPredictor remote(server.endpoint(), d.schema());
  EXPECT_TRUE(remote.predict_batch(RowBatch(d.schema_ptr(), 0)).empty());
  EXPECT_EQ(server.requests(), 0u);
}

TEST(Http, HandlerStatusCodes) {
  const Schema schema({{"x", FeatureKind::numeric()}, {"c", FeatureKind::categorical({"a", "b"})}});
  const auto m = ExpressionModel::parse("x + 10*(c == \"b\")", schema);
  auto ok = handle_predict_request(m, R"({"instances": [[1, "a"], [2.5, "b"]]})");
  EXPECT_EQ(ok.status, 200);
  EXPECT_EQ(ok.body, R"({"predictions":[1.0,12.5]})");
  EXPECT_EQ(handle_predict_request(m, R"({"instances": []})").body, R"({"predictions":[]})");
  EXPECT_EQ(handle_predict_request(m, "{not json").status, 400);
  EXPECT_EQ(handle_predict_request(m, R"({"rows": []})").status, 400);
  EXPECT_EQ(handle_predict_request(m, R"({"instances": [[1]]})").status, 400);
  EXPECT_EQ(handle_predict_request(m, R"({"instances": [["1", "a"]]})").status, 400);
  EXPECT_EQ(handle_predict_request(m, R"({"instances": [[1, "z"]]})").status, 400);
  const auto bad = ExpressionModel::parse("log(x)", schema);
  EXPECT_EQ(handle_predict_request(bad, R"({"instances": [[-1, "a"]]})").status, 500);
}

TEST(Http, BindFailureIsTransportError) {
  const auto m = ExpressionModel::parse("1", fx::numeric_schema(1));
  PredictServer first(m);
  const int port = first.bind("127.0.0.1", 0);
  PredictServer second(m);
  try {
    second.bind("127.0.0.1", port);
    FAIL();
  } catch (const PredictError& e) {
    EXPECT_EQ(e.code(), PredictErrc::Transport);
  }
}

TEST(Http, RemoteReportMatchesInProcess) {
  const Dataset x = fx::mixed_dataset(200, 3);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = x.cell(i, 0) - x.cell(i, 1) * x.cell(i, 2) + x.cell(i, 3);
  const Dataset d = x.with_target(y);
  const auto model = fit_cart(d, 5, 4);
  RunningServer server(model);
  HttpPredictor remote(server.endpoint(), d.schema(), {32, 5000, 0});
  MeasureConfig cfg;
  cfg.nf_samples = 100;
  cfg.grid_size = 20;
  const auto a = compute_report(model, d, cfg);
  const auto b = compute_report(remote, d, cfg);
  EXPECT_NEAR(a.f0, b.f0, 1e-9);
  EXPECT_EQ(a.nf.used, b.nf.used);
  EXPECT_NEAR(a.ias.value, b.ias.value, 1e-9);
  EXPECT_NEAR(a.mec.value, b.mec.value, 1e-9);
}
