#include <gtest/gtest.h>
#include <httplib.h>

#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>
#include <thread>

#include "echoflag/error.hpp"
#include "echoflag/harness.hpp"
#include "echoflag/io.hpp"
#include "echoflag/service/review.hpp"
#include "echoflag/synthgen.hpp"
#include "support.hpp"

namespace echoflag::service {
namespace {

using json = nlohmann::json;

std::vector<float> decode_f32(const std::string& b64) {
  const auto bytes = base64_decode(b64);
  std::vector<float> out(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), out.size() * 4);
  return out;
}

TEST(Base64, RoundTrip) {
  for (std::size_t n : {0U, 1U, 2U, 3U, 4U, 100U}) {
    std::vector<std::uint8_t> bytes(n);
    for (std::size_t i = 0; i < n; ++i) bytes[i] = static_cast<std::uint8_t>(i * 37 + 1);
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
  }
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>{'M', 'a'}), "TWE=");
  EXPECT_THROW(base64_decode("@@@"), Error);
}

TEST(MaxPoolTile, PoolsPerRow) {
  Echogram e(2, 5, 0.0, 0.2, {1, 5, 2, 8, 3, -1, -2, -3, -4, -5});
  EXPECT_EQ(max_pool_tile(e, 0, 5, 5), (std::vector<float>{1, 5, 2, 8, 3, -1, -2, -3, -4, -5}));
  // width 2 over 5 pings: [0, 2) and [2, 5)
  EXPECT_EQ(max_pool_tile(e, 0, 5, 2), (std::vector<float>{5, 8, -1, -3}));
  EXPECT_EQ(max_pool_tile(e, 1, 3, 1), (std::vector<float>{8, -2}));
  EXPECT_THROW(max_pool_tile(e, 3, 3, 1), Error);
}

TEST(CorrectionEvent, JsonRoundTripAndReplay) {
  CorrectionEvent e{"s1", 2, 4, {10.123456, 11.5}, "ana", 1700000000, 1};
  EXPECT_EQ(CorrectionEvent::from_json(e.to_json()).to_json(), e.to_json());
  EXPECT_THROW(CorrectionEvent::from_json("{\"start\":1}"), Error);
  CorrectionEvent f{"s1", 3, 5, {20.0, 21.0}, "ana", 1700000001, 2};
  const auto r = replay({1, 2, 3, 4, 5, 6}, {e, f});
  EXPECT_EQ(r, (std::vector<double>{1, 2, 10.123456, 20.0, 21.0, 6}));
}

TEST(CorrectionLog, AppendsDurablyAndReloads) {
  testing::TempDir dir;
  const auto path = dir / "s.corrections.ndjson";
  {
    CorrectionLog log(path);
    EXPECT_EQ(log.last_seq(), 0U);
    log.append({"s", 0, 1, {3.0}, "a", 1, 1});
    log.append({"s", 1, 2, {4.0}, "a", 2, 2});
  }
  CorrectionLog again(path);
  ASSERT_EQ(again.events().size(), 2U);
  EXPECT_EQ(again.last_seq(), 2U);
  EXPECT_EQ(io::split_lines(io::read_text(path)).size(), 2U);
}

// One generated survey with a small model, written to disk once per suite.
class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = std::filesystem::temp_directory_path() / "echoflag_service_suite";
    std::filesystem::remove_all(root_);
    std::filesystem::create_directories(root_ / "logs");
    synthgen::SurveyConfig c;
    c.cols = 1000;
    c.seed = 3;
    const auto s = synthgen::generate(c);
    save_echogram(s.echogram, root_ / "s.echg");
    write_bottom_csv(s.bottom, root_ / "s.bottom.csv");
    const auto prepared = harness::prepare_survey(s.echogram, s.bottom);
    auto [x, stats] = standardize(prepared.data.x);
    auto data = prepared.data;
    data.x = std::move(x);
    const auto m = learn::train(learn::CnnSpec{{5, 5, 5}, {8, 8, 8}, 0.5}, data, nullptr, {.epochs = 1}, stats);
    learn::save_model(m, root_ / "m.bin");
    io::write_text(root_ / "svc.json", R"({"surveys":[
      {"id":"s","echogram":"s.echg","bottom":"s.bottom.csv","model":"m.bin"},
      {"id":"bare","echogram":"s.echg","bottom":"s.bottom.csv"}],
      "log_dir":"logs","mc_passes":5})");
  }
  static void TearDownTestSuite() { std::filesystem::remove_all(root_); }

  void SetUp() override {
    std::filesystem::remove_all(root_ / "logs");
    std::filesystem::create_directories(root_ / "logs");
  }

  static ReviewService make() {
    return ReviewService(ServiceConfig::load(root_ / "svc.json"), [] { return std::int64_t{1700000000}; });
  }
  static json get(ReviewService& svc, const std::string& path, const Query& q = {}) {
    const auto r = svc.handle("GET", path, q, "");
    EXPECT_EQ(r.status, 200) << path << ": " << r.body;
    return json::parse(r.body);
  }
  static Response post(ReviewService& svc, const json& body) {
    return svc.handle("POST", "/surveys/s/corrections", {}, body.dump());
  }

  static inline std::filesystem::path root_;
};

TEST_F(ServiceTest, ListAndMeta) {
  auto svc = make();
  const auto list = get(svc, "/surveys");
  ASSERT_EQ(list["surveys"].size(), 2U);
  EXPECT_EQ(list["surveys"][0]["id"], "s");
  const auto raw = load_echogram(root_ / "s.echg");
  const auto meta = get(svc, "/surveys/s/meta");
  EXPECT_EQ(meta["rows"], raw.rows());
  EXPECT_EQ(meta["cols"], raw.cols());
  EXPECT_EQ(meta["depth_step_m"], raw.depth_step_m());
  EXPECT_EQ(meta["last_seq"], 0);
}

TEST_F(ServiceTest, Tiles) {
  auto svc = make();
  const auto raw = load_echogram(root_ / "s.echg");
  const auto t = get(svc, "/surveys/s/tiles", {{"start", "0"}, {"count", "256"}, {"width", "256"}});
  EXPECT_EQ(t["width"], 256);
  EXPECT_EQ(t["rows"], raw.rows());
  EXPECT_EQ(t["depth_step_m"], raw.depth_step_m());
  const auto sv = decode_f32(t["sv"]);
  ASSERT_EQ(sv.size(), raw.rows() * 256);
  const auto display = replace_nan(raw);
  for (std::size_t r = 0; r < raw.rows(); r += 17)
    for (std::size_t c = 0; c < 256; c += 13) ASSERT_EQ(sv[r * 256 + c], display.at(r, c));
  const auto pooled = get(svc, "/surveys/s/tiles", {{"start", "100"}, {"count", "900"}, {"width", "64"}});
  EXPECT_EQ(decode_f32(pooled["sv"]), max_pool_tile(display, 100, 900, 64));
  EXPECT_EQ(svc.handle("GET", "/surveys/s/tiles", {{"start", "900"}, {"count", "200"}, {"width", "10"}}, "").status,
            400);
  EXPECT_EQ(svc.handle("GET", "/surveys/s/tiles", {{"start", "x"}}, "").status, 400);
}

TEST_F(ServiceTest, Flags) {
  auto svc = make();
  const auto f = get(svc, "/surveys/s/flags");
  ASSERT_EQ(f["probability"].size(), 1000U);
  ASSERT_EQ(f["flag"].size(), 1000U);
  for (const auto& p : f["probability"]) {
    EXPECT_GE(p.get<double>(), 0.0);
    EXPECT_LE(p.get<double>(), 1.0);
  }
  EXPECT_EQ(get(svc, "/surveys/s/flags"), f);
  EXPECT_EQ(svc.handle("GET", "/surveys/bare/flags", {}, "").status, 404);
}

TEST_F(ServiceTest, CorrectionsRoundTripAndReplay) {
  {
    auto svc = make();
    const json body{{"start", 10}, {"end", 13}, {"bottom_m", {15.123456, 15.5, 16.000001}}, {"author", "ana"}, {"seq", 1}};
    const auto r = post(svc, body);
    ASSERT_EQ(r.status, 200) << r.body;
    EXPECT_EQ(json::parse(r.body)["timestamp"], 1700000000);
    const auto back = get(svc, "/surveys/s/corrections", {{"since", "0"}});
    ASSERT_EQ(back["events"].size(), 1U);
    const auto& vals = back["events"][0]["bottom_m"];
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(vals[i].get<double>(), body["bottom_m"][i].get<double>(), 1e-6);
    EXPECT_EQ(get(svc, "/surveys/s/corrections", {{"since", "1"}})["events"].size(), 0U);
    EXPECT_EQ(post(svc, {{"start", 0}, {"end", 1}, {"bottom_m", {1.0}}, {"author", "b"}, {"seq", 1}}).status, 409);
    EXPECT_EQ(post(svc, {{"start", 0}, {"end", 1}, {"bottom_m", {1.0}}, {"author", "b"}, {"seq", 2}}).status, 200);
  }
  // A fresh service over the same log replays it.
  auto svc = make();
  const auto b = get(svc, "/surveys/s/bottom");
  EXPECT_EQ(b["last_seq"], 2);
  EXPECT_NEAR(b["corrected_bottom_m"][11].get<double>(), 15.5, 1e-9);
  EXPECT_NEAR(b["corrected_bottom_m"][0].get<double>(), 1.0, 1e-9);
  EXPECT_EQ(b["corrected_bottom_m"][500], b["clean_bottom_m"][500]);
}

TEST_F(ServiceTest, RejectsMalformedCorrections) {
  auto svc = make();
  EXPECT_EQ(svc.handle("POST", "/surveys/s/corrections", {}, "not json").status, 422);
  EXPECT_EQ(post(svc, {{"start", 5}, {"end", 5}, {"bottom_m", json::array()}, {"author", "a"}, {"seq", 1}}).status, 422);
  EXPECT_EQ(post(svc, {{"start", 5}, {"end", 7}, {"bottom_m", {1.0}}, {"author", "a"}, {"seq", 1}}).status, 422);
  EXPECT_EQ(post(svc, {{"start", 999}, {"end", 1001}, {"bottom_m", {1.0, 1.0}}, {"author", "a"}, {"seq", 1}}).status,
            422);
  EXPECT_EQ(post(svc, {{"start", 0}, {"end", 1}, {"bottom_m", {-4.0}}, {"author", "a"}, {"seq", 1}}).status, 422);
  EXPECT_EQ(post(svc, {{"start", 0}, {"end", 1}, {"bottom_m", {1e6}}, {"author", "a"}, {"seq", 1}}).status, 422);
  EXPECT_EQ(get(svc, "/surveys/s/meta")["last_seq"], 0);
}

TEST_F(ServiceTest, RoutingErrors) {
  auto svc = make();
  EXPECT_EQ(svc.handle("GET", "/surveys/nope/meta", {}, "").status, 404);
  EXPECT_EQ(svc.handle("GET", "/surveys/s/nothing", {}, "").status, 404);
  EXPECT_EQ(svc.handle("GET", "/elsewhere", {}, "").status, 404);
  EXPECT_EQ(svc.handle("DELETE", "/surveys/s/meta", {}, "").status, 405);
  EXPECT_EQ(svc.handle("POST", "/surveys/s/meta", {}, "{}").status, 405);
}

TEST_F(ServiceTest, HttpRoundTrip) {
  auto svc = make();
  HttpFrontend http(svc);
  const int port = http.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread server([&] { http.run(); });
  httplib::Client client("127.0.0.1", port);
  const auto meta = client.Get("/surveys/s/meta");
  ASSERT_TRUE(meta);
  EXPECT_EQ(meta->status, 200);
  EXPECT_EQ(json::parse(meta->body)["cols"], 1000);
  const auto tile = client.Get("/surveys/s/tiles?start=0&count=256&width=128");
  ASSERT_TRUE(tile);
  EXPECT_EQ(decode_f32(json::parse(tile->body)["sv"]).size(), load_echogram(root_ / "s.echg").rows() * 128);
  const json body{{"start", 0}, {"end", 2}, {"bottom_m", {12.0, 12.5}}, {"author", "ana"}, {"seq", 1}};
  const auto posted = client.Post("/surveys/s/corrections", body.dump(), "application/json");
  ASSERT_TRUE(posted);
  EXPECT_EQ(posted->status, 200);
  const auto again = client.Post("/surveys/s/corrections", body.dump(), "application/json");
  ASSERT_TRUE(again);
  EXPECT_EQ(again->status, 409);
  const auto missing = client.Get("/surveys/zz/meta");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  http.stop();
  server.join();
}

TEST(ServiceConfig, ParseErrors) {
  EXPECT_THROW(ServiceConfig::parse("{"), Error);
  EXPECT_THROW(ServiceConfig::parse(R"({"surveys":[{"id":"x"}]})"), Error);
  const auto cfg = ServiceConfig::parse(R"({"surveys":[{"id":"x","echogram":"a.echg","bottom":"b.csv"}]})", "/data");
  ASSERT_EQ(cfg.surveys.size(), 1U);
  EXPECT_EQ(cfg.surveys[0].echogram, std::filesystem::path("/data/a.echg"));
  EXPECT_FALSE(cfg.surveys[0].model.has_value());
}

TEST(Port, FromEnvironment) {
  ::setenv("ECHOFLAG_PORT", "9123", 1);
  EXPECT_EQ(port_from_env(), 9123);
  ::unsetenv("ECHOFLAG_PORT");
  EXPECT_EQ(port_from_env(7000), 7000);
}

}  // namespace
}  // namespace echoflag::service
