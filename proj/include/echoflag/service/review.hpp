#pragma once

// Review service: serves echogram tiles, detected/expert bottoms and model
// flags, and records expert corrections in an append-only log per survey.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "echoflag/echogram.hpp"
#include "echoflag/harness.hpp"
#include "echoflag/learn/model.hpp"

namespace echoflag::service {

struct CorrectionEvent {
  std::string survey_id;
  std::size_t start = 0;  // ping range [start, end)
  std::size_t end = 0;
  std::vector<double> bottom_m;
  std::string author;
  std::int64_t timestamp = 0;  // UTC seconds
  std::uint64_t seq = 0;       // 1, 2, ... per survey

  /// Throws Parse on a malformed line.
  static CorrectionEvent from_json(std::string_view line);
  std::string to_json() const;
};

/// Newline-delimited JSON log of corrections; every append reaches the disk
/// (fsync) before it returns.
class CorrectionLog {
 public:
  explicit CorrectionLog(std::filesystem::path path);

  const std::filesystem::path& path() const noexcept { return path_; }
  const std::vector<CorrectionEvent>& events() const noexcept { return events_; }
  std::uint64_t last_seq() const noexcept { return events_.empty() ? 0 : events_.back().seq; }

  void append(const CorrectionEvent& e);

 private:
  std::filesystem::path path_;
  std::vector<CorrectionEvent> events_;
};

/// Expert bottom with the logged corrections applied in sequence order.
std::vector<double> replay(std::vector<double> clean_bottom_m, const std::vector<CorrectionEvent>& events);

/// Column j of a width-w tile covers pings [start + j*count/w, start + (j+1)*count/w)
/// and holds the per-row maximum over them.
std::vector<float> max_pool_tile(const Echogram& e, std::size_t start, std::size_t count, std::size_t width);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

struct SurveyEntry {
  std::string id;
  std::filesystem::path echogram;  // raw .echg
  std::filesystem::path bottom;    // bottom CSV with the expert depths
  std::optional<std::filesystem::path> model;
};

struct ServiceConfig {
  std::vector<SurveyEntry> surveys;
  std::filesystem::path log_dir = ".";
  harness::PrepareConfig prepare{};
  double flag_threshold = 0.5;
  std::size_t mc_passes = 50;
  std::uint64_t seed = 0;

  /// JSON: {"surveys":[{"id","echogram","bottom","model"?}], "log_dir", "trim_rows",
  /// "flag_threshold", "mc_passes", "seed"}; relative paths resolve against `base`.
  static ServiceConfig parse(std::string_view json, const std::filesystem::path& base = {});
  static ServiceConfig load(const std::filesystem::path& path);
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

using Query = std::map<std::string, std::string, std::less<>>;

class ReviewService {
 public:
  using Clock = std::function<std::int64_t()>;

  explicit ReviewService(const ServiceConfig& cfg, Clock clock = {});

  /// Dispatches one request; never throws.
  Response handle(std::string_view method, std::string_view path, const Query& query, std::string_view body);

  std::vector<std::string> survey_ids() const;

 private:
  struct Survey {
    std::string id;
    Echogram display;  // full depth range, NaN filled; what tiles show
    harness::PreparedSurvey prepared;
    std::optional<learn::TrainedModel> model;
    std::optional<std::vector<harness::Flag>> flags;
    std::unique_ptr<CorrectionLog> log;
    std::mutex mutex;  // guards flags and log
  };

  Survey* find(std::string_view id);
  Response list() const;
  Response meta(Survey& s);
  Response tiles(Survey& s, const Query& q);
  Response flags(Survey& s);
  Response bottom(Survey& s);
  Response corrections(Survey& s, const Query& q);
  Response post_correction(Survey& s, std::string_view body);

  ServiceConfig cfg_;
  Clock clock_;
  std::vector<std::unique_ptr<Survey>> surveys_;
};

/// HTTP front end over a ReviewService.
class HttpFrontend {
 public:
  explicit HttpFrontend(ReviewService& svc);
  ~HttpFrontend();
  HttpFrontend(const HttpFrontend&) = delete;
  HttpFrontend& operator=(const HttpFrontend&) = delete;

  /// Binds host:port (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Blocks serving HTTP on host:port until the process is stopped.
void serve(ReviewService& svc, const std::string& host, int port);

/// Port from ECHOFLAG_PORT, else `fallback`.
int port_from_env(int fallback = 8080);

}  // namespace echoflag::service
