#include "echoflag/service/review.hpp"

#include <fcntl.h>
#include <fmt/format.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "echoflag/error.hpp"
#include "echoflag/io.hpp"
#include "json.hpp"

namespace echoflag::service {

namespace {

using nlohmann::json;

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json depth_array(std::span<const double> v) {
  auto a = json::array();
  for (double x : v) a.push_back(nullable(x));
  return a;
}

Response ok(const json& j) { return {200, j.dump(), "application/json"}; }

Response fail(int status, std::string_view code, std::string_view message) {
  return {status, json{{"error", code}, {"message", message}}.dump(), "application/json"};
}

std::optional<std::size_t> parse_count(const Query& q, std::string_view key) {
  const auto it = q.find(key);
  if (it == q.end()) return std::nullopt;
  std::size_t v = 0;
  const auto& s = it->second;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw Error(ErrorCode::Parse, fmt::format("bad '{}'", key));
  return v;
}

std::int64_t system_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

}  // namespace

// ---------------------------------------------------------------------------

CorrectionEvent CorrectionEvent::from_json(std::string_view line) {
  try {
    const auto j = json::parse(line);
    CorrectionEvent e;
    e.survey_id = j.at("survey_id").get<std::string>();
    e.start = j.at("start").get<std::size_t>();
    e.end = j.at("end").get<std::size_t>();
    e.bottom_m = j.at("bottom_m").get<std::vector<double>>();
    e.author = j.at("author").get<std::string>();
    e.timestamp = j.at("timestamp").get<std::int64_t>();
    e.seq = j.at("seq").get<std::uint64_t>();
    if (e.end <= e.start || e.bottom_m.size() != e.end - e.start)
      throw Error(ErrorCode::Parse, "correction range and values disagree");
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::Parse, std::string("correction event: ") + ex.what());
  }
}

std::string CorrectionEvent::to_json() const {
  return json{{"survey_id", survey_id}, {"seq", seq},         {"start", start},        {"end", end},
              {"bottom_m", bottom_m},   {"author", author},   {"timestamp", timestamp}}
      .dump();
}

CorrectionLog::CorrectionLog(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  const std::string text = io::read_text(path_);
  for (auto line : io::split_lines(text)) {
    auto e = CorrectionEvent::from_json(line);
    if (e.seq <= last_seq())
      throw Error(ErrorCode::Parse, fmt::format("{}: sequence numbers must increase", path_.string()));
    events_.push_back(std::move(e));
  }
}

void CorrectionLog::append(const CorrectionEvent& e) {
  if (e.seq <= last_seq()) throw Error(ErrorCode::InvalidConfig, "stale sequence number");
  const auto line = e.to_json() + "\n";
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::Io, "cannot open " + path_.string());
  const bool written = ::write(fd, line.data(), line.size()) == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
  ::close(fd);
  if (!written) throw Error(ErrorCode::Io, "cannot append to " + path_.string());
  events_.push_back(e);
}

std::vector<double> replay(std::vector<double> bottom, const std::vector<CorrectionEvent>& events) {
  for (const auto& e : events) {
    if (e.end > bottom.size()) throw Error(ErrorCode::MisalignedRecords, "correction beyond the last ping");
    std::copy(e.bottom_m.begin(), e.bottom_m.end(), bottom.begin() + static_cast<std::ptrdiff_t>(e.start));
  }
  return bottom;
}

std::vector<float> max_pool_tile(const Echogram& e, std::size_t start, std::size_t count, std::size_t width) {
  if (count == 0 || start + count > e.cols()) throw Error(ErrorCode::InvalidConfig, "tile outside the survey");
  width = std::clamp<std::size_t>(width, 1, count);
  std::vector<float> out(e.rows() * width);
  for (std::size_t j = 0; j < width; ++j) {
    const std::size_t c0 = start + j * count / width;
    const std::size_t c1 = start + (j + 1) * count / width;
    for (std::size_t r = 0; r < e.rows(); ++r) {
      float m = -std::numeric_limits<float>::infinity();
      for (std::size_t c = c0; c < c1; ++c) m = std::max(m, e.at(r, c));
      out[r * width + j] = m;
    }
  }
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::Parse, "base64 length must be a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::Parse, "invalid base64");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

// ---------------------------------------------------------------------------

ServiceConfig ServiceConfig::parse(std::string_view text, const std::filesystem::path& base) {
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
  };
  try {
    const auto j = json::parse(text);
    ServiceConfig c;
    for (const auto& s : j.at("surveys")) {
      SurveyEntry e;
      e.id = s.at("id").get<std::string>();
      e.echogram = resolve(s.at("echogram").get<std::string>());
      e.bottom = resolve(s.at("bottom").get<std::string>());
      if (s.contains("model") && !s["model"].is_null()) e.model = resolve(s["model"].get<std::string>());
      c.surveys.push_back(std::move(e));
    }
    c.log_dir = resolve(j.value("log_dir", std::string(".")));
    c.prepare.trim_rows = j.value("trim_rows", c.prepare.trim_rows);
    c.flag_threshold = j.value("flag_threshold", c.flag_threshold);
    c.mc_passes = j.value("mc_passes", c.mc_passes);
    c.seed = j.value("seed", c.seed);
    return c;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::Parse, std::string("service config: ") + ex.what());
  }
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  return parse(io::read_text(path), path.parent_path());
}

ReviewService::ReviewService(const ServiceConfig& cfg, Clock clock) : cfg_(cfg), clock_(std::move(clock)) {
  if (!clock_) clock_ = system_seconds;
  std::filesystem::create_directories(cfg_.log_dir);
  for (const auto& entry : cfg_.surveys) {
    auto s = std::make_unique<Survey>();
    s->id = entry.id;
    const auto raw = load_echogram(entry.echogram);
    s->prepared = harness::prepare_survey(raw, read_bottom_csv(entry.bottom), cfg_.prepare);
    s->display = replace_nan(raw, cfg_.prepare.nan_fill_db);
    if (entry.model) s->model = learn::load_model(*entry.model);
    s->log = std::make_unique<CorrectionLog>(cfg_.log_dir / (entry.id + ".corrections.ndjson"));
    surveys_.push_back(std::move(s));
  }
}

std::vector<std::string> ReviewService::survey_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : surveys_) ids.push_back(s->id);
  return ids;
}

ReviewService::Survey* ReviewService::find(std::string_view id) {
  for (auto& s : surveys_)
    if (s->id == id) return s.get();
  return nullptr;
}

Response ReviewService::handle(std::string_view method, std::string_view path, const Query& query,
                               std::string_view body) {
  try {
    std::vector<std::string_view> parts;
    for (auto p : io::split(path, '/'))
      if (!p.empty()) parts.push_back(p);
    if (parts.empty() || parts[0] != "surveys") return fail(404, "NotFound", "no such route");
    if (parts.size() == 1) {
      if (method != "GET") return fail(405, "MethodNotAllowed", "use GET");
      return list();
    }
    Survey* s = find(parts[1]);
    if (s == nullptr) return fail(404, "UnknownSurvey", fmt::format("no survey '{}'", parts[1]));
    const std::string_view leaf = parts.size() == 3 ? parts[2] : "";
    if (parts.size() != 3) return fail(404, "NotFound", "no such route");
    if (method == "POST") {
      if (leaf == "corrections") return post_correction(*s, body);
      return fail(405, "MethodNotAllowed", "read-only resource");
    }
    if (method != "GET") return fail(405, "MethodNotAllowed", "unsupported method");
    if (leaf == "meta") return meta(*s);
    if (leaf == "tiles") return tiles(*s, query);
    if (leaf == "flags") return flags(*s);
    if (leaf == "bottom") return bottom(*s);
    if (leaf == "corrections") return corrections(*s, query);
    return fail(404, "NotFound", "no such route");
  } catch (const Error& e) {
    return fail(e.code() == ErrorCode::Parse || e.code() == ErrorCode::InvalidConfig ? 400 : 500,
                to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail(500, "Internal", e.what());
  }
}

Response ReviewService::list() const {
  auto a = json::array();
  for (const auto& s : surveys_)
    a.push_back({{"id", s->id}, {"pings", s->prepared.formatted.cols()}, {"has_model", s->model.has_value()}});
  return ok(json{{"surveys", a}});
}

Response ReviewService::meta(Survey& s) {
  const auto& e = s.display;
  std::lock_guard lock(s.mutex);
  return ok({{"id", s.id},
             {"rows", e.rows()},
             {"cols", e.cols()},
             {"depth_step_m", e.depth_step_m()},
             {"depth_origin_m", e.depth_origin_m()},
             {"has_model", s.model.has_value()},
             {"last_seq", s.log->last_seq()}});
}

Response ReviewService::tiles(Survey& s, const Query& q) {
  const auto& e = s.display;
  const std::size_t start = parse_count(q, "start").value_or(0);
  const std::size_t count = parse_count(q, "count").value_or(std::min<std::size_t>(256, e.cols() - std::min(start, e.cols())));
  const std::size_t width = parse_count(q, "width").value_or(count);
  if (count == 0 || start >= e.cols() || count > e.cols() - start)
    return fail(400, "BadRange", fmt::format("tile [{}, {}) outside 0..{}", start, start + count, e.cols()));
  if (width == 0) return fail(400, "BadRange", "width must be positive");
  const auto tile = max_pool_tile(e, start, count, width);
  io::ByteWriter w;
  w.reserve(tile.size() * 4);
  for (float v : tile) w.f32(v);
  return ok({{"start", start},
             {"count", count},
             {"width", std::min(width, count)},
             {"rows", e.rows()},
             {"depth_step_m", e.depth_step_m()},
             {"depth_origin_m", e.depth_origin_m()},
             {"encoding", "f32le-base64"},
             {"layout", "row-major"},
             {"sv", base64_encode(w.bytes())}});
}

Response ReviewService::flags(Survey& s) {
  if (!s.model) return fail(404, "NoModel", fmt::format("survey '{}' has no model attached", s.id));
  std::lock_guard lock(s.mutex);
  if (!s.flags) s.flags = harness::flag_pings(*s.model, s.prepared.formatted, cfg_.flag_threshold, cfg_.mc_passes,
                                              cfg_.seed);
  auto p = json::array();
  auto f = json::array();
  for (const auto& x : *s.flags) {
    p.push_back(x.probability);
    f.push_back(x.flagged ? 1 : 0);
  }
  return ok({{"survey", s.id}, {"threshold", cfg_.flag_threshold}, {"probability", p}, {"flag", f}});
}

Response ReviewService::bottom(Survey& s) {
  std::lock_guard lock(s.mutex);
  const auto corrected = replay(s.prepared.bottom.clean_bottom_m, s.log->events());
  return ok({{"survey", s.id},
             {"bottom_m", depth_array(s.prepared.bottom.bottom_m)},
             {"clean_bottom_m", depth_array(s.prepared.bottom.clean_bottom_m)},
             {"corrected_bottom_m", depth_array(corrected)},
             {"last_seq", s.log->last_seq()}});
}

Response ReviewService::corrections(Survey& s, const Query& q) {
  const std::size_t since = parse_count(q, "since").value_or(0);
  std::lock_guard lock(s.mutex);
  auto events = json::array();
  for (const auto& e : s.log->events())
    if (e.seq > since) events.push_back(json::parse(e.to_json()));
  return ok({{"survey", s.id}, {"last_seq", s.log->last_seq()}, {"events", events}});
}

Response ReviewService::post_correction(Survey& s, std::string_view body) {
  CorrectionEvent e;
  e.survey_id = s.id;
  const auto& echo = s.display;
  try {
    const auto j = json::parse(body);
    e.start = j.at("start").get<std::size_t>();
    e.end = j.at("end").get<std::size_t>();
    e.bottom_m = j.at("bottom_m").get<std::vector<double>>();
    e.author = j.value("author", std::string("unknown"));
    e.seq = j.at("seq").get<std::uint64_t>();
  } catch (const json::exception& ex) {
    return fail(422, "MalformedCorrection", ex.what());
  }
  if (e.end <= e.start || e.end > echo.cols())
    return fail(422, "MalformedCorrection", fmt::format("range [{}, {}) invalid for {} pings", e.start, e.end, echo.cols()));
  if (e.bottom_m.size() != e.end - e.start)
    return fail(422, "MalformedCorrection", "one depth per ping in the range is required");
  const double deepest = echo.max_depth_m();
  for (double d : e.bottom_m)
    if (!std::isfinite(d) || d < 0.0 || d > deepest)
      return fail(422, "MalformedCorrection", fmt::format("depth {} outside [0, {}] m", d, deepest));

  std::lock_guard lock(s.mutex);
  const auto expected = s.log->last_seq() + 1;
  if (e.seq != expected)
    return fail(409, "StaleSequence", fmt::format("expected seq {}, got {}", expected, e.seq));
  e.timestamp = clock_();
  s.log->append(e);
  return ok({{"survey", s.id}, {"seq", e.seq}, {"timestamp", e.timestamp}});
}

int port_from_env(int fallback) {
  const char* v = std::getenv("ECHOFLAG_PORT");
  if (v == nullptr || *v == '\0') return fallback;
  int port = 0;
  const std::string_view s(v);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), port);
  if (ec != std::errc{} || p != s.data() + s.size() || port <= 0 || port > 65535)
    throw Error(ErrorCode::InvalidConfig, fmt::format("ECHOFLAG_PORT='{}' is not a port", s));
  return port;
}

}  // namespace echoflag::service
