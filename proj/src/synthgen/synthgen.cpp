#include "echoflag/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "echoflag/error.hpp"
#include "echoflag/io.hpp"
#include "echoflag/rng.hpp"

namespace echoflag::synthgen {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Rendering constants (dB unless noted).
constexpr double kWaterJitter = 3.0;
constexpr double kSurfaceDepthM = 2.4;
constexpr double kSurfaceTopDb = -40.0;
constexpr double kSurfaceDropDb = 8.0;
constexpr double kBandSigmaCells = 2.0;
constexpr double kSedimentDropDb = 20.0;
constexpr double kSedimentSlopeDb = 0.4;  // per cell
constexpr double kMinBottomM = 13.0;
constexpr double kLayerDbLo = -50.0, kLayerDbHi = -42.0;
constexpr double kSoftRampCells = 20.0;
constexpr double kSoftLevelDb = -15.0;  // relative to the peak

enum class BlockKind { Normal, NoBottom, Artifact, Decoy };

struct Block {
  BlockKind kind = BlockKind::Normal;
  std::size_t length = 1;
  Artifact artifact = Artifact::None;
  double param = 0.0;  // offset depth, soft reflector depth or layer thickness
  double level_db = 0.0;
};

struct PingPlan {
  BlockKind kind;
  Artifact artifact;
  Decoy decoy;
  double param, level_db, gap_m;
};

Artifact draw_artifact(const ArtifactMix& mix, Rng& rng) {
  const double total = mix.plankton + mix.offset + mix.soft;
  const double u = rng.uniform() * total;
  if (u < mix.plankton) return Artifact::Plankton;
  if (u < mix.plankton + mix.offset) return Artifact::Offset;
  return Artifact::Soft;
}

/// Splits `count` pings into runs of [lo, hi] pings (the last may be shorter).
template <class Fill>
void add_runs(std::vector<Block>& blocks, std::size_t count, std::size_t lo, std::size_t hi, Rng& rng, Fill fill) {
  while (count > 0) {
    const std::size_t len = std::min<std::size_t>(count, lo + rng.below(hi - lo + 1));
    Block b;
    b.length = len;
    fill(b);
    blocks.push_back(b);
    count -= len;
  }
}

std::vector<PingPlan> plan_layout(const SurveyConfig& cfg) {
  const auto quota = [&](double rate) {
    return static_cast<std::size_t>(std::llround(rate * static_cast<double>(cfg.cols)));
  };
  const std::size_t n_nb = quota(cfg.no_bottom_rate);
  const std::size_t n_strong = std::min(quota(cfg.strong_correction_rate), cfg.cols - n_nb);
  Rng rng(mix_seed(cfg.seed, hash_tag("layout")));
  std::vector<Block> blocks;
  add_runs(blocks, n_nb, 10, 60, rng, [](Block& b) { b.kind = BlockKind::NoBottom; });
  add_runs(blocks, n_strong, 4, 30, rng, [&](Block& b) {
    b.kind = BlockKind::Artifact;
    b.artifact = draw_artifact(cfg.artifact_mix, rng);
    switch (b.artifact) {
      case Artifact::Plankton: b.param = rng.uniform(5.5, 8.5); break;
      case Artifact::Offset: b.param = rng.uniform(4.0, 7.0); break;
      default: b.param = rng.uniform(4.5, 8.0); break;
    }
    b.level_db = rng.uniform(kLayerDbLo, kLayerDbHi);
  });
  const std::size_t n_normal = cfg.cols - n_nb - n_strong;
  for (std::size_t i = 0; i < n_normal; ++i) blocks.push_back(Block{});
  rng.shuffle(std::span(blocks));

  std::vector<PingPlan> plan;
  plan.reserve(cfg.cols);
  for (const auto& b : blocks)
    for (std::size_t i = 0; i < b.length; ++i) plan.push_back({b.kind, b.artifact, Decoy::None, b.param, b.level_db, 0.0});

  // Decoy runs overwrite short stretches of normal pings. Each family draws
  // from its own stream so the strong/no-bottom layout never depends on them.
  const auto place = [&](std::size_t count, std::string_view tag, Decoy kind) {
    Rng drng(mix_seed(cfg.seed, hash_tag(tag)));
    std::size_t guard = 0;
    while (count > 0 && guard++ < 100 * cfg.cols) {
      const std::size_t start = drng.below(plan.size());
      const std::size_t len = std::min<std::size_t>(count, 1 + drng.below(6));
      const double thickness = drng.uniform(2.0, 5.0);
      const double gap = kind == Decoy::Detached ? drng.uniform(cfg.detached_gap_lo_m, cfg.detached_gap_hi_m) : 0.0;
      const double level = drng.uniform(kLayerDbLo, kLayerDbHi);
      for (std::size_t c = start; c < plan.size() && c < start + len && count > 0; ++c) {
        if (plan[c].kind != BlockKind::Normal) break;
        plan[c] = {BlockKind::Decoy, Artifact::None, kind, thickness, level, gap};
        --count;
      }
    }
  };
  const std::size_t free_pings = cfg.cols - n_nb - n_strong;
  const std::size_t n_detached = std::min(quota(cfg.detached_layer_rate), free_pings);
  place(n_detached, "detached", Decoy::Detached);
  place(std::min(quota(cfg.diffuse_layer_rate), free_pings - n_detached), "diffuse", Decoy::Diffuse);
  return plan;
}

std::vector<double> bottom_profile(const SurveyConfig& cfg) {
  Rng rng(mix_seed(cfg.seed, hash_tag("profile")));
  const double rho = std::exp(-1.0 / std::max(cfg.bottom.correlation_pings, 1e-9));
  const double innovation = cfg.bottom.roughness_m * std::sqrt(1.0 - rho * rho);
  const double window_end = static_cast<double>(cfg.rows - 1) * cfg.depth_step_m;
  const double hi = window_end - 2.0;
  std::vector<double> z(cfg.cols);
  double a = rng.normal(0.0, cfg.bottom.roughness_m);
  for (std::size_t c = 0; c < cfg.cols; ++c) {
    if (c > 0) a = rho * a + rng.normal(0.0, innovation);
    z[c] = std::clamp(cfg.bottom.mean_depth_m + a, std::min(kMinBottomM, hi), hi);
  }
  return z;
}

class PingRenderer {
 public:
  PingRenderer(const SurveyConfig& cfg, Rng& rng, std::span<float> column)
      : cfg_(cfg), rng_(rng), col_(column) {}

  double depth(std::size_t r) const { return static_cast<double>(r) * cfg_.depth_step_m; }
  std::size_t row(double z) const {
    const auto r = static_cast<long long>(std::llround(z / cfg_.depth_step_m));
    return static_cast<std::size_t>(std::clamp<long long>(r, 0, static_cast<long long>(cfg_.rows) - 1));
  }

  void water() {
    for (std::size_t r = 0; r < cfg_.rows; ++r) {
      const double d = depth(r);
      double v = cfg_.noise_floor_db + rng_.normal(0.0, kWaterJitter);
      if (d < kSurfaceDepthM)
        v = std::min(kSurfaceTopDb - kSurfaceDropDb * d / kSurfaceDepthM + rng_.normal(0.0, 1.0), -38.0);
      col_[r] = static_cast<float>(v);
    }
  }

  /// Sharp onset at the bottom row, Gaussian (sigma 2 cells) tail below it,
  /// then slowly fading sediment returns.
  void bottom_band(std::size_t rb, double peak) {
    for (std::size_t r = rb; r < cfg_.rows; ++r) {
      const double k = static_cast<double>(r - rb);
      const double tail = peak - 10.0 * std::numbers::log10e * k * k / (2.0 * kBandSigmaCells * kBandSigmaCells);
      const double sediment = peak - kSedimentDropDb - kSedimentSlopeDb * k;
      col_[r] = static_cast<float>(std::max(tail, sediment) + rng_.normal(0.0, 1.0));
    }
  }

  /// Layer over rows [top, end); with ramp > 0 its first `ramp` rows rise
  /// linearly from the noise floor.
  void layer(std::size_t top, std::size_t end, double level, std::size_t ramp = 0) {
    for (std::size_t r = top; r < end; ++r) {
      double v = level;
      if (r - top < ramp) {
        const double f = static_cast<double>(r - top + 1) / static_cast<double>(ramp + 1);
        v = cfg_.noise_floor_db + f * (level - cfg_.noise_floor_db);
      }
      col_[r] = static_cast<float>(v + rng_.normal(0.0, 1.5));
    }
  }

  /// Diffuse bottom: a gentle ramp up to a weak return, with a sharp
  /// reflector `below` meters under it.
  void soft_bottom(std::size_t rb, double peak, double below) {
    const double level = peak + kSoftLevelDb;
    const auto ramp = static_cast<std::size_t>(kSoftRampCells);
    const std::size_t r0 = rb > ramp ? rb - ramp : 0;
    for (std::size_t r = r0; r < rb; ++r) {
      const double f = static_cast<double>(r - r0 + 1) / static_cast<double>(rb - r0 + 1);
      col_[r] = static_cast<float>(cfg_.noise_floor_db + f * (level - cfg_.noise_floor_db) + rng_.normal(0.0, 0.5));
    }
    const std::size_t rr = row(depth(rb) + below);
    for (std::size_t r = rb; r < rr; ++r)
      col_[r] = static_cast<float>(level - 0.3 * static_cast<double>(r - rb) + rng_.normal(0.0, 0.5));
    bottom_band(rr, peak + 2.0);
  }

  void nan_from(double z) {
    for (std::size_t r = 0; r < cfg_.rows; ++r)
      if (depth(r) >= z) col_[r] = std::numeric_limits<float>::quiet_NaN();
  }

 private:
  const SurveyConfig& cfg_;
  Rng& rng_;
  std::span<float> col_;
};

void set_field(SurveyConfig& cfg, std::string_view key, std::string_view value) {
  const auto num = [&] { return io::parse_double(value); };
  const auto count = [&] {
    const auto v = io::parse_int(value);
    if (v < 0) throw Error(ErrorCode::InvalidConfig, fmt::format("{} must be non-negative", key));
    return static_cast<std::size_t>(v);
  };
  if (key == "rows") cfg.rows = count();
  else if (key == "cols") cfg.cols = count();
  else if (key == "depth_step_m") cfg.depth_step_m = num();
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(count());
  else if (key == "bottom_mean_depth_m") cfg.bottom.mean_depth_m = num();
  else if (key == "bottom_roughness_m") cfg.bottom.roughness_m = num();
  else if (key == "bottom_correlation_pings") cfg.bottom.correlation_pings = num();
  else if (key == "noise_floor_db") cfg.noise_floor_db = num();
  else if (key == "bottom_peak_db") cfg.bottom_peak_db = num();
  else if (key == "strong_correction_rate") cfg.strong_correction_rate = num();
  else if (key == "no_bottom_rate") cfg.no_bottom_rate = num();
  else if (key == "mix_plankton") cfg.artifact_mix.plankton = num();
  else if (key == "mix_offset") cfg.artifact_mix.offset = num();
  else if (key == "mix_soft") cfg.artifact_mix.soft = num();
  else if (key == "detached_layer_rate") cfg.detached_layer_rate = num();
  else if (key == "detached_gap_lo_m") cfg.detached_gap_lo_m = num();
  else if (key == "detached_gap_hi_m") cfg.detached_gap_hi_m = num();
  else if (key == "diffuse_layer_rate") cfg.diffuse_layer_rate = num();
  else if (key == "diffuse_ramp_cells") cfg.diffuse_ramp_cells = count();
  else if (key == "safety_cut_m") cfg.safety_cut_m = num();
  else if (key == "nan_style") {
    if (value == "A" || value == "style_A") cfg.nan_style = NanStyle::A;
    else if (value == "B" || value == "style_B") cfg.nan_style = NanStyle::B;
    else throw Error(ErrorCode::InvalidConfig, fmt::format("nan_style must be A or B, got '{}'", value));
  } else {
    throw Error(ErrorCode::InvalidConfig, fmt::format("unknown config key '{}'", key));
  }
}

}  // namespace

void SurveyConfig::validate() const {
  const auto rate = [](std::string_view name, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidConfig, fmt::format("{}={} outside [0, 1]", name, v));
  };
  if (rows < 16) throw Error(ErrorCode::InvalidConfig, "rows must be >= 16");
  if (cols < 1) throw Error(ErrorCode::InvalidConfig, "cols must be >= 1");
  if (!(depth_step_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "depth_step_m must be positive");
  rate("strong_correction_rate", strong_correction_rate);
  rate("no_bottom_rate", no_bottom_rate);
  rate("detached_layer_rate", detached_layer_rate);
  rate("diffuse_layer_rate", diffuse_layer_rate);
  if (strong_correction_rate + no_bottom_rate > 1.0)
    throw Error(ErrorCode::InvalidConfig, "no_bottom_rate + strong_correction_rate exceeds 1");
  const auto& m = artifact_mix;
  if (m.plankton < 0 || m.offset < 0 || m.soft < 0)
    throw Error(ErrorCode::InvalidConfig, "artifact mix weights must be non-negative");
  if (strong_correction_rate > 0 && m.plankton + m.offset + m.soft <= 0)
    throw Error(ErrorCode::InvalidConfig, "strong corrections need a non-zero artifact mix");
  if (!(bottom.roughness_m >= 0) || !(bottom.correlation_pings > 0) || !(bottom.mean_depth_m > 0))
    throw Error(ErrorCode::InvalidConfig, "invalid bottom profile");
  if (!(detached_gap_lo_m > 0 && detached_gap_lo_m <= detached_gap_hi_m))
    throw Error(ErrorCode::InvalidConfig, "detached gap range must satisfy 0 < lo <= hi");
  if (!(safety_cut_m >= 0)) throw Error(ErrorCode::InvalidConfig, "safety_cut_m must be non-negative");
}

SurveyConfig parse_config(std::string_view text) {
  SurveyConfig cfg;
  for (auto line : io::split_lines(text)) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = io::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::Parse, fmt::format("expected key=value, got '{}'", line));
    set_field(cfg, io::trim(line.substr(0, eq)), io::trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

SurveyConfig load_config(const std::filesystem::path& path) { return parse_config(io::read_text(path)); }

std::string format_config(const SurveyConfig& c) {
  return fmt::format(
      "rows={}\ncols={}\ndepth_step_m={}\nseed={}\nbottom_mean_depth_m={}\nbottom_roughness_m={}\n"
      "bottom_correlation_pings={}\nnoise_floor_db={}\nbottom_peak_db={}\nstrong_correction_rate={}\n"
      "no_bottom_rate={}\nmix_plankton={}\nmix_offset={}\nmix_soft={}\nnan_style={}\n"
      "detached_layer_rate={}\ndetached_gap_lo_m={}\ndetached_gap_hi_m={}\ndiffuse_layer_rate={}\n"
      "diffuse_ramp_cells={}\nsafety_cut_m={}\n",
      c.rows, c.cols, c.depth_step_m, c.seed, c.bottom.mean_depth_m, c.bottom.roughness_m,
      c.bottom.correlation_pings, c.noise_floor_db, c.bottom_peak_db, c.strong_correction_rate, c.no_bottom_rate,
      c.artifact_mix.plankton, c.artifact_mix.offset, c.artifact_mix.soft, c.nan_style == NanStyle::A ? "A" : "B",
      c.detached_layer_rate, c.detached_gap_lo_m, c.detached_gap_hi_m, c.diffuse_layer_rate, c.diffuse_ramp_cells,
      c.safety_cut_m);
}

Survey generate(const SurveyConfig& cfg) {
  cfg.validate();
  const auto plan = plan_layout(cfg);
  const auto profile = bottom_profile(cfg);
  const Rng ping_streams(mix_seed(cfg.seed, hash_tag("pings")));
  const double window_end = static_cast<double>(cfg.rows - 1) * cfg.depth_step_m;

  std::vector<float> sv(cfg.rows * cfg.cols);
  std::vector<float> column(cfg.rows);
  Survey s;
  auto& t = s.truth;
  t.true_bottom_m.assign(cfg.cols, kNaN);
  t.bottom_present.assign(cfg.cols, 0);
  t.artifact.assign(cfg.cols, Artifact::None);
  t.decoy.assign(cfg.cols, Decoy::None);
  t.nan_start_m.assign(cfg.cols, kNaN);
  s.bottom.bottom_m.assign(cfg.cols, kNaN);
  s.bottom.clean_bottom_m.assign(cfg.cols, kNaN);

  for (std::size_t c = 0; c < cfg.cols; ++c) {
    Rng rng = ping_streams.split(c);
    PingRenderer px(cfg, rng, column);
    const auto& p = plan[c];
    px.water();
    if (p.kind != BlockKind::NoBottom) {
      const double zb = profile[c];
      const std::size_t rb = px.row(zb);
      const double peak = cfg.bottom_peak_db + rng.normal(0.0, 1.5);
      double band_top = zb;
      switch (p.artifact) {
        case Artifact::Plankton:
          px.bottom_band(rb, peak);
          px.layer(px.row(zb - (p.param + rng.uniform(-0.3, 0.3))), rb, p.level_db);
          break;
        case Artifact::Offset:
          band_top = zb + p.param;
          px.bottom_band(px.row(band_top), peak);
          break;
        case Artifact::Soft: px.soft_bottom(rb, peak, p.param); break;
        case Artifact::None:
          px.bottom_band(rb, peak);
          if (p.decoy != Decoy::None) {
            const double end = zb - p.gap_m;
            const std::size_t ramp = p.decoy == Decoy::Diffuse ? cfg.diffuse_ramp_cells : 0;
            const double thickness = p.param + static_cast<double>(ramp) * cfg.depth_step_m;
            px.layer(px.row(end - thickness), std::min(px.row(end), rb), p.level_db, ramp);
          }
          break;
      }
      const double offset = cfg.nan_style == NanStyle::A ? rng.uniform(20.0, 25.0) : rng.uniform(23.0, 28.0);
      const double nan_start = band_top + offset;
      if (nan_start <= window_end) {
        px.nan_from(nan_start);
        t.nan_start_m[c] = nan_start;
      }
      t.true_bottom_m[c] = zb;
      t.bottom_present[c] = 1;
      t.artifact[c] = p.artifact;
      t.decoy[c] = p.decoy;
      s.bottom.clean_bottom_m[c] = p.artifact == Artifact::None ? zb : zb - cfg.safety_cut_m;
    }
    for (std::size_t r = 0; r < cfg.rows; ++r) sv[r * cfg.cols + c] = column[r];
  }
  s.echogram = Echogram(cfg.rows, cfg.cols, 0.0, cfg.depth_step_m, std::move(sv));
  return s;
}

SurveyConfig domain_config(Domain d, std::uint64_t seed, std::size_t size, const DomainPairOptions& opts) {
  SurveyConfig c = opts.base;
  c.seed = seed;
  c.cols = size;
  c.strong_correction_rate = d == Domain::A ? opts.strong_rate_a : opts.strong_rate_b;
  c.nan_style = d == Domain::A ? NanStyle::A : NanStyle::B;
  return c;
}

std::pair<Survey, Survey> make_domain_pair(std::uint64_t seed_a, std::uint64_t seed_b, std::size_t size_a,
                                           std::size_t size_b, const DomainPairOptions& opts) {
  auto sa = generate(domain_config(Domain::A, seed_a, size_a, opts));
  auto sb = generate(domain_config(Domain::B, seed_b, size_b, opts));
  sa.echogram.set_survey_id("domain_a");
  sb.echogram.set_survey_id("domain_b");
  return {std::move(sa), std::move(sb)};
}

std::string_view artifact_name(Artifact a) noexcept {
  switch (a) {
    case Artifact::None: return "none";
    case Artifact::Plankton: return "plankton";
    case Artifact::Offset: return "offset";
    case Artifact::Soft: return "soft";
  }
  return "?";
}

std::string_view decoy_name(Decoy d) noexcept {
  switch (d) {
    case Decoy::None: return "none";
    case Decoy::Detached: return "detached";
    case Decoy::Diffuse: return "diffuse";
  }
  return "?";
}

std::string format_truth_csv(const SurveyTruth& t) {
  std::string out = "ping_index,true_bottom_m,bottom_present,artifact,decoy,nan_start_m\n";
  for (std::size_t i = 0; i < t.true_bottom_m.size(); ++i)
    out += fmt::format("{},{},{},{},{},{}\n", i, io::fixed(t.true_bottom_m[i], 6), t.bottom_present[i],
                       artifact_name(t.artifact[i]), decoy_name(t.decoy[i]), io::fixed(t.nan_start_m[i], 6));
  return out;
}

}  // namespace echoflag::synthgen
