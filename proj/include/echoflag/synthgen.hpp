#pragma once

// Deterministic synthetic surveys: a rough bottom profile rendered as a bright
// band, water-column noise, a near-surface band, NaN padding below the
// recording limit, and artifacts that displace the max-gradient detector.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "echoflag/echogram.hpp"

namespace echoflag::synthgen {

enum class NanStyle { A, B };
enum class Artifact : std::uint8_t { None, Plankton, Offset, Soft };
enum class Decoy : std::uint8_t { None, Detached, Diffuse };

struct BottomProfile {
  double mean_depth_m = 19.0;
  double roughness_m = 4.0;
  double correlation_pings = 30.0;
};

struct ArtifactMix {
  double plankton = 0.65;
  double offset = 0.05;
  double soft = 0.3;
};

struct SurveyConfig {
  std::size_t rows = 256;
  std::size_t cols = 1000;
  double depth_step_m = kDefaultDepthStepM;
  std::uint64_t seed = 0;
  BottomProfile bottom{};
  double noise_floor_db = -150.0;
  double bottom_peak_db = -15.0;
  double strong_correction_rate = 0.13;
  double no_bottom_rate = 0.02;
  ArtifactMix artifact_mix{};
  NanStyle nan_style = NanStyle::A;
  /// Plankton layers that do not displace the detector, so their pings stay
  /// weak: sharp-edged layers separated from the bottom by a gap, and layers
  /// touching the bottom whose top edge fades in over `diffuse_ramp_cells`.
  double detached_layer_rate = 0.3;
  double detached_gap_lo_m = 1.5;
  double detached_gap_hi_m = 4.0;
  double diffuse_layer_rate = 0.0;
  std::size_t diffuse_ramp_cells = 35;
  /// Expert cut above the true bottom on artifact pings.
  double safety_cut_m = 1.0;

  void validate() const;
};

SurveyConfig parse_config(std::string_view key_value_text);
SurveyConfig load_config(const std::filesystem::path& path);
std::string format_config(const SurveyConfig& cfg);

struct SurveyTruth {
  std::vector<double> true_bottom_m;  // NaN where no bottom is recorded
  std::vector<std::uint8_t> bottom_present;
  std::vector<Artifact> artifact;
  std::vector<Decoy> decoy;
  std::vector<double> nan_start_m;  // NaN when the padding lies below the window
};

struct Survey {
  Echogram echogram;
  BottomRecord bottom;  // clean_bottom_m set; bottom_m NaN until detection
  SurveyTruth truth;
};

Survey generate(const SurveyConfig& cfg);

struct DomainPairOptions {
  double strong_rate_a = 0.13;
  double strong_rate_b = 0.01;
  SurveyConfig base{};
};

enum class Domain { A, B };

/// Config of one side of the pair.
SurveyConfig domain_config(Domain d, std::uint64_t seed, std::size_t size, const DomainPairOptions& opts = {});

/// Domain A and domain B surveys sharing everything but the strong rate and
/// the NaN style.
std::pair<Survey, Survey> make_domain_pair(std::uint64_t seed_a, std::uint64_t seed_b, std::size_t size_a,
                                           std::size_t size_b, const DomainPairOptions& opts = {});

std::string_view artifact_name(Artifact a) noexcept;
std::string_view decoy_name(Decoy d) noexcept;
std::string format_truth_csv(const SurveyTruth& t);

}  // namespace echoflag::synthgen
