#pragma once

// Experiment orchestration: survey preparation, train/test sampling, the
// algorithm-scaling and cross-domain experiments, and ping flagging.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "echoflag/bottomline.hpp"
#include "echoflag/echogram.hpp"
#include "echoflag/learn/model.hpp"
#include "echoflag/synthgen.hpp"

namespace echoflag::harness {

struct PrepareConfig {
  std::size_t trim_rows = 16;  // near-surface band at desk scale
  float bottom_signature_db = kBottomSignatureDb;
  float nan_fill_db = kNanFillDb;
  double threshold_m = bottomline::kDefaultThresholdM;
};

/// A survey taken through detection, labeling and formatting. `data` holds
/// the labeled (weak/strong) pings unstandardized; ids are ping indices.
struct PreparedSurvey {
  Echogram formatted;  // trimmed, NaN-filled
  BottomRecord bottom;  // detected + expert
  std::vector<std::size_t> dropped;
  std::vector<PingLabel> labels;  // one per ping
  learn::Dataset data;
};

/// Detection runs on the raw echogram; `clean` supplies clean_bottom_m.
PreparedSurvey prepare_survey(const Echogram& raw, const BottomRecord& clean, const PrepareConfig& cfg = {});

/// Re-labels an already prepared survey at another threshold.
learn::Dataset relabel(const PreparedSurvey& s, double threshold_m);

struct DomainSurveys {
  synthgen::Survey a_raw, b_raw;
  PreparedSurvey a, b;
};

/// Generates and prepares the default domain pair; A and B seeds derive
/// from `seed`.
DomainSurveys prepare_domain_pair(std::uint64_t seed, std::size_t size_a, std::size_t size_b,
                                  const PrepareConfig& cfg = {}, const synthgen::DomainPairOptions& opts = {});

/// CNN for desk-scale experiments: the tuned architecture's widest kernels
/// and head layers cost minutes per epoch on one core, so this keeps the
/// conv/pool/dropout structure with k=5,9,5 and h=64,32,16.
learn::CnnSpec desk_cnn_spec();

/// Seeded random split into (train, test) with round(fraction * n) train rows.
std::pair<learn::Dataset, learn::Dataset> split_train_test(const learn::Dataset& d, double train_fraction,
                                                           std::uint64_t seed);

struct SamplingPlan {
  std::vector<std::size_t> st_sizes{1000, 3000, 5500};  // small, mid, big
  double train_fraction = 0.9;
  std::size_t foreign_chunk = 1000;  // contiguous B pings, halved into validation and mix
  std::size_t base_count = 5000;
  std::size_t foreign_count = 500;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig.
  void validate() const;
};

/// Row indices refer to the prepared datasets of A and B.
struct Datasets {
  std::vector<std::vector<std::size_t>> st_rows;  // A rows, one list per ST size
  std::vector<std::size_t> cdt_rows_a, cdt_rows_b;
  std::vector<std::size_t> validation_rows_b;
  std::vector<std::size_t> test_rows_a, test_rows_b;

  std::vector<learn::Dataset> st;
  learn::Dataset cdt, validation, test_a, test_b;
};

/// Sampling for the cross-domain experiment. A is split train/test by train_fraction; each ST set
/// and the CDT base are drawn from A's train part; a contiguous B chunk is
/// randomly halved into validation and CDT mix; B's test set is everything
/// outside the chunk. Throws PoolExhausted when a draw exceeds its pool.
Datasets build_datasets(const SamplingPlan& plan, const learn::Dataset& a, const learn::Dataset& b);

/// Throws DimensionMismatch (with a description) if any training rows meet
/// the test rows of their own domain.
void check_disjoint(const Datasets& d);

struct RunRecord {
  std::string algorithm;  // kind name
  std::string set;        // e.g. "ST-1000", "CDT-5500", "N-2000"
  std::size_t train_size = 0;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  std::vector<learn::EpochRecord> history;
  double train_acc = 0.0;
  double test_a_acc = 0.0;
  double test_b_acc = 0.0;  // NaN when not evaluated
  std::string error;        // empty on success
};

struct SummaryRow {
  std::string algorithm;
  std::string set;
  std::size_t train_size = 0;
  std::size_t runs = 0;  // successful
  double train_mean = 0.0, test_a_mean = 0.0, test_a_min = 0.0, test_a_max = 0.0;
  double test_b_mean = 0.0, test_b_min = 0.0, test_b_max = 0.0;
};

struct ExperimentReport {
  std::vector<RunRecord> runs;
};

/// Mean/min/max per (algorithm, set), in first-appearance order.
std::vector<SummaryRow> summarize(const ExperimentReport& r);
const SummaryRow* find(std::span<const SummaryRow> rows, std::string_view algorithm, std::string_view set);

struct ExperimentConfig {
  learn::TrainConfig train{.epochs = 30};
  std::size_t repeats = 5;
};

/// Seed of one experiment cell.
std::uint64_t run_seed(std::uint64_t master, std::string_view tag, std::size_t size, std::size_t repeat) noexcept;

/// Trains each algorithm at each size `repeats` times. Every (size, repeat)
/// cell draws its training sample from `pool` with a seed shared by all
/// algorithms; networks are scored with MC dropout. Training failures are
/// recorded in the run and the experiment continues.
ExperimentReport run_scaling(const learn::Dataset& pool, const learn::Dataset& test,
                             std::span<const learn::ModelSpec> algorithms, std::span<const std::size_t> sizes,
                             const ExperimentConfig& cfg, std::uint64_t seed);

/// Trains `spec` on every ST set and on the CDT set, each evaluated on its
/// own training data, test A and test B; validation curves use the B half.
/// When `models` is given it receives the trained models in run order.
ExperimentReport run_cross_domain(const Datasets& d, const learn::ModelSpec& spec, const ExperimentConfig& cfg,
                                  std::uint64_t seed, std::vector<learn::TrainedModel>* models = nullptr);

struct StudyConfig {
  std::size_t size_a = 8000;  // domain A pings generated per seed
  std::size_t size_b = 10000;
  SamplingPlan plan{};  // plan.seed is replaced per seed
  PrepareConfig prepare{};
  synthgen::DomainPairOptions domains{};
  ExperimentConfig experiment{};
};

/// Cross-domain experiment once per master seed, each on a freshly generated
/// domain pair; `repeat` in the runs is the seed's position. Models, when
/// requested, are appended in run order.
ExperimentReport cross_domain_study(std::span<const std::uint64_t> seeds, const learn::ModelSpec& spec,
                                    const StudyConfig& cfg, std::vector<learn::TrainedModel>* models = nullptr);

/// Scaling experiment on one generated domain-A survey of `survey_size`
/// pings, split train_fraction / rest into pool and test.
ExperimentReport scaling_study(std::uint64_t seed, std::size_t survey_size, std::span<const learn::ModelSpec> algorithms,
                               std::span<const std::size_t> sizes, const ExperimentConfig& cfg,
                               double train_fraction = 0.9, const PrepareConfig& prepare = {});

/// Accuracy of a trained model on raw (unstandardized) pings: its stored
/// stats are applied, networks averaged over `mc_passes` dropout passes.
double evaluate(const learn::TrainedModel& m, const learn::Dataset& raw, std::size_t mc_passes, std::uint64_t seed);

struct Flag {
  std::size_t ping = 0;
  double probability = 0.0;
  bool flagged = false;
};

/// Scores every ping of a formatted echogram (MC dropout mean for networks)
/// and flags probability >= threshold.
std::vector<Flag> flag_pings(const learn::TrainedModel& m, const Echogram& formatted, double threshold = 0.5,
                             std::size_t mc_passes = 50, std::uint64_t seed = 0);

struct FlagScore {
  std::size_t true_positive = 0, false_positive = 0, false_negative = 0;
  double recall() const noexcept;
  double precision() const noexcept;
};

/// Flags vs strong labels; pings labeled NoBottom are left out.
FlagScore score_flags(std::span<const Flag> flags, std::span<const PingLabel> labels);

// Reports.
std::string format_runs_csv(const ExperimentReport& r);
std::string format_summary_json(const ExperimentReport& r);
std::string format_flags_csv(std::span<const Flag> flags);
/// Writes runs.csv, summary.json and curves/<algorithm>_<set>_r<repeat>.csv.
void write_report(const ExperimentReport& r, const std::filesystem::path& dir);

}  // namespace echoflag::harness
