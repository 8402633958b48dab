#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "echoflag/echogram.hpp"
#include "echoflag/learn/adam.hpp"
#include "echoflag/learn/dataset.hpp"
#include "echoflag/learn/forest.hpp"
#include "echoflag/learn/model_spec.hpp"
#include "echoflag/learn/network.hpp"
#include "echoflag/learn/svm.hpp"

namespace echoflag::learn {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  /// One Adam step per epoch over the whole training set.
  bool full_batch = false;
  AdamConfig adam{};
  std::uint64_t seed = 0;
  std::size_t mc_passes = 50;

  void validate() const;
};

/// Train metrics are running means over the epoch's mini-batches (training
/// mode); validation metrics are NaN when no validation set was given.
struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

using ModelImpl = std::variant<RandomForest, LinearSvm, Network>;

struct TrainedModel {
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::size_t input_length = 0;
  StandardizationStats stats;
  std::vector<EpochRecord> history;
  ModelImpl impl;

  ModelKind kind() const noexcept { return kind_of(spec); }
};

TrainedModel train(const ModelSpec& spec, const Dataset& train_set, const Dataset* val_set,
                   const TrainConfig& cfg, StandardizationStats stats = {});

/// Deterministic probabilities (dropout off, stored batch-norm moments).
std::vector<double> predict_proba(const TrainedModel& m, const PingMatrix& x);

/// One stochastic pass: fresh dropout masks drawn from `rng` for networks;
/// identical to predict_proba for RF and SVM.
std::vector<double> predict_proba_stochastic(const TrainedModel& m, const PingMatrix& x, Rng& rng);

/// Per-example mean of `passes` stochastic passes.
std::vector<double> mc_dropout_proba(const TrainedModel& m, const PingMatrix& x, std::size_t passes,
                                     std::uint64_t seed);

double mc_dropout_accuracy(const TrainedModel& m, const Dataset& test, std::size_t passes, std::uint64_t seed);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Parameters whose perturbation crossed a ReLU/SELU kink or flipped a
  /// max-pool winner; central differences are meaningless there.
  std::size_t skipped = 0;
  std::vector<std::pair<ParamKind, double>> per_kind;  // max error per parameter class
};

/// Analytic vs central-difference gradients of the mean BCE over `x` (batch
/// rows), dropout disabled and batch statistics on.
GradCheckReport grad_check(const ModelSpec& spec, const PingMatrix& x, std::span<const std::uint8_t> y,
                           std::uint64_t seed, double h = 1e-4);

// ---------------------------------------------------------------------------
// Persistence: one JSON header line, then little-endian f32 tensors.

void save_model(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);
std::string encode_model(const TrainedModel& m);
TrainedModel decode_model(std::string_view bytes);

std::string format_history_csv(std::span<const EpochRecord> history);
void write_history_csv(std::span<const EpochRecord> history, const std::filesystem::path& path);

}  // namespace echoflag::learn
