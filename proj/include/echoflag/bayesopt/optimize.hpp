#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "echoflag/bayesopt/gp.hpp"
#include "echoflag/learn/model_spec.hpp"

namespace echoflag::bayesopt {

enum class DimKind { Integer, Continuous };

struct Dimension {
  std::string name;
  DimKind kind = DimKind::Continuous;
  double lo = 0.0;
  double hi = 1.0;
};

/// Box of hyperparameters. Points are searched on the unit cube and decoded
/// to values; integer dimensions are rounded on decoding.
struct SearchSpace {
  std::vector<Dimension> dims;

  std::size_t size() const noexcept { return dims.size(); }
  /// Throws InvalidConfig on an empty space, lo >= hi or fractional integer bounds.
  void validate() const;
  std::vector<double> decode(std::span<const double> unit) const;
  std::vector<double> encode(std::span<const double> values) const;
};

/// The tuned ranges of each model kind, in spec field order.
SearchSpace space_for(learn::ModelKind kind);
learn::ModelSpec spec_from_values(learn::ModelKind kind, std::span<const double> values);
std::vector<double> values_from_spec(const learn::ModelSpec& spec);

struct OptimizeConfig {
  std::size_t max_iter = 50;  // objective evaluations, initial design included
  std::size_t init_points = 5;
  double xi = 0.1;
  std::size_t ei_starts = 24;
  std::size_t converge_repeats = 3;
  double converge_tol = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct HistoryEntry {
  std::size_t iter = 0;  // 1-based
  std::vector<double> encoded;
  std::vector<double> values;
  double value = 0.0;
  double best_so_far = 0.0;
  bool failed = false;
};

struct OptimizeResult {
  std::vector<double> best_values;
  std::vector<double> best_encoded;
  double best_value = 0.0;
  std::vector<HistoryEntry> history;
  GpHyper hyper;  // last fitted surrogate; empty before any GP iteration
  bool early_stopped = false;
};

/// Maps decoded values to a score to maximize. A throw or a non-finite
/// result counts as a failure and is recorded as the worst value seen.
using Objective = std::function<double(std::span<const double> values)>;

/// Latin-hypercube design of n points on the unit cube.
std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::size_t dims, std::uint64_t seed);

/// GP/EI loop: space-filling start, then one EI-maximizing proposal per
/// iteration; stops early when proposals repeat (within converge_tol in the
/// unit cube) for converge_repeats iterations in a row.
OptimizeResult optimize(const Objective& objective, const SearchSpace& space, const OptimizeConfig& cfg);

/// `iter,<dim names>...,value,best_so_far`, points in unit-cube coordinates.
std::string format_history_csv(const SearchSpace& space, std::span<const HistoryEntry> history);
void write_history_csv(const SearchSpace& space, std::span<const HistoryEntry> history,
                       const std::filesystem::path& path);

using SpecObjective = std::function<double(const learn::ModelSpec&)>;

struct TuneResult {
  learn::ModelSpec best;
  SearchSpace space;
  OptimizeResult run;
};

TuneResult tune(const SpecObjective& objective, learn::ModelKind kind, const OptimizeConfig& cfg);

}  // namespace echoflag::bayesopt
