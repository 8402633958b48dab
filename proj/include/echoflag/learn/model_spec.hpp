#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

namespace echoflag::learn {

struct ForestSpec {
  std::int64_t n_trees = 187;
  std::int64_t min_samples_leaf = 24;
  friend bool operator==(const ForestSpec&, const ForestSpec&) = default;
};

struct SvmSpec {
  double alpha = 0.077;
  friend bool operator==(const SvmSpec&, const SvmSpec&) = default;
};

/// Three SELU hidden layers, dropout after the third.
struct FfnnSpec {
  std::array<std::int64_t, 3> hidden{75, 105, 95};
  double dropout3 = 0.6;
  friend bool operator==(const FfnnSpec&, const FfnnSpec&) = default;
};

/// Three conv blocks (conv, batch norm, ReLU, max-pool 2; 8/16/32 channels)
/// followed by the FFNN head.
struct CnnSpec {
  std::array<std::int64_t, 3> kernels{5, 59, 19};
  std::array<std::int64_t, 3> hidden{260, 319, 101};
  double dropout3 = 0.9;
  friend bool operator==(const CnnSpec&, const CnnSpec&) = default;
};

using ModelSpec = std::variant<ForestSpec, SvmSpec, FfnnSpec, CnnSpec>;

enum class ModelKind { Forest, Svm, Ffnn, Cnn };

inline constexpr std::array<std::int64_t, 3> kConvChannels{8, 16, 32};

ModelKind kind_of(const ModelSpec& spec) noexcept;
std::string_view kind_name(ModelKind kind) noexcept;
ModelKind parse_kind(std::string_view name);
bool is_network(const ModelSpec& spec) noexcept;

/// Throws InvalidConfig when a field leaves its search range.
void validate(const ModelSpec& spec);

/// Short human-readable rendering, e.g. "cnn(k=5,59,19 h=260,319,101 p=0.9)".
std::string describe(const ModelSpec& spec);

/// JSON object {"kind": "...", ...fields}; the inverse throws Parse on
/// malformed input and InvalidConfig on an unknown kind.
std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(std::string_view json);

/// Defaults for a kind (the tuned values).
ModelSpec default_spec(ModelKind kind);

}  // namespace echoflag::learn
