#include "echoflag/learn/model_spec.hpp"

#include <fmt/format.h>

#include "echoflag/error.hpp"
#include "json.hpp"

namespace echoflag::learn {

namespace {

template <class... F>
struct Overload : F... {
  using F::operator()...;
};

void check_range(std::string_view field, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi))
    throw Error(ErrorCode::InvalidConfig, fmt::format("{}={} outside [{}, {}]", field, v, lo, hi));
}

void check_head(const std::array<std::int64_t, 3>& h, double dropout) {
  check_range("h1", static_cast<double>(h[0]), 5, 600);
  check_range("h2", static_cast<double>(h[1]), 5, 320);
  check_range("h3", static_cast<double>(h[2]), 5, 120);
  check_range("dropout3", dropout, 0.0, 1.0);
}

}  // namespace

ModelKind kind_of(const ModelSpec& spec) noexcept { return static_cast<ModelKind>(spec.index()); }

std::string_view kind_name(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Forest: return "rf";
    case ModelKind::Svm: return "svm";
    case ModelKind::Ffnn: return "ffnn";
    case ModelKind::Cnn: return "cnn";
  }
  return "?";
}

ModelKind parse_kind(std::string_view name) {
  for (auto k : {ModelKind::Forest, ModelKind::Svm, ModelKind::Ffnn, ModelKind::Cnn})
    if (kind_name(k) == name) return k;
  throw Error(ErrorCode::InvalidConfig, fmt::format("unknown model kind '{}'", name));
}

bool is_network(const ModelSpec& spec) noexcept {
  const auto k = kind_of(spec);
  return k == ModelKind::Ffnn || k == ModelKind::Cnn;
}

void validate(const ModelSpec& spec) {
  std::visit(Overload{
                 [](const ForestSpec& s) {
                   check_range("n_trees", static_cast<double>(s.n_trees), 10, 10000);
                   check_range("min_samples_leaf", static_cast<double>(s.min_samples_leaf), 20, 50);
                 },
                 [](const SvmSpec& s) { check_range("alpha", s.alpha, 1e-4, 0.1); },
                 [](const FfnnSpec& s) { check_head(s.hidden, s.dropout3); },
                 [](const CnnSpec& s) {
                   for (auto k : s.kernels) check_range("kernel", static_cast<double>(k), 5, 60);
                   check_head(s.hidden, s.dropout3);
                 },
             },
             spec);
}

std::string describe(const ModelSpec& spec) {
  return std::visit(
      Overload{
          [](const ForestSpec& s) { return fmt::format("rf(trees={} leaf={})", s.n_trees, s.min_samples_leaf); },
          [](const SvmSpec& s) { return fmt::format("svm(alpha={})", s.alpha); },
          [](const FfnnSpec& s) {
            return fmt::format("ffnn(h={},{},{} p={})", s.hidden[0], s.hidden[1], s.hidden[2], s.dropout3);
          },
          [](const CnnSpec& s) {
            return fmt::format("cnn(k={},{},{} h={},{},{} p={})", s.kernels[0], s.kernels[1], s.kernels[2],
                               s.hidden[0], s.hidden[1], s.hidden[2], s.dropout3);
          },
      },
      spec);
}

std::string spec_to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["kind"] = kind_name(kind_of(spec));
  std::visit(Overload{
                 [&](const ForestSpec& s) {
                   j["n_trees"] = s.n_trees;
                   j["min_samples_leaf"] = s.min_samples_leaf;
                 },
                 [&](const SvmSpec& s) { j["alpha"] = s.alpha; },
                 [&](const FfnnSpec& s) {
                   j["hidden"] = s.hidden;
                   j["dropout3"] = s.dropout3;
                 },
                 [&](const CnnSpec& s) {
                   j["kernels"] = s.kernels;
                   j["hidden"] = s.hidden;
                   j["dropout3"] = s.dropout3;
                 },
             },
             spec);
  return j.dump();
}

ModelSpec default_spec(ModelKind kind) {
  switch (kind) {
    case ModelKind::Forest: return ForestSpec{};
    case ModelKind::Svm: return SvmSpec{};
    case ModelKind::Ffnn: return FfnnSpec{};
    case ModelKind::Cnn: return CnnSpec{};
  }
  return ForestSpec{};
}

ModelSpec spec_from_json(std::string_view json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
    const auto kind = parse_kind(j.at("kind").get<std::string>());
    ModelSpec spec = default_spec(kind);
    // Missing fields keep their defaults.
    std::visit(Overload{
                   [&](ForestSpec& s) {
                     s.n_trees = j.value("n_trees", s.n_trees);
                     s.min_samples_leaf = j.value("min_samples_leaf", s.min_samples_leaf);
                   },
                   [&](SvmSpec& s) { s.alpha = j.value("alpha", s.alpha); },
                   [&](FfnnSpec& s) {
                     s.hidden = j.value("hidden", s.hidden);
                     s.dropout3 = j.value("dropout3", s.dropout3);
                   },
                   [&](CnnSpec& s) {
                     s.kernels = j.value("kernels", s.kernels);
                     s.hidden = j.value("hidden", s.hidden);
                     s.dropout3 = j.value("dropout3", s.dropout3);
                   },
               },
               spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("model spec: ") + e.what());
  }
}

}  // namespace echoflag::learn
