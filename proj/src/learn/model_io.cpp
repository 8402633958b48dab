#include <cmath>
#include <limits>

#include "echoflag/error.hpp"
#include "echoflag/io.hpp"
#include "echoflag/learn/model.hpp"
#include "json.hpp"

namespace echoflag::learn {

using io::ByteReader;
using io::ByteWriter;
using io::fixed;
using io::read_text;
using io::write_text;

namespace {

constexpr std::string_view kFormat = "echoflag-model";
constexpr int kVersion = 1;
constexpr std::size_t kNodeFloats = 5;

nlohmann::json nullable(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }
double unnull(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

/// Flattens the learned state into tensors; `fill` does the reverse.
std::vector<std::vector<float>> tensors_of(const ModelImpl& impl) {
  std::vector<std::vector<float>> out;
  if (const auto* f = std::get_if<RandomForest>(&impl)) {
    for (const auto& t : f->trees()) {
      auto& v = out.emplace_back();
      v.reserve(t.nodes.size() * kNodeFloats);
      for (const auto& n : t.nodes) {
        v.push_back(static_cast<float>(n.feature));
        v.push_back(n.threshold);
        v.push_back(static_cast<float>(n.left));
        v.push_back(static_cast<float>(n.right));
        v.push_back(n.positive_fraction);
      }
    }
  } else if (const auto* s = std::get_if<LinearSvm>(&impl)) {
    out.emplace_back(s->weights().begin(), s->weights().end());
    out.push_back({static_cast<float>(s->bias()), static_cast<float>(s->platt_a()),
                   static_cast<float>(s->platt_b())});
  } else {
    for (const auto& t : std::get<Network>(impl).state()) out.emplace_back(t.begin(), t.end());
  }
  return out;
}

void fill(ModelImpl& impl, const std::vector<std::vector<float>>& tensors) {
  if (auto* f = std::get_if<RandomForest>(&impl)) {
    for (const auto& v : tensors) {
      if (v.size() % kNodeFloats != 0 || v.empty()) throw Error(ErrorCode::Parse, "malformed tree tensor");
      DecisionTree tree;
      const std::size_t n = v.size() / kNodeFloats;
      for (std::size_t i = 0; i < n; ++i) {
        const float* p = v.data() + i * kNodeFloats;
        DecisionTree::Node node{static_cast<std::int32_t>(p[0]), p[1], static_cast<std::int32_t>(p[2]),
                                static_cast<std::int32_t>(p[3]), p[4]};
        if (node.feature >= 0 && (node.left <= 0 || node.right <= 0 || static_cast<std::size_t>(node.left) >= n ||
                                  static_cast<std::size_t>(node.right) >= n))
          throw Error(ErrorCode::Parse, "tree node points outside its tree");
        tree.nodes.push_back(node);
      }
      f->trees().push_back(std::move(tree));
    }
  } else if (auto* s = std::get_if<LinearSvm>(&impl)) {
    if (tensors.size() != 2 || tensors[1].size() != 3) throw Error(ErrorCode::Parse, "malformed SVM tensors");
    s->weights().assign(tensors[0].begin(), tensors[0].end());
    s->bias() = tensors[1][0];
    s->platt_a() = tensors[1][1];
    s->platt_b() = tensors[1][2];
  } else {
    auto state = std::get<Network>(impl).state();
    if (state.size() != tensors.size()) throw Error(ErrorCode::Parse, "network tensor count mismatch");
    for (std::size_t k = 0; k < state.size(); ++k) {
      if (state[k].size() != tensors[k].size()) throw Error(ErrorCode::Parse, "network tensor size mismatch");
      std::copy(tensors[k].begin(), tensors[k].end(), state[k].begin());
    }
  }
}

}  // namespace

std::string encode_model(const TrainedModel& m) {
  const auto tensors = tensors_of(m.impl);
  nlohmann::json h;
  h["format"] = kFormat;
  h["version"] = kVersion;
  h["spec"] = nlohmann::json::parse(spec_to_json(m.spec));
  h["seed"] = m.seed;
  h["input_length"] = m.input_length;
  h["stats_length"] = m.stats.size();
  auto& sizes = h["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors) sizes.push_back(t.size());
  auto& hist = h["history"] = nlohmann::json::array();
  for (const auto& r : m.history)
    hist.push_back({r.epoch, r.train_loss, r.train_acc, nullable(r.val_loss), nullable(r.val_acc)});

  ByteWriter w;
  w.raw(h.dump());
  w.raw("\n");
  for (double v : m.stats.mean) w.f32(static_cast<float>(v));
  for (double v : m.stats.stddev) w.f32(static_cast<float>(v));
  for (const auto& t : tensors)
    for (float v : t) w.f32(v);
  const auto& bytes = w.bytes();
  return {bytes.begin(), bytes.end()};
}

TrainedModel decode_model(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw Error(ErrorCode::Parse, "model file has no header line");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("model header: ") + e.what());
  }
  TrainedModel m;
  std::vector<std::size_t> sizes;
  std::size_t stats_length = 0;
  try {
    if (h.at("format") != kFormat || h.at("version") != kVersion)
      throw Error(ErrorCode::BadMagic, "not an echoflag model (or unsupported version)");
    m.spec = spec_from_json(h.at("spec").dump());
    m.seed = h.at("seed").get<std::uint64_t>();
    m.input_length = h.at("input_length").get<std::size_t>();
    stats_length = h.at("stats_length").get<std::size_t>();
    sizes = h.at("tensors").get<std::vector<std::size_t>>();
    for (const auto& r : h.at("history"))
      m.history.push_back({r.at(0).get<std::size_t>(), r.at(1).get<double>(), r.at(2).get<double>(), unnull(r.at(3)),
                           unnull(r.at(4))});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("model header: ") + e.what());
  }
  if (stats_length != 0 && stats_length != m.input_length)
    throw Error(ErrorCode::DimensionMismatch, "stats length differs from input length");

  const auto* data = reinterpret_cast<const std::uint8_t*>(bytes.data()) + nl + 1;
  ByteReader r(std::span(data, bytes.size() - nl - 1));
  m.stats.mean.resize(stats_length);
  m.stats.stddev.resize(stats_length);
  for (auto& v : m.stats.mean) v = r.f32();
  for (auto& v : m.stats.stddev) v = r.f32();
  std::vector<std::vector<float>> tensors;
  for (auto n : sizes) {
    if (n > r.remaining() / 4) throw Error(ErrorCode::TruncatedPayload, "model blob shorter than its header says");
    auto& t = tensors.emplace_back(n);
    for (auto& v : t) v = r.f32();
  }
  if (r.remaining() != 0) throw Error(ErrorCode::TruncatedPayload, "trailing bytes after model blob");

  switch (m.kind()) {
    case ModelKind::Forest: m.impl = RandomForest{}; break;
    case ModelKind::Svm: m.impl = LinearSvm{}; break;
    default: m.impl = Network::build(m.spec, m.input_length, 0); break;
  }
  fill(m.impl, tensors);
  if (const auto* s = std::get_if<LinearSvm>(&m.impl); s && s->weights().size() != m.input_length)
    throw Error(ErrorCode::DimensionMismatch, "SVM weight count differs from input length");
  return m;
}

void save_model(const TrainedModel& m, const std::filesystem::path& path) { write_text(path, encode_model(m)); }

TrainedModel load_model(const std::filesystem::path& path) { return decode_model(read_text(path)); }

std::string format_history_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& r : history)
    out += std::to_string(r.epoch) + ',' + fixed(r.train_loss, 6) + ',' + fixed(r.train_acc, 6) + ',' +
           fixed(r.val_loss, 6) + ',' + fixed(r.val_acc, 6) + '\n';
  return out;
}

void write_history_csv(std::span<const EpochRecord> history, const std::filesystem::path& path) {
  write_text(path, format_history_csv(history));
}

}  // namespace echoflag::learn
