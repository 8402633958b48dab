#include "echoflag/learn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "echoflag/error.hpp"

namespace echoflag::learn {

namespace {

constexpr std::size_t kEvalChunk = 512;

template <class... F>
struct Overload : F... {
  using F::operator()...;
};

void check_width(const PingMatrix& x, std::size_t expected) {
  if (x.length != expected)
    throw Error(ErrorCode::DimensionMismatch, "model expects " + std::to_string(expected) + " cells per ping, got " +
                                                  std::to_string(x.length));
}

std::vector<double> network_proba(Network& net, const PingMatrix& x, ForwardMode mode, Rng* rng) {
  std::vector<double> out(x.count);
  for (std::size_t start = 0; start < x.count; start += kEvalChunk) {
    const std::size_t b = std::min(kEvalChunk, x.count - start);
    const auto logits =
        net.forward(std::span(x.values).subspan(start * x.length, b * x.length), b, mode, rng);
    for (std::size_t i = 0; i < b; ++i) out[start + i] = sigmoid(logits[i]);
  }
  return out;
}

std::vector<double> rowwise(const PingMatrix& x, auto&& f) {
  std::vector<double> out(x.count);
  for (std::size_t i = 0; i < x.count; ++i) out[i] = f(x.ping(i));
  return out;
}

void train_network(TrainedModel& m, const Dataset& data, const Dataset* val, const TrainConfig& cfg) {
  Network net = Network::build(m.spec, data.input_length(), mix_seed(cfg.seed, hash_tag("init")));
  Adam adam(cfg.adam);
  Rng rng(mix_seed(cfg.seed, hash_tag("batches")));
  const std::size_t n = data.size();
  const std::size_t d = data.input_length();
  const std::size_t batch = cfg.full_batch ? n : std::min(cfg.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> xb(batch * d);
  std::vector<std::uint8_t> yb(batch);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b = std::min(batch, n - start);
      for (std::size_t i = 0; i < b; ++i) {
        const auto src = data.x.ping(order[start + i]);
        std::copy(src.begin(), src.end(), xb.begin() + static_cast<std::ptrdiff_t>(i * d));
        yb[i] = data.y[order[start + i]];
      }
      const auto logits = net.forward(std::span(xb).first(b * d), b, kTrainMode, &rng);
      for (std::size_t i = 0; i < b; ++i) hits += static_cast<std::uint8_t>(logits[i] >= 0.0) == yb[i];
      net.zero_grad();
      loss_sum += net.backward(std::span(yb).first(b)) * static_cast<double>(b);
      auto params = net.params();
      adam.step(params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_acc = static_cast<double>(hits) / static_cast<double>(n);
    rec.val_loss = rec.val_acc = std::numeric_limits<double>::quiet_NaN();
    if (val != nullptr && !val->empty()) {
      const auto p = network_proba(net, val->x, kEvalMode, nullptr);
      rec.val_loss = binary_cross_entropy(p, val->y);
      rec.val_acc = accuracy(p, val->y);
    }
    m.history.push_back(rec);
  }
  m.impl = std::move(net);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
  if (mc_passes < 1) throw Error(ErrorCode::InvalidConfig, "mc_passes must be >= 1");
  if (!full_batch && batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch size must be >= 1");
}

TrainedModel train(const ModelSpec& spec, const Dataset& train_set, const Dataset* val_set, const TrainConfig& cfg,
                   StandardizationStats stats) {
  cfg.validate();
  train_set.validate();
  if (train_set.empty()) throw Error(ErrorCode::EmptyInput, "empty training set");
  if (val_set != nullptr) {
    val_set->validate();
    if (!val_set->empty() && val_set->input_length() != train_set.input_length())
      throw Error(ErrorCode::DimensionMismatch, "validation and training inputs differ in length");
  }
  if (!stats.mean.empty() && stats.size() != train_set.input_length())
    throw Error(ErrorCode::DimensionMismatch, "standardization stats do not match the input length");

  TrainedModel m;
  m.spec = spec;
  m.seed = cfg.seed;
  m.input_length = train_set.input_length();
  m.stats = std::move(stats);
  std::visit(Overload{
                 [&](const ForestSpec& s) {
                   if (!train_set.has_both_classes())
                     throw Error(ErrorCode::SingleClassDataset, "random forest needs both classes");
                   m.impl = RandomForest::train(s, train_set, cfg.seed);
                 },
                 [&](const SvmSpec& s) {
                   if (!train_set.has_both_classes())
                     throw Error(ErrorCode::SingleClassDataset, "SVM needs both classes");
                   m.impl = LinearSvm::train(s, train_set, cfg.epochs, cfg.seed);
                 },
                 [&](const auto&) { train_network(m, train_set, val_set, cfg); },
             },
             spec);
  return m;
}

std::vector<double> predict_proba(const TrainedModel& m, const PingMatrix& x) {
  check_width(x, m.input_length);
  return std::visit(Overload{
                        [&](const RandomForest& f) { return rowwise(x, [&](auto p) { return f.predict(p); }); },
                        [&](const LinearSvm& s) { return rowwise(x, [&](auto p) { return s.predict(p); }); },
                        [&](const Network& n) {
                          Network net = n;
                          return network_proba(net, x, kEvalMode, nullptr);
                        },
                    },
                    m.impl);
}

std::vector<double> predict_proba_stochastic(const TrainedModel& m, const PingMatrix& x, Rng& rng) {
  if (const auto* n = std::get_if<Network>(&m.impl)) {
    check_width(x, m.input_length);
    Network net = *n;
    return network_proba(net, x, kMcDropoutMode, &rng);
  }
  return predict_proba(m, x);
}

static double dropout_rate(const ModelSpec& spec) noexcept {
  if (const auto* f = std::get_if<FfnnSpec>(&spec)) return f->dropout3;
  if (const auto* c = std::get_if<CnnSpec>(&spec)) return c->dropout3;
  return 0.0;
}

std::vector<double> mc_dropout_proba(const TrainedModel& m, const PingMatrix& x, std::size_t passes,
                                     std::uint64_t seed) {
  if (passes < 1) throw Error(ErrorCode::InvalidConfig, "passes must be >= 1");
  const auto* base = std::get_if<Network>(&m.impl);
  // Without dropout every pass is the deterministic one.
  if (base == nullptr || dropout_rate(m.spec) == 0.0) return predict_proba(m, x);
  check_width(x, m.input_length);
  // The layers before the dropout are deterministic at inference, so they run
  // once per chunk and only the head is resampled.
  Network net = *base;
  Rng rng(seed);
  std::vector<double> mean(x.count, 0.0);
  for (std::size_t start = 0; start < x.count; start += kEvalChunk) {
    const std::size_t b = std::min(kEvalChunk, x.count - start);
    const Tensor& features = net.forward_trunk(std::span(x.values).subspan(start * x.length, b * x.length), b);
    for (std::size_t pass = 0; pass < passes; ++pass) {
      const auto logits = net.forward_head(features, kMcDropoutMode, &rng);
      for (std::size_t i = 0; i < b; ++i) mean[start + i] += sigmoid(logits[i]);
    }
  }
  for (auto& p : mean) p /= static_cast<double>(passes);
  return mean;
}

double mc_dropout_accuracy(const TrainedModel& m, const Dataset& test, std::size_t passes, std::uint64_t seed) {
  if (test.empty()) throw Error(ErrorCode::EmptyTestSet, "empty test set");
  return accuracy(mc_dropout_proba(m, test.x, passes, seed), test.y);
}

GradCheckReport grad_check(const ModelSpec& spec, const PingMatrix& x, std::span<const std::uint8_t> y,
                           std::uint64_t seed, double h) {
  if (y.size() != x.count) throw Error(ErrorCode::DimensionMismatch, "label count != batch");
  Network net = Network::build(spec, x.length, seed);
  const auto loss_at = [&] {
    const auto logits = net.forward(x.values, x.count, kCheckMode);
    double loss = 0.0;
    for (std::size_t i = 0; i < x.count; ++i) loss += bce_with_logit(logits[i], y[i]);
    return loss / static_cast<double>(x.count);
  };

  net.forward(x.values, x.count, kCheckMode);
  const auto signature = net.kink_signature();
  net.zero_grad();
  net.backward(y);
  auto params = net.params();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.emplace_back(p.grad.begin(), p.grad.end());

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k].value;
    double kind_max = 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double lp = loss_at();
      const bool smooth_p = net.kink_signature() == signature;
      value[i] = saved - h;
      const double lm = loss_at();
      const bool smooth_m = net.kink_signature() == signature;
      value[i] = saved;
      if (!smooth_p || !smooth_m) {
        ++report.skipped;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-7});
      kind_max = std::max(kind_max, err);
      ++report.checked;
    }
    report.max_relative_error = std::max(report.max_relative_error, kind_max);
    auto it = std::find_if(report.per_kind.begin(), report.per_kind.end(),
                           [&](const auto& e) { return e.first == params[k].kind; });
    if (it == report.per_kind.end())
      report.per_kind.emplace_back(params[k].kind, kind_max);
    else
      it->second = std::max(it->second, kind_max);
  }
  return report;
}

}  // namespace echoflag::learn
