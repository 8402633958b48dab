#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "echoflag/error.hpp"
#include "echoflag/learn/model.hpp"
#include "echoflag/rng.hpp"
#include "support.hpp"

namespace echoflag::learn {
namespace {

// Two classes separated along a bump at a class-specific position.
Dataset separable(std::size_t n, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.x = PingMatrix(n, length);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = i % 2;
    auto p = d.x.ping(i);
    for (auto& v : p) v = 0.3 * rng.normal();
    const std::size_t at = y ? length / 4 : 3 * length / 4;
    for (std::size_t k = at; k < at + 4 && k < length; ++k) p[k] += 2.0;
    d.y.push_back(y);
    d.ids.push_back(i);
  }
  return d;
}

double train_accuracy(const TrainedModel& m, const Dataset& d) { return accuracy(predict_proba(m, d.x), d.y); }

TEST(Dataset, ValidateSubsetConcatenate) {
  auto d = separable(10, 6, 1);
  EXPECT_NO_THROW(d.validate());
  EXPECT_TRUE(d.has_both_classes());
  EXPECT_EQ(d.positives(), 5U);
  const std::vector<std::size_t> rows{1, 3};
  const auto s = d.subset(rows);
  EXPECT_EQ(s.ids, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(s.x.ping(1)[2], d.x.ping(3)[2]);
  const Dataset* parts[] = {&d, &s};
  EXPECT_EQ(concatenate(parts).size(), 12U);
  d.y[0] = 2;
  EXPECT_THROW(d.validate(), Error);
}

TEST(Metrics, AccuracyAndBce) {
  const std::vector<double> p{0.9, 0.2, 0.5, 0.4};
  const std::vector<std::uint8_t> y{1, 0, 1, 1};
  EXPECT_DOUBLE_EQ(accuracy(p, y), 0.75);
  const std::vector<double> half{0.5, 0.5};
  const std::vector<std::uint8_t> yy{0, 1};
  EXPECT_NEAR(binary_cross_entropy(half, yy), std::numbers::ln2, 1e-15);
}

TEST(Train, TunedCnnFitsSeparableData) {
  const auto d = separable(200, 64, 2);
  TrainConfig cfg{.epochs = 30, .batch_size = 32, .seed = 1};
  const auto m = train(default_spec(ModelKind::Cnn), d, nullptr, cfg);
  EXPECT_GE(train_accuracy(m, d), 0.99);
  ASSERT_EQ(m.history.size(), 30U);
  EXPECT_TRUE(std::isnan(m.history.back().val_acc));
}

TEST(Train, ForestWithTunedSpec) {
  const auto d = separable(200, 64, 2);
  const auto m = train(ForestSpec{187, 24}, d, nullptr, {.seed = 1});
  EXPECT_GE(train_accuracy(m, d), 0.95);
}

TEST(Train, SvmAndFfnn) {
  const auto d = separable(300, 32, 4);
  EXPECT_GE(train_accuracy(train(SvmSpec{}, d, nullptr, {.epochs = 20, .seed = 1}), d), 0.95);
  EXPECT_GE(train_accuracy(train(FfnnSpec{{32, 16, 8}, 0.0}, d, nullptr, {.epochs = 30, .batch_size = 32}), d), 0.95);
}

TEST(Train, DeterministicForFixedSeed) {
  const auto d = separable(100, 32, 5);
  const TrainConfig cfg{.epochs = 3, .batch_size = 16, .seed = 3};
  const CnnSpec spec{{5, 7, 5}, {16, 8, 4}, 0.5};
  EXPECT_EQ(encode_model(train(spec, d, &d, cfg)), encode_model(train(spec, d, &d, cfg)));
  EXPECT_EQ(encode_model(train(ForestSpec{20, 20}, d, nullptr, cfg)),
            encode_model(train(ForestSpec{20, 20}, d, nullptr, cfg)));
}

TEST(Train, Errors) {
  auto d = separable(20, 8, 6);
  for (auto& y : d.y) y = 0;
  try {
    train(SvmSpec{}, d, nullptr, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClassDataset);
  }
  EXPECT_THROW(train(SvmSpec{}, Dataset{}, nullptr, {}), Error);
  const auto other = separable(10, 9, 1);
  EXPECT_THROW(train(FfnnSpec{{4, 4, 4}, 0.0}, separable(10, 8, 1), &other, {.epochs = 1}), Error);
}

TEST(Predict, NoDropoutMeansNoStochasticity) {
  const auto d = separable(40, 32, 7);
  const auto m = train(CnnSpec{{5, 5, 5}, {8, 8, 8}, 0.0}, d, nullptr, {.epochs = 2, .batch_size = 8});
  Rng rng(1);
  EXPECT_EQ(predict_proba(m, d.x), predict_proba_stochastic(m, d.x, rng));
  EXPECT_EQ(predict_proba(m, d.x), mc_dropout_proba(m, d.x, 7, 3));
}

TEST(Predict, HeavyDropoutVariesAcrossPasses) {
  const auto d = separable(10, 32, 8);
  const auto m = train(CnnSpec{{5, 5, 5}, {16, 16, 16}, 0.9}, d, nullptr, {.epochs = 2, .batch_size = 8});
  Rng rng(2);
  std::vector<double> first = predict_proba_stochastic(m, d.x, rng);
  bool varied = false;
  for (int k = 0; k < 49 && !varied; ++k) varied = predict_proba_stochastic(m, d.x, rng)[0] != first[0];
  EXPECT_TRUE(varied);
}

TEST(Predict, UnanimousForestVote) {
  const auto d = separable(60, 16, 9);
  auto m = train(ForestSpec{187, 24}, d, nullptr, {});
  for (auto& t : std::get<RandomForest>(m.impl).trees())
    for (auto& n : t.nodes) n.positive_fraction = 1.0F;
  for (double p : predict_proba(m, d.x)) EXPECT_EQ(p, 1.0);
}

TEST(McAccuracy, CollapsesToPlainAccuracy) {
  const auto d = separable(60, 16, 10);
  const auto m = train(FfnnSpec{{8, 8, 8}, 0.0}, d, nullptr, {.epochs = 2});
  EXPECT_EQ(mc_dropout_accuracy(m, d, 1, 5), train_accuracy(m, d));
}

TEST(McAccuracy, PerfectModel) {
  const auto d = separable(50, 16, 11);
  TrainedModel m;
  m.spec = SvmSpec{};
  m.input_length = 16;
  LinearSvm svm;
  svm.weights().assign(16, 0.0);
  for (std::size_t k = 4; k < 8; ++k) svm.weights()[k] = 1.0;
  svm.bias() = -4.0;
  svm.platt_a() = -10.0;
  m.impl = svm;
  EXPECT_EQ(mc_dropout_accuracy(m, d, 50, 1), 1.0);
}

TEST(GradCheck, SmallNetworks) {
  Rng rng(12);
  PingMatrix x(6, 24);
  for (auto& v : x.values) v = rng.normal();
  const std::vector<std::uint8_t> y{0, 1, 1, 0, 1, 0};
  const auto ffnn = grad_check(FfnnSpec{{8, 6, 4}, 0.5}, x, y, 1);
  EXPECT_LT(ffnn.max_relative_error, 1e-4);
  EXPECT_GT(ffnn.checked, 100U);
  const auto cnn = grad_check(CnnSpec{{5, 5, 5}, {8, 6, 4}, 0.5}, x, y, 1);
  EXPECT_LT(cnn.max_relative_error, 1e-4);
  EXPECT_GT(cnn.checked, 100U);
}

TEST(Network, ZeroFinalLayerGivesLn2) {
  auto net = Network::build(FfnnSpec{{8, 6, 4}, 0.0}, 10, 3);
  for (auto it = net.layers().rbegin(); it != net.layers().rend(); ++it)
    if (auto* dense = std::get_if<Dense>(&*it)) {
      std::fill(dense->w.begin(), dense->w.end(), 0.0);
      std::fill(dense->b.begin(), dense->b.end(), 0.0);
      break;
    }
  Rng rng(1);
  std::vector<double> x(4 * 10);
  for (auto& v : x) v = rng.normal();
  net.forward(x, 4, kCheckMode);
  const std::vector<std::uint8_t> y{0, 1, 0, 1};
  EXPECT_NEAR(net.backward(y), std::numbers::ln2, 1e-12);
}

TEST(ModelIo, RoundTrip) {
  testing::TempDir dir;
  const auto d = separable(60, 20, 13);
  for (const ModelSpec& spec :
       {ModelSpec{ForestSpec{15, 20}}, ModelSpec{SvmSpec{0.01}}, ModelSpec{FfnnSpec{{8, 6, 4}, 0.3}},
        ModelSpec{CnnSpec{{5, 5, 5}, {8, 6, 4}, 0.3}}}) {
    auto [z, stats] = standardize(d.x);
    Dataset dz = d;
    dz.x = z;
    const auto m = train(spec, dz, nullptr, {.epochs = 2, .batch_size = 16, .seed = 4}, stats);
    const auto path = dir / "m.bin";
    save_model(m, path);
    const auto back = load_model(path);
    EXPECT_EQ(back.spec, m.spec) << describe(spec);
    EXPECT_EQ(back.stats.size(), 20U);
    EXPECT_EQ(encode_model(back), encode_model(m));
    const auto p0 = predict_proba(m, dz.x), p1 = predict_proba(back, dz.x);
    for (std::size_t i = 0; i < p0.size(); ++i) EXPECT_NEAR(p0[i], p1[i], 1e-5);
  }
  EXPECT_THROW(decode_model("garbage"), Error);
}

TEST(ModelSpec, JsonAndValidation) {
  for (auto kind : {ModelKind::Forest, ModelKind::Svm, ModelKind::Ffnn, ModelKind::Cnn}) {
    const auto spec = default_spec(kind);
    EXPECT_EQ(spec_from_json(spec_to_json(spec)), spec);
    EXPECT_NO_THROW(validate(spec));
    EXPECT_EQ(parse_kind(kind_name(kind)), kind);
  }
  EXPECT_EQ(describe(default_spec(ModelKind::Cnn)), "cnn(k=5,59,19 h=260,319,101 p=0.9)");
  EXPECT_THROW(validate(SvmSpec{0.5}), Error);
  EXPECT_THROW(validate(CnnSpec{{4, 5, 5}, {5, 5, 5}, 0.1}), Error);
  EXPECT_THROW(spec_from_json("{\"kind\":\"tree\"}"), Error);
  EXPECT_THROW(spec_from_json("{"), Error);
}

TEST(Platt, SeparatesMargins) {
  const std::vector<double> f{-2, -1.5, -1, 1, 1.5, 2};
  const std::vector<std::uint8_t> y{0, 0, 0, 1, 1, 1};
  const auto [a, b] = fit_platt(f, y);
  EXPECT_LT(a, 0.0);
  EXPECT_NEAR(b, 0.0, 1e-6);
}

}  // namespace
}  // namespace echoflag::learn
