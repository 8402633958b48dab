#include "echoflag/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "echoflag/error.hpp"
#include "echoflag/io.hpp"
#include "echoflag/rng.hpp"
#include "json.hpp"

namespace echoflag::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> iota_vec(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

/// First `count` items of a seeded shuffle of `pool`, sorted.
std::vector<std::size_t> draw(std::vector<std::size_t> pool, std::size_t count, std::uint64_t seed,
                              std::string_view what) {
  if (count > pool.size())
    throw Error(ErrorCode::PoolExhausted,
                fmt::format("{} needs {} pings but the pool holds {}", what, count, pool.size()));
  Rng rng(seed);
  rng.shuffle(std::span(pool));
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

bool intersects(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::vector<std::size_t> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::vector<std::size_t> both;
  std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(both));
  return !both.empty();
}

learn::Dataset standardized_copy(const learn::Dataset& raw, const StandardizationStats& stats) {
  learn::Dataset d = raw;
  if (!stats.mean.empty()) apply_standardization(d.x, stats);
  return d;
}

std::size_t passes_for(const learn::TrainedModel& m, std::size_t passes) {
  return learn::is_network(m.spec) ? passes : 1;
}

/// Trains on raw pings (stats from the training set) and fills the scores.
learn::TrainedModel train_and_score(RunRecord& rec, const learn::ModelSpec& spec, const learn::Dataset& train_raw,
                                    const learn::Dataset* val_raw, const learn::Dataset& test_a,
                                    const learn::Dataset* test_b, learn::TrainConfig tc) {
  tc.seed = rec.seed;
  auto [x, stats] = standardize(train_raw.x);
  learn::Dataset train = train_raw;
  train.x = std::move(x);
  learn::Dataset val;
  if (val_raw != nullptr) val = standardized_copy(*val_raw, stats);
  auto m = learn::train(spec, train, val_raw != nullptr ? &val : nullptr, tc, stats);
  rec.history = m.history;
  const auto eval_seed = mix_seed(rec.seed, hash_tag("eval"));
  rec.train_acc = learn::mc_dropout_accuracy(m, train, passes_for(m, tc.mc_passes), eval_seed);
  rec.test_a_acc = evaluate(m, test_a, tc.mc_passes, eval_seed);
  rec.test_b_acc = test_b != nullptr ? evaluate(m, *test_b, tc.mc_passes, eval_seed) : kNaN;
  return m;
}

struct Accum {
  double sum = 0.0, lo = kNaN, hi = kNaN;
  std::size_t n = 0;
  void add(double v) {
    if (std::isnan(v)) return;
    sum += v;
    lo = n == 0 ? v : std::min(lo, v);
    hi = n == 0 ? v : std::max(hi, v);
    ++n;
  }
  double mean() const { return n == 0 ? kNaN : sum / static_cast<double>(n); }
};

nlohmann::json nullable(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

}  // namespace

PreparedSurvey prepare_survey(const Echogram& raw, const BottomRecord& clean, const PrepareConfig& cfg) {
  if (clean.size() != raw.cols())
    throw Error(ErrorCode::MisalignedRecords,
                fmt::format("{} expert depths for {} pings", clean.size(), raw.cols()));
  PreparedSurvey s;
  s.bottom.clean_bottom_m = clean.clean_bottom_m;
  s.bottom.bottom_m = bottomline::detect_bottom(raw);
  auto f = format_echogram(raw, {cfg.trim_rows, cfg.bottom_signature_db, cfg.nan_fill_db});
  s.dropped = std::move(f.partition.dropped);
  s.formatted = std::move(f.echogram);
  s.data = relabel(s, cfg.threshold_m);
  s.labels = bottomline::label_pings(s.bottom, s.dropped, cfg.threshold_m);
  return s;
}

learn::Dataset relabel(const PreparedSurvey& s, double threshold_m) {
  const auto labels = bottomline::label_pings(s.bottom, s.dropped, threshold_m);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != PingLabel::NoBottom) keep.push_back(i);
  learn::Dataset d;
  d.x = extract_pings(s.formatted, keep);
  for (auto i : keep) d.y.push_back(labels[i] == PingLabel::StrongCorrection ? 1 : 0);
  d.ids = std::move(keep);
  return d;
}

DomainSurveys prepare_domain_pair(std::uint64_t seed, std::size_t size_a, std::size_t size_b,
                                  const PrepareConfig& cfg, const synthgen::DomainPairOptions& opts) {
  DomainSurveys d;
  std::tie(d.a_raw, d.b_raw) = synthgen::make_domain_pair(mix_seed(seed, hash_tag("domain-a")),
                                                          mix_seed(seed, hash_tag("domain-b")), size_a, size_b, opts);
  d.a = prepare_survey(d.a_raw.echogram, d.a_raw.bottom, cfg);
  d.b = prepare_survey(d.b_raw.echogram, d.b_raw.bottom, cfg);
  return d;
}

learn::CnnSpec desk_cnn_spec() { return {{5, 9, 5}, {64, 32, 16}, 0.5}; }

std::pair<learn::Dataset, learn::Dataset> split_train_test(const learn::Dataset& d, double train_fraction,
                                                           std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::InvalidConfig, "train_fraction must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(d.size())));
  auto rows = iota_vec(d.size());
  Rng(mix_seed(seed, hash_tag("split"))).shuffle(std::span(rows));
  std::vector<std::size_t> train(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {d.subset(train), d.subset(test)};
}

void SamplingPlan::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::InvalidConfig, "train_fraction must lie in (0, 1)");
  if (st_sizes.empty()) throw Error(ErrorCode::InvalidConfig, "at least one ST size is required");
  for (auto n : st_sizes)
    if (n == 0) throw Error(ErrorCode::InvalidConfig, "ST sizes must be positive");
  if (foreign_chunk < 2) throw Error(ErrorCode::InvalidConfig, "foreign chunk must hold at least 2 pings");
  if (foreign_count > foreign_chunk - foreign_chunk / 2)
    throw Error(ErrorCode::InvalidConfig, "foreign_count exceeds the mix half of the foreign chunk");
}

Datasets build_datasets(const SamplingPlan& plan, const learn::Dataset& a, const learn::Dataset& b) {
  plan.validate();
  a.validate();
  b.validate();
  if (a.input_length() != b.input_length() && !a.empty() && !b.empty())
    throw Error(ErrorCode::DimensionMismatch, "domains differ in ping length");
  Datasets d;

  const auto n_train = static_cast<std::size_t>(std::llround(plan.train_fraction * static_cast<double>(a.size())));
  auto shuffled = iota_vec(a.size());
  Rng(mix_seed(plan.seed, hash_tag("split-a"))).shuffle(std::span(shuffled));
  std::vector<std::size_t> pool_a(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
  d.test_rows_a.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
  std::sort(pool_a.begin(), pool_a.end());
  std::sort(d.test_rows_a.begin(), d.test_rows_a.end());

  for (auto n : plan.st_sizes)
    d.st_rows.push_back(draw(pool_a, n, mix_seed(plan.seed, mix_seed(hash_tag("st"), n)), "ST set"));
  d.cdt_rows_a = draw(pool_a, plan.base_count, mix_seed(plan.seed, hash_tag("cdt-base")), "CDT base");

  if (plan.foreign_chunk > b.size())
    throw Error(ErrorCode::PoolExhausted,
                fmt::format("foreign chunk of {} exceeds the {} labeled target pings", plan.foreign_chunk, b.size()));
  Rng chunk_rng(mix_seed(plan.seed, hash_tag("foreign-chunk")));
  const std::size_t start = chunk_rng.below(b.size() - plan.foreign_chunk + 1);
  std::vector<std::size_t> chunk(plan.foreign_chunk);
  std::iota(chunk.begin(), chunk.end(), start);
  chunk_rng.shuffle(std::span(chunk));
  const std::size_t half = plan.foreign_chunk / 2;
  d.validation_rows_b.assign(chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> mix(chunk.begin() + static_cast<std::ptrdiff_t>(half), chunk.end());
  std::sort(d.validation_rows_b.begin(), d.validation_rows_b.end());
  d.cdt_rows_b = draw(mix, plan.foreign_count, mix_seed(plan.seed, hash_tag("cdt-foreign")), "CDT foreign part");
  for (std::size_t i = 0; i < b.size(); ++i)
    if (i < start || i >= start + plan.foreign_chunk) d.test_rows_b.push_back(i);

  for (const auto& rows : d.st_rows) d.st.push_back(a.subset(rows));
  const auto base = a.subset(d.cdt_rows_a);
  const auto foreign = b.subset(d.cdt_rows_b);
  const learn::Dataset* parts[] = {&base, &foreign};
  d.cdt = learn::concatenate(parts);
  d.validation = b.subset(d.validation_rows_b);
  d.test_a = a.subset(d.test_rows_a);
  d.test_b = b.subset(d.test_rows_b);
  check_disjoint(d);
  return d;
}

void check_disjoint(const Datasets& d) {
  const auto fail = [](std::string_view what) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("{} overlaps its test set", what));
  };
  for (std::size_t k = 0; k < d.st_rows.size(); ++k)
    if (intersects(d.st_rows[k], d.test_rows_a)) fail(fmt::format("ST set {}", k));
  if (intersects(d.cdt_rows_a, d.test_rows_a)) fail("CDT base");
  if (intersects(d.cdt_rows_b, d.test_rows_b)) fail("CDT foreign part");
  if (intersects(d.cdt_rows_b, d.validation_rows_b)) fail("CDT foreign part (validation)");
  if (intersects(d.validation_rows_b, d.test_rows_b)) fail("validation half");
}

std::vector<SummaryRow> summarize(const ExperimentReport& r) {
  struct Group {
    SummaryRow row;
    Accum train, a, b;
  };
  std::vector<Group> groups;
  for (const auto& run : r.runs) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.row.algorithm == run.algorithm && g.row.set == run.set;
    });
    if (it == groups.end()) {
      groups.push_back({});
      it = std::prev(groups.end());
      it->row.algorithm = run.algorithm;
      it->row.set = run.set;
      it->row.train_size = run.train_size;
    }
    if (!run.error.empty()) continue;
    ++it->row.runs;
    it->train.add(run.train_acc);
    it->a.add(run.test_a_acc);
    it->b.add(run.test_b_acc);
  }
  std::vector<SummaryRow> out;
  for (auto& g : groups) {
    g.row.train_mean = g.train.mean();
    g.row.test_a_mean = g.a.mean();
    g.row.test_a_min = g.a.lo;
    g.row.test_a_max = g.a.hi;
    g.row.test_b_mean = g.b.mean();
    g.row.test_b_min = g.b.lo;
    g.row.test_b_max = g.b.hi;
    out.push_back(g.row);
  }
  return out;
}

const SummaryRow* find(std::span<const SummaryRow> rows, std::string_view algorithm, std::string_view set) {
  for (const auto& r : rows)
    if (r.algorithm == algorithm && r.set == set) return &r;
  return nullptr;
}

std::uint64_t run_seed(std::uint64_t master, std::string_view tag, std::size_t size, std::size_t repeat) noexcept {
  return mix_seed(mix_seed(master, hash_tag(tag)), mix_seed(size, repeat));
}

double evaluate(const learn::TrainedModel& m, const learn::Dataset& raw, std::size_t mc_passes, std::uint64_t seed) {
  const auto data = standardized_copy(raw, m.stats);
  return learn::mc_dropout_accuracy(m, data, passes_for(m, mc_passes), seed);
}

ExperimentReport run_scaling(const learn::Dataset& pool, const learn::Dataset& test,
                             std::span<const learn::ModelSpec> algorithms, std::span<const std::size_t> sizes,
                             const ExperimentConfig& cfg, std::uint64_t seed) {
  if (algorithms.empty() || sizes.empty()) throw Error(ErrorCode::InvalidConfig, "nothing to run");
  if (cfg.repeats < 1) throw Error(ErrorCode::InvalidConfig, "repeats must be >= 1");
  if (intersects(pool.ids, test.ids)) throw Error(ErrorCode::DimensionMismatch, "training pool overlaps the test set");
  ExperimentReport report;
  for (auto n : sizes) {
    for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
      const auto rows = draw(iota_vec(pool.size()), n, run_seed(seed, "sample", n, rep), "scaling sample");
      const auto sample = pool.subset(rows);
      for (const auto& spec : algorithms) {
        RunRecord rec;
        rec.algorithm = std::string(learn::kind_name(learn::kind_of(spec)));
        rec.set = fmt::format("N-{}", n);
        rec.train_size = n;
        rec.repeat = rep;
        rec.seed = run_seed(seed, rec.algorithm, n, rep);
        try {
          train_and_score(rec, spec, sample, nullptr, test, nullptr, cfg.train);
        } catch (const Error& e) {
          rec.error = e.what();
          rec.train_acc = rec.test_a_acc = rec.test_b_acc = kNaN;
        }
        rec.test_b_acc = kNaN;
        report.runs.push_back(std::move(rec));
      }
    }
  }
  return report;
}

ExperimentReport run_cross_domain(const Datasets& d, const learn::ModelSpec& spec, const ExperimentConfig& cfg,
                                  std::uint64_t seed, std::vector<learn::TrainedModel>* models) {
  check_disjoint(d);
  const auto algo = std::string(learn::kind_name(learn::kind_of(spec)));
  ExperimentReport report;
  const auto run = [&](const learn::Dataset& train, std::string set) {
    RunRecord rec;
    rec.algorithm = algo;
    rec.set = std::move(set);
    rec.train_size = train.size();
    rec.seed = run_seed(seed, rec.set, train.size(), 0);
    try {
      auto m = train_and_score(rec, spec, train, d.validation.empty() ? nullptr : &d.validation, d.test_a,
                               &d.test_b, cfg.train);
      if (models != nullptr) models->push_back(std::move(m));
    } catch (const Error& e) {
      rec.error = e.what();
      rec.train_acc = rec.test_a_acc = rec.test_b_acc = kNaN;
    }
    report.runs.push_back(std::move(rec));
  };
  for (const auto& st : d.st) run(st, fmt::format("ST-{}", st.size()));
  run(d.cdt, fmt::format("CDT-{}", d.cdt.size()));
  return report;
}

ExperimentReport cross_domain_study(std::span<const std::uint64_t> seeds, const learn::ModelSpec& spec,
                                    const StudyConfig& cfg, std::vector<learn::TrainedModel>* models) {
  if (seeds.empty()) throw Error(ErrorCode::InvalidConfig, "no seeds");
  ExperimentReport all;
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    const auto dom = prepare_domain_pair(seeds[r], cfg.size_a, cfg.size_b, cfg.prepare, cfg.domains);
    auto plan = cfg.plan;
    plan.seed = seeds[r];
    const auto d = build_datasets(plan, dom.a.data, dom.b.data);
    auto rep = run_cross_domain(d, spec, cfg.experiment, seeds[r], models);
    for (auto& run : rep.runs) {
      run.repeat = r;
      all.runs.push_back(std::move(run));
    }
  }
  return all;
}

ExperimentReport scaling_study(std::uint64_t seed, std::size_t survey_size, std::span<const learn::ModelSpec> algorithms,
                               std::span<const std::size_t> sizes, const ExperimentConfig& cfg, double train_fraction,
                               const PrepareConfig& prepare) {
  const auto raw = synthgen::generate(
      synthgen::domain_config(synthgen::Domain::A, mix_seed(seed, hash_tag("domain-a")), survey_size));
  const auto s = prepare_survey(raw.echogram, raw.bottom, prepare);
  const auto [pool, test] = split_train_test(s.data, train_fraction, seed);
  return run_scaling(pool, test, algorithms, sizes, cfg, seed);
}

std::vector<Flag> flag_pings(const learn::TrainedModel& m, const Echogram& formatted, double threshold,
                             std::size_t mc_passes, std::uint64_t seed) {
  if (formatted.rows() != m.input_length)
    throw Error(ErrorCode::DimensionMismatch, fmt::format("model expects {} rows, echogram has {}", m.input_length,
                                                          formatted.rows()));
  auto x = extract_pings(formatted, iota_vec(formatted.cols()));
  if (!m.stats.mean.empty()) apply_standardization(x, m.stats);
  const auto p = learn::mc_dropout_proba(m, x, passes_for(m, mc_passes), seed);
  std::vector<Flag> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = {i, p[i], p[i] >= threshold};
  return out;
}

double FlagScore::recall() const noexcept {
  const auto pos = true_positive + false_negative;
  return pos == 0 ? kNaN : static_cast<double>(true_positive) / static_cast<double>(pos);
}

double FlagScore::precision() const noexcept {
  const auto flagged = true_positive + false_positive;
  return flagged == 0 ? kNaN : static_cast<double>(true_positive) / static_cast<double>(flagged);
}

FlagScore score_flags(std::span<const Flag> flags, std::span<const PingLabel> labels) {
  if (flags.size() != labels.size()) throw Error(ErrorCode::MisalignedRecords, "one label per flagged ping expected");
  FlagScore s;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (labels[i] == PingLabel::NoBottom) continue;
    const bool strong = labels[i] == PingLabel::StrongCorrection;
    if (flags[i].flagged && strong) ++s.true_positive;
    else if (flags[i].flagged) ++s.false_positive;
    else if (strong) ++s.false_negative;
  }
  return s;
}

std::string format_runs_csv(const ExperimentReport& r) {
  std::string out = "algorithm,set,train_size,repeat,seed,train_acc,test_a_acc,test_b_acc,error\n";
  for (const auto& run : r.runs) {
    std::string err = run.error;
    std::replace(err.begin(), err.end(), ',', ';');
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", run.algorithm, run.set, run.train_size, run.repeat, run.seed,
                       io::fixed(run.train_acc, 6), io::fixed(run.test_a_acc, 6), io::fixed(run.test_b_acc, 6), err);
  }
  return out;
}

std::string format_summary_json(const ExperimentReport& r) {
  auto groups = nlohmann::json::array();
  for (const auto& s : summarize(r)) {
    groups.push_back({{"algorithm", s.algorithm},
                      {"set", s.set},
                      {"train_size", s.train_size},
                      {"runs", s.runs},
                      {"train_acc_mean", nullable(s.train_mean)},
                      {"test_a", {{"mean", nullable(s.test_a_mean)}, {"min", nullable(s.test_a_min)},
                                  {"max", nullable(s.test_a_max)}}},
                      {"test_b", {{"mean", nullable(s.test_b_mean)}, {"min", nullable(s.test_b_min)},
                                  {"max", nullable(s.test_b_max)}}}});
  }
  return nlohmann::json{{"groups", groups}}.dump(2) + "\n";
}

std::string format_flags_csv(std::span<const Flag> flags) {
  std::string out = "ping_index,probability,flag\n";
  for (const auto& f : flags) out += fmt::format("{},{},{}\n", f.ping, io::fixed(f.probability, 6), f.flagged ? 1 : 0);
  return out;
}

void write_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "curves");
  io::write_text(dir / "runs.csv", format_runs_csv(r));
  io::write_text(dir / "summary.json", format_summary_json(r));
  for (const auto& run : r.runs)
    learn::write_history_csv(run.history,
                             dir / "curves" / fmt::format("{}_{}_r{}.csv", run.algorithm, run.set, run.repeat));
}

}  // namespace echoflag::harness
