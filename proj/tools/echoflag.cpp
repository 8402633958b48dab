// echoflag: command-line surface over the library. Every subcommand loads its
// inputs, calls one library operation and writes the result.
//
// Exit status: 0 success, 1 data error, 2 usage error. Failures print one
// JSON object on stderr: {"error": <code>, "message": <text>}.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "echoflag/bayesopt/optimize.hpp"
#include "echoflag/bottomline.hpp"
#include "echoflag/echogram.hpp"
#include "echoflag/error.hpp"
#include "echoflag/harness.hpp"
#include "echoflag/io.hpp"
#include "echoflag/learn/model.hpp"
#include "echoflag/rng.hpp"
#include "echoflag/service/review.hpp"
#include "echoflag/synthgen.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace echoflag;

namespace {

constexpr int kDataError = 1;
constexpr int kUsageError = 2;

void error_line(std::string_view code, std::string_view message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
}

// Text to a file, or stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    io::write_text(path, text);
}

fs::path sibling(const fs::path& p, std::string_view suffix) {
  auto out = p;
  out.replace_extension();
  out += suffix;
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto f : io::split(s, ',')) out.emplace_back(io::trim(f));
  return out;
}

// --- gen --------------------------------------------------------------------

struct GenArgs {
  std::string config, out, bottom, truth, domain;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> cols;
};

int cmd_gen(const GenArgs& a) {
  auto cfg = a.config.empty() ? synthgen::SurveyConfig{} : synthgen::load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.cols) cfg.cols = *a.cols;
  if (!a.domain.empty()) {
    synthgen::DomainPairOptions opts;
    opts.base = cfg;
    cfg = synthgen::domain_config(a.domain == "a" ? synthgen::Domain::A : synthgen::Domain::B, cfg.seed, cfg.cols,
                                  opts);
  }
  auto s = synthgen::generate(cfg);
  s.echogram.set_survey_id(fs::path(a.out).stem().string());
  save_echogram(s.echogram, a.out);
  write_bottom_csv(s.bottom, a.bottom.empty() ? sibling(a.out, ".bottom.csv") : fs::path(a.bottom));
  io::write_text(a.truth.empty() ? sibling(a.out, ".truth.csv") : fs::path(a.truth), format_truth_csv(s.truth));
  return 0;
}

// --- format / verify ----------------------------------------------------------

struct FormatArgs {
  std::string in, out, partition, stats_in, stats_out;
  FormatConfig cfg;
  bool standardize = false;
};

int cmd_format(const FormatArgs& a) {
  const auto raw = load_echogram(a.in);
  auto f = format_echogram(raw, a.cfg);
  if (a.standardize || !a.stats_in.empty()) {
    std::optional<StandardizationStats> given;
    if (!a.stats_in.empty()) given = read_stats_csv(a.stats_in);
    auto [z, stats] = standardize_echogram(f.echogram, f.partition.kept, given);
    f.echogram = std::move(z);
    if (!a.stats_out.empty()) write_stats_csv(stats, a.stats_out);
  }
  save_echogram(f.echogram, a.out);
  if (!a.partition.empty()) io::write_text(a.partition, format_partition_csv(f.partition, f.echogram.cols()));
  return 0;
}

int cmd_verify(const std::string& in, double min_db) {
  const auto e = load_echogram(in);
  std::size_t nan = 0;
  double lo = std::numeric_limits<double>::infinity();
  for (float v : e.values()) {
    if (std::isnan(v))
      ++nan;
    else
      lo = std::min(lo, static_cast<double>(v));
  }
  const bool ok = nan == 0 && !(lo < min_db);
  std::cout << json{{"rows", e.rows()}, {"cols", e.cols()}, {"nan_cells", nan}, {"min_db", lo}, {"ok", ok}}.dump()
            << '\n';
  if (!ok) {
    error_line("VerifyFailed", fmt::format("{} NaN cells, minimum {} dB (floor {})", nan, lo, min_db));
    return kDataError;
  }
  return 0;
}

// --- detect / label -----------------------------------------------------------

int cmd_detect(const std::string& in, const std::string& clean, const std::string& out) {
  const auto e = load_echogram(in);
  BottomRecord b;
  b.bottom_m = bottomline::detect_bottom(e);
  b.clean_bottom_m = clean.empty() ? std::vector<double>(e.cols(), std::numeric_limits<double>::quiet_NaN())
                                   : read_bottom_csv(clean).clean_bottom_m;
  if (b.clean_bottom_m.size() != b.bottom_m.size())
    throw Error(ErrorCode::MisalignedRecords, "clean bottom length differs from the ping count");
  emit(out, format_bottom_csv(b));
  return 0;
}

struct LabelArgs {
  std::string bottom, clean, echogram, out;
  double threshold = bottomline::kDefaultThresholdM;
  FormatConfig cfg;
};

int cmd_label(const LabelArgs& a) {
  auto b = read_bottom_csv(a.bottom);
  if (!a.clean.empty()) b.clean_bottom_m = read_bottom_csv(a.clean).clean_bottom_m;
  if (b.clean_bottom_m.size() != b.bottom_m.size())
    throw Error(ErrorCode::MisalignedRecords, "clean bottom length differs from the detected bottom");
  std::vector<std::size_t> dropped;
  if (!a.echogram.empty()) dropped = format_echogram(load_echogram(a.echogram), a.cfg).partition.dropped;
  emit(a.out, format_labels_csv(bottomline::label_pings(b, dropped, a.threshold)));
  return 0;
}

// --- model selection ----------------------------------------------------------

struct SpecArgs {
  std::string kind = "cnn";
  std::string spec_file;
  bool desk = true;
};

learn::ModelSpec resolve_spec(const SpecArgs& a) {
  if (!a.spec_file.empty()) return learn::spec_from_json(io::read_text(a.spec_file));
  const auto kind = learn::parse_kind(a.kind);
  if (kind == learn::ModelKind::Cnn && a.desk) return harness::desk_cnn_spec();
  return learn::default_spec(kind);
}

struct SurveyArgs {
  std::string echogram, bottom;
  harness::PrepareConfig prepare;
};

harness::PreparedSurvey load_survey(const SurveyArgs& a) {
  return harness::prepare_survey(load_echogram(a.echogram), read_bottom_csv(a.bottom), a.prepare);
}

// Train/validation split, standardized with the training statistics.
struct Split {
  learn::Dataset train, val;
  StandardizationStats stats;
};

Split split_standardized(const learn::Dataset& d, double train_fraction, std::uint64_t seed) {
  Split s;
  learn::Dataset raw_val;
  std::tie(s.train, raw_val) = harness::split_train_test(d, train_fraction, seed);
  std::tie(s.train.x, s.stats) = standardize(s.train.x);
  s.val = std::move(raw_val);
  if (!s.val.empty()) apply_standardization(s.val.x, s.stats);
  return s;
}

// --- sweep / train / tune -----------------------------------------------------

struct SweepArgs {
  SurveyArgs survey;
  SpecArgs spec{.kind = "svm", .spec_file = {}};
  bottomline::SweepGrid grid;
  std::uint64_t seed = 0;
  double train_fraction = 0.9;
  std::string out;
};

int cmd_sweep(const SweepArgs& a) {
  const auto s = load_survey(a.survey);
  bottomline::LabelingConfig lc;
  lc.sweep = a.grid;
  lc.validate();
  const auto build = [&](double t) {
    auto sp = split_standardized(harness::relabel(s, t), a.train_fraction, a.seed);
    return std::pair{std::move(sp.train), std::move(sp.val)};
  };
  learn::TrainConfig tc;
  tc.seed = a.seed;
  const auto r = bottomline::select_threshold(build, resolve_spec(a.spec), lc, tc);
  if (!a.out.empty()) bottomline::write_sweep_csv(r.table, a.out);
  std::cout << json{{"selected_threshold_m", r.selected_m}, {"candidates", r.table.size()}}.dump() << '\n';
  return 0;
}

struct TrainArgs {
  SurveyArgs survey;
  SpecArgs spec;
  learn::TrainConfig train{.epochs = 30};
  double train_fraction = 0.9;
  std::string out, history;
};

int cmd_train(const TrainArgs& a) {
  const auto s = load_survey(a.survey);
  const auto spec = resolve_spec(a.spec);
  auto sp = split_standardized(s.data, a.train_fraction, a.train.seed);
  const auto m = learn::train(spec, sp.train, sp.val.empty() ? nullptr : &sp.val, a.train, sp.stats);
  learn::save_model(m, a.out);
  if (!a.history.empty()) learn::write_history_csv(m.history, a.history);
  const auto score = [&](const learn::Dataset& d) {
    return learn::accuracy(learn::predict_proba(m, d.x), d.y);
  };
  std::cout << json{{"model", learn::describe(spec)},
                    {"train_size", sp.train.size()},
                    {"val_size", sp.val.size()},
                    {"train_acc", score(sp.train)},
                    {"val_acc", sp.val.empty() ? json(nullptr) : json(score(sp.val))}}
                   .dump()
            << '\n';
  return 0;
}

struct TuneArgs {
  SurveyArgs survey;
  std::string kind = "svm";
  bayesopt::OptimizeConfig bo;
  learn::TrainConfig train{.epochs = 10};
  double train_fraction = 0.9;
  std::string out, history;
};

int cmd_tune(const TuneArgs& a) {
  const auto s = load_survey(a.survey);
  const auto [tr, val] = harness::split_train_test(s.data, a.train_fraction, a.train.seed);
  auto [xz, stats] = standardize(tr.x);
  auto train_set = tr;
  train_set.x = std::move(xz);
  const auto objective = [&](const learn::ModelSpec& spec) {
    const auto m = learn::train(spec, train_set, nullptr, a.train, stats);
    return harness::evaluate(m, val, a.train.mc_passes, a.train.seed);
  };
  auto bo = a.bo;
  bo.seed = a.train.seed;
  const auto r = bayesopt::tune(objective, learn::parse_kind(a.kind), bo);
  if (!a.history.empty()) bayesopt::write_history_csv(r.space, r.run.history, a.history);
  emit(a.out, learn::spec_to_json(r.best) + '\n');
  std::cerr << fmt::format("best {} -> {:.4f} after {} evaluations\n", learn::describe(r.best), r.run.best_value,
                           r.run.history.size());
  return 0;
}

// --- experiments ----------------------------------------------------------------

struct ScalingArgs {
  std::uint64_t seed = 0;
  std::size_t survey_size = 10000;
  std::string sizes = "2000,4000,8000";
  std::string algos = "cnn,svm";
  harness::ExperimentConfig exp;
  bool desk = true;
  std::string out;
};

int cmd_scaling(const ScalingArgs& a) {
  std::vector<learn::ModelSpec> specs;
  for (const auto& k : split_list(a.algos)) specs.push_back(resolve_spec({.kind = k, .spec_file = {}, .desk = a.desk}));
  std::vector<std::size_t> sizes;
  for (const auto& n : split_list(a.sizes)) sizes.push_back(static_cast<std::size_t>(io::parse_int(n)));
  const auto r = harness::scaling_study(a.seed, a.survey_size, specs, sizes, a.exp);
  harness::write_report(r, a.out);
  std::cout << harness::format_summary_json(r);
  return 0;
}

struct CrossDomainArgs {
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  std::string st_sizes = "1000,3000,5500";
  harness::StudyConfig study;
  SpecArgs spec;
  std::string out;
};

int cmd_crossdomain(const CrossDomainArgs& a) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < a.seeds; ++i) seeds.push_back(a.seed + i);
  auto study = a.study;
  study.plan.st_sizes.clear();
  for (const auto& n : split_list(a.st_sizes)) study.plan.st_sizes.push_back(static_cast<std::size_t>(io::parse_int(n)));
  const auto r = harness::cross_domain_study(seeds, resolve_spec(a.spec), study);
  harness::write_report(r, a.out);
  std::cout << harness::format_summary_json(r);
  return 0;
}

// --- flag / serve -----------------------------------------------------------------

struct FlagArgs {
  std::string model, echogram, out;
  FormatConfig cfg;
  bool formatted = false;
  double threshold = 0.5;
  std::size_t passes = 50;
  std::uint64_t seed = 0;
};

int cmd_flag(const FlagArgs& a) {
  const auto m = learn::load_model(a.model);
  auto e = load_echogram(a.echogram);
  if (!a.formatted) e = format_echogram(e, a.cfg).echogram;
  emit(a.out, harness::format_flags_csv(harness::flag_pings(m, e, a.threshold, a.passes, a.seed)));
  return 0;
}

int cmd_serve(const std::string& config, const std::string& host, std::optional<int> port) {
  service::ReviewService svc(service::ServiceConfig::load(config));
  const int p = port ? *port : service::port_from_env();
  std::cerr << fmt::format("serving {} survey(s) on http://{}:{}\n", svc.survey_ids().size(), host, p);
  service::serve(svc, host, p);
  return 0;
}

// --- option helpers -----------------------------------------------------------------

void add_format_opts(CLI::App* c, FormatConfig& f) {
  c->add_option("--trim", f.trim_rows, "Near-surface rows to drop")->capture_default_str();
  c->add_option("--signature-db", f.bottom_signature_db, "Pings without a cell above this are no-bottom")
      ->capture_default_str();
  c->add_option("--fill-db", f.nan_fill_db, "Replacement for NaN cells")->capture_default_str();
}

void add_survey_opts(CLI::App* c, SurveyArgs& s) {
  c->add_option("--echogram", s.echogram, "Raw .echg survey")->required()->check(CLI::ExistingFile);
  c->add_option("--bottom", s.bottom, "Bottom CSV carrying the expert depths")->required()->check(CLI::ExistingFile);
  c->add_option("--trim", s.prepare.trim_rows, "Near-surface rows to drop")->capture_default_str();
  c->add_option("--threshold", s.prepare.threshold_m, "Strong-correction threshold (m)")->capture_default_str();
}

void add_spec_opts(CLI::App* c, SpecArgs& s) {
  c->add_option("--kind", s.kind, "Model kind")
      ->check(CLI::IsMember({"rf", "svm", "ffnn", "cnn"}))
      ->capture_default_str();
  c->add_option("--spec", s.spec_file, "Model spec JSON (overrides --kind)")->check(CLI::ExistingFile);
  c->add_flag("!--full-cnn", s.desk, "Use the tuned CNN instead of the desk-scale one");
}

void add_train_opts(CLI::App* c, learn::TrainConfig& t, bool with_seed = true) {
  c->add_option("--epochs", t.epochs)->capture_default_str();
  c->add_option("--batch", t.batch_size)->capture_default_str();
  if (with_seed) c->add_option("--seed", t.seed)->capture_default_str();
  c->add_option("--passes", t.mc_passes, "MC dropout passes")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"echoflag: echogram bottom-correction flagging"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "echoflag 0.1");
  std::function<int()> action;

  GenArgs gen;
  auto* c = app.add_subcommand("gen", "Generate a synthetic survey");
  c->add_option("--config", gen.config, "Key=value survey config")->check(CLI::ExistingFile);
  c->add_option("--out", gen.out, "Output .echg")->required();
  c->add_option("--seed", gen.seed);
  c->add_option("--cols", gen.cols, "Ping count");
  c->add_option("--domain", gen.domain, "Apply domain a or b settings")->check(CLI::IsMember({"a", "b"}));
  c->add_option("--bottom", gen.bottom, "Bottom CSV (default <out>.bottom.csv)");
  c->add_option("--truth", gen.truth, "Truth CSV (default <out>.truth.csv)");
  c->callback([&] { action = [&] { return cmd_gen(gen); }; });

  FormatArgs fmt_args;
  c = app.add_subcommand("format", "Trim, filter, NaN-fill and optionally standardize");
  c->add_option("--in", fmt_args.in)->required()->check(CLI::ExistingFile);
  c->add_option("--out", fmt_args.out)->required();
  add_format_opts(c, fmt_args.cfg);
  c->add_option("--partition", fmt_args.partition, "CSV of kept/dropped pings");
  c->add_flag("--standardize", fmt_args.standardize, "Per-row z-score (stats from kept pings)");
  c->add_option("--stats-in", fmt_args.stats_in, "Apply these stats instead")->check(CLI::ExistingFile);
  c->add_option("--stats-out", fmt_args.stats_out, "Write the stats used");
  c->callback([&] { action = [&] { return cmd_format(fmt_args); }; });

  std::string verify_in;
  double verify_min = kNanFillDb;
  c = app.add_subcommand("verify", "Check a formatted echogram: no NaN, min >= floor");
  c->add_option("--in", verify_in)->required()->check(CLI::ExistingFile);
  c->add_option("--min-db", verify_min)->capture_default_str();
  c->callback([&] { action = [&] { return cmd_verify(verify_in, verify_min); }; });

  std::string det_in, det_clean, det_out;
  c = app.add_subcommand("detect", "Max-gradient bottom detection");
  c->add_option("--in", det_in, "Raw .echg")->required()->check(CLI::ExistingFile);
  c->add_option("--clean", det_clean, "Bottom CSV whose expert column is carried over")->check(CLI::ExistingFile);
  c->add_option("--out", det_out, "Bottom CSV (default stdout)");
  c->callback([&] { action = [&] { return cmd_detect(det_in, det_clean, det_out); }; });

  LabelArgs lab;
  c = app.add_subcommand("label", "Weak/strong labels from detected vs expert bottom");
  c->add_option("--bottom", lab.bottom, "Bottom CSV with detected depths")->required()->check(CLI::ExistingFile);
  c->add_option("--clean", lab.clean, "Bottom CSV with expert depths")->check(CLI::ExistingFile);
  c->add_option("--threshold", lab.threshold)->capture_default_str();
  c->add_option("--echogram", lab.echogram, "Raw .echg; its no-bottom pings are labeled as such")
      ->check(CLI::ExistingFile);
  add_format_opts(c, lab.cfg);
  c->add_option("--out", lab.out, "Labels CSV (default stdout)");
  c->callback([&] { action = [&] { return cmd_label(lab); }; });

  SweepArgs sw;
  c = app.add_subcommand("sweep", "One-epoch label-threshold sweep");
  add_survey_opts(c, sw.survey);
  add_spec_opts(c, sw.spec);
  c->add_option("--lo", sw.grid.lo)->capture_default_str();
  c->add_option("--hi", sw.grid.hi)->capture_default_str();
  c->add_option("--step", sw.grid.step)->capture_default_str();
  c->add_option("--seed", sw.seed)->capture_default_str();
  c->add_option("--out", sw.out, "Sweep table CSV");
  c->callback([&] { action = [&] { return cmd_sweep(sw); }; });

  TrainArgs tr;
  c = app.add_subcommand("train", "Train a model on a labeled survey");
  add_survey_opts(c, tr.survey);
  add_spec_opts(c, tr.spec);
  add_train_opts(c, tr.train);
  c->add_option("--train-fraction", tr.train_fraction, "Rest is validation")->capture_default_str();
  c->add_option("--out", tr.out, "Model file")->required();
  c->add_option("--history", tr.history, "Per-epoch CSV");
  c->callback([&] { action = [&] { return cmd_train(tr); }; });

  TuneArgs tu;
  c = app.add_subcommand("tune", "Bayesian optimization of model hyperparameters");
  add_survey_opts(c, tu.survey);
  c->add_option("--kind", tu.kind)->check(CLI::IsMember({"rf", "svm", "ffnn", "cnn"}))->capture_default_str();
  add_train_opts(c, tu.train);
  c->add_option("--iters", tu.bo.max_iter)->capture_default_str();
  c->add_option("--init", tu.bo.init_points)->capture_default_str();
  c->add_option("--xi", tu.bo.xi)->capture_default_str();
  c->add_option("--train-fraction", tu.train_fraction)->capture_default_str();
  c->add_option("--out", tu.out, "Best spec JSON (default stdout)");
  c->add_option("--history", tu.history, "Optimization history CSV");
  c->callback([&] { action = [&] { return cmd_tune(tu); }; });

  auto* exp = app.add_subcommand("experiment", "Run an experiment");
  exp->require_subcommand(1);
  ScalingArgs sc;
  c = exp->add_subcommand("scaling", "Accuracy vs training size on domain A");
  c->add_option("--seed", sc.seed)->capture_default_str();
  c->add_option("--survey-size", sc.survey_size)->capture_default_str();
  c->add_option("--sizes", sc.sizes)->capture_default_str();
  c->add_option("--algos", sc.algos)->capture_default_str();
  c->add_option("--repeats", sc.exp.repeats)->capture_default_str();
  add_train_opts(c, sc.exp.train, false);
  c->add_flag("!--full-cnn", sc.desk, "Use the tuned CNN instead of the desk-scale one");
  c->add_option("--out", sc.out, "Report directory")->required();
  c->callback([&] { action = [&] { return cmd_scaling(sc); }; });

  CrossDomainArgs cd;
  c = exp->add_subcommand("crossdomain", "Single-domain vs cross-domain training");
  c->add_option("--seed", cd.seed, "First master seed")->capture_default_str();
  c->add_option("--seeds", cd.seeds, "Number of consecutive seeds")->capture_default_str();
  c->add_option("--size-a", cd.study.size_a)->capture_default_str();
  c->add_option("--size-b", cd.study.size_b)->capture_default_str();
  c->add_option("--st-sizes", cd.st_sizes, "Single-domain training sizes")->capture_default_str();
  c->add_option("--base", cd.study.plan.base_count, "Domain A pings in the mixed set")->capture_default_str();
  c->add_option("--foreign", cd.study.plan.foreign_count, "Domain B pings in the mixed set")->capture_default_str();
  c->add_option("--chunk", cd.study.plan.foreign_chunk, "Contiguous B pings held out for validation and mixing")
      ->capture_default_str();
  add_spec_opts(c, cd.spec);
  add_train_opts(c, cd.study.experiment.train, false);
  c->add_option("--out", cd.out, "Report directory")->required();
  c->callback([&] { action = [&] { return cmd_crossdomain(cd); }; });

  FlagArgs fl;
  c = app.add_subcommand("flag", "Flag pings likely to need a strong correction");
  c->add_option("--model", fl.model)->required()->check(CLI::ExistingFile);
  c->add_option("--echogram", fl.echogram, "Raw .echg (or formatted with --formatted)")
      ->required()
      ->check(CLI::ExistingFile);
  c->add_flag("--formatted", fl.formatted, "Input is already formatted");
  add_format_opts(c, fl.cfg);
  c->add_option("--threshold", fl.threshold)->capture_default_str();
  c->add_option("--passes", fl.passes)->capture_default_str();
  c->add_option("--seed", fl.seed)->capture_default_str();
  c->add_option("--out", fl.out, "Flags CSV (default stdout)");
  c->callback([&] { action = [&] { return cmd_flag(fl); }; });

  std::string srv_config, srv_host = "127.0.0.1";
  std::optional<int> srv_port;
  c = app.add_subcommand("serve", "Review service over HTTP");
  c->add_option("--config", srv_config, "Service JSON config")->required()->check(CLI::ExistingFile);
  c->add_option("--host", srv_host)->capture_default_str();
  c->add_option("--port", srv_port, "Default: $ECHOFLAG_PORT or 8080");
  c->callback([&] { action = [&] { return cmd_serve(srv_config, srv_host, srv_port); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_line("Usage", e.what());
    return kUsageError;
  }

  try {
    return action();
  } catch (const Error& e) {
    error_line(to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    error_line("Parse", e.what());
  } catch (const std::exception& e) {
    error_line("Io", e.what());
  }
  return kDataError;
}
