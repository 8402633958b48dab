#include "echoflag/bayesopt/optimize.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "echoflag/error.hpp"
#include "echoflag/io.hpp"
#include "echoflag/rng.hpp"

namespace echoflag::bayesopt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double linf(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::vector<double> random_point(Rng& rng, std::size_t dims) {
  std::vector<double> p(dims);
  for (auto& v : p) v = rng.uniform();
  return p;
}

/// Compass search on the unit cube from `x`, returning the local maximum of f.
std::vector<double> compass_ascent(const auto& f, std::vector<double> x, double& fx) {
  for (double step = 0.1; step >= 1e-4;) {
    bool moved = false;
    for (std::size_t d = 0; d < x.size(); ++d) {
      for (double dir : {1.0, -1.0}) {
        auto cand = x;
        cand[d] = std::clamp(cand[d] + dir * step, 0.0, 1.0);
        if (cand[d] == x[d]) continue;
        const double fc = f(cand);
        if (fc > fx) {
          x = std::move(cand);
          fx = fc;
          moved = true;
          break;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return x;
}

}  // namespace

void SearchSpace::validate() const {
  if (dims.empty()) throw Error(ErrorCode::InvalidConfig, "empty search space");
  for (const auto& d : dims) {
    if (!(d.lo < d.hi)) throw Error(ErrorCode::InvalidConfig, fmt::format("dimension {}: lo must be < hi", d.name));
    if (d.kind == DimKind::Integer && (std::floor(d.lo) != d.lo || std::floor(d.hi) != d.hi))
      throw Error(ErrorCode::InvalidConfig, fmt::format("dimension {}: integer bounds must be integral", d.name));
  }
}

std::vector<double> SearchSpace::decode(std::span<const double> unit) const {
  if (unit.size() != dims.size()) throw Error(ErrorCode::DimensionMismatch, "point dimension differs from the space");
  std::vector<double> out(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto& d = dims[i];
    const double v = d.lo + std::clamp(unit[i], 0.0, 1.0) * (d.hi - d.lo);
    out[i] = d.kind == DimKind::Integer ? std::clamp(std::round(v), d.lo, d.hi) : v;
  }
  return out;
}

std::vector<double> SearchSpace::encode(std::span<const double> values) const {
  if (values.size() != dims.size()) throw Error(ErrorCode::DimensionMismatch, "value count differs from the space");
  std::vector<double> out(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i)
    out[i] = std::clamp((values[i] - dims[i].lo) / (dims[i].hi - dims[i].lo), 0.0, 1.0);
  return out;
}

SearchSpace space_for(learn::ModelKind kind) {
  using enum DimKind;
  const std::vector<Dimension> head{
      {"h1", Integer, 5, 600}, {"h2", Integer, 5, 320}, {"h3", Integer, 5, 120}, {"dropout3", Continuous, 0, 1}};
  switch (kind) {
    case learn::ModelKind::Forest: return {{{"n_trees", Integer, 10, 10000}, {"min_samples_leaf", Integer, 20, 50}}};
    case learn::ModelKind::Svm: return {{{"alpha", Continuous, 1e-4, 0.1}}};
    case learn::ModelKind::Ffnn: return {head};
    case learn::ModelKind::Cnn: {
      SearchSpace s{{{"k1", Integer, 5, 60}, {"k2", Integer, 5, 60}, {"k3", Integer, 5, 60}}};
      s.dims.insert(s.dims.end(), head.begin(), head.end());
      return s;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown model kind");
}

learn::ModelSpec spec_from_values(learn::ModelKind kind, std::span<const double> v) {
  if (v.size() != space_for(kind).size()) throw Error(ErrorCode::DimensionMismatch, "wrong value count for model kind");
  const auto i = [&](std::size_t k) { return static_cast<std::int64_t>(std::llround(v[k])); };
  switch (kind) {
    case learn::ModelKind::Forest: return learn::ForestSpec{i(0), i(1)};
    case learn::ModelKind::Svm: return learn::SvmSpec{v[0]};
    case learn::ModelKind::Ffnn: return learn::FfnnSpec{{i(0), i(1), i(2)}, v[3]};
    case learn::ModelKind::Cnn: return learn::CnnSpec{{i(0), i(1), i(2)}, {i(3), i(4), i(5)}, v[6]};
  }
  throw Error(ErrorCode::InvalidConfig, "unknown model kind");
}

std::vector<double> values_from_spec(const learn::ModelSpec& spec) {
  const auto d = [](std::int64_t x) { return static_cast<double>(x); };
  if (const auto* s = std::get_if<learn::ForestSpec>(&spec)) return {d(s->n_trees), d(s->min_samples_leaf)};
  if (const auto* s = std::get_if<learn::SvmSpec>(&spec)) return {s->alpha};
  if (const auto* s = std::get_if<learn::FfnnSpec>(&spec))
    return {d(s->hidden[0]), d(s->hidden[1]), d(s->hidden[2]), s->dropout3};
  const auto& c = std::get<learn::CnnSpec>(spec);
  return {d(c.kernels[0]), d(c.kernels[1]), d(c.kernels[2]), d(c.hidden[0]), d(c.hidden[1]), d(c.hidden[2]),
          c.dropout3};
}

void OptimizeConfig::validate() const {
  if (max_iter < 1) throw Error(ErrorCode::InvalidConfig, "max_iter must be >= 1");
  if (init_points < 1) throw Error(ErrorCode::InvalidConfig, "init_points must be >= 1");
  if (ei_starts < 1) throw Error(ErrorCode::InvalidConfig, "ei_starts must be >= 1");
  if (converge_repeats < 1) throw Error(ErrorCode::InvalidConfig, "converge_repeats must be >= 1");
  if (!(xi >= 0.0)) throw Error(ErrorCode::InvalidConfig, "xi must be >= 0");
}

std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::size_t dims, std::uint64_t seed) {
  Rng rng(mix_seed(seed, hash_tag("lhs")));
  std::vector<std::vector<double>> pts(n, std::vector<double>(dims));
  std::vector<std::size_t> strata(n);
  for (std::size_t d = 0; d < dims; ++d) {
    std::iota(strata.begin(), strata.end(), 0);
    rng.shuffle(std::span(strata));
    for (std::size_t i = 0; i < n; ++i)
      pts[i][d] = (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(n);
  }
  return pts;
}

OptimizeResult optimize(const Objective& objective, const SearchSpace& space, const OptimizeConfig& cfg) {
  space.validate();
  cfg.validate();
  const std::size_t dims = space.size();
  Rng rng(mix_seed(cfg.seed, hash_tag("proposals")));
  const auto design = latin_hypercube(std::min(cfg.init_points, cfg.max_iter), dims, cfg.seed);

  OptimizeResult res;
  res.best_value = kNaN;
  double worst = kNaN;
  std::size_t near_repeats = 0;

  const auto evaluate = [&](std::vector<double> unit) {
    HistoryEntry e;
    e.iter = res.history.size() + 1;
    e.values = space.decode(unit);
    e.encoded = space.encode(e.values);
    double v = kNaN;
    try {
      v = objective(e.values);
    } catch (const std::exception&) {
      v = kNaN;
    }
    e.failed = !std::isfinite(v);
    if (!e.failed) {
      if (std::isnan(worst)) {
        // First success: earlier failures take this as the worst value seen.
        for (auto& h : res.history) h.value = v;
      }
      worst = std::isnan(worst) ? v : std::min(worst, v);
      if (std::isnan(res.best_value) || v > res.best_value) {
        res.best_value = v;
        res.best_values = e.values;
        res.best_encoded = e.encoded;
      }
    }
    e.value = e.failed ? worst : v;
    e.best_so_far = res.best_value;
    res.history.push_back(std::move(e));
  };

  for (const auto& p : design) evaluate(p);

  while (res.history.size() < cfg.max_iter) {
    std::vector<std::vector<double>> pts;
    std::vector<double> ys;
    if (!std::isnan(worst))
      for (const auto& h : res.history) {
        pts.push_back(h.encoded);
        ys.push_back(h.failed ? worst : h.value);
      }
    std::vector<double> proposal;
    try {
      if (pts.size() < 2) throw Error(ErrorCode::InvalidConfig, "too few points");
      const auto gp = GaussianProcess::fit(pts, ys, mix_seed(cfg.seed, res.history.size()));
      res.hyper = gp.hyper();
      const double f_best = res.best_value;
      const auto ei = [&](const std::vector<double>& u) {
        return log_expected_improvement(gp, space.encode(space.decode(u)), f_best, cfg.xi);
      };
      double best_ei = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < cfg.ei_starts; ++s) {
        auto start = s == 0 ? res.best_encoded : random_point(rng, dims);
        double f0 = ei(start);
        auto x = compass_ascent(ei, std::move(start), f0);
        if (f0 > best_ei || proposal.empty()) {
          best_ei = f0;
          proposal = std::move(x);
        }
      }
    } catch (const Error&) {
      // No usable surrogate (all failures so far, or a degenerate kernel
      // matrix): fall back to a uniform proposal.
      proposal = random_point(rng, dims);
    }
    const auto encoded = space.encode(space.decode(proposal));
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& h : res.history) nearest = std::min(nearest, linf(encoded, h.encoded));
    near_repeats = nearest <= cfg.converge_tol ? near_repeats + 1 : 0;
    evaluate(proposal);
    if (near_repeats >= cfg.converge_repeats) {
      res.early_stopped = true;
      break;
    }
  }
  if (std::isnan(res.best_value)) throw Error(ErrorCode::ObjectiveFailure, "every objective evaluation failed");
  return res;
}

std::string format_history_csv(const SearchSpace& space, std::span<const HistoryEntry> history) {
  std::string out = "iter";
  for (const auto& d : space.dims) out += ',' + d.name;
  out += ",value,best_so_far\n";
  for (const auto& h : history) {
    out += std::to_string(h.iter);
    for (double v : h.encoded) out += ',' + io::fixed(v, 6);
    out += ',' + io::fixed(h.value, 6) + ',' + io::fixed(h.best_so_far, 6) + '\n';
  }
  return out;
}

void write_history_csv(const SearchSpace& space, std::span<const HistoryEntry> history,
                       const std::filesystem::path& path) {
  io::write_text(path, format_history_csv(space, history));
}

TuneResult tune(const SpecObjective& objective, learn::ModelKind kind, const OptimizeConfig& cfg) {
  TuneResult r;
  r.space = space_for(kind);
  r.run = optimize([&](std::span<const double> v) { return objective(spec_from_values(kind, v)); }, r.space, cfg);
  r.best = spec_from_values(kind, r.run.best_values);
  return r;
}

}  // namespace echoflag::bayesopt
