#pragma once

// Monte Carlo sweeps over price-source parameters. A sweep is a list of
// cells; each cell is sampled `samples` times with independent price paths
// and agent populations, and the schemes' average wealth at the measurement
// step is aggregated per cell.
//
// Seed contract: sample k of cell c uses
//   price seed = derive_seed(seed, kPrice, c, k)
//   run seed   = derive_seed(seed, kAgents, k)
// so agents of sample k are shared across cells, and nothing depends on
// which worker evaluated which task.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "wgsim/engine.hpp"
#include "wgsim/format.hpp"
#include "wgsim/prices.hpp"
#include "wgsim/random.hpp"

namespace wgsim {

struct WalkSource {
  double p_up;
};
struct TrendSource {
  TrendParams params;
};
struct FixedSource {
  PriceSeries series;
};
using PriceSource = std::variant<WalkSource, TrendSource, FixedSource>;

/// Named coordinates of a cell, e.g. {("p_L", 0.4), ("p_S", -0.4)}.
using Coordinates = std::vector<std::pair<std::string, double>>;

struct Cell {
  Coordinates coords;
  PriceSource source;
};

/// Schemes compared against each other for chance-of-best. A sweep can hold
/// several groups (one per score memory, say) that share price paths.
struct SchemeGroup {
  std::string label;
  std::vector<Scheme> schemes;
};

struct SweepSpec {
  std::vector<Cell> cells;
  std::vector<SchemeGroup> groups;
  int samples = 100;
  /// Steps per generated series; ignored for fixed series.
  int steps = 2000;
  /// Price index at which average wealth is read; 0 means the last one.
  int measure_step = 0;
  double initial_price = 1000.0;
  SimConfig sim;  ///< sim.schemes is overwritten with the union of groups
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const {
    if (cells.empty()) throw std::invalid_argument("sweep has no cells");
    if (groups.empty()) throw std::invalid_argument("sweep has no scheme groups");
    if (samples < 1) throw std::invalid_argument("samples must be >= 1");
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (measure_step < 0 || measure_step > steps) throw std::invalid_argument("measurement step must lie in [0, steps]");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    for (const auto& c : cells) {
      if (const auto* w = std::get_if<WalkSource>(&c.source); w && !(w->p_up >= 0.0 && w->p_up <= 1.0))
        throw std::invalid_argument("p_up must lie in [0, 1]");
      if (const auto* t = std::get_if<TrendSource>(&c.source)) table_from_trend(t->params);
    }
  }
};

struct SchemeStats {
  Scheme scheme;
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation (n - 1)
  double chance_best = 0.0;
  std::size_t n = 0;
};

struct GroupResult {
  std::string label;
  std::vector<SchemeStats> stats;
};

struct CellResult {
  Coordinates coords;
  std::vector<GroupResult> groups;
  /// Per-sample measured average wealth, [sample][scheme] in union order.
  std::vector<std::vector<double>> samples;
};

struct GridResult {
  std::vector<Scheme> schemes;  ///< union of all groups, sample column order
  std::vector<CellResult> cells;

  const SchemeStats& stats(std::size_t cell, const std::string& group, const Scheme& s) const {
    for (const auto& g : cells.at(cell).groups)
      if (g.label == group)
        for (const auto& st : g.stats)
          if (st.scheme == s) return st;
    throw std::out_of_range("no stats for " + s.label() + " in group " + group);
  }
};

/// Chance-of-best in exact units: each sample hands out lcm(1..S) units,
/// split equally among the schemes attaining its maximum.
struct BestCounts {
  std::vector<std::uint64_t> units;
  std::uint64_t units_per_sample = 1;
  std::size_t samples = 0;

  std::vector<double> fractions() const {
    std::vector<double> f(units.size(), 0.0);
    if (samples == 0) return f;
    const double total = static_cast<double>(units_per_sample) * static_cast<double>(samples);
    for (std::size_t i = 0; i < units.size(); ++i) f[i] = static_cast<double>(units[i]) / total;
    return f;
  }
};

inline BestCounts count_best(const std::vector<std::vector<double>>& per_sample) {
  BestCounts out;
  if (per_sample.empty()) return out;
  const std::size_t k = per_sample.front().size();
  for (std::size_t i = 2; i <= k; ++i) out.units_per_sample = std::lcm(out.units_per_sample, std::uint64_t{i});
  out.units.assign(k, 0);
  for (const auto& row : per_sample) {
    if (row.size() != k) throw std::invalid_argument("ragged sample matrix");
    const double best = *std::max_element(row.begin(), row.end());
    const auto ties = static_cast<std::uint64_t>(std::count(row.begin(), row.end(), best));
    for (std::size_t i = 0; i < k; ++i)
      if (row[i] == best) out.units[i] += out.units_per_sample / ties;
    ++out.samples;
  }
  return out;
}

/// Fraction of samples in which each scheme attains the highest value; exact
/// ties are split equally.
inline std::vector<double> chance_of_best(const std::vector<std::vector<double>>& per_sample) {
  return count_best(per_sample).fractions();
}

namespace detail {

inline PriceSeries make_series(const PriceSource& src, int steps, double p0, std::uint64_t seed) {
  struct V {
    int steps;
    double p0;
    std::uint64_t seed;
    PriceSeries operator()(const WalkSource& w) const {
      return generate_walk(w.p_up, static_cast<std::size_t>(steps), p0, seed);
    }
    PriceSeries operator()(const TrendSource& t) const {
      return generate_trend(t.params, static_cast<std::size_t>(steps), p0, seed);
    }
    PriceSeries operator()(const FixedSource& f) const { return f.series; }
  };
  return std::visit(V{steps, p0, seed}, src);
}

inline std::vector<Scheme> scheme_union(const std::vector<SchemeGroup>& groups) {
  std::vector<Scheme> out;
  for (const auto& g : groups)
    for (const auto& s : g.schemes)
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double stddev_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Runs fn(task) for task in [0, tasks) on `workers` threads. The first
/// exception is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t tasks, int workers, Fn&& fn) {
  const auto nthreads = static_cast<std::size_t>(std::max(1, std::min<int>(workers, static_cast<int>(tasks))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= tasks) return;
      try {
        fn(task);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(tasks);
        return;
      }
    }
  };
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

inline std::uint64_t sample_price_seed(std::uint64_t seed, std::size_t cell, std::size_t sample) {
  return derive_seed(seed, tag(Stream::kPrice), cell, sample);
}

inline std::uint64_t sample_run_seed(std::uint64_t seed, std::size_t sample) {
  return derive_seed(seed, tag(Stream::kAgents), sample);
}

inline GridResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  GridResult result;
  result.schemes = detail::scheme_union(spec.groups);
  SimConfig sim = spec.sim;
  sim.schemes = result.schemes;
  sim.validate();

  const auto samples = static_cast<std::size_t>(spec.samples);
  const std::size_t tasks = spec.cells.size() * samples;
  std::vector<std::vector<double>> measured(tasks);

  detail::parallel_for(tasks, spec.workers, [&](std::size_t task) {
    const std::size_t cell = task / samples;
    const std::size_t sample = task % samples;
    const PriceSeries series = detail::make_series(spec.cells[cell].source, spec.steps, spec.initial_price,
                                                   sample_price_seed(spec.seed, cell, sample));
    SimConfig cfg = sim;
    cfg.seed = sample_run_seed(spec.seed, sample);
    const RunRecord rec = run(cfg, series);
    const std::size_t last = series.size() - 1;
    const std::size_t at = spec.measure_step == 0 ? last : std::min<std::size_t>(spec.measure_step, last);
    std::vector<double> row(rec.schemes.size());
    for (std::size_t s = 0; s < row.size(); ++s) row[s] = rec.average_wealth[s][at];
    measured[task] = std::move(row);
  });

  for (std::size_t c = 0; c < spec.cells.size(); ++c) {
    CellResult cr;
    cr.coords = spec.cells[c].coords;
    cr.samples.assign(measured.begin() + static_cast<std::ptrdiff_t>(c * samples),
                      measured.begin() + static_cast<std::ptrdiff_t>((c + 1) * samples));
    for (const auto& g : spec.groups) {
      std::vector<std::size_t> cols;
      for (const auto& s : g.schemes)
        cols.push_back(static_cast<std::size_t>(std::find(result.schemes.begin(), result.schemes.end(), s) -
                                                result.schemes.begin()));
      std::vector<std::vector<double>> sub(samples, std::vector<double>(cols.size()));
      for (std::size_t k = 0; k < samples; ++k)
        for (std::size_t i = 0; i < cols.size(); ++i) sub[k][i] = cr.samples[k][cols[i]];
      const auto best = chance_of_best(sub);
      GroupResult gr{g.label, {}};
      for (std::size_t i = 0; i < cols.size(); ++i) {
        std::vector<double> col(samples);
        for (std::size_t k = 0; k < samples; ++k) col[k] = sub[k][i];
        const double m = detail::mean_of(col);
        gr.stats.push_back({g.schemes[i], m, detail::stddev_of(col, m), best[i], samples});
      }
      cr.groups.push_back(std::move(gr));
    }
    result.cells.push_back(std::move(cr));
  }
  return result;
}

inline const std::vector<Scheme>& infinite_schemes() {
  static const std::vector<Scheme> s = {{SchemeKind::kWealth, 0}, {SchemeKind::kMinority, 0}, {SchemeKind::kMajority, 0}};
  return s;
}

/// One cell per p_up; every cell compares WG, MinG and MajG.
inline GridResult sweep_walk(const std::vector<double>& p_ups, SweepSpec spec) {
  spec.cells.clear();
  for (double p : p_ups) spec.cells.push_back({{{"p_up", p}}, WalkSource{p}});
  if (spec.groups.empty()) spec.groups = {{"inf", infinite_schemes()}};
  return run_sweep(spec);
}

/// Cartesian grid over (p_L, p_S), p_L major.
inline GridResult sweep_grid(const std::vector<double>& long_terms, const std::vector<double>& short_terms,
                             SweepSpec spec) {
  spec.cells.clear();
  for (double pl : long_terms)
    for (double ps : short_terms) spec.cells.push_back({{{"p_L", pl}, {"p_S", ps}}, TrendSource{{pl, ps}}});
  if (spec.groups.empty()) spec.groups = {{"inf", infinite_schemes()}};
  return run_sweep(spec);
}

/// Score-memory sweep over the cells already in `spec`. Group "inf" holds the
/// infinite-memory reference; group "T=<T>" holds DMinG and DMajG plus DWG,
/// or the original WG when `keep_infinite_wg` is set.
inline GridResult memory_sweep(const std::vector<int>& windows, SweepSpec spec, bool keep_infinite_wg = false) {
  spec.groups = {{"inf", infinite_schemes()}};
  for (int t : windows) {
    if (t < 1) throw std::invalid_argument("score memory must be >= 1");
    spec.groups.push_back({"T=" + std::to_string(t),
                           {{SchemeKind::kWealth, keep_infinite_wg ? 0 : t},
                            {SchemeKind::kMinority, t},
                            {SchemeKind::kMajority, t}}});
  }
  return run_sweep(spec);
}

/// Index within a group of the scheme with the largest chance-of-best
/// (ties broken by mean wealth, then by position).
inline std::size_t group_winner(const GroupResult& g) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < g.stats.size(); ++i) {
    const auto& a = g.stats[i];
    const auto& b = g.stats[best];
    if (a.chance_best > b.chance_best || (a.chance_best == b.chance_best && a.mean > b.mean)) best = i;
  }
  return best;
}

/// Fraction of cells whose winning evaluation rule in `group` matches the
/// winner of the infinite-memory group "inf".
inline double winner_agreement(const GridResult& r, const std::string& group) {
  std::size_t agree = 0;
  for (const auto& cell : r.cells) {
    const GroupResult* ref = nullptr;
    const GroupResult* cmp = nullptr;
    for (const auto& g : cell.groups) {
      if (g.label == "inf") ref = &g;
      if (g.label == group) cmp = &g;
    }
    if (!ref || !cmp) throw std::invalid_argument("missing group " + group);
    if (ref->stats[group_winner(*ref)].scheme.kind == cmp->stats[group_winner(*cmp)].scheme.kind) ++agree;
  }
  return r.cells.empty() ? 0.0 : static_cast<double>(agree) / static_cast<double>(r.cells.size());
}

/// Columns: the cell's coordinates, group, scheme, mean_w, std_w, chance_best, n.
inline void write_grid_csv(const GridResult& r, std::ostream& out) {
  if (r.cells.empty()) return;
  for (const auto& [name, value] : r.cells.front().coords) out << name << ',';
  out << "group,scheme,mean_w,std_w,chance_best,n\n";
  for (const auto& cell : r.cells)
    for (const auto& g : cell.groups)
      for (const auto& st : g.stats) {
        for (const auto& [name, value] : cell.coords) out << format_number(value) << ',';
        out << g.label << ',' << st.scheme.label() << ',' << format_number(st.mean) << ','
            << format_number(st.stddev) << ',' << format_number(st.chance_best) << ',' << st.n << '\n';
      }
}

struct RealRunResult {
  LoadedSeries data;
  RunRecord record;
  MarkovEstimate estimate;
};

/// One run of every configured scheme on a price file, plus the file's
/// order-2 transition estimate.
inline RealRunResult real_run(const std::filesystem::path& file, const SimConfig& cfg, CsvOptions csv = {}) {
  csv.min_rows = std::max(csv.min_rows, static_cast<std::size_t>(cfg.history_bits) + 2);
  RealRunResult out;
  out.data = load_series_csv(file, csv);
  out.record = run(cfg, out.data.series);
  out.estimate = estimate_table(out.data.series, 2);
  return out;
}

}  // namespace wgsim
