#pragma once

// Per-step market loop. Each scheme gets its own population of N agents;
// all populations watch the same exogenous price path and the same shared
// m-bit history, so populations never interact.

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wgsim/domain.hpp"
#include "wgsim/format.hpp"
#include "wgsim/prices.hpp"
#include "wgsim/random.hpp"
#include "wgsim/schemes.hpp"

namespace wgsim {

struct SimConfig {
  int agents = 1000;
  int history_bits = 2;
  int strategies = 2;
  std::vector<Scheme> schemes = {{SchemeKind::kWealth, 0}, {SchemeKind::kMinority, 0}, {SchemeKind::kMajority, 0}};
  /// Initial wealth (all cash) as a multiple of the first price.
  double wealth_multiplier = 5.0;
  std::uint64_t seed = 1;
  /// Minority/majority strategies are scored on their constrained action.
  /// Off: scored on the raw suggestion.
  bool constrain_virtual = true;

  void validate() const {
    if (agents < 1) throw std::invalid_argument("agents must be >= 1");
    if (history_bits < 1 || history_bits > 16) throw std::invalid_argument("history bits must be in [1, 16]");
    if (strategies < 1) throw std::invalid_argument("strategies per agent must be >= 1");
    if (!(wealth_multiplier > 0.0)) throw std::invalid_argument("wealth multiplier must be positive");
    if (schemes.empty()) throw std::invalid_argument("at least one scheme is required");
    for (const auto& s : schemes)
      if (s.memory < 0) throw std::invalid_argument("score memory must be >= 0");
  }
};

/// Snapshot of one agent.
struct AgentState {
  Account account;
  std::size_t selected = 0;
  std::vector<ScoreTracker> trackers;
};

struct StepMetrics {
  double average_wealth = 0.0;  ///< after settlement, valued at the next price
  std::uint32_t switches = 0;   ///< agents whose chosen strategy changed this step
};

/// N agents sharing one evaluation scheme.
class Population {
 public:
  Population(Scheme scheme, const SimConfig& cfg, double initial_price, std::uint64_t seed)
      : scheme_(scheme),
        agents_(static_cast<std::size_t>(cfg.agents)),
        strategies_(static_cast<std::size_t>(cfg.strategies)),
        patterns_(std::size_t{1} << cfg.history_bits),
        constrain_(cfg.constrain_virtual) {
    if (!(initial_price > 0.0)) throw std::invalid_argument("initial price must be positive");
    const double w0 = cfg.wealth_multiplier * initial_price;
    const double u0 = scheme.kind == SchemeKind::kWealth ? w0 : 0.0;
    const std::size_t trackers = agents_ * strategies_;

    tables_.resize(trackers * patterns_);
    trackers_.assign(trackers, ScoreTracker{u0, w0, 0});
    cash_.assign(agents_, w0);
    position_.assign(agents_, 0);
    selected_.assign(agents_, 0);
    tie_keys_.resize(agents_);
    scratch_scores_.resize(strategies_);
    scratch_raw_.resize(strategies_);
    if (scheme.finite()) memory_ = ScoreMemory(trackers, scheme.memory, u0);

    std::uniform_int_distribution<int> pick(-1, 1);
    for (std::size_t i = 0; i < agents_; ++i) {
      Rng rng(derive_seed(seed, i));
      auto* row = &tables_[i * strategies_ * patterns_];
      for (std::size_t e = 0; e < strategies_ * patterns_; ++e) row[e] = static_cast<std::int8_t>(pick(rng));
      tie_keys_[i] = derive_seed(seed, i, tag(Stream::kTieBreak));
    }
  }

  const Scheme& scheme() const noexcept { return scheme_; }
  std::size_t size() const noexcept { return agents_; }
  std::size_t strategies() const noexcept { return strategies_; }

  Strategy strategy(std::size_t agent, std::size_t j) const {
    const auto* row = &tables_[(agent * strategies_ + j) * patterns_];
    std::vector<Action> t(patterns_);
    for (std::size_t e = 0; e < patterns_; ++e) t[e] = static_cast<Action>(row[e]);
    return Strategy(std::move(t));
  }

  /// Replaces a strategy table; intended for scripted scenarios.
  void set_strategy(std::size_t agent, std::size_t j, const Strategy& s) {
    if (s.table().size() != patterns_) throw std::invalid_argument("strategy table size mismatch");
    auto* row = &tables_[(agent * strategies_ + j) * patterns_];
    for (std::size_t e = 0; e < patterns_; ++e) row[e] = static_cast<std::int8_t>(s.table()[e]);
  }

  AgentState agent(std::size_t i) const {
    AgentState st{{cash_[i], position_[i]}, selected_[i], {}};
    st.trackers.assign(trackers_.begin() + static_cast<std::ptrdiff_t>(i * strategies_),
                       trackers_.begin() + static_cast<std::ptrdiff_t>((i + 1) * strategies_));
    return st;
  }

  Account account(std::size_t i) const noexcept { return {cash_[i], position_[i]}; }
  std::size_t selected(std::size_t i) const noexcept { return selected_[i]; }
  const ScoreTracker& tracker(std::size_t i, std::size_t j) const noexcept { return trackers_[i * strategies_ + j]; }

  double average_wealth(double price) const noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < agents_; ++i) sum += cash_[i] + position_[i] * price;
    return sum / static_cast<double>(agents_);
  }

  /// One decision/settlement cycle at step t with history index `history`.
  StepMetrics step(std::uint32_t history, double price, double next_price, std::int64_t t) {
    switch (scheme_.kind) {
      case SchemeKind::kWealth:
        return scheme_.finite() ? step_impl<SchemeKind::kWealth, true>(history, price, next_price, t)
                                : step_impl<SchemeKind::kWealth, false>(history, price, next_price, t);
      case SchemeKind::kMinority:
        return scheme_.finite() ? step_impl<SchemeKind::kMinority, true>(history, price, next_price, t)
                                : step_impl<SchemeKind::kMinority, false>(history, price, next_price, t);
      case SchemeKind::kMajority:
        return scheme_.finite() ? step_impl<SchemeKind::kMajority, true>(history, price, next_price, t)
                                : step_impl<SchemeKind::kMajority, false>(history, price, next_price, t);
    }
    return {};
  }

 private:
  template <SchemeKind Kind, bool Finite>
  StepMetrics step_impl(std::uint32_t history, double price, double next_price, std::int64_t t) {
    StepMetrics out;
    double wealth_sum = 0.0;
    const std::span<const double> scores(scratch_scores_.data(), strategies_);
    ScoreMemory::Cursor cursor;
    if constexpr (Finite) cursor = memory_.at(t);
    for (std::size_t i = 0; i < agents_; ++i) {
      const std::size_t base = i * strategies_;

      // Suggestions and the scores used for selection.
      for (std::size_t j = 0; j < strategies_; ++j) {
        const std::size_t idx = base + j;
        scratch_raw_[j] = tables_[idx * patterns_ + history];
        const double u = trackers_[idx].score;
        if constexpr (Finite) {
          scratch_scores_[j] = u - memory_.exchange(idx, cursor, u);
        } else {
          scratch_scores_[j] = u;
        }
      }

      const std::uint64_t key = tie_keys_[i];
      const Selection sel = select_strategy(scores, selected_[i], [key, t](std::size_t n) {
        return counter_draw(key, static_cast<std::uint64_t>(t), n);
      });
      out.switches += sel.switched ? 1u : 0u;
      selected_[i] = sel.index;

      // The agent's own constraint, then settlement at the next price.
      const double limit = detail::position_limit_unchecked(cash_[i] + position_[i] * price, price);
      const int a = constrain_action(position_[i], limit, static_cast<int>(scratch_raw_[sel.index]));
      cash_[i] -= a * next_price;
      position_[i] += a;
      wealth_sum += cash_[i] + position_[i] * next_price;

      // Every strategy is scored, selected or not.
      for (std::size_t j = 0; j < strategies_; ++j) {
        advance_tracker(Kind, trackers_[base + j], static_cast<Action>(scratch_raw_[j]), price, next_price,
                        constrain_);
      }
    }
    out.average_wealth = wealth_sum / static_cast<double>(agents_);
    return out;
  }

  Scheme scheme_;
  std::size_t agents_;
  std::size_t strategies_;
  std::size_t patterns_;
  bool constrain_;
  std::vector<std::int8_t> tables_;  // [agent][strategy][history]
  std::vector<ScoreTracker> trackers_;
  std::vector<double> cash_;
  std::vector<int> position_;
  std::vector<std::size_t> selected_;
  std::vector<std::uint64_t> tie_keys_;
  ScoreMemory memory_;
  std::vector<double> scratch_scores_;
  std::vector<std::int8_t> scratch_raw_;
};

/// Sub-seed of a scheme's population. Depends on the evaluation rule only,
/// so a delta scheme and its infinite-memory parent share strategies and
/// tie-break streams.
inline std::uint64_t population_seed(std::uint64_t run_seed, const Scheme& s) {
  return derive_seed(run_seed, tag(Stream::kAgents), static_cast<std::uint64_t>(s.kind));
}

inline MarketHistory initial_history(std::uint64_t run_seed, int bits) {
  Rng rng(derive_seed(run_seed, tag(Stream::kHistory)));
  const auto v = std::uniform_int_distribution<std::uint32_t>(0, (1u << bits) - 1)(rng);
  return MarketHistory(bits, v);
}

/// All populations plus the shared history.
class Market {
 public:
  Market(const SimConfig& cfg, double initial_price)
      : history_(initial_history(cfg.seed, cfg.history_bits)) {
    cfg.validate();
    populations_.reserve(cfg.schemes.size());
    for (const auto& s : cfg.schemes) populations_.emplace_back(s, cfg, initial_price, population_seed(cfg.seed, s));
  }

  const MarketHistory& history() const noexcept { return history_; }
  std::int64_t time() const noexcept { return t_; }
  std::vector<Population>& populations() noexcept { return populations_; }
  const std::vector<Population>& populations() const noexcept { return populations_; }

  /// Advances every population from `price` to `next_price`; metrics in scheme order.
  std::vector<StepMetrics> step(double price, double next_price) {
    std::vector<StepMetrics> out;
    step_into(price, next_price, out);
    return out;
  }

  void step_into(double price, double next_price, std::vector<StepMetrics>& out) {
    out.resize(populations_.size());
    for (std::size_t k = 0; k < populations_.size(); ++k)
      out[k] = populations_[k].step(history_.index(), price, next_price, t_);
    history_ = history_.pushed(next_price > price);
    ++t_;
  }

 private:
  MarketHistory history_;
  std::vector<Population> populations_;
  std::int64_t t_ = 0;
};

inline Market init_market(const SimConfig& cfg, double initial_price) { return Market(cfg, initial_price); }

/// Full trajectories of one run. Entry t of every series refers to price
/// index t; switches[t] counts changes made at the decision taken at t (the
/// last entry is always 0, no decision is taken at the final price).
struct RunRecord {
  std::vector<Scheme> schemes;
  PriceSeries prices;
  std::vector<std::vector<double>> average_wealth;
  std::vector<std::vector<std::uint32_t>> switches;
};

inline RunRecord run(const SimConfig& cfg, const PriceSeries& series) {
  cfg.validate();
  if (series.size() < static_cast<std::size_t>(cfg.history_bits) + 2)
    throw std::invalid_argument("price series needs at least m + 2 points, got " + std::to_string(series.size()));
  Market market(cfg, series[0]);
  const std::size_t n = series.size();
  const std::size_t k = cfg.schemes.size();
  RunRecord rec{cfg.schemes, series, std::vector<std::vector<double>>(k, std::vector<double>(n)),
                std::vector<std::vector<std::uint32_t>>(k, std::vector<std::uint32_t>(n, 0))};
  for (std::size_t s = 0; s < k; ++s) rec.average_wealth[s][0] = market.populations()[s].average_wealth(series[0]);
  std::vector<StepMetrics> metrics;
  for (std::size_t t = 0; t + 1 < n; ++t) {
    market.step_into(series[t], series[t + 1], metrics);
    for (std::size_t s = 0; s < k; ++s) {
      rec.average_wealth[s][t + 1] = metrics[s].average_wealth;
      rec.switches[s][t] = metrics[s].switches;
    }
  }
  return rec;
}

/// Columns: t, P, then <scheme>_w and <scheme>_nswitch for each scheme.
inline void write_timeseries_csv(const RunRecord& rec, std::ostream& out) {
  out << "t,P";
  for (const auto& s : rec.schemes) out << ',' << s.label() << "_w," << s.label() << "_nswitch";
  out << '\n';
  for (std::size_t t = 0; t < rec.prices.size(); ++t) {
    out << t << ',' << format_number(rec.prices[t]);
    for (std::size_t s = 0; s < rec.schemes.size(); ++s)
      out << ',' << format_number(rec.average_wealth[s][t]) << ',' << rec.switches[s][t];
    out << '\n';
  }
}

}  // namespace wgsim
