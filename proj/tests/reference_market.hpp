#pragma once

// Deliberately plain re-implementation of the market rules, used as an
// oracle for wgsim::Population. It shares only the documented seed
// contract (strategy tables and tie-break keys); every rule is written out
// directly from the bookkeeping identities, with full score histories
// instead of a ring buffer.

#include <cstdint>
#include <vector>

#include "wgsim/engine.hpp"

namespace reference {

struct Strat {
  std::vector<int> table;
  std::vector<double> score_history;  // u(0), u(1), ...
  double virtual_cash = 0.0;          // WG: score = virtual_cash + virtual_k * P
  double virtual_wealth = 0.0;        // MinG / MajG constraint account
  int virtual_k = 0;
};

struct Trader {
  double cash = 0.0;
  int k = 0;
  int selected = 0;
  std::uint64_t tie_key = 0;
  std::vector<Strat> strats;
};

struct Group {
  wgsim::Scheme scheme;
  std::vector<Trader> traders;
};

inline double limit_of(double wealth, double price) { return wealth / price > 0.0 ? wealth / price : 0.0; }

inline int allowed(int k, double limit, int a) {
  if (a == 1 && k >= limit) return 0;
  if (a == -1 && k <= -limit) return 0;
  return a;
}

class Market {
 public:
  Market(const wgsim::SimConfig& cfg, double p0) : cfg_(cfg), history_(wgsim::initial_history(cfg.seed, cfg.history_bits).index()) {
    const double w0 = cfg.wealth_multiplier * p0;
    for (const auto& scheme : cfg.schemes) {
      // Strategy tables come from the engine so both sides trade the same strategies.
      wgsim::Population pop(scheme, cfg, p0, wgsim::population_seed(cfg.seed, scheme));
      Group g{scheme, {}};
      for (std::size_t i = 0; i < pop.size(); ++i) {
        Trader tr;
        tr.cash = w0;
        tr.tie_key = wgsim::derive_seed(wgsim::population_seed(cfg.seed, scheme), i, wgsim::tag(wgsim::Stream::kTieBreak));
        for (std::size_t j = 0; j < pop.strategies(); ++j) {
          Strat st;
          const auto strategy = pop.strategy(i, j);
          for (auto a : strategy.table()) st.table.push_back(wgsim::to_int(a));
          st.virtual_cash = w0;
          st.virtual_wealth = w0;
          st.score_history.push_back(scheme.kind == wgsim::SchemeKind::kWealth ? w0 : 0.0);
          tr.strats.push_back(st);
        }
        g.traders.push_back(tr);
      }
      groups_.push_back(g);
    }
  }

  std::vector<Group>& groups() { return groups_; }

  void step(double p, double pn) {
    const double dp = pn - p;
    for (auto& g : groups_) {
      const bool wealth_game = g.scheme.kind == wgsim::SchemeKind::kWealth;
      for (auto& tr : g.traders) {
        std::vector<double> eff_score;
        std::vector<int> raw, eff;
        for (auto& st : tr.strats) {
          const double u = st.score_history.back();
          double base = st.score_history.front();
          if (g.scheme.finite() && t_ >= g.scheme.memory) base = st.score_history[static_cast<std::size_t>(t_ - g.scheme.memory)];
          eff_score.push_back(g.scheme.finite() ? u - base : u);
          const int a = st.table[history_];
          raw.push_back(a);
          const double vw = wealth_game ? st.virtual_cash + st.virtual_k * p : st.virtual_wealth;
          const bool constrain = wealth_game || cfg_.constrain_virtual;
          eff.push_back(constrain ? allowed(st.virtual_k, limit_of(vw, p), a) : a);
        }
        double best = eff_score[0];
        for (double v : eff_score) best = v > best ? v : best;
        std::vector<int> maximizers;
        for (std::size_t j = 0; j < eff_score.size(); ++j)
          if (eff_score[j] == best) maximizers.push_back(static_cast<int>(j));
        int pick = maximizers[0];
        if (maximizers.size() > 1)
          pick = maximizers[wgsim::counter_draw(tr.tie_key, static_cast<std::uint64_t>(t_), maximizers.size())];
        tr.selected = pick;

        const int a = allowed(tr.k, limit_of(tr.cash + tr.k * p, p), raw[static_cast<std::size_t>(pick)]);
        tr.cash -= a * pn;
        tr.k += a;

        for (std::size_t j = 0; j < tr.strats.size(); ++j) {
          auto& st = tr.strats[j];
          double u = st.score_history.back();
          switch (g.scheme.kind) {
            case wgsim::SchemeKind::kWealth: u += st.virtual_k * dp; break;
            case wgsim::SchemeKind::kMinority: u -= eff[j] * dp; break;
            case wgsim::SchemeKind::kMajority: u += eff[j] * dp; break;
          }
          st.virtual_wealth += st.virtual_k * dp;
          st.virtual_cash -= eff[j] * pn;
          st.virtual_k += eff[j];
          st.score_history.push_back(u);
        }
      }
    }
    history_ = ((history_ << 1) | (pn > p ? 1u : 0u)) & ((1u << cfg_.history_bits) - 1);
    ++t_;
  }

  double average_wealth(std::size_t group, double price) const {
    double s = 0.0;
    for (const auto& tr : groups_[group].traders) s += tr.cash + tr.k * price;
    return s / static_cast<double>(groups_[group].traders.size());
  }

 private:
  wgsim::SimConfig cfg_;
  std::vector<Group> groups_;
  std::uint32_t history_;
  std::int64_t t_ = 0;
};

}  // namespace reference
