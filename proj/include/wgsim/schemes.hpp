#pragma once

// Strategy evaluation: the wealth game (virtual wealth of always following
// a strategy), the minority game (rewards trend-opposing actions), the
// majority game (rewards trend-following actions), their finite-memory
// "delta" variants, and best-strategy selection.

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wgsim/domain.hpp"

namespace wgsim {

enum class SchemeKind : std::uint8_t { kWealth = 0, kMinority = 1, kMajority = 2 };

inline constexpr SchemeKind kAllKinds[] = {SchemeKind::kWealth, SchemeKind::kMinority, SchemeKind::kMajority};

/// An evaluation rule plus its score memory. memory == 0 means infinite;
/// a finite memory T turns WG/MinG/MajG into DWG/DMinG/DMajG.
struct Scheme {
  SchemeKind kind = SchemeKind::kWealth;
  int memory = 0;

  bool finite() const noexcept { return memory > 0; }

  std::string label() const {
    std::string base = kind == SchemeKind::kWealth ? "WG" : kind == SchemeKind::kMinority ? "MinG" : "MajG";
    if (!finite()) return base;
    return "D" + base + "_T" + std::to_string(memory);
  }

  /// Accepts "WG", "MinG", "MajG" (case-insensitive) and the delta forms
  /// "DWG:100" / "DWG_T100".
  static Scheme parse(std::string_view text) {
    std::string s;
    for (char c : text) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    Scheme out;
    std::string name = s;
    const auto sep = s.find_first_of(":_");
    if (sep != std::string::npos) {
      name = s.substr(0, sep);
      std::string mem = s.substr(sep + 1);
      if (!mem.empty() && mem[0] == 't') mem.erase(0, 1);
      try {
        std::size_t used = 0;
        out.memory = std::stoi(mem, &used);
        if (used != mem.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw std::invalid_argument("bad score memory in scheme '" + std::string(text) + "'");
      }
      if (out.memory < 1) throw std::invalid_argument("score memory must be >= 1");
    }
    const bool delta = name == "dwg" || name == "dming" || name == "dmajg";
    if (delta) {
      name.erase(0, 1);
      if (!out.finite()) throw std::invalid_argument("delta scheme '" + std::string(text) + "' needs a memory, e.g. DWG:100");
    } else if (out.finite()) {
      throw std::invalid_argument("finite memory requires the delta name, e.g. DWG:100");
    }
    if (name == "wg") out.kind = SchemeKind::kWealth;
    else if (name == "ming") out.kind = SchemeKind::kMinority;
    else if (name == "majg") out.kind = SchemeKind::kMajority;
    else throw std::invalid_argument("unknown scheme '" + std::string(text) + "'");
    return out;
  }

  friend bool operator==(const Scheme&, const Scheme&) = default;
};

/// Per-strategy state. `virtual_wealth` and `virtual_position` form the
/// strategy's virtual account, the basis of its non-negative cash
/// constraint; for the wealth game the score is that virtual wealth.
struct ScoreTracker {
  double score = 0.0;
  double virtual_wealth = 0.0;
  int virtual_position = 0;
};

/// Strategy's effective action: its suggestion filtered through the
/// constraint on its own virtual account.
inline Action effective_action(const ScoreTracker& tr, Action suggestion, double price) {
  return constrain_action(tr.virtual_position, position_limit(tr.virtual_wealth, price), suggestion);
}

/// Wealth-game update. Returns the effective action.
inline Action wg_update(ScoreTracker& tr, Action suggestion, double price, double next_price) {
  const Action eff = effective_action(tr, suggestion, price);
  tr.score += tr.virtual_position * (next_price - price);
  tr.virtual_wealth = tr.score;
  tr.virtual_position += to_int(eff);
  return eff;
}

constexpr double ming_update(double score, Action effective, double price_change) noexcept {
  return score - to_int(effective) * price_change;
}

constexpr double majg_update(double score, Action effective, double price_change) noexcept {
  return score + to_int(effective) * price_change;
}

/// Advances one tracker by a step under `kind`. When `constrain` is false the
/// minority/majority scores use the raw suggestion (the wealth game is
/// always constrained). Returns the action that was scored.
inline Action advance_tracker(SchemeKind kind, ScoreTracker& tr, Action suggestion, double price,
                              double next_price, bool constrain = true) {
  if (kind == SchemeKind::kWealth) return wg_update(tr, suggestion, price, next_price);
  const Action eff = constrain ? effective_action(tr, suggestion, price) : suggestion;
  const double dp = next_price - price;
  tr.score = kind == SchemeKind::kMinority ? ming_update(tr.score, eff, dp) : majg_update(tr.score, eff, dp);
  tr.virtual_wealth += tr.virtual_position * dp;
  tr.virtual_position += to_int(eff);
  return eff;
}

/// Window bookkeeping for finite score memory over many trackers.
///
/// At step t, exchange() returns u(max(t - T, 0)) and records u(t). Before T
/// steps have elapsed the window is truncated at the run start, so the
/// subtrahend is the initial score.
class ScoreMemory {
 public:
  /// Position of step t in the ring; shared by every tracker.
  struct Cursor {
    std::size_t slot = 0;
    bool full = false;  ///< t >= T, so the slot holds u(t - T)
  };

  ScoreMemory() = default;

  ScoreMemory(std::size_t trackers, int window, double initial_score)
      : window_(window), trackers_(trackers), initial_(initial_score) {
    if (window < 1) throw std::invalid_argument("score memory window must be >= 1");
    ring_.assign(trackers * static_cast<std::size_t>(window), initial_score);
  }

  bool finite() const noexcept { return window_ > 0; }
  int window() const noexcept { return window_; }

  Cursor at(std::int64_t t) const noexcept {
    return {static_cast<std::size_t>(t % window_), t >= window_};
  }

  double exchange(std::size_t tracker, Cursor c, double current) noexcept {
    // Slot-major layout: one step touches one contiguous row.
    double& slot = ring_[c.slot * trackers_ + tracker];
    const double past = c.full ? slot : initial_;
    slot = current;
    return past;
  }

  double exchange(std::size_t tracker, std::int64_t t, double current) noexcept {
    return finite() ? exchange(tracker, at(t), current) : 0.0;
  }

  /// Score used for selection at step t; records u(t) as a side effect.
  double effective(std::size_t tracker, std::int64_t t, double current) noexcept {
    return finite() ? current - exchange(tracker, at(t), current) : current;
  }

 private:
  int window_ = 0;
  std::size_t trackers_ = 0;
  double initial_ = 0.0;
  std::vector<double> ring_;
};

/// u^T(t) = u(t) - u(t - T), or u(t) for infinite memory.
constexpr double effective_score(double current, double window_start, bool finite) noexcept {
  return finite ? current - window_start : current;
}

struct Selection {
  std::size_t index = 0;
  bool switched = false;
};

/// Argmax over `scores`; ties go to a uniformly drawn maximizer, where
/// draw(n) returns an index in [0, n).
template <typename Draw>
Selection select_strategy(std::span<const double> scores, std::size_t previous, Draw&& draw) {
  if (scores.empty()) throw std::invalid_argument("select_strategy needs at least one score");
  double best = -std::numeric_limits<double>::infinity();
  std::size_t ties = 0;
  std::size_t first = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > best) {
      best = scores[j];
      ties = 1;
      first = j;
    } else if (scores[j] == best) {
      ++ties;
    }
  }
  std::size_t pick = first;
  if (ties > 1) {
    std::size_t k = draw(ties);
    for (std::size_t j = first;; ++j) {
      if (scores[j] == best && k-- == 0) {
        pick = j;
        break;
      }
    }
  }
  return {pick, pick != previous};
}

template <typename URBG>
Selection select_strategy_rng(std::span<const double> scores, std::size_t previous, URBG& rng) {
  return select_strategy(scores, previous, [&rng](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  });
}

}  // namespace wgsim
