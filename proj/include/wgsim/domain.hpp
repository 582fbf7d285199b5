#pragma once

// Market vocabulary: actions, the shared m-bit history, lookup-table
// strategies, and the cash/position bookkeeping of a single trader.

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wgsim {

/// Sell one unit, abstain, or buy one unit.
enum class Action : std::int8_t { kSell = -1, kAbstain = 0, kBuy = 1 };

constexpr int to_int(Action a) noexcept { return static_cast<int>(a); }

inline Action action_from_int(int v) {
  if (v < -1 || v > 1) throw std::invalid_argument("action must be -1, 0 or +1, got " + std::to_string(v));
  return static_cast<Action>(v);
}

/// Rolling record of the last m price directions (1 = rose, 0 = did not
/// rise). Stored as an m-bit integer; the newest bit is the least
/// significant one, so [b_oldest, ..., b_newest] reads as a binary number.
class MarketHistory {
 public:
  MarketHistory(int bits, std::uint32_t value = 0) : bits_(bits), value_(value) {
    if (bits < 1 || bits > 20) throw std::invalid_argument("history length must be in [1, 20]");
    if (value >= (1u << bits)) throw std::invalid_argument("history value out of range");
  }

  /// Builds a history from explicit bits, oldest first.
  static MarketHistory from_bits(std::span<const int> bits) {
    std::uint32_t v = 0;
    for (int b : bits) {
      if (b != 0 && b != 1) throw std::invalid_argument("history bits must be 0 or 1");
      v = (v << 1) | static_cast<std::uint32_t>(b);
    }
    return MarketHistory(static_cast<int>(bits.size()), v);
  }

  int length() const noexcept { return bits_; }
  std::uint32_t index() const noexcept { return value_; }
  std::uint32_t patterns() const noexcept { return 1u << bits_; }

  /// Bits oldest first.
  std::vector<int> bits() const {
    std::vector<int> out(static_cast<std::size_t>(bits_));
    for (int i = 0; i < bits_; ++i) out[static_cast<std::size_t>(i)] = (value_ >> (bits_ - 1 - i)) & 1u;
    return out;
  }

  /// Drops the oldest bit and appends `rose`.
  MarketHistory pushed(bool rose) const noexcept {
    MarketHistory h = *this;
    h.value_ = ((value_ << 1) | (rose ? 1u : 0u)) & (patterns() - 1);
    return h;
  }

  friend bool operator==(const MarketHistory&, const MarketHistory&) = default;

 private:
  int bits_;
  std::uint32_t value_;
};

inline MarketHistory history_update(const MarketHistory& h, bool rose) noexcept { return h.pushed(rose); }

/// Lookup table from every m-bit history to an action.
class Strategy {
 public:
  explicit Strategy(std::vector<Action> table) : table_(std::move(table)) {
    const auto n = table_.size();
    if (n < 2 || (n & (n - 1)) != 0) throw std::invalid_argument("strategy table length must be a power of two >= 2");
  }

  /// Each entry independently uniform over {sell, abstain, buy}.
  template <typename URBG>
  static Strategy random(int history_bits, URBG& rng) {
    std::uniform_int_distribution<int> pick(-1, 1);
    std::vector<Action> table(std::size_t{1} << history_bits);
    for (auto& a : table) a = static_cast<Action>(pick(rng));
    return Strategy(std::move(table));
  }

  Action suggest(const MarketHistory& h) const {
    if (h.patterns() != table_.size()) throw std::invalid_argument("history length does not match strategy table");
    return table_[h.index()];
  }

  std::span<const Action> table() const& noexcept { return table_; }
  std::span<const Action> table() const&& = delete;

 private:
  std::vector<Action> table_;
};

inline Action strategy_suggest(const Strategy& s, const MarketHistory& h) { return s.suggest(h); }

/// K = max(w / P, 0): the largest |position| the non-negative cash rule allows.
namespace detail {
[[noreturn, gnu::cold, gnu::noinline]] inline void throw_bad_price(double price) {
  throw std::domain_error("non-positive price " + std::to_string(price));
}
}  // namespace detail

inline double position_limit(double wealth, double price) {
  if (!(price > 0.0)) [[unlikely]]
    detail::throw_bad_price(price);
  return std::max(wealth / price, 0.0);
}

namespace detail {
// Hot-loop variant; prices are validated once when a series is built.
inline double position_limit_unchecked(double wealth, double price) noexcept {
  return std::max(wealth / price, 0.0);
}
}  // namespace detail

/// Replaces with abstention any action that would push the position further
/// outside [-K, K].
constexpr int constrain_action(int position, double limit, int action) noexcept {
  // For action in {-1, 0, +1}: a buy is blocked iff k >= K, a sell iff -k >= K.
  // Multiplying instead of branching keeps the hot loop free of mispredictions.
  const double directed = static_cast<double>(action) * position;
  return action * static_cast<int>(directed < limit);
}

inline Action constrain_action(int position, double limit, Action action) noexcept {
  return static_cast<Action>(constrain_action(position, limit, to_int(action)));
}

/// One trader's books. Wealth is derived, never stored.
struct Account {
  double cash = 0.0;
  int position = 0;

  double wealth(double price) const noexcept { return cash + position * price; }
};

/// Settles a (pre-constrained) action at the next price.
inline Account apply_trade(Account acc, Action a, double next_price) noexcept {
  acc.cash -= to_int(a) * next_price;
  acc.position += to_int(a);
  return acc;
}

}  // namespace wgsim
