#pragma once

// Exogenous price sources: +-1 tick Markov generators of order 0..2,
// transition-probability estimation, and CSV ingestion of daily closes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wgsim/format.hpp"
#include "wgsim/random.hpp"

namespace wgsim {

/// A generated price reached zero.
class PriceFloorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unusable price data file.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Long-term (p_L) and short-term (p_S) trend parameters of the order-2
/// generator. Both must lie in [-0.5, 0.5].
struct TrendParams {
  double long_term = 0.0;
  double short_term = 0.0;
};

namespace provenance {
struct RealFile {
  std::string path;
};
struct Walk {
  double p_up;
  std::uint64_t seed;
};
struct Trend {
  TrendParams params;
  std::uint64_t seed;
};
struct Table {
  std::vector<double> p_up;
  std::uint64_t seed;
};
struct Inline {};
}  // namespace provenance

using Provenance = std::variant<provenance::Inline, provenance::RealFile, provenance::Walk, provenance::Trend,
                                provenance::Table>;

inline std::string describe(const Provenance& p) {
  struct V {
    std::string operator()(const provenance::Inline&) const { return "inline"; }
    std::string operator()(const provenance::RealFile& f) const { return "real:" + f.path; }
    std::string operator()(const provenance::Walk& w) const {
      return "walk(p_up=" + format_number(w.p_up) + ",seed=" + std::to_string(w.seed) + ")";
    }
    std::string operator()(const provenance::Trend& t) const {
      return "markov(p_L=" + format_number(t.params.long_term) + ",p_S=" + format_number(t.params.short_term) +
             ",seed=" + std::to_string(t.seed) + ")";
    }
    std::string operator()(const provenance::Table& t) const {
      std::string s = "table(";
      for (double p : t.p_up) s += format_number(p) + ",";
      return s + "seed=" + std::to_string(t.seed) + ")";
    }
  };
  return std::visit(V{}, p);
}

/// Ordered, strictly positive prices.
class PriceSeries {
 public:
  PriceSeries() = default;

  explicit PriceSeries(std::vector<double> prices, Provenance provenance = provenance::Inline{})
      : prices_(std::move(prices)), provenance_(std::move(provenance)) {
    for (std::size_t i = 0; i < prices_.size(); ++i) {
      if (!(prices_[i] > 0.0) || !std::isfinite(prices_[i]))
        throw std::invalid_argument("price at index " + std::to_string(i) + " is not a positive finite number");
    }
  }

  std::size_t size() const noexcept { return prices_.size(); }
  double operator[](std::size_t i) const noexcept { return prices_[i]; }
  const std::vector<double>& values() const noexcept { return prices_; }
  const Provenance& provenance() const noexcept { return provenance_; }

  /// 1 iff the price strictly rose from t to t+1; a flat tick records 0.
  bool rose(std::size_t t) const noexcept { return prices_[t + 1] > prices_[t]; }

 private:
  std::vector<double> prices_;
  Provenance provenance_;
};

/// Up-move probabilities indexed by the last `order` directions, encoded as
/// an integer with the newest direction in the least significant bit. For
/// order 2: 0 = down,down  1 = down,up  2 = up,down  3 = up,up (oldest first).
class MarkovTable {
 public:
  MarkovTable(int order, std::vector<double> p_up) : order_(order), p_up_(std::move(p_up)) {
    if (order < 0 || order > 2) throw std::invalid_argument("Markov order must be 0, 1 or 2");
    if (p_up_.size() != (std::size_t{1} << order))
      throw std::invalid_argument("Markov table needs 2^order entries");
    for (double p : p_up_)
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("Markov table entries must lie in [0, 1]");
  }

  /// History-independent biased walk.
  static MarkovTable walk(double p_up) { return MarkovTable(0, {p_up}); }

  int order() const noexcept { return order_; }
  std::size_t patterns() const noexcept { return p_up_.size(); }
  double p_up(std::size_t mu) const { return p_up_.at(mu); }
  const std::vector<double>& values() const noexcept { return p_up_; }

 private:
  int order_;
  std::vector<double> p_up_;
};

/// Direction pattern as text, oldest first: "UD" = rose, then fell.
inline std::string pattern_name(std::size_t mu, int order) {
  if (order == 0) return "-";
  std::string s;
  for (int i = order - 1; i >= 0; --i) s.push_back(((mu >> i) & 1u) ? 'U' : 'D');
  return s;
}

namespace detail {
// Returns (0.5 - |x|, 0.5 + |x|) with the pair summing to exactly 1: the
// larger member lies in [0.5, 1], so 1 - larger is exact.
inline std::pair<double, double> complementary_pair(double x) {
  const double hi = 0.5 + std::fabs(x);
  return {1.0 - hi, hi};
}
}  // namespace detail

/// Order-2 table with p(UU) = 0.5 + p_L, p(DD) = 0.5 - p_L, p(UD) = 0.5 + p_S,
/// p(DU) = 0.5 - p_S. Both complementary pairs sum to exactly 1.
inline MarkovTable table_from_trend(TrendParams tp) {
  auto in_range = [](double v) { return v >= -0.5 && v <= 0.5; };
  if (!in_range(tp.long_term) || !in_range(tp.short_term))
    throw std::invalid_argument("trend parameters must lie in [-0.5, 0.5]");
  auto [lo_l, hi_l] = detail::complementary_pair(tp.long_term);
  auto [lo_s, hi_s] = detail::complementary_pair(tp.short_term);
  const bool up_l = tp.long_term >= 0.0;
  const bool up_s = tp.short_term >= 0.0;
  std::vector<double> p(4);
  p[3] = up_l ? hi_l : lo_l;  // UU
  p[0] = up_l ? lo_l : hi_l;  // DD
  p[2] = up_s ? hi_s : lo_s;  // UD
  p[1] = up_s ? lo_s : hi_s;  // DU
  return MarkovTable(2, std::move(p));
}

/// Generates steps+1 prices starting at `start`, each move +-1 with the
/// up-probability of the current generator history. The generator's own
/// initial history is drawn uniformly.
inline std::vector<double> generate_prices(const MarkovTable& table, std::size_t steps, double start, Rng& rng) {
  if (steps < 1) throw std::invalid_argument("need at least one step");
  if (!(start > 0.0)) throw std::invalid_argument("initial price must be positive");
  const std::uint32_t mask = static_cast<std::uint32_t>(table.patterns() - 1);
  std::uint32_t mu = std::uniform_int_distribution<std::uint32_t>(0, mask)(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> out;
  out.reserve(steps + 1);
  double p = start;
  out.push_back(p);
  for (std::size_t t = 0; t < steps; ++t) {
    const bool up = unit(rng) < table.p_up(mu);
    p += up ? 1.0 : -1.0;
    if (p <= 0.0) throw PriceFloorError("generated price reached zero at step " + std::to_string(t + 1));
    out.push_back(p);
    mu = ((mu << 1) | (up ? 1u : 0u)) & mask;
  }
  return out;
}

inline PriceSeries generate(const MarkovTable& table, std::size_t steps, double start, std::uint64_t seed) {
  Rng rng(seed);
  return PriceSeries(generate_prices(table, steps, start, rng), provenance::Table{table.values(), seed});
}

inline PriceSeries generate_walk(double p_up, std::size_t steps, double start, std::uint64_t seed) {
  Rng rng(seed);
  return PriceSeries(generate_prices(MarkovTable::walk(p_up), steps, start, rng), provenance::Walk{p_up, seed});
}

inline PriceSeries generate_trend(TrendParams tp, std::size_t steps, double start, std::uint64_t seed) {
  Rng rng(seed);
  return PriceSeries(generate_prices(table_from_trend(tp), steps, start, rng), provenance::Trend{tp, seed});
}

/// Empirical transition counts. Entries whose history never occurred are
/// reported as undefined rather than zero.
struct MarkovEstimate {
  int order = 0;
  std::vector<std::uint64_t> occurrences;
  std::vector<std::uint64_t> rises;

  std::optional<double> p_up(std::size_t mu) const {
    if (occurrences.at(mu) == 0) return std::nullopt;
    return static_cast<double>(rises[mu]) / static_cast<double>(occurrences[mu]);
  }

  std::vector<std::size_t> undefined() const {
    std::vector<std::size_t> out;
    for (std::size_t mu = 0; mu < occurrences.size(); ++mu)
      if (occurrences[mu] == 0) out.push_back(mu);
    return out;
  }

  MarkovTable table() const {
    std::vector<double> p(occurrences.size());
    for (std::size_t mu = 0; mu < p.size(); ++mu) {
      auto v = p_up(mu);
      if (!v) throw std::runtime_error("history pattern " + pattern_name(mu, order) + " never observed");
      p[mu] = *v;
    }
    return MarkovTable(order, std::move(p));
  }
};

/// p(mu) = (# rises right after history mu) / (# occurrences of mu), counting
/// only flat-or-falling ticks as "not risen".
inline MarkovEstimate estimate_table(const PriceSeries& series, int order) {
  if (order < 0 || order > 2) throw std::invalid_argument("Markov order must be 0, 1 or 2");
  MarkovEstimate est;
  est.order = order;
  const std::size_t patterns = std::size_t{1} << order;
  est.occurrences.assign(patterns, 0);
  est.rises.assign(patterns, 0);
  if (series.size() < 2) return est;
  const std::size_t moves = series.size() - 1;
  const std::uint32_t mask = static_cast<std::uint32_t>(patterns - 1);
  std::uint32_t mu = 0;
  for (std::size_t t = 0; t < moves; ++t) {
    const bool up = series.rose(t);
    if (t >= static_cast<std::size_t>(order)) {
      ++est.occurrences[mu];
      if (up) ++est.rises[mu];
    }
    mu = ((mu << 1) | (up ? 1u : 0u)) & mask;
  }
  return est;
}

struct CsvOptions {
  std::string date_column = "Date";
  std::string close_column = "Close";
  /// Fewer usable rows than this is an error.
  std::size_t min_rows = 2;
};

struct LoadedSeries {
  PriceSeries series;
  std::vector<std::string> dates;
  std::size_t skipped_rows = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
  }
  return fields;
}

// YYYY-MM-DD (optionally followed by a time part) or YYYY/MM/DD -> days since epoch.
inline std::optional<std::int64_t> parse_date(std::string_view s) {
  if (s.size() < 10) return std::nullopt;
  const char sep = s[4];
  if ((sep != '-' && sep != '/') || s[7] != sep) return std::nullopt;
  if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  auto y = num(0, 4), m = num(5, 2), d = num(8, 2);
  if (!y || !m || !d) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                                        std::chrono::day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

// Row ordering key: a calendar date, or a plain step index as written by
// write_series_csv.
inline std::optional<std::int64_t> parse_order_key(std::string_view s) {
  if (!s.empty() && s.size() <= 18 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return std::stoll(std::string(s));
  return parse_date(s);
}

}  // namespace detail

/// Reads daily closes from CSV text with a header row. Rows whose close is
/// missing, non-numeric or non-positive are skipped and counted. Dates must be
/// strictly monotone; a descending file is reversed into chronological order.
inline LoadedSeries parse_series_csv(std::istream& in, const CsvOptions& opt, const std::string& source_id) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source_id + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(source_id + ": no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t date_col = column(opt.date_column);
  const std::size_t close_col = column(opt.close_column);

  struct Row {
    std::int64_t day;
    std::string date;
    double close;
  };
  std::vector<Row> rows;
  std::size_t skipped = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() <= std::max(date_col, close_col)) {
      ++skipped;
      continue;
    }
    const auto day = detail::parse_order_key(fields[date_col]);
    if (!day)
      throw DataError(source_id + ":" + std::to_string(line_no) + ": unparseable date or step '" + fields[date_col] +
                      "'");
    const auto close = parse_number(fields[close_col]);
    if (!close || !(*close > 0.0) || !std::isfinite(*close)) {
      ++skipped;
      continue;
    }
    rows.push_back({*day, fields[date_col], *close});
  }

  if (rows.size() >= 2) {
    const bool descending = rows[1].day < rows[0].day;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const bool ok = descending ? rows[i].day < rows[i - 1].day : rows[i].day > rows[i - 1].day;
      if (!ok) throw DataError(source_id + ": dates are not strictly monotone near '" + rows[i].date + "'");
    }
    if (descending) std::reverse(rows.begin(), rows.end());
  }
  if (rows.size() < opt.min_rows)
    throw DataError(source_id + ": only " + std::to_string(rows.size()) + " usable rows, need " +
                    std::to_string(opt.min_rows));

  LoadedSeries out;
  std::vector<double> prices;
  prices.reserve(rows.size());
  out.dates.reserve(rows.size());
  for (auto& r : rows) {
    prices.push_back(r.close);
    out.dates.push_back(std::move(r.date));
  }
  out.series = PriceSeries(std::move(prices), provenance::RealFile{source_id});
  out.skipped_rows = skipped;
  return out;
}

inline LoadedSeries load_series_csv(const std::filesystem::path& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_series_csv(in, opt, path.string());
}

/// Two columns: step index and price.
inline void write_series_csv(const PriceSeries& series, std::ostream& out) {
  out << "step,price\n";
  for (std::size_t t = 0; t < series.size(); ++t) out << t << ',' << format_number(series[t]) << '\n';
}

}  // namespace wgsim
