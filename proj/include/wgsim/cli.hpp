#pragma once

// Command-line front end. Values resolve as: flag > config file > default.
// The config file is flat `key = value` text whose keys are the long flag
// names of the chosen subcommand (with or without dashes replaced by
// underscores); unknown keys are rejected.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "wgsim/engine.hpp"
#include "wgsim/experiments.hpp"
#include "wgsim/format.hpp"
#include "wgsim/prices.hpp"

namespace wgsim::cli {

using Json = nlohmann::ordered_json;

struct Settings {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 1;
  int workers = 1;

  int agents = 1000;
  int history = 2;
  int strategies = 2;
  double wealth_mult = 5.0;
  std::vector<std::string> schemes = {"WG", "MinG", "MajG"};
  bool constrain_virtual = true;
  double p0 = 1000.0;

  std::vector<double> p_up;
  std::vector<double> p_l;
  std::vector<double> p_s;
  std::vector<double> table;
  int steps = 2000;
  int measure = 0;
  int samples = 100;
  bool full_scale = false;

  std::string input;
  std::string date_col = "Date";
  std::string close_col = "Close";
  int order = 2;

  std::vector<int> memory = {10, 100, 1000};
  bool keep_wg = false;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Flat `key = value` lines; '#' and ';' start comments.
inline std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    for (auto& c : key)
      if (c == '_') c = '-';
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline void apply_config(CLI::App& sub, const std::string& path) {
  for (const auto& [key, value] : read_config(path)) {
    if (key == "config") throw std::runtime_error("config files cannot include other config files");
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr) throw std::runtime_error("unknown config key '" + key + "' for " + sub.get_name());
    if (opt->count() > 0) continue;  // the command line wins
    opt->add_result(value);
    opt->run_callback();
  }
}

/// Every option of the subcommand with its resolved value, in declaration order.
inline Json resolved_options(const CLI::App& sub) {
  Json j = Json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name.empty()) continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      for (std::size_t i = 0; i < r.size(); ++i) value += (i ? "," : "") + r[i];
    } else {
      value = opt->get_default_str();
      if (value == "{}" || value == "[]") value.clear();
    }
    j[name] = value;
  }
  return j;
}

inline SimConfig sim_config(const Settings& s) {
  SimConfig cfg;
  cfg.agents = s.agents;
  cfg.history_bits = s.history;
  cfg.strategies = s.strategies;
  cfg.wealth_multiplier = s.wealth_mult;
  cfg.seed = s.seed;
  cfg.constrain_virtual = s.constrain_virtual;
  cfg.schemes.clear();
  for (const auto& name : s.schemes) cfg.schemes.push_back(Scheme::parse(name));
  cfg.validate();
  return cfg;
}

inline std::filesystem::path out_dir(const Settings& s) {
  std::filesystem::path dir(s.out);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

inline Json table_json(const MarkovTable& t) {
  Json j = Json::object();
  for (std::size_t mu = 0; mu < t.patterns(); ++mu) j[pattern_name(mu, t.order())] = t.p_up(mu);
  return j;
}

inline Json estimate_json(const MarkovEstimate& e) {
  Json j = Json::object();
  for (std::size_t mu = 0; mu < e.occurrences.size(); ++mu) {
    Json row;
    row["occurrences"] = e.occurrences[mu];
    row["rises"] = e.rises[mu];
    if (auto p = e.p_up(mu)) row["p_up"] = *p;
    else row["p_up"] = nullptr;
    j[pattern_name(mu, e.order)] = row;
  }
  return j;
}

inline void write_summary(const std::filesystem::path& dir, const std::string& command, const CLI::App& sub,
                          Json extra) {
  Json j;
  j["command"] = command;
  j["config"] = resolved_options(sub);
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_file(dir / "summary.json", j.dump(2) + "\n");
}

inline void write_timing(const std::filesystem::path& dir, std::chrono::steady_clock::time_point start) {
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json j;
  j["wall_time_s"] = secs;
  write_file(dir / "timing.json", j.dump(2) + "\n");
}

inline int count_sources(const Settings& s) {
  return static_cast<int>(!s.p_up.empty()) + static_cast<int>(!s.p_l.empty() || !s.p_s.empty()) +
         static_cast<int>(!s.table.empty()) + static_cast<int>(!s.input.empty());
}

inline MarkovTable explicit_table(const std::vector<double>& probs) {
  switch (probs.size()) {
    case 1: return MarkovTable(0, probs);
    case 2: return MarkovTable(1, probs);
    case 4: return MarkovTable(2, probs);
    default: throw std::invalid_argument("--table needs 1, 2 or 4 probabilities (order 0, 1 or 2)");
  }
}

inline double single(const std::vector<double>& v, const char* flag) {
  if (v.size() != 1) throw std::invalid_argument(std::string(flag) + " takes exactly one value here");
  return v.front();
}

/// Price series for `gen-price` and `run`.
inline PriceSeries series_from(const Settings& s, std::uint64_t seed, Json& info) {
  if (count_sources(s) > 1) throw std::invalid_argument("give only one price source (--input, --p-up, --p-l/--p-s or --table)");
  if (!s.input.empty()) {
    CsvOptions csv;
    csv.date_column = s.date_col;
    csv.close_column = s.close_col;
    csv.min_rows = static_cast<std::size_t>(s.history) + 2;
    auto loaded = load_series_csv(s.input, csv);
    info["skipped_rows"] = loaded.skipped_rows;
    if (!loaded.dates.empty()) {
      info["first_date"] = loaded.dates.front();
      info["last_date"] = loaded.dates.back();
    }
    if (loaded.skipped_rows > 0)
      std::cerr << "wgsim: warning: skipped " << loaded.skipped_rows << " rows without a usable close\n";
    return std::move(loaded.series);
  }
  const auto steps = static_cast<std::size_t>(s.steps);
  if (!s.table.empty()) return generate(explicit_table(s.table), steps, s.p0, seed);
  if (!s.p_l.empty() || !s.p_s.empty()) {
    const double pl = s.p_l.empty() ? 0.0 : single(s.p_l, "--p-l");
    const double ps = s.p_s.empty() ? 0.0 : single(s.p_s, "--p-s");
    return generate_trend({pl, ps}, steps, s.p0, seed);
  }
  return generate_walk(s.p_up.empty() ? 0.5 : single(s.p_up, "--p-up"), steps, s.p0, seed);
}

inline std::vector<double> full_axis() {
  std::vector<double> v;
  for (int i = -9; i <= 9; ++i) v.push_back(i * 0.05);
  return v;
}

inline SweepSpec sweep_base(const Settings& s) {
  SweepSpec spec;
  spec.samples = s.samples;
  spec.steps = s.steps;
  spec.measure_step = s.measure;
  spec.initial_price = s.p0;
  spec.sim = sim_config(s);
  spec.seed = s.seed;
  spec.workers = s.workers;
  return spec;
}

inline Json grid_json(const GridResult& r) {
  Json j;
  j["cells"] = r.cells.size();
  Json schemes = Json::array();
  for (const auto& sc : r.schemes) schemes.push_back(sc.label());
  j["schemes"] = schemes;
  return j;
}

}  // namespace detail

/// Runs one subcommand. Returns the process exit status.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Settings s;
  CLI::App app{"Agent-based market simulator comparing wealth, minority and majority game strategy evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "wgsim 1.0");

  auto add_common = [&](CLI::App* sub) {
    sub->option_defaults()->always_capture_default();
    sub->add_option("--config", s.config, "Flat key = value file; flags override it");
    sub->add_option("--out", s.out, "Output directory");
    sub->add_option("--seed", s.seed, "Master seed");
  };
  auto add_sim = [&](CLI::App* sub) {
    sub->add_option("--agents,-N", s.agents, "Agents per scheme")->check(CLI::PositiveNumber);
    sub->add_option("--history,-m", s.history, "Market history bits")->check(CLI::Range(1, 16));
    sub->add_option("--strategies,-s", s.strategies, "Strategies per agent")->check(CLI::PositiveNumber);
    sub->add_option("--wealth-mult", s.wealth_mult, "Initial wealth as a multiple of the first price");
    sub->add_flag("--constrain-virtual,!--no-constrain-virtual", s.constrain_virtual,
                  "Score minority/majority strategies on their constrained action");
    sub->add_option("--p0", s.p0, "Initial price of generated series");
  };
  auto add_csv = [&](CLI::App* sub) {
    sub->add_option("--date-col", s.date_col, "Date column name");
    sub->add_option("--close-col", s.close_col, "Close column name");
  };
  auto add_sweep = [&](CLI::App* sub) {
    sub->add_option("--samples", s.samples, "Samples per cell")->check(CLI::PositiveNumber);
    sub->add_option("--steps", s.steps, "Steps per generated series")->check(CLI::PositiveNumber);
    sub->add_option("--measure", s.measure, "Price index at which wealth is read (0 = last)");
    sub->add_option("--workers", s.workers, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("gen-price", "Generate a +-1 tick price series");
  add_common(gen);
  gen->add_option("--p-up", s.p_up, "Up-move probability of a biased walk");
  gen->add_option("--p-l", s.p_l, "Long-term trend parameter (order-2 chain)");
  gen->add_option("--p-s", s.p_s, "Short-term trend parameter (order-2 chain)");
  gen->add_option("--table", s.table, "Explicit up-probabilities (1, 2 or 4 values)")->delimiter(',');
  gen->add_option("--steps", s.steps, "Number of moves")->check(CLI::PositiveNumber);
  gen->add_option("--p0", s.p0, "Initial price");

  auto* est = app.add_subcommand("estimate", "Estimate up-move probabilities from a CSV of closes");
  add_common(est);
  est->add_option("--input", s.input, "CSV file")->required();
  est->add_option("--order", s.order, "Markov order (0, 1 or 2)")->check(CLI::Range(0, 2));
  add_csv(est);

  auto* runc = app.add_subcommand("run", "Single run on a CSV file or a generated series");
  add_common(runc);
  add_sim(runc);
  runc->add_option("--schemes", s.schemes, "Schemes, e.g. WG,MinG,MajG,DWG:100")->delimiter(',');
  runc->add_option("--input", s.input, "CSV file of closes");
  add_csv(runc);
  runc->add_option("--p-up", s.p_up, "Biased walk up-probability");
  runc->add_option("--p-l", s.p_l, "Long-term trend parameter");
  runc->add_option("--p-s", s.p_s, "Short-term trend parameter");
  runc->add_option("--table", s.table, "Explicit up-probabilities")->delimiter(',');
  runc->add_option("--steps", s.steps, "Steps of a generated series")->check(CLI::PositiveNumber);

  auto* sw = app.add_subcommand("sweep-walk", "Sweep the up-probability of a biased random walk");
  add_common(sw);
  add_sim(sw);
  sw->add_option("--p-up", s.p_up, "Up-probabilities")->delimiter(',');

  auto* sg = app.add_subcommand("sweep-grid", "Sweep the (p_L, p_S) plane of the order-2 chain");
  add_common(sg);
  add_sim(sg);
  sg->add_option("--p-l", s.p_l, "Long-term parameters")->delimiter(',');
  sg->add_option("--p-s", s.p_s, "Short-term parameters")->delimiter(',');
  sg->add_flag("--full-scale", s.full_scale, "N=10000, 5000 steps, 19x19 grid unless overridden");

  auto* sm = app.add_subcommand("sweep-memory", "Sweep the score memory T of the delta schemes");
  add_common(sm);
  add_sim(sm);
  sm->add_option("--memory", s.memory, "Score memory sizes")->delimiter(',');
  sm->add_flag("--keep-wg", s.keep_wg, "Compare the infinite-memory WG with DMinG and DMajG");
  sm->add_option("--input", s.input, "CSV file of closes (one cell)");
  add_csv(sm);
  sm->add_option("--p-up", s.p_up, "Biased-walk cells")->delimiter(',');
  sm->add_option("--p-l", s.p_l, "Long-term parameters (grid cells)")->delimiter(',');
  sm->add_option("--p-s", s.p_s, "Short-term parameters (grid cells)")->delimiter(',');

  add_sweep(sw);
  add_sweep(sg);
  add_sweep(sm);

  // --steps is shared storage; each subcommand has its own default.
  const std::map<std::string, int> default_steps = {
      {"gen-price", 1000}, {"run", 2000}, {"sweep-walk", 1000}, {"sweep-grid", 2000}, {"sweep-memory", 2000}};
  for (const auto& [name, steps] : default_steps) app.get_subcommand(name)->get_option("--steps")->default_str(std::to_string(steps));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    if (!s.config.empty()) detail::apply_config(*sub, s.config);
    if (auto it = default_steps.find(command); it != default_steps.end() && sub->get_option("--steps")->count() == 0)
      s.steps = it->second;
    const auto start = std::chrono::steady_clock::now();
    const auto dir = detail::out_dir(s);
    Json extra;
    extra["seed"] = s.seed;

    if (command == "gen-price") {
      const std::uint64_t price_seed = derive_seed(s.seed, tag(Stream::kPrice));
      Json info;
      const PriceSeries series = detail::series_from(s, price_seed, info);
      std::ostringstream csv;
      write_series_csv(series, csv);
      detail::write_file(dir / "prices.csv", csv.str());
      extra["price_seed"] = price_seed;
      extra["provenance"] = describe(series.provenance());
      extra["points"] = series.size();
      extra["outputs"] = {"prices.csv"};
      out << "wrote " << (dir / "prices.csv").string() << " (" << series.size() << " prices)\n";
    } else if (command == "estimate") {
      CsvOptions csv;
      csv.date_column = s.date_col;
      csv.close_column = s.close_col;
      const auto loaded = load_series_csv(s.input, csv);
      const auto e = estimate_table(loaded.series, s.order);
      std::ostringstream text;
      text << "pattern,occurrences,rises,p_up\n";
      for (std::size_t mu = 0; mu < e.occurrences.size(); ++mu) {
        const auto p = e.p_up(mu);
        const std::string ps = p ? format_number(*p) : "undefined";
        text << pattern_name(mu, e.order) << ',' << e.occurrences[mu] << ',' << e.rises[mu] << ',' << ps << '\n';
        out << "p_up(" << pattern_name(mu, e.order) << ") = " << ps << "  (n=" << e.occurrences[mu] << ")\n";
      }
      detail::write_file(dir / "estimate.csv", text.str());
      extra["points"] = loaded.series.size();
      extra["skipped_rows"] = loaded.skipped_rows;
      extra["estimate"] = detail::estimate_json(e);
      extra["outputs"] = {"estimate.csv"};
      if (!e.undefined().empty()) err << "wgsim: warning: some history patterns never occur\n";
    } else if (command == "run") {
      const SimConfig cfg = detail::sim_config(s);
      const std::uint64_t price_seed = derive_seed(s.seed, tag(Stream::kPrice));
      Json info;
      const PriceSeries series = detail::series_from(s, price_seed, info);
      const RunRecord rec = run(cfg, series);
      std::ostringstream csv;
      write_timeseries_csv(rec, csv);
      detail::write_file(dir / "timeseries.csv", csv.str());
      Json final_w = Json::object();
      for (std::size_t k = 0; k < rec.schemes.size(); ++k) final_w[rec.schemes[k].label()] = rec.average_wealth[k].back();
      extra["provenance"] = describe(series.provenance());
      if (s.input.empty()) extra["price_seed"] = price_seed;
      for (auto& [k, v] : info.items()) extra[k] = v;
      extra["points"] = series.size();
      extra["final_average_wealth"] = final_w;
      extra["estimate_order2"] = detail::estimate_json(estimate_table(series, 2));
      extra["outputs"] = {"timeseries.csv"};
      for (auto& [k, v] : final_w.items()) out << k << " final average wealth " << format_number(v.get<double>()) << '\n';
    } else {
      SweepSpec spec = detail::sweep_base(s);
      GridResult result;
      if (command == "sweep-walk") {
        const std::vector<double> ps = s.p_up.empty() ? std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9} : s.p_up;
        result = sweep_walk(ps, spec);
      } else if (command == "sweep-grid") {
        if (s.full_scale) {
          if (sub->get_option("--agents")->count() == 0) spec.sim.agents = 10000;
          if (sub->get_option("--steps")->count() == 0) spec.steps = 5000;
        }
        const std::vector<double> axis = s.full_scale ? detail::full_axis() : std::vector<double>{-0.4, 0.4};
        result = sweep_grid(s.p_l.empty() ? axis : s.p_l, s.p_s.empty() ? axis : s.p_s, spec);
      } else {  // sweep-memory
        if (detail::count_sources(s) > 1) throw std::invalid_argument("give only one price source");
        if (!s.input.empty()) {
          CsvOptions csv;
          csv.date_column = s.date_col;
          csv.close_column = s.close_col;
          csv.min_rows = static_cast<std::size_t>(s.history) + 2;
          auto loaded = load_series_csv(s.input, csv);
          spec.steps = static_cast<int>(loaded.series.size() - 1);
          spec.measure_step = 0;
          spec.cells.push_back({{}, FixedSource{std::move(loaded.series)}});
        } else if (!s.p_up.empty()) {
          for (double p : s.p_up) spec.cells.push_back({{{"p_up", p}}, WalkSource{p}});
        } else if (!s.p_l.empty() || !s.p_s.empty()) {
          const std::vector<double> pls = s.p_l.empty() ? std::vector<double>{0.0} : s.p_l;
          const std::vector<double> pss = s.p_s.empty() ? std::vector<double>{0.0} : s.p_s;
          for (double pl : pls)
            for (double ps : pss) spec.cells.push_back({{{"p_L", pl}, {"p_S", ps}}, TrendSource{{pl, ps}}});
        } else {
          // Probe cells: the four quadrant corners and the unbiased centre.
          for (double pl : {0.4, -0.4})
            for (double ps : {0.4, -0.4}) spec.cells.push_back({{{"p_L", pl}, {"p_S", ps}}, TrendSource{{pl, ps}}});
          spec.cells.push_back({{{"p_L", 0.0}, {"p_S", 0.0}}, TrendSource{{0.0, 0.0}}});
        }
        result = memory_sweep(s.memory, spec, s.keep_wg);
        if (s.input.empty()) {
          Json agreement = Json::object();
          for (int t : s.memory) {
            const std::string g = "T=" + std::to_string(t);
            agreement[g] = winner_agreement(result, g);
          }
          extra["winner_agreement"] = agreement;
        }
      }
      std::ostringstream csv;
      write_grid_csv(result, csv);
      detail::write_file(dir / "grid.csv", csv.str());
      extra["grid"] = detail::grid_json(result);
      extra["samples"] = spec.samples;
      extra["outputs"] = {"grid.csv"};
      out << "wrote " << (dir / "grid.csv").string() << " (" << result.cells.size() << " cells)\n";
    }

    detail::write_summary(dir, command, *sub, extra);
    detail::write_timing(dir, start);
    return 0;
  } catch (const std::exception& e) {
    err << "wgsim: error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace wgsim::cli
