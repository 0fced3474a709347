#pragma once

// Experiment harness: streams rows through one algorithm, records per-step
// cost, optimum and recourse, and serializes reports as JSON or flat CSV.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <future>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "clra/consistent.hpp"
#include "clra/frequent_directions.hpp"
#include "clra/oracle.hpp"
#include "clra/streams.hpp"
#include "clra/subspace.hpp"

namespace clra {

enum class Algorithm { kAdditive, kRelative, kFull, kKappa, kFd, kOracle };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kAdditive: return "additive";
    case Algorithm::kRelative: return "relative";
    case Algorithm::kFull: return "full";
    case Algorithm::kKappa: return "kappa";
    case Algorithm::kFd: return "fd";
    case Algorithm::kOracle: return "oracle";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(const std::string& name) {
  for (Algorithm a : {Algorithm::kAdditive, Algorithm::kRelative, Algorithm::kFull, Algorithm::kKappa,
                      Algorithm::kFd, Algorithm::kOracle})
    if (to_string(a) == name) return a;
  throw ParameterError("unknown algorithm '" + name + "'");
}

struct StreamSpec {
  StreamKind kind = StreamKind::kRandomInteger;
  Index n = 200;
  Index d = 8;
  long max_abs = 10;
  std::uint64_t seed = 1;
  bool nonnegative = false;
  double c_lb = 4.0;
  std::optional<Index> phases;
  std::optional<double> eps;  // lower-bound phase accuracy; defaults to the algorithm's eps
  std::string path;  // csv
  std::optional<double> quantize;
};

struct ExperimentConfig {
  Algorithm algo = Algorithm::kAdditive;
  StreamSpec stream;
  Index k = 2;
  double eps = 0.5;
  double oversampling = kDefaultOversampling;
  std::uint64_t seed = 1;  // sampler seed
  Index fd_ell = 0;        // 0 selects 2k + 1
  std::optional<std::pair<Index, Index>> window;  // 1-based, inclusive

  /// Checks everything that does not need the stream itself.
  void validate() const {
    require_rank(k);
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ParameterError("eps must be positive");
    if ((algo == Algorithm::kRelative || algo == Algorithm::kFull) && !(eps < 1.0))
      throw ParameterError("relative and full algorithms need eps < 1");
    if (!(oversampling > 0.0)) throw ParameterError("oversampling constant must be > 0");
    if (algo == Algorithm::kFd && fd_ell != 0 && fd_ell <= k)
      throw ParameterError("FD sketch size must exceed k");
    if (stream.kind != StreamKind::kCsv && stream.n < 1) throw ParameterError("n must be >= 1");
    if (stream.kind == StreamKind::kRandomInteger && stream.d < 1) throw ParameterError("d must be >= 1");
    if (stream.kind == StreamKind::kRandomInteger && stream.max_abs < 1)
      throw ParameterError("M must be >= 1");
    if (stream.kind == StreamKind::kCsv && stream.path.empty()) throw ParameterError("csv stream needs a path");
    if (stream.eps && !(*stream.eps > 0.0)) throw ParameterError("stream eps must be positive");
    if (window && (window->first < 1 || window->second < window->first))
      throw ParameterError("window must satisfy 1 <= lo <= hi");
  }
};

inline StreamSource make_stream(const ExperimentConfig& c) {
  switch (c.stream.kind) {
    case StreamKind::kRandomInteger:
      return gen_random_integer_stream(c.stream.n, c.stream.d, c.stream.max_abs, c.stream.seed,
                                       c.stream.nonnegative);
    case StreamKind::kLowerBound:
      return gen_lower_bound_stream(c.stream.n, c.k, c.stream.eps.value_or(c.eps), c.stream.c_lb,
                                    c.stream.d >= 2 * c.k ? c.stream.d : 0, c.stream.phases);
    case StreamKind::kAlternating: return gen_alternating_stream(c.stream.n);
    case StreamKind::kCsv: return load_csv_stream(c.stream.path, c.stream.quantize);
  }
  throw InternalError("unhandled stream kind");
}

struct StepRecord {
  Index t = 0;  // 1-based
  double cost = 0.0;
  double opt = 0.0;
  std::optional<double> ratio;  // null when opt == 0
  double additive_gap = 0.0;
  double recourse = 0.0;
  double cumulative_recourse = 0.0;
  bool recluster_event = false;
  std::int64_t wall_clock_ns = 0;
};

struct Counters {
  Index samples = 0;
  Index heavy_light_transitions = 0;
  Index recluster_events = 0;
  Index fd_shrinks = 0;
};

struct Report {
  ExperimentConfig config;
  StreamMeta stream;
  std::vector<StepRecord> records;
  Counters counters;
};

namespace detail {

// Uniform driver over the state machines: each returns the new basis and
// whether this step recomputed it from scratch.
struct Runner {
  Algorithm algo;
  std::optional<AdditiveState> additive;
  std::optional<RelativeState> relative;
  std::optional<PipelineState> full;
  std::optional<KappaState> kappa;
  std::optional<FdState> fd;

  Runner(const ExperimentConfig& c, Index d) : algo(c.algo) {
    switch (algo) {
      case Algorithm::kAdditive: additive = AdditiveState::start(d, c.k, c.eps); break;
      case Algorithm::kRelative: relative = RelativeState::start(d, c.k, c.eps); break;
      case Algorithm::kFull: full = PipelineState::start(d, c.k, c.eps, c.oversampling, c.seed); break;
      case Algorithm::kKappa:
      case Algorithm::kOracle: kappa = KappaState::start(d, c.k); break;
      case Algorithm::kFd: fd = FdState::start(d, c.k, c.fd_ell); break;
    }
  }

  std::pair<FactorBasis, bool> step(const RowVector& a, Counters& counters) {
    switch (algo) {
      case Algorithm::kAdditive: {
        auto s = additive_step(std::move(*additive), a);
        additive = std::move(s.state);
        counters.recluster_events = additive->recluster_count;
        return {std::move(s.basis), additive->last_reclustered};
      }
      case Algorithm::kRelative: {
        auto s = relative_step(std::move(*relative), a);
        relative = std::move(s.state);
        counters.recluster_events = relative->recluster_count;
        counters.heavy_light_transitions = relative->heavy_light_transitions;
        return {std::move(s.basis), is_recluster(relative->last_action)};
      }
      case Algorithm::kFull: {
        const Index before = full->inner.recluster_count;
        auto s = full_step(std::move(*full), a);
        full = std::move(s.state);
        counters.samples = full->sketch.size();
        counters.recluster_events = full->inner.recluster_count;
        counters.heavy_light_transitions = full->inner.heavy_light_transitions;
        return {std::move(s.basis), full->inner.recluster_count != before};
      }
      case Algorithm::kKappa:
      case Algorithm::kOracle: {
        auto s = kappa_step(std::move(*kappa), a);
        kappa = std::move(s.state);
        ++counters.recluster_events;
        return {std::move(s.basis), true};
      }
      case Algorithm::kFd: {
        const Index before = fd->shrinks;
        auto s = fd_step(std::move(*fd), a);
        fd = std::move(s.state);
        counters.fd_shrinks = fd->shrinks;
        if (fd->shrinks != before) ++counters.recluster_events;
        return {std::move(s.basis), fd->shrinks != before};
      }
    }
    throw InternalError("unhandled algorithm");
  }
};

}  // namespace detail

/// Streams the configured rows through the algorithm. For algo != oracle the
/// per-prefix optimum is computed on a worker thread and joined by step.
inline Report run_experiment(const ExperimentConfig& config, const StreamSource& stream) {
  config.validate();
  const Matrix& rows = stream.rows();
  const Index n = rows.rows();
  const Index d = rows.cols();
  if (config.window && config.window->second > n)
    throw ParameterError("window upper bound exceeds stream length " + std::to_string(n));

  std::future<OracleTrace> oracle;
  if (config.algo != Algorithm::kOracle)
    oracle = std::async(std::launch::async, [&rows, k = config.k] { return oracle_trace(rows, k); });

  Report report;
  report.config = config;
  report.stream = stream.meta();
  report.records.reserve(static_cast<std::size_t>(n));

  detail::Runner runner(config, d);
  SvdState prefix = SvdState::empty(d, false);
  FactorBasis previous = FactorBasis::empty(d, config.k);
  double cumulative = 0.0;
  std::vector<double> own_opt;
  for (Index t = 0; t < n; ++t) {
    const RowVector a = rows.row(t);
    const auto start = std::chrono::steady_clock::now();
    auto [basis, reclustered] = runner.step(a, report.counters);
    const auto stop = std::chrono::steady_clock::now();

    prefix = rank_one_update(std::move(prefix), a);
    StepRecord r;
    r.t = t + 1;
    r.cost = lra_cost(prefix, basis);
    if (config.algo == Algorithm::kOracle) r.opt = r.cost;
    r.recourse = recourse(previous, basis);
    cumulative += r.recourse;
    r.cumulative_recourse = cumulative;
    r.recluster_event = reclustered;
    r.wall_clock_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count();
    report.records.push_back(r);
    previous = std::move(basis);
  }

  if (oracle.valid()) {
    const OracleTrace trace = oracle.get();
    for (Index t = 0; t < n; ++t) report.records[static_cast<std::size_t>(t)].opt = trace.opt[static_cast<std::size_t>(t)];
  }
  for (auto& r : report.records) {
    r.additive_gap = r.cost - r.opt;
    if (r.opt > 0.0) r.ratio = r.cost / r.opt;
  }
  return report;
}

inline Report run_experiment(const ExperimentConfig& config) {
  config.validate();
  return run_experiment(config, make_stream(config));
}

// ---------------------------------------------------------------------------
// Summary statistics

struct SummaryStats {
  Index t_lo = 1;
  Index t_hi = 1;
  Index defined = 0;  // steps in the window with opt > 0
  std::optional<double> median;
  std::optional<double> mean;
  std::optional<double> std;
  std::optional<double> max;
  double total_recourse = 0.0;
  Index recluster_events = 0;
  double runtime_s = 0.0;
};

/// Ratio statistics over the window (all steps when unset). The standard
/// deviation is the population one unless `sample_std` is set.
inline SummaryStats summarize(const Report& report, std::optional<std::pair<Index, Index>> window = std::nullopt,
                              bool sample_std = false) {
  const Index n = static_cast<Index>(report.records.size());
  const auto [lo, hi] = window.value_or(std::pair<Index, Index>{1, n});
  if (n == 0 || lo < 1 || hi < lo || hi > n)
    throw ParameterError("empty or out-of-range window [" + std::to_string(lo) + ", " + std::to_string(hi) +
                         "] for " + std::to_string(n) + " records");
  SummaryStats s;
  s.t_lo = lo;
  s.t_hi = hi;
  std::vector<double> ratios;
  std::int64_t ns = 0;
  for (const auto& r : report.records) {
    ns += r.wall_clock_ns;
    s.recluster_events += r.recluster_event ? 1 : 0;
    if (r.t < lo || r.t > hi || !r.ratio) continue;
    ratios.push_back(*r.ratio);
  }
  s.total_recourse = report.records.back().cumulative_recourse;
  s.runtime_s = static_cast<double>(ns) * 1e-9;
  s.defined = static_cast<Index>(ratios.size());
  if (ratios.empty()) return s;

  std::sort(ratios.begin(), ratios.end());
  const std::size_t m = ratios.size();
  s.median = m % 2 == 1 ? ratios[m / 2] : 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]);
  double sum = 0.0;
  for (double r : ratios) sum += r;
  s.mean = sum / static_cast<double>(m);
  double sq = 0.0;
  for (double r : ratios) sq += (r - *s.mean) * (r - *s.mean);
  const double denom = sample_std ? static_cast<double>(m) - 1.0 : static_cast<double>(m);
  s.std = denom > 0.0 ? std::sqrt(sq / denom) : 0.0;
  s.max = ratios.back();
  return s;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> json_optional(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

inline StreamKind parse_stream_kind(const std::string& s) {
  for (StreamKind k : {StreamKind::kCsv, StreamKind::kRandomInteger, StreamKind::kLowerBound, StreamKind::kAlternating})
    if (to_string(k) == s) return k;
  throw DataError("unknown stream kind '" + s + "'");
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json window = nullptr;
  if (c.window) window = {c.window->first, c.window->second};
  return {
      {"algo", to_string(c.algo)},
      {"k", c.k},
      {"eps", c.eps},
      {"oversampling", c.oversampling},
      {"seed", c.seed},
      {"fd_ell", c.fd_ell},
      {"window", window},
      {"stream",
       {{"kind", to_string(c.stream.kind)},
        {"n", c.stream.n},
        {"d", c.stream.d},
        {"M", c.stream.max_abs},
        {"seed", c.stream.seed},
        {"nonnegative", c.stream.nonnegative},
        {"c_lb", c.stream.c_lb},
        {"phases", detail::optional_json(c.stream.phases)},
        {"eps", detail::optional_json(c.stream.eps)},
        {"path", c.stream.path},
        {"quantize", detail::optional_json(c.stream.quantize)}}},
  };
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.algo = parse_algorithm(j.at("algo").get<std::string>());
  c.k = j.at("k").get<Index>();
  c.eps = j.at("eps").get<double>();
  c.oversampling = j.at("oversampling").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.fd_ell = j.at("fd_ell").get<Index>();
  if (!j.at("window").is_null()) c.window = {j["window"][0].get<Index>(), j["window"][1].get<Index>()};
  const auto& s = j.at("stream");
  c.stream.kind = detail::parse_stream_kind(s.at("kind").get<std::string>());
  c.stream.n = s.at("n").get<Index>();
  c.stream.d = s.at("d").get<Index>();
  c.stream.max_abs = s.at("M").get<long>();
  c.stream.seed = s.at("seed").get<std::uint64_t>();
  c.stream.nonnegative = s.at("nonnegative").get<bool>();
  c.stream.c_lb = s.at("c_lb").get<double>();
  c.stream.phases = detail::json_optional<Index>(s.at("phases"));
  c.stream.eps = detail::json_optional<double>(s.at("eps"));
  c.stream.path = s.at("path").get<std::string>();
  c.stream.quantize = detail::json_optional<double>(s.at("quantize"));
  return c;
}

inline nlohmann::json to_json(const Report& r) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& s : r.records)
    records.push_back({{"t", s.t},
                       {"cost", s.cost},
                       {"opt", s.opt},
                       {"ratio", detail::optional_json(s.ratio)},
                       {"additive_gap", s.additive_gap},
                       {"recourse", s.recourse},
                       {"cumulative_recourse", s.cumulative_recourse},
                       {"recluster_event", s.recluster_event},
                       {"wall_clock_ns", s.wall_clock_ns}});
  return {
      {"config", to_json(r.config)},
      {"stream",
       {{"kind", to_string(r.stream.kind)},
        {"n", r.stream.n},
        {"d", r.stream.d},
        {"max_abs", r.stream.max_abs},
        {"phases", r.stream.phases},
        {"c0", r.stream.c0},
        {"truncated", r.stream.truncated}}},
      {"counters",
       {{"samples", r.counters.samples},
        {"heavy_light_transitions", r.counters.heavy_light_transitions},
        {"recluster_events", r.counters.recluster_events},
        {"fd_shrinks", r.counters.fd_shrinks}}},
      {"records", records},
  };
}

inline Report report_from_json(const nlohmann::json& j) {
  Report r;
  try {
    r.config = config_from_json(j.at("config"));
    const auto& s = j.at("stream");
    r.stream.kind = detail::parse_stream_kind(s.at("kind").get<std::string>());
    r.stream.n = s.at("n").get<Index>();
    r.stream.d = s.at("d").get<Index>();
    r.stream.max_abs = s.at("max_abs").get<double>();
    r.stream.phases = s.at("phases").get<Index>();
    r.stream.c0 = s.at("c0").get<double>();
    r.stream.truncated = s.at("truncated").get<bool>();
    const auto& c = j.at("counters");
    r.counters.samples = c.at("samples").get<Index>();
    r.counters.heavy_light_transitions = c.at("heavy_light_transitions").get<Index>();
    r.counters.recluster_events = c.at("recluster_events").get<Index>();
    r.counters.fd_shrinks = c.at("fd_shrinks").get<Index>();
    for (const auto& e : j.at("records")) {
      StepRecord s2;
      s2.t = e.at("t").get<Index>();
      s2.cost = e.at("cost").get<double>();
      s2.opt = e.at("opt").get<double>();
      s2.ratio = detail::json_optional<double>(e.at("ratio"));
      s2.additive_gap = e.at("additive_gap").get<double>();
      s2.recourse = e.at("recourse").get<double>();
      s2.cumulative_recourse = e.at("cumulative_recourse").get<double>();
      s2.recluster_event = e.at("recluster_event").get<bool>();
      s2.wall_clock_ns = e.at("wall_clock_ns").get<std::int64_t>();
      r.records.push_back(s2);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

/// Flat per-step dump. Doubles use 17 significant digits so the file is a
/// faithful, byte-stable rendering; an empty ratio cell means OPT = 0.
inline void write_csv(std::ostream& out, const Report& r, bool include_wall_clock = false) {
  out << "t,cost,opt,ratio,additive_gap,recourse,cumulative_recourse,recluster_event";
  if (include_wall_clock) out << ",wall_clock_ns";
  out << '\n';
  for (const auto& s : r.records) {
    out << s.t << ',' << detail::format_double(s.cost) << ',' << detail::format_double(s.opt) << ','
        << (s.ratio ? detail::format_double(*s.ratio) : std::string()) << ','
        << detail::format_double(s.additive_gap) << ',' << detail::format_double(s.recourse) << ','
        << detail::format_double(s.cumulative_recourse) << ',' << (s.recluster_event ? 1 : 0);
    if (include_wall_clock) out << ',' << s.wall_clock_ns;
    out << '\n';
  }
}

inline void write_summary_table(std::ostream& out, const Report& r, const SummaryStats& s) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    std::ostringstream o;
    o << std::fixed << std::setprecision(6) << *v;
    return o.str();
  };
  out << "algorithm: " << to_string(r.config.algo) << "  k=" << r.config.k << "  eps=" << r.config.eps
      << "  stream=" << to_string(r.stream.kind) << " (" << r.stream.n << "x" << r.stream.d << ")\n";
  out << "window: [" << s.t_lo << ", " << s.t_hi << "], " << s.defined << " steps with OPT > 0\n\n";
  out << std::left << std::setw(14) << "" << std::right << std::setw(14) << "ratio" << '\n';
  out << std::left << std::setw(14) << "median" << std::right << std::setw(14) << cell(s.median) << '\n';
  out << std::left << std::setw(14) << "std" << std::right << std::setw(14) << cell(s.std) << '\n';
  out << std::left << std::setw(14) << "mean" << std::right << std::setw(14) << cell(s.mean) << '\n';
  out << std::left << std::setw(14) << "max" << std::right << std::setw(14) << cell(s.max) << "\n\n";
  out << std::left << std::setw(22) << "total recourse" << cell(s.total_recourse) << '\n';
  out << std::left << std::setw(22) << "recluster events" << s.recluster_events << '\n';
  out << std::left << std::setw(22) << "samples" << r.counters.samples << '\n';
  out << std::left << std::setw(22) << "heavy/light flips" << r.counters.heavy_light_transitions << '\n';
  out << std::left << std::setw(22) << "runtime (s)" << cell(s.runtime_s) << '\n';
}

}  // namespace clra
