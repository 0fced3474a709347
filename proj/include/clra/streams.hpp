#pragma once

// Row-arrival stream sources: seeded synthetic generators, the phase
// construction that forces recourse on any accurate algorithm, the
// alternating-dominance strawman, and CSV ingestion.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "clra/subspace.hpp"

namespace clra {

enum class StreamKind { kCsv, kRandomInteger, kLowerBound, kAlternating };

inline std::string to_string(StreamKind k) {
  switch (k) {
    case StreamKind::kCsv: return "csv";
    case StreamKind::kRandomInteger: return "random_integer";
    case StreamKind::kLowerBound: return "lower_bound";
    case StreamKind::kAlternating: return "alternating";
  }
  return "unknown";
}

struct StreamMeta {
  Index n = 0;
  Index d = 0;
  Index k = 1;
  double eps = 0.0;
  double max_abs = 1.0;  // M: bound on |entry|
  std::uint64_t seed = 0;
  StreamKind kind = StreamKind::kRandomInteger;
  bool nonnegative = false;

  // Phase construction.
  double c_lb = 0.0;
  Index phases = 0;
  double c0 = 0.0;
  bool truncated = false;
  std::vector<Index> phase_ends;  // 1-based index of each phase's last row

  // CSV ingestion.
  std::string source_path;
  std::optional<double> quantize_scale;
  bool had_header = false;
};

/// Materialized row stream; next() yields every row exactly once in order.
class StreamSource {
 public:
  StreamSource(StreamMeta meta, Matrix rows) : meta_(std::move(meta)), rows_(std::move(rows)) {
    meta_.n = rows_.rows();
    meta_.d = rows_.cols();
  }

  const StreamMeta& meta() const noexcept { return meta_; }
  StreamMeta& meta() noexcept { return meta_; }
  const Matrix& rows() const noexcept { return rows_; }

  std::optional<RowVector> next() {
    if (cursor_ >= rows_.rows()) return std::nullopt;
    return RowVector(rows_.row(cursor_++));
  }

  void rewind() noexcept { cursor_ = 0; }
  Index position() const noexcept { return cursor_; }

 private:
  StreamMeta meta_;
  Matrix rows_;
  Index cursor_ = 0;
};

/// i.i.d. uniform integers in [-M, M] (or [0, M]), deterministic per seed.
inline StreamSource gen_random_integer_stream(Index n, Index d, long max_abs, std::uint64_t seed,
                                              bool nonnegative = false) {
  if (n < 1 || d < 1) throw ParameterError("random stream needs n, d >= 1");
  if (max_abs < 1) throw ParameterError("entry bound M must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long> dist(nonnegative ? 0 : -max_abs, max_abs);
  Matrix rows(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) rows(i, j) = static_cast<double>(dist(rng));
  StreamMeta meta;
  meta.kind = StreamKind::kRandomInteger;
  meta.max_abs = static_cast<double>(max_abs);
  meta.seed = seed;
  meta.nonnegative = nonnegative;
  return StreamSource(std::move(meta), std::move(rows));
}

inline Index lower_bound_copies(Index phase, double eps, double c_lb) {
  return static_cast<Index>(std::ceil(std::pow(1.0 + c_lb * eps, static_cast<double>(phase)) - 1e-9));
}

/// Phase construction: phase i emits ceil((1 + c_lb eps)^i) copies of each
/// of e_1..e_k (odd i) or e_{k+1}..e_{2k} (even i), cycling through the k
/// directions. With `phases` unset, the largest phase count whose rows fit
/// in n is used; otherwise an over-budget final phase is truncated.
inline StreamSource gen_lower_bound_stream(Index n, Index k, double eps, double c_lb, Index d = 0,
                                           std::optional<Index> phases = std::nullopt) {
  require_rank(k);
  if (d == 0) d = 2 * k;
  if (d < 2 * k) throw ParameterError("lower-bound stream needs d >= 2k");
  if (n < 2) throw ParameterError("lower-bound stream needs n >= 2");
  if (!(eps > std::log(static_cast<double>(n)) / static_cast<double>(n)))
    throw ParameterError("lower-bound stream needs eps > log(n)/n");
  if (!(c_lb > 2.0)) throw ParameterError("lower-bound constant C must exceed 2");

  Index count = 0;
  if (phases) {
    if (*phases < 1) throw ParameterError("phase count must be >= 1");
    count = *phases;
  } else {
    Index used = 0;
    while (true) {
      const Index next = k * lower_bound_copies(count + 1, eps, c_lb);
      if (used + next > n) break;
      used += next;
      ++count;
    }
    if (count == 0) count = 1;
  }

  StreamMeta meta;
  meta.kind = StreamKind::kLowerBound;
  meta.k = k;
  meta.eps = eps;
  meta.c_lb = c_lb;
  meta.max_abs = 1.0;

  std::vector<RowVector> rows;
  for (Index phase = 1; phase <= count && !meta.truncated; ++phase) {
    const Index copies = lower_bound_copies(phase, eps, c_lb);
    const Index offset = (phase % 2 == 1) ? 0 : k;
    for (Index c = 0; c < copies && !meta.truncated; ++c) {
      for (Index j = 0; j < k; ++j) {
        if (static_cast<Index>(rows.size()) >= n) {
          meta.truncated = true;
          break;
        }
        RowVector e = RowVector::Zero(d);
        e(offset + j) = 1.0;
        rows.push_back(std::move(e));
      }
    }
    meta.phase_ends.push_back(static_cast<Index>(rows.size()));
  }
  meta.phases = static_cast<Index>(meta.phase_ends.size());
  const double scale = std::log(static_cast<double>(n) / static_cast<double>(k)) / eps;
  meta.c0 = scale > 0.0 ? static_cast<double>(meta.phases) / scale : 0.0;

  Matrix m(static_cast<Index>(rows.size()), d);
  for (Index i = 0; i < m.rows(); ++i) m.row(i) = rows[static_cast<std::size_t>(i)];
  return StreamSource(std::move(meta), std::move(m));
}

/// Two-dimensional stream whose top singular direction flips on every
/// arrival: (0,1), then alternately (2,0) and (0,2).
inline StreamSource gen_alternating_stream(Index n) {
  if (n < 1) throw ParameterError("alternating stream needs n >= 1");
  Matrix rows = Matrix::Zero(n, 2);
  rows(0, 1) = 1.0;
  for (Index t = 1; t < n; ++t) rows(t, t % 2 == 1 ? 0 : 1) = 2.0;
  StreamMeta meta;
  meta.kind = StreamKind::kAlternating;
  meta.k = 1;
  meta.max_abs = n > 1 ? 2.0 : 1.0;
  return StreamSource(std::move(meta), std::move(rows));
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::optional<double> parse_number(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return value;
}

}  // namespace detail

/// Reads a rectangular numeric CSV (optional single header line). With a
/// quantization scale s every entry x becomes round(s * x).
inline StreamSource load_csv_stream(std::istream& in, std::optional<double> quantize_scale = std::nullopt,
                                    std::string source = "<stream>") {
  if (quantize_scale && !(*quantize_scale > 0.0 && std::isfinite(*quantize_scale)))
    throw ParameterError("quantization scale must be positive and finite");
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  bool had_header = false;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (line_no == 1 && view.size() >= 3 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
    if (detail::trim(view).empty()) continue;
    const auto cells = detail::split_commas(view);
    std::vector<double> values;
    values.reserve(cells.size());
    bool numeric = true;
    std::size_t bad_cell = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto v = detail::parse_number(cells[i]);
      if (!v) {
        numeric = false;
        bad_cell = i + 1;
        break;
      }
      values.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && !had_header) {
        had_header = true;
        width = cells.size();
        continue;
      }
      throw DataError("non-numeric cell in column " + std::to_string(bad_cell), line_no);
    }
    if (width == 0) width = values.size();
    if (values.size() != width)
      throw DataError("expected " + std::to_string(width) + " columns, found " +
                          std::to_string(values.size()),
                      line_no);
    for (double& v : values) {
      if (!std::isfinite(v)) throw DataError("non-finite value", line_no);
      if (quantize_scale) v = std::round(*quantize_scale * v);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError("no data rows in " + source);

  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  double max_abs = 0.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      max_abs = std::max(max_abs, std::abs(m(i, j)));
    }
  StreamMeta meta;
  meta.kind = StreamKind::kCsv;
  meta.source_path = std::move(source);
  meta.quantize_scale = quantize_scale;
  meta.had_header = had_header;
  meta.max_abs = std::max(1.0, std::ceil(max_abs));
  return StreamSource(std::move(meta), std::move(m));
}

inline StreamSource load_csv_stream(const std::string& path,
                                    std::optional<double> quantize_scale = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return load_csv_stream(in, quantize_scale, path);
}

}  // namespace clra
