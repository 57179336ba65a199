#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "drqn/common.hpp"
#include "drqn/serialize.hpp"
#include "drqn/time_utils.hpp"

#ifdef DRQN_HAS_ZLIB
#include <zlib.h>
#endif

namespace drqn {

struct TickRecord {
  std::string pair;
  std::int64_t timestamp_ms = 0;
  double bid = 0.0;
  double ask = 0.0;

  double mid() const { return 0.5 * (bid + ask); }
};

struct Bar {
  std::int64_t start_ms = 0;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  std::int64_t tick_volume = 0;

  friend bool operator==(const Bar&, const Bar&) = default;
};

// Rectangular 12-pair panel on a shared time grid: bars[p][slot] is the bar
// of pairs[p] starting at grid[slot].
struct AlignedDataset {
  std::vector<std::string> pairs;
  std::vector<std::int64_t> grid;
  std::vector<std::vector<Bar>> bars;

  std::size_t num_slots() const { return grid.size(); }

  std::optional<std::size_t> pair_index(std::string_view name) const {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (pairs[i] == name) return i;
    }
    return std::nullopt;
  }
};

inline const std::vector<std::string>& pair_universe() {
  static const std::vector<std::string> u = {
      "AUDJPY", "AUDNZD", "AUDUSD", "CADJPY", "CHFJPY", "EURGBP",
      "EURJPY", "EURUSD", "GBPJPY", "GBPUSD", "NZDUSD", "USDCAD"};
  return u;
}

// "EUR/USD" and "eurusd" both normalize to "EURUSD".
inline std::string normalize_pair(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char ch : raw) {
    if (ch == '/' || ch == '_' || ch == '-' || ch == ' ') continue;
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  }
  return out;
}

inline bool is_jpy_quoted(std::string_view pair) {
  const std::string p = normalize_pair(pair);
  return p.size() >= 3 && p.substr(p.size() - 3) == "JPY";
}

// Basis-point unit used to convert a spread quoted in bp to price units.
inline double bp_unit(std::string_view pair) { return is_jpy_quoted(pair) ? 0.01 : 0.0001; }

namespace detail {

inline double parse_double_field(std::string_view s, std::size_t line_no, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": unparseable " + what + " '" +
                     std::string(s) + "'");
  }
  return v;
}

inline unsigned parse_digits(std::string_view s, std::size_t pos, std::size_t n,
                             std::size_t line_no, const char* what) {
  unsigned v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const char ch = s[pos + i];
    if (ch < '0' || ch > '9') {
      throw ParseError("line " + std::to_string(line_no) + ": timestamp parse error in " + what);
    }
    v = v * 10 + static_cast<unsigned>(ch - '0');
  }
  return v;
}

// "YYYYMMDD HH:MM:SS.mmm" -> UTC epoch milliseconds.
inline std::int64_t parse_timestamp(std::string_view s, std::size_t line_no) {
  if (s.size() != 21 || s[8] != ' ' || s[11] != ':' || s[14] != ':' || s[17] != '.') {
    throw ParseError("line " + std::to_string(line_no) + ": timestamp parse error '" +
                     std::string(s) + "'");
  }
  CivilDateTime c{};
  c.year = static_cast<int>(parse_digits(s, 0, 4, line_no, "year"));
  c.month = parse_digits(s, 4, 2, line_no, "month");
  c.day = parse_digits(s, 6, 2, line_no, "day");
  c.hour = parse_digits(s, 9, 2, line_no, "hour");
  c.minute = parse_digits(s, 12, 2, line_no, "minute");
  c.second = parse_digits(s, 15, 2, line_no, "second");
  c.millisecond = parse_digits(s, 18, 3, line_no, "millisecond");
  if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31 || c.hour > 23 || c.minute > 59 ||
      c.second > 59) {
    throw ParseError("line " + std::to_string(line_no) + ": timestamp field out of range '" +
                     std::string(s) + "'");
  }
  return civil_to_epoch_ms(c);
}

}  // namespace detail

// One comma-separated quote line: pair, "YYYYMMDD HH:MM:SS.mmm", bid, ask.
inline TickRecord parse_tick_line(std::string_view line, std::size_t line_no = 1) {
  std::string_view fields[4];
  std::size_t n_fields = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      if (n_fields >= 4) {
        throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields");
      }
      fields[n_fields++] = line.substr(start, i - start);
      start = i + 1;
    }
  }
  if (n_fields != 4) {
    throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                     std::to_string(n_fields));
  }
  TickRecord rec;
  rec.pair = std::string(fields[0]);
  rec.timestamp_ms = detail::parse_timestamp(fields[1], line_no);
  rec.bid = detail::parse_double_field(fields[2], line_no, "bid");
  rec.ask = detail::parse_double_field(fields[3], line_no, "ask");
  if (!(rec.bid > 0.0) || !(rec.ask > 0.0)) {
    throw ParseError("line " + std::to_string(line_no) + ": non-positive quote");
  }
  if (rec.ask < rec.bid) {
    throw ParseError("line " + std::to_string(line_no) + ": crossed quote (ask < bid)");
  }
  return rec;
}

// Parses a whole quote stream, enforcing non-decreasing timestamps.
inline std::vector<TickRecord> parse_tick_stream(std::istream& is,
                                                 std::size_t first_line_no = 1) {
  std::vector<TickRecord> out;
  std::string line;
  std::size_t line_no = first_line_no;
  std::int64_t prev_ts = INT64_MIN;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      TickRecord rec = parse_tick_line(line, line_no);
      if (rec.timestamp_ms < prev_ts) {
        throw ParseError("line " + std::to_string(line_no) + ": timestamp regression");
      }
      prev_ts = rec.timestamp_ms;
      out.push_back(std::move(rec));
    }
    ++line_no;
  }
  return out;
}

#ifdef DRQN_HAS_ZLIB
inline std::string gunzip_file(const std::string& path) {
  gzFile gz = gzopen(path.c_str(), "rb");
  if (gz == nullptr) throw IoError("cannot open " + path);
  std::string out;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(gz, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool bad = n < 0;
  gzclose(gz);
  if (bad) throw IoError("gzip decompression failed for " + path);
  return out;
}
#endif

// Reads one tick file; decompression is transparent for ".gz" paths.
inline std::vector<TickRecord> parse_tick_file(const std::string& path) {
  if (path.size() > 3 && path.substr(path.size() - 3) == ".gz") {
#ifdef DRQN_HAS_ZLIB
    std::istringstream is(gunzip_file(path));
    return parse_tick_stream(is);
#else
    throw IoError("compressed input not supported in this build: " + path);
#endif
  }
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return parse_tick_stream(is);
}

// Streaming resampler: feed time-ordered ticks of one pair, collect bars.
// Intervals without ticks produce no bar; alignment forward-fills later.
class BarBuilder {
 public:
  explicit BarBuilder(std::int64_t interval_ms = kBarIntervalMs) : interval_ms_(interval_ms) {}

  void add(const TickRecord& tick) {
    if (tick.timestamp_ms < last_ts_) {
      throw std::invalid_argument("BarBuilder: ticks out of order");
    }
    last_ts_ = tick.timestamp_ms;
    const std::int64_t slot = floor_to_interval(tick.timestamp_ms);
    const double mid = tick.mid();
    if (!current_ || current_->start_ms != slot) {
      flush();
      current_ = Bar{slot, mid, mid, mid, mid, 1};
    } else {
      current_->high = std::max(current_->high, mid);
      current_->low = std::min(current_->low, mid);
      current_->close = mid;
      ++current_->tick_volume;
    }
  }

  std::vector<Bar> finish() {
    flush();
    return std::move(bars_);
  }

 private:
  std::int64_t floor_to_interval(std::int64_t ts) const {
    std::int64_t q = ts / interval_ms_;
    if (ts % interval_ms_ < 0) --q;
    return q * interval_ms_;
  }

  void flush() {
    if (current_) {
      bars_.push_back(*current_);
      current_.reset();
    }
  }

  std::int64_t interval_ms_;
  std::int64_t last_ts_ = INT64_MIN;
  std::optional<Bar> current_;
  std::vector<Bar> bars_;
};

inline std::vector<Bar> resample(std::span<const TickRecord> ticks,
                                 std::int64_t interval_ms = kBarIntervalMs) {
  BarBuilder builder(interval_ms);
  for (const TickRecord& t : ticks) builder.add(t);
  return builder.finish();
}

// Merges per-pair bar sequences onto the union grid of start times, starting
// at the latest first-bar time across pairs. Missing slots are filled flat at
// the previous close with zero volume.
inline AlignedDataset align(const std::vector<std::vector<Bar>>& per_pair,
                            const std::vector<std::string>& names) {
  if (per_pair.size() != names.size()) {
    throw std::invalid_argument("align: names/bars size mismatch");
  }
  if (per_pair.empty()) throw AlignmentError("align: no pairs");

  std::int64_t grid_start = INT64_MIN;
  std::set<std::int64_t> slots;
  for (std::size_t p = 0; p < per_pair.size(); ++p) {
    if (per_pair[p].empty()) {
      throw AlignmentError("align: pair " + names[p] + " has no bars");
    }
    grid_start = std::max(grid_start, per_pair[p].front().start_ms);
    for (const Bar& b : per_pair[p]) slots.insert(b.start_ms);
  }

  AlignedDataset ds;
  ds.pairs = names;
  for (std::int64_t s : slots) {
    if (s >= grid_start) ds.grid.push_back(s);
  }

  ds.bars.resize(per_pair.size());
  for (std::size_t p = 0; p < per_pair.size(); ++p) {
    const auto& src = per_pair[p];
    auto& dst = ds.bars[p];
    dst.reserve(ds.grid.size());
    std::size_t i = 0;
    double last_close = src.front().close;
    for (std::int64_t slot : ds.grid) {
      while (i < src.size() && src[i].start_ms < slot) {
        last_close = src[i].close;
        ++i;
      }
      if (i < src.size() && src[i].start_ms == slot) {
        dst.push_back(src[i]);
        last_close = src[i].close;
        ++i;
      } else {
        dst.push_back(Bar{slot, last_close, last_close, last_close, last_close, 0});
      }
    }
  }
  return ds;
}

// FNV-1a over pair names, grid and bar contents. Identifies the dataset a
// checkpoint was produced against.
inline std::uint64_t dataset_fingerprint(const AlignedDataset& ds) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix_byte = [&h](unsigned char b) {
    h ^= b;
    h *= 1099511628211ULL;
  };
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(v >> (8 * i)));
  };
  for (const std::string& p : ds.pairs) {
    for (char c : p) mix_byte(static_cast<unsigned char>(c));
  }
  for (std::int64_t t : ds.grid) mix(static_cast<std::uint64_t>(t));
  for (const auto& series : ds.bars) {
    for (const Bar& b : series) {
      mix(static_cast<std::uint64_t>(b.start_ms));
      mix(std::bit_cast<std::uint64_t>(b.open));
      mix(std::bit_cast<std::uint64_t>(b.high));
      mix(std::bit_cast<std::uint64_t>(b.low));
      mix(std::bit_cast<std::uint64_t>(b.close));
      mix(static_cast<std::uint64_t>(b.tick_volume));
    }
  }
  return h;
}

// -- dataset cache ----------------------------------------------------------

inline constexpr char kDatasetMagic[9] = "DRQNDSET";
inline constexpr std::uint32_t kDatasetVersion = 1;

inline void save_dataset(const AlignedDataset& ds, std::ostream& os) {
  write_magic(os, kDatasetMagic);
  write_u32(os, kDatasetVersion);
  write_u32(os, static_cast<std::uint32_t>(ds.pairs.size()));
  write_u64(os, ds.grid.size());
  for (std::int64_t t : ds.grid) write_i64(os, t);
  for (std::size_t p = 0; p < ds.pairs.size(); ++p) {
    write_string(os, ds.pairs[p]);
    for (const Bar& b : ds.bars[p]) {
      write_i64(os, b.start_ms);
      write_f64(os, b.open);
      write_f64(os, b.high);
      write_f64(os, b.low);
      write_f64(os, b.close);
      write_i64(os, b.tick_volume);
    }
  }
}

inline void save_dataset(const AlignedDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write dataset cache " + path);
  save_dataset(ds, os);
  if (!os) throw IoError("write failed for dataset cache " + path);
}

inline AlignedDataset load_dataset(std::istream& is) {
  expect_magic(is, kDatasetMagic, "dataset cache");
  const std::uint32_t version = read_u32(is, "dataset version");
  if (version != kDatasetVersion) {
    throw IoError("unsupported dataset cache version " + std::to_string(version));
  }
  AlignedDataset ds;
  const std::uint32_t n_pairs = read_u32(is, "pair count");
  const std::uint64_t n_slots = read_u64(is, "slot count");
  ds.grid.resize(n_slots);
  for (auto& t : ds.grid) t = read_i64(is, "grid slot");
  ds.pairs.resize(n_pairs);
  ds.bars.resize(n_pairs);
  for (std::uint32_t p = 0; p < n_pairs; ++p) {
    ds.pairs[p] = read_string(is, "pair name");
    ds.bars[p].resize(n_slots);
    for (auto& b : ds.bars[p]) {
      b.start_ms = read_i64(is, "bar start");
      b.open = read_f64(is, "bar open");
      b.high = read_f64(is, "bar high");
      b.low = read_f64(is, "bar low");
      b.close = read_f64(is, "bar close");
      b.tick_volume = read_i64(is, "bar volume");
    }
  }
  return ds;
}

inline AlignedDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset cache " + path);
  return load_dataset(is);
}

}  // namespace drqn
