#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "drqn/common.hpp"

namespace drqn {

// One environment step. `step` is the Algorithm-style counter (starts at 1,
// incremented before acting, so the first record carries 2); `slot` is the
// grid index of the stepped bar.
struct StepRecord {
  std::uint64_t step = 0;
  std::int64_t slot = 0;
  int action = 0;
  double reward = 0.0;
  double value = 0.0;
  bool trained = false;
  double loss = 0.0;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct RunLog {
  std::vector<StepRecord> records;
  bool failed = false;
  std::string fail_reason;
};

namespace detail {

// Shortest round-trippable decimal form; deterministic for identical values.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("run log line " + std::to_string(line_no) + ": bad number '" +
                     std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

inline constexpr const char* kRunLogHeader = "step,slot,action,reward,value,loss";

inline void write_runlog_csv(std::ostream& os, const RunLog& log) {
  os << kRunLogHeader << '\n';
  for (const StepRecord& r : log.records) {
    os << r.step << ',' << r.slot << ',' << r.action << ',' << detail::format_double(r.reward)
       << ',' << detail::format_double(r.value) << ',';
    if (r.trained) os << detail::format_double(r.loss);
    os << '\n';
  }
  if (log.failed) os << "# failed: " << log.fail_reason << '\n';
}

inline void write_runlog_csv(const std::string& path, const RunLog& log) {
  std::ofstream os(path, std::ios::binary);  // binary: no newline translation
  if (!os) throw IoError("cannot write run log " + path);
  write_runlog_csv(os, log);
  if (!os) throw IoError("write failed for run log " + path);
}

inline RunLog read_runlog_csv(std::istream& is) {
  RunLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line == kRunLogHeader) continue;
    if (line.front() == '#') {
      const std::string prefix = "# failed: ";
      if (line.rfind(prefix, 0) == 0) {
        log.failed = true;
        log.fail_reason = line.substr(prefix.size());
      }
      continue;
    }
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    const std::string_view sv = line;
    for (std::size_t i = 0; i <= sv.size(); ++i) {
      if (i == sv.size() || sv[i] == ',') {
        fields.push_back(sv.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 6) {
      throw ParseError("run log line " + std::to_string(line_no) + ": expected 6 fields");
    }
    StepRecord r;
    r.step = static_cast<std::uint64_t>(detail::parse_double(fields[0], line_no));
    r.slot = static_cast<std::int64_t>(detail::parse_double(fields[1], line_no));
    r.action = static_cast<int>(detail::parse_double(fields[2], line_no));
    r.reward = detail::parse_double(fields[3], line_no);
    r.value = detail::parse_double(fields[4], line_no);
    if (!fields[5].empty()) {
      r.trained = true;
      r.loss = detail::parse_double(fields[5], line_no);
    }
    log.records.push_back(r);
  }
  return log;
}

inline RunLog read_runlog_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open run log " + path);
  return read_runlog_csv(is);
}

}  // namespace drqn
