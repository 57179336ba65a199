#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drqn/common.hpp"
#include "drqn/runlog.hpp"
#include "drqn/trading_env.hpp"

namespace drqn {

inline constexpr std::size_t kStepsPerDay = 96;
inline constexpr double kTradingDaysPerYear = 252.0;

// Daily log returns: consecutive groups of 96 one-step log returns summed,
// final partial group dropped.
struct DailySeries {
  std::vector<double> returns;
};

inline DailySeries daily_returns(std::span<const double> step_returns,
                                 std::size_t group = kStepsPerDay) {
  DailySeries out;
  const std::size_t n_days = step_returns.size() / group;
  out.returns.reserve(n_days);
  for (std::size_t d = 0; d < n_days; ++d) {
    double sum = 0.0;
    for (std::size_t i = 0; i < group; ++i) sum += step_returns[d * group + i];
    out.returns.push_back(sum);
  }
  return out;
}

inline DailySeries daily_returns(const RunLog& log, std::size_t group = kStepsPerDay) {
  std::vector<double> rewards;
  rewards.reserve(log.records.size());
  for (const StepRecord& r : log.records) rewards.push_back(r.reward);
  return daily_returns(rewards, group);
}

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Population standard deviation.
inline double stddev_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  return std::sqrt(sq / static_cast<double>(v.size()));
}

struct Annualized {
  double annual_return = 0.0;
  std::optional<double> sharpe;   // empty when the deviation is degenerate
  std::optional<double> sortino;
};

// Mean daily return scaled by 252; ratios scaled by sqrt(252). Downside
// deviation is the root mean square of min(d, 0) over all days.
inline Annualized annualize(const DailySeries& daily) {
  Annualized out;
  const auto& d = daily.returns;
  if (d.empty()) return out;
  const double m = mean_of(d);
  out.annual_return = m * kTradingDaysPerYear;
  if (d.size() < 2) return out;

  const double sd = stddev_of(d);
  if (sd >= 1e-12) out.sharpe = m / sd * std::sqrt(kTradingDaysPerYear);

  double downside_sq = 0.0;
  for (double x : d) {
    const double neg = std::min(x, 0.0);
    downside_sq += neg * neg;
  }
  const double downside = std::sqrt(downside_sq / static_cast<double>(d.size()));
  if (downside >= 1e-12) out.sortino = m / downside * std::sqrt(kTradingDaysPerYear);
  return out;
}

// Worst peak-to-trough decline as a fraction of the peak, <= 0.
inline double max_drawdown(std::span<const double> equity) {
  double peak = -1.0;
  double mdd = 0.0;
  for (double v : equity) {
    if (!(v > 0.0)) throw std::invalid_argument("max_drawdown requires positive equity");
    peak = std::max(peak, v);
    mdd = std::min(mdd, (v - peak) / peak);
  }
  return mdd;
}

inline std::optional<double> pearson_correlation(std::span<const double> a,
                                                 std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("correlation length mismatch");
  if (a.size() < 2) return std::nullopt;
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa < 1e-24 || sbb < 1e-24) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

struct TradeStats {
  std::size_t num_trades = 0;
  double win_rate = 0.0;
  double avg_profit = 0.0;
  double avg_loss = 0.0;
  double expectation = 0.0;
  double frequency = 0.0;  // steps per trade
  bool no_trades = true;
};

// Wins are trades with positive net PnL; losses include break-even trades.
// expectation = win_rate * avg_profit + (1 - win_rate) * avg_loss;
// frequency = data length / number of trades.
inline TradeStats trade_stats(std::span<const TradeRecord> trades, std::size_t total_steps) {
  TradeStats s;
  if (trades.empty()) return s;
  s.no_trades = false;
  s.num_trades = trades.size();
  double win_sum = 0.0, loss_sum = 0.0;
  std::size_t wins = 0;
  for (const TradeRecord& t : trades) {
    if (t.pnl > 0.0) {
      ++wins;
      win_sum += t.pnl;
    } else {
      loss_sum += t.pnl;
    }
  }
  const std::size_t losses = trades.size() - wins;
  s.win_rate = static_cast<double>(wins) / static_cast<double>(trades.size());
  s.avg_profit = wins > 0 ? win_sum / static_cast<double>(wins) : 0.0;
  s.avg_loss = losses > 0 ? loss_sum / static_cast<double>(losses) : 0.0;
  s.expectation = s.win_rate * s.avg_profit + (1.0 - s.win_rate) * s.avg_loss;
  s.frequency = static_cast<double>(total_steps) / static_cast<double>(trades.size());
  return s;
}

struct MetricsReport {
  double net_profit = 0.0;
  double annual_return = 0.0;
  std::optional<double> sharpe;
  std::optional<double> sortino;
  double mdd = 0.0;
  std::optional<double> corr_baseline;
  TradeStats trades;
};

// Assembles the full report from a finished run. `baseline_daily` carries the
// daily log returns of the better-performing hold baseline, when available.
inline MetricsReport compute_metrics(const RunLog& log, std::span<const TradeRecord> trades,
                                     double initial_value,
                                     std::span<const double> baseline_daily = {}) {
  MetricsReport r;
  if (!log.records.empty()) r.net_profit = log.records.back().value - initial_value;

  const DailySeries daily = daily_returns(log);
  const Annualized ann = annualize(daily);
  r.annual_return = ann.annual_return;
  r.sharpe = ann.sharpe;
  r.sortino = ann.sortino;

  std::vector<double> daily_equity;
  daily_equity.reserve(daily.returns.size() + 1);
  daily_equity.push_back(initial_value);
  for (std::size_t d = 0; d * kStepsPerDay + kStepsPerDay <= log.records.size(); ++d) {
    daily_equity.push_back(log.records[d * kStepsPerDay + kStepsPerDay - 1].value);
  }
  r.mdd = max_drawdown(daily_equity);

  if (!baseline_daily.empty() && baseline_daily.size() == daily.returns.size()) {
    r.corr_baseline = pearson_correlation(daily.returns, baseline_daily);
  }
  r.trades = trade_stats(trades, log.records.size());
  return r;
}

namespace detail {

inline std::string fmt_opt(const std::optional<double>& v, const char* fmt = "%.4f") {
  if (!v) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, *v);
  return buf;
}

inline std::string fmt_num(double v, const char* fmt = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace detail

// Human-readable summary covering the twelve performance and trading
// statistics columns.
inline std::string render_summary(const MetricsReport& r, const std::string& pair) {
  std::string out;
  auto row = [&out](const std::string& k, const std::string& v) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-14s %s\n", k.c_str(), v.c_str());
    out += buf;
  };
  out += "pair: " + pair + "\n";
  row("Net Profit", detail::fmt_num(r.net_profit, "%.2f"));
  row("Return", detail::fmt_num(r.annual_return * 100.0, "%.2f%%"));
  row("Sharpe", detail::fmt_opt(r.sharpe, "%.2f"));
  row("Sortino", detail::fmt_opt(r.sortino, "%.2f"));
  row("MDD", detail::fmt_num(r.mdd * 100.0, "%.2f%%"));
  row("Corr", detail::fmt_opt(r.corr_baseline, "%.2f"));
  if (r.trades.no_trades) {
    row("Num Trades", "0 (no trades)");
  } else {
    row("Num Trades", std::to_string(r.trades.num_trades));
  }
  row("Win Rate", detail::fmt_num(r.trades.win_rate * 100.0, "%.1f%%"));
  row("Avg Profit", detail::fmt_num(r.trades.avg_profit, "%.2f"));
  row("Avg Loss", detail::fmt_num(r.trades.avg_loss, "%.2f"));
  row("Expect", detail::fmt_num(r.trades.expectation, "%.2f"));
  row("Freq", detail::fmt_num(r.trades.frequency, "%.2f"));
  return out;
}

}  // namespace drqn
