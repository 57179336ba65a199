#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "drqn/agent.hpp"
#include "drqn/analytics.hpp"
#include "drqn/common.hpp"
#include "drqn/market_data.hpp"
#include "drqn/runlog.hpp"
#include "drqn/trading_env.hpp"

namespace drqn {

struct RunConfig {
  std::string pair = "EURUSD";
  std::uint64_t seed = 1;
  double spread_bp = 0.08;
  double initial_cash = 100000.0;
  double trade_size = 100000.0;
  std::size_t hidden_dim = 256;
  AgentConfig agent{};
  std::size_t max_steps = 0;         // 0: run to the end of the data
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  std::string out_dir;               // empty: keep results in memory only

  double spread_price() const { return spread_bp * bp_unit(pair); }

  void validate() const {
    const std::string p = normalize_pair(pair);
    const auto& universe = pair_universe();
    if (std::find(universe.begin(), universe.end(), p) == universe.end()) {
      throw std::invalid_argument("pair " + pair + " is not in the 12-pair universe");
    }
    if (spread_bp < 0.0) throw std::invalid_argument("spread_bp must be >= 0");
    if (initial_cash <= 0.0 || trade_size <= 0.0) {
      throw std::invalid_argument("initial cash and trade size must be positive");
    }
  }
};

struct RunResult {
  RunLog log;
  std::vector<TradeRecord> trades;
  std::optional<TradeRecord> open_trade;
  double initial_value = 0.0;
  double final_value = 0.0;
  std::uint64_t seed = 0;
};

// -- checkpoint container -----------------------------------------------------
//
// Little-endian byte layout, stable across runs (version bumps on change):
//   magic "DRQNCKPT" (8 bytes), version u32
//   pair   : u32 length + bytes (normalized name)
//   dataset fingerprint u64, steps counter u64
//   agent  : online params, target params            (each: input_dim u64,
//            hidden_dim u64, then 9 tensors in canonical order, each
//            u64 count + count f64)
//            Adam state (step i64, then moment tensors as two param blocks)
//            acting LSTM state (h, c as f64 vectors)
//            replay memory (capacity u64, size u64, last slot i64, then per
//            transition: state vec, 3 rewards, next_core vec, action u64,
//            slot i64)
//            rng state (4 x u64)
//   env    : cursor u64, ledger value f64, position i64, closed trades
//            (count + records), open-trade flag + record, feature pipeline
//            (slot u64, per-pair close/volume rings, 192 normalizer windows)
// f64 vectors are u64 count + raw IEEE-754 doubles.

inline constexpr char kCheckpointMagic[9] = "DRQNCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void save_checkpoint_stream(std::ostream& os, const RunConfig& cfg,
                                   const AlignedDataset& ds, std::uint64_t steps,
                                   const DrqnAgent& agent, const TradingEnv& env) {
  write_magic(os, kCheckpointMagic);
  write_u32(os, kCheckpointVersion);
  write_string(os, normalize_pair(cfg.pair));
  write_u64(os, dataset_fingerprint(ds));
  write_u64(os, steps);
  agent.save(os);
  env.save(os);
}

inline std::uint64_t load_checkpoint_stream(std::istream& is, const RunConfig& cfg,
                                            const AlignedDataset& ds, DrqnAgent& agent,
                                            TradingEnv& env) {
  expect_magic(is, kCheckpointMagic, "checkpoint");
  const std::uint32_t version = read_u32(is, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::string pair = read_string(is, "checkpoint pair");
  const std::uint64_t fingerprint = read_u64(is, "checkpoint dataset fingerprint");
  if (pair != normalize_pair(cfg.pair) || fingerprint != dataset_fingerprint(ds)) {
    throw IoError("checkpoint does not match the configured pair/dataset");
  }
  const std::uint64_t steps = read_u64(is, "checkpoint steps");
  agent.load(is);
  env.load(is);
  return steps;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const RunConfig& cfg,
                            const AlignedDataset& ds, std::uint64_t steps,
                            const DrqnAgent& agent, const TradingEnv& env) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path);
  detail::save_checkpoint_stream(os, cfg, ds, steps, agent, env);
  if (!os) throw IoError("write failed for checkpoint " + path);
}

// -- config snapshot ----------------------------------------------------------

// Key=value snapshot; the same file feeds back through the CLI --config flag.
inline std::string render_config(const RunConfig& cfg) {
  std::string out;
  auto kv = [&out](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
  kv("pair", normalize_pair(cfg.pair));
  kv("seed", std::to_string(cfg.seed));
  kv("spread-bp", detail::fmt_num(cfg.spread_bp, "%.17g"));
  kv("initial-cash", detail::fmt_num(cfg.initial_cash, "%.17g"));
  kv("trade-size", detail::fmt_num(cfg.trade_size, "%.17g"));
  kv("hidden", std::to_string(cfg.hidden_dim));
  kv("memory", std::to_string(cfg.agent.memory_capacity));
  kv("seq-len", std::to_string(cfg.agent.seq_len));
  kv("gamma", detail::fmt_num(cfg.agent.gamma, "%.17g"));
  kv("tau", detail::fmt_num(cfg.agent.tau, "%.17g"));
  kv("lr", detail::fmt_num(cfg.agent.adam.lr, "%.17g"));
  kv("grad-clip", detail::fmt_num(cfg.agent.grad_clip_norm, "%.17g"));
  kv("epsilon-greedy",
     cfg.agent.mode == ExplorationMode::epsilon_greedy ? "true" : "false");
  kv("epsilon", detail::fmt_num(cfg.agent.epsilon, "%.17g"));
  kv("max-steps", std::to_string(cfg.max_steps));
  kv("checkpoint-every", std::to_string(cfg.checkpoint_every));
  return out;
}

// -- trades file --------------------------------------------------------------

inline constexpr const char* kTradesHeader =
    "direction,entry_slot,exit_slot,entry_price,exit_price,pnl";

inline void write_trades_csv(const std::string& path, std::span<const TradeRecord> trades) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write trades file " + path);
  os << kTradesHeader << '\n';
  for (const TradeRecord& t : trades) {
    os << t.direction << ',' << t.entry_slot << ',' << t.exit_slot << ','
       << detail::format_double(t.entry_price) << ',' << detail::format_double(t.exit_price)
       << ',' << detail::format_double(t.pnl) << '\n';
  }
}

inline std::vector<TradeRecord> read_trades_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open trades file " + path);
  std::vector<TradeRecord> trades;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == kTradesHeader || line.front() == '#') continue;
    std::vector<std::string_view> f;
    std::size_t start = 0;
    const std::string_view sv = line;
    for (std::size_t i = 0; i <= sv.size(); ++i) {
      if (i == sv.size() || sv[i] == ',') {
        f.push_back(sv.substr(start, i - start));
        start = i + 1;
      }
    }
    if (f.size() != 6) throw ParseError("trades line " + std::to_string(line_no));
    TradeRecord t;
    t.direction = static_cast<int>(detail::parse_double(f[0], line_no));
    t.entry_slot = static_cast<std::size_t>(detail::parse_double(f[1], line_no));
    t.exit_slot = static_cast<std::size_t>(detail::parse_double(f[2], line_no));
    t.entry_price = detail::parse_double(f[3], line_no);
    t.exit_price = detail::parse_double(f[4], line_no);
    t.pnl = detail::parse_double(f[5], line_no);
    trades.push_back(t);
  }
  return trades;
}

// -- equity curve files -------------------------------------------------------

inline void write_equity_csv(const std::string& path, const AlignedDataset& ds,
                             std::size_t first_slot, std::span<const double> equity,
                             std::span<const double> baseline) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write equity file " + path);
  os << "slot,time_ms,equity,baseline_equity\n";
  for (std::size_t i = 0; i < equity.size(); ++i) {
    const std::size_t slot = first_slot + i;
    os << slot << ',' << ds.grid[slot] << ',' << detail::format_double(equity[i]) << ',';
    if (i < baseline.size()) os << detail::format_double(baseline[i]);
    os << '\n';
  }
}

// -- the online learning loop -------------------------------------------------

inline void write_run_report(const RunConfig& cfg, const AlignedDataset& dataset,
                             const RunResult& result);

// Runs the online algorithm over the aligned panel: greedy action, environment
// step, augmented store, one training event per seq_len steps once the memory
// is full, and a soft target update every step. Single pass, no episodes.
inline RunResult run(const RunConfig& cfg, const AlignedDataset& dataset,
                     const std::string& resume_checkpoint = {}) {
  cfg.validate();
  const auto pair_idx = dataset.pair_index(normalize_pair(cfg.pair));
  if (!pair_idx) {
    throw std::invalid_argument("pair " + cfg.pair + " not present in dataset");
  }

  TradingEnv env(dataset, *pair_idx, cfg.spread_price(), cfg.initial_cash, cfg.trade_size);
  DrqnAgent agent(cfg.agent, cfg.seed, kStateDim, cfg.hidden_dim);

  std::uint64_t steps = 1;
  if (!resume_checkpoint.empty()) {
    std::ifstream is(resume_checkpoint, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + resume_checkpoint);
    steps = detail::load_checkpoint_stream(is, cfg, dataset, agent, env);
  }

  RunResult result;
  result.seed = cfg.seed;
  result.initial_value = cfg.initial_cash;

  const bool writing = !cfg.out_dir.empty();
  if (writing) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream os(cfg.out_dir + "/config.toml", std::ios::binary);
    if (!os) throw IoError("cannot write config snapshot in " + cfg.out_dir);
    os << render_config(cfg);
  }

  std::size_t steps_done = 0;
  MarketState state = env.current_state();
  while (env.has_next() && (cfg.max_steps == 0 || steps_done < cfg.max_steps)) {
    ++steps;
    const Action action = agent.act(state);
    StepResult step_result;
    try {
      step_result = env.step(action);
    } catch (const BankruptcyError& e) {
      result.log.failed = true;
      result.log.fail_reason = e.what();
      break;
    }
    agent.store(step_result.transition);

    std::optional<double> loss;
    if (steps % cfg.agent.seq_len == 0) loss = agent.train_once();
    agent.soft_update_target();

    StepRecord rec;
    rec.step = steps;
    rec.slot = step_result.transition.slot;
    rec.action = action.value;
    rec.reward = step_result.reward;
    rec.value = env.ledger().value;
    rec.trained = loss.has_value();
    rec.loss = loss.value_or(0.0);
    result.log.records.push_back(rec);

    state = step_result.next_state;
    ++steps_done;

    if (writing && cfg.checkpoint_every > 0 && steps_done % cfg.checkpoint_every == 0) {
      save_checkpoint(cfg.out_dir + "/checkpoint_" + std::to_string(steps) + ".bin", cfg,
                      dataset, steps, agent, env);
    }
  }

  result.trades = env.ledger().trades;
  result.open_trade = env.ledger().open_trade;
  result.final_value = env.ledger().value;

  if (writing) {
    save_checkpoint(cfg.out_dir + "/checkpoint.bin", cfg, dataset, steps, agent, env);
    write_runlog_csv(cfg.out_dir + "/runlog.csv", result.log);
    write_trades_csv(cfg.out_dir + "/trades.csv", result.trades);
    write_run_report(cfg, dataset, result);
  }
  return result;
}

// Chooses the hold baseline with the larger final equity; returns its full
// per-step equity over the run range.
inline std::vector<double> better_baseline_equity(const AlignedDataset& ds, std::size_t pair,
                                                  double spread_price, double initial_cash,
                                                  double trade_size, std::size_t first_slot,
                                                  std::size_t n_steps,
                                                  BaselineMode* chosen = nullptr) {
  auto buy = baseline_equity(ds, pair, BaselineMode::buy_and_hold, spread_price, initial_cash,
                             trade_size, first_slot);
  auto sell = baseline_equity(ds, pair, BaselineMode::sell_and_hold, spread_price, initial_cash,
                              trade_size, first_slot);
  buy.resize(std::min(buy.size(), n_steps));
  sell.resize(std::min(sell.size(), n_steps));
  const double buy_final = buy.empty() ? initial_cash : buy.back();
  const double sell_final = sell.empty() ? initial_cash : sell.back();
  if (chosen) *chosen = buy_final >= sell_final ? BaselineMode::buy_and_hold
                                                : BaselineMode::sell_and_hold;
  return buy_final >= sell_final ? buy : sell;
}

inline std::vector<double> equity_log_returns(std::span<const double> equity,
                                              double initial_value) {
  std::vector<double> out;
  out.reserve(equity.size());
  double prev = initial_value;
  for (double v : equity) {
    out.push_back(std::log(v / prev));
    prev = v;
  }
  return out;
}

inline void write_run_report(const RunConfig& cfg, const AlignedDataset& dataset,
                             const RunResult& result) {
  const auto pair_idx = dataset.pair_index(normalize_pair(cfg.pair));
  if (!pair_idx || result.log.records.empty()) return;
  const std::size_t first_slot = static_cast<std::size_t>(result.log.records.front().slot);

  std::vector<double> equity;
  equity.reserve(result.log.records.size());
  for (const StepRecord& r : result.log.records) equity.push_back(r.value);

  const auto baseline = better_baseline_equity(dataset, *pair_idx, cfg.spread_price(),
                                               cfg.initial_cash, cfg.trade_size, first_slot,
                                               equity.size());
  const auto baseline_daily =
      daily_returns(equity_log_returns(baseline, cfg.initial_cash)).returns;

  const MetricsReport metrics =
      compute_metrics(result.log, result.trades, cfg.initial_cash, baseline_daily);

  std::ofstream os(cfg.out_dir + "/report.txt", std::ios::binary);
  if (!os) throw IoError("cannot write report in " + cfg.out_dir);
  os << render_summary(metrics, normalize_pair(cfg.pair));
  if (result.log.failed) os << "run failed: " << result.log.fail_reason << "\n";
  write_equity_csv(cfg.out_dir + "/equity.csv", dataset, first_slot, equity, baseline);
}

// -- suites --------------------------------------------------------------------

struct SuiteResult {
  RunConfig config;
  std::vector<RunResult> runs;     // one per repeat, seeds config.seed + r
  std::vector<double> mean;        // per-step mean equity over runs
  std::vector<double> sigma;       // per-step population std dev over runs
};

// Executes each config `repeats` times with recorded seeds seed + r *
// seed_stride (stride 0 repeats one seed). Runs are independent and execute
// in parallel; failures are kept in the per-run logs and the suite continues.
inline std::vector<SuiteResult> run_suite(const std::vector<RunConfig>& configs,
                                          const AlignedDataset& dataset, std::size_t repeats = 5,
                                          std::size_t max_threads = 0,
                                          std::uint64_t seed_stride = 1) {
  std::vector<SuiteResult> suite(configs.size());
  struct Job {
    std::size_t config_idx;
    std::size_t repeat;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    suite[c].config = configs[c];
    suite[c].runs.resize(repeats);
    for (std::size_t r = 0; r < repeats; ++r) jobs.push_back({c, r});
  }

  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t n_threads =
      std::min(jobs.size(), max_threads == 0 ? hw : std::min(hw, max_threads));

  std::atomic<std::size_t> next_job{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t j = next_job.fetch_add(1);
      if (j >= jobs.size()) return;
      RunConfig cfg = configs[jobs[j].config_idx];
      cfg.seed = cfg.seed + jobs[j].repeat * seed_stride;
      if (!cfg.out_dir.empty()) cfg.out_dir += "/run_" + std::to_string(jobs[j].repeat);
      try {
        suite[jobs[j].config_idx].runs[jobs[j].repeat] = run(cfg, dataset);
      } catch (const std::exception& e) {
        RunResult failed;
        failed.seed = cfg.seed;
        failed.initial_value = cfg.initial_cash;
        failed.log.failed = true;
        failed.log.fail_reason = e.what();
        suite[jobs[j].config_idx].runs[jobs[j].repeat] = std::move(failed);
      }
    }
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (SuiteResult& s : suite) {
    std::size_t max_len = 0;
    for (const RunResult& r : s.runs) max_len = std::max(max_len, r.log.records.size());
    s.mean.resize(max_len, 0.0);
    s.sigma.resize(max_len, 0.0);
    for (std::size_t i = 0; i < max_len; ++i) {
      double sum = 0.0, sq = 0.0;
      std::size_t n = 0;
      for (const RunResult& r : s.runs) {
        if (i < r.log.records.size()) {
          const double v = r.log.records[i].value;
          sum += v;
          sq += v * v;
          ++n;
        }
      }
      if (n > 0) {
        const double m = sum / static_cast<double>(n);
        s.mean[i] = m;
        s.sigma[i] = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - m * m));
      }
    }
  }
  return suite;
}

// Aggregate curve file: per-step baseline, mean, one-sigma band and the
// individual run equities.
inline void write_suite_csv(const std::string& path, const SuiteResult& s,
                            const AlignedDataset& dataset) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write suite file " + path);
  os << "slot,time_ms,baseline_equity,mean,sigma";
  for (std::size_t r = 0; r < s.runs.size(); ++r) os << ",run" << r;
  os << '\n';
  if (s.mean.empty()) return;

  const auto pair_idx = dataset.pair_index(normalize_pair(s.config.pair));
  std::size_t first_slot = kFirstObservableSlot + 1;
  for (const RunResult& r : s.runs) {
    if (!r.log.records.empty()) {
      first_slot = static_cast<std::size_t>(r.log.records.front().slot);
      break;
    }
  }
  std::vector<double> baseline;
  if (pair_idx) {
    baseline = better_baseline_equity(dataset, *pair_idx, s.config.spread_price(),
                                      s.config.initial_cash, s.config.trade_size, first_slot,
                                      s.mean.size());
  }
  for (std::size_t i = 0; i < s.mean.size(); ++i) {
    const std::size_t slot = first_slot + i;
    os << slot << ',' << dataset.grid[slot] << ',';
    if (i < baseline.size()) os << detail::format_double(baseline[i]);
    os << ',' << detail::format_double(s.mean[i]) << ',' << detail::format_double(s.sigma[i]);
    for (const RunResult& r : s.runs) {
      os << ',';
      if (i < r.log.records.size()) os << detail::format_double(r.log.records[i].value);
    }
    os << '\n';
  }
}

}  // namespace drqn
