// Command-line front end: ingest tick data into an aligned dataset cache,
// train online runs, execute repeated suites and spread sweeps, and rebuild
// reports from run directories.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "drqn/analytics.hpp"
#include "drqn/market_data.hpp"
#include "drqn/synthetic.hpp"
#include "drqn/time_utils.hpp"
#include "drqn/trainer.hpp"

namespace fs = std::filesystem;
using namespace drqn;

namespace {

std::string default_data_dir() {
  const char* env = std::getenv("DRQN_DATA_DIR");
  return env != nullptr ? env : ".";
}

std::string run_stamp(const std::string& pair, std::uint64_t seed) {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  const CivilDateTime c = civil_from_epoch_ms(ms);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d%02u%02u-%02u%02u%02u_%s_s%llu", c.year, c.month, c.day,
                c.hour, c.minute, c.second, pair.c_str(),
                static_cast<unsigned long long>(seed));
  return buf;
}

bool is_tick_file(const fs::path& p) {
  std::string name = p.filename().string();
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (const char* suffix : {".csv", ".txt", ".csv.gz", ".txt.gz"}) {
    if (name.size() >= std::strlen(suffix) &&
        name.compare(name.size() - std::strlen(suffix), std::string::npos, suffix) == 0) {
      return true;
    }
  }
  return false;
}

AlignedDataset ingest_directory(const std::string& data_dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    if (entry.is_regular_file() && is_tick_file(entry.path())) files.push_back(entry.path());
  }
  if (files.empty()) throw IoError("no tick files found under " + data_dir);
  std::sort(files.begin(), files.end());

  std::map<std::string, std::vector<TickRecord>> by_pair;
  for (const fs::path& f : files) {
    std::fprintf(stderr, "parsing %s\n", f.string().c_str());
    for (TickRecord& t : parse_tick_file(f.string())) {
      by_pair[normalize_pair(t.pair)].push_back(std::move(t));
    }
  }

  std::vector<std::string> names;
  std::vector<std::vector<TickRecord>> ticks;
  for (auto& [name, records] : by_pair) {
    names.push_back(name);
    ticks.push_back(std::move(records));
  }

  // monthly files may interleave; order each pair before building bars
  std::vector<std::vector<Bar>> per_pair(ticks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= ticks.size()) return;
      std::stable_sort(ticks[i].begin(), ticks[i].end(),
                       [](const TickRecord& a, const TickRecord& b) {
                         return a.timestamp_ms < b.timestamp_ms;
                       });
      per_pair[i] = resample(ticks[i]);
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(ticks.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  return align(per_pair, names);
}

struct CliRunOptions {
  std::string dataset;
  std::string data_dir = default_data_dir();
  bool rebuild = false;
  std::string pair = "EURUSD";
  std::uint64_t seed = 1;
  double spread_bp = 0.08;
  double initial_cash = 100000.0;
  double trade_size = 100000.0;
  std::size_t hidden = 256;
  std::size_t memory = 480;
  std::size_t seq_len = 96;
  double gamma = 0.99;
  double tau = 0.001;
  double lr = 2.5e-4;
  double grad_clip = 10.0;
  bool epsilon_greedy = false;
  double epsilon = 0.1;
  std::size_t max_steps = 0;
  std::size_t checkpoint_every = 0;
  std::string out;
};

void add_run_options(CLI::App* cmd, CliRunOptions& o, bool with_dataset = true) {
  if (with_dataset) {
    cmd->add_option("--dataset", o.dataset, "aligned dataset cache file");
    cmd->add_flag("--rebuild", o.rebuild, "rebuild the cache from --data-dir before running");
    cmd->add_option("--data-dir", o.data_dir,
                    "tick file directory (default: $DRQN_DATA_DIR or .)");
  }
  cmd->add_option("--pair", o.pair, "traded currency pair");
  cmd->add_option("--seed", o.seed, "random seed (recorded in outputs)");
  cmd->add_option("--spread-bp", o.spread_bp, "fixed spread in basis points");
  cmd->add_option("--initial-cash", o.initial_cash, "starting portfolio value");
  cmd->add_option("--trade-size", o.trade_size, "units per position change");
  cmd->add_option("--hidden", o.hidden, "network width");
  cmd->add_option("--memory", o.memory, "replay memory capacity");
  cmd->add_option("--seq-len", o.seq_len, "training sequence length and period");
  cmd->add_option("--gamma", o.gamma, "discount factor");
  cmd->add_option("--tau", o.tau, "target soft-update rate");
  cmd->add_option("--lr", o.lr, "Adam learning rate");
  cmd->add_option("--grad-clip", o.grad_clip, "global gradient-norm clip");
  cmd->add_flag("--epsilon-greedy", o.epsilon_greedy,
                "explore with epsilon-greedy instead of greedy+augmentation");
  cmd->add_option("--epsilon", o.epsilon, "exploration rate for --epsilon-greedy");
  cmd->add_option("--max-steps", o.max_steps, "stop after this many steps (0: full data)");
  cmd->add_option("--checkpoint-every", o.checkpoint_every,
                  "periodic checkpoint interval in steps (0: final only)");
  cmd->add_option("--out", o.out, "output directory (default: runs/<stamp>)");
  cmd->set_config("--config", "", "read options from a key=value file");
}

RunConfig to_run_config(const CliRunOptions& o) {
  RunConfig cfg;
  cfg.pair = normalize_pair(o.pair);
  cfg.seed = o.seed;
  cfg.spread_bp = o.spread_bp;
  cfg.initial_cash = o.initial_cash;
  cfg.trade_size = o.trade_size;
  cfg.hidden_dim = o.hidden;
  cfg.agent.memory_capacity = o.memory;
  cfg.agent.seq_len = o.seq_len;
  cfg.agent.gamma = o.gamma;
  cfg.agent.tau = o.tau;
  cfg.agent.adam.lr = o.lr;
  cfg.agent.grad_clip_norm = o.grad_clip;
  cfg.agent.mode =
      o.epsilon_greedy ? ExplorationMode::epsilon_greedy : ExplorationMode::greedy_augmented;
  cfg.agent.epsilon = o.epsilon;
  cfg.max_steps = o.max_steps;
  cfg.checkpoint_every = o.checkpoint_every;
  return cfg;
}

AlignedDataset load_or_build(const CliRunOptions& o) {
  if (o.rebuild || o.dataset.empty()) {
    AlignedDataset ds = ingest_directory(o.data_dir);
    if (!o.dataset.empty()) {
      save_dataset(ds, o.dataset);
      std::fprintf(stderr, "cached dataset to %s\n", o.dataset.c_str());
    }
    return ds;
  }
  return load_dataset(o.dataset);
}

// minimal key=value reader for config.toml snapshots written by runs
std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::map<std::string, std::string> kv;
  std::ifstream is(path);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.empty() || line[0] == '#') continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

int cmd_ingest(const std::string& data_dir, const std::string& out, std::size_t synthetic,
               const std::string& synthetic_kind, std::uint64_t synthetic_seed) {
  AlignedDataset ds;
  if (synthetic > 0) {
    ds = synthetic_kind == "walk" ? synthetic_random_dataset(synthetic, synthetic_seed)
                                  : synthetic_sine_dataset(synthetic);
  } else {
    ds = ingest_directory(data_dir);
  }
  save_dataset(ds, out);
  std::printf("dataset: %zu pairs, %zu slots", ds.pairs.size(), ds.num_slots());
  if (!ds.grid.empty()) {
    std::printf(", %s .. %s", format_timestamp(ds.grid.front()).c_str(),
                format_timestamp(ds.grid.back()).c_str());
  }
  std::printf("\nwrote %s\n", out.c_str());
  return 0;
}

int cmd_train(CliRunOptions& o, const std::string& resume) {
  RunConfig cfg = to_run_config(o);
  cfg.out_dir = o.out.empty() ? (fs::path("runs") / run_stamp(cfg.pair, cfg.seed)).string()
                              : o.out;
  const AlignedDataset ds = load_or_build(o);
  const RunResult res = run(cfg, ds, resume);

  std::printf("run complete: %zu steps, final value %.2f (%+.2f)\n", res.log.records.size(),
              res.final_value, res.final_value - res.initial_value);
  if (res.log.failed) std::printf("RUN FAILED: %s\n", res.log.fail_reason.c_str());
  std::ifstream report(fs::path(cfg.out_dir) / "report.txt");
  if (report) {
    std::stringstream ss;
    ss << report.rdbuf();
    std::printf("%s", ss.str().c_str());
  }
  std::printf("outputs in %s\n", cfg.out_dir.c_str());
  return res.log.failed ? 1 : 0;
}

int cmd_suite(CliRunOptions& o, std::size_t repeats, const std::vector<double>& spreads,
              std::size_t threads, std::uint64_t seed_stride) {
  const AlignedDataset ds = load_or_build(o);
  const std::string out_root =
      o.out.empty() ? (fs::path("runs") / run_stamp(normalize_pair(o.pair) + "_suite", o.seed))
                          .string()
                    : o.out;

  std::vector<RunConfig> configs;
  const std::vector<double> sweep = spreads.empty() ? std::vector<double>{o.spread_bp} : spreads;
  for (double bp : sweep) {
    RunConfig cfg = to_run_config(o);
    cfg.spread_bp = bp;
    char sub[64];
    std::snprintf(sub, sizeof sub, "spread_%g", bp);
    cfg.out_dir = (fs::path(out_root) / sub).string();
    configs.push_back(cfg);
  }

  const auto suite = run_suite(configs, ds, repeats, threads, seed_stride);
  for (const SuiteResult& s : suite) {
    write_suite_csv((fs::path(s.config.out_dir) / "suite.csv").string(), s, ds);
    double mean_final = 0.0;
    std::size_t ok = 0;
    for (const RunResult& r : s.runs) {
      if (!r.log.failed && !r.log.records.empty()) {
        mean_final += r.final_value;
        ++ok;
      }
    }
    if (ok > 0) mean_final /= static_cast<double>(ok);
    std::printf("spread %.3g bp: %zu/%zu runs ok, mean final value %.2f\n",
                s.config.spread_bp, ok, s.runs.size(), mean_final);
  }
  std::printf("outputs in %s\n", out_root.c_str());
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& dataset_path) {
  const auto kv = read_kv_file((fs::path(run_dir) / "config.toml").string());
  RunConfig cfg;
  if (auto it = kv.find("pair"); it != kv.end()) cfg.pair = it->second;
  if (auto it = kv.find("spread-bp"); it != kv.end()) cfg.spread_bp = std::stod(it->second);
  if (auto it = kv.find("initial-cash"); it != kv.end()) {
    cfg.initial_cash = std::stod(it->second);
  }
  if (auto it = kv.find("trade-size"); it != kv.end()) cfg.trade_size = std::stod(it->second);
  cfg.out_dir = run_dir;

  RunResult res;
  res.initial_value = cfg.initial_cash;
  res.log = read_runlog_csv((fs::path(run_dir) / "runlog.csv").string());
  res.trades = read_trades_csv((fs::path(run_dir) / "trades.csv").string());
  if (!res.log.records.empty()) res.final_value = res.log.records.back().value;

  const AlignedDataset ds = load_dataset(dataset_path);
  write_run_report(cfg, ds, res);
  std::ifstream report(fs::path(run_dir) / "report.txt");
  std::stringstream ss;
  ss << report.rdbuf();
  std::printf("%s", ss.str().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online recurrent Q-learning trader for 15-minute FX panels"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "build an aligned dataset cache from tick files");
  std::string ingest_dir = default_data_dir();
  std::string ingest_out = "dataset.bin";
  std::size_t synthetic = 0;
  std::string synthetic_kind = "sine";
  std::uint64_t synthetic_seed = 1;
  ingest->add_option("--data-dir", ingest_dir,
                     "directory of per-pair tick files (default: $DRQN_DATA_DIR or .)");
  ingest->add_option("--out", ingest_out, "cache file to write");
  ingest->add_option("--synthetic", synthetic,
                     "generate a synthetic panel with this many slots instead of reading files");
  ingest->add_option("--synthetic-kind", synthetic_kind, "sine or walk")
      ->check(CLI::IsMember({"sine", "walk"}));
  ingest->add_option("--synthetic-seed", synthetic_seed, "seed for --synthetic-kind walk");

  // train
  auto* train = app.add_subcommand("train", "run the online learner once");
  CliRunOptions train_opts;
  std::string resume;
  add_run_options(train, train_opts);
  train->add_option("--resume", resume, "continue from a checkpoint file");

  // suite
  auto* suite = app.add_subcommand("suite", "repeated runs and spread sweeps");
  CliRunOptions suite_opts;
  std::size_t repeats = 5;
  std::vector<double> spreads;
  std::size_t threads = 0;
  std::uint64_t seed_stride = 1;
  add_run_options(suite, suite_opts);
  suite->add_option("--repeats", repeats, "independent runs per configuration");
  suite->add_option("--spreads", spreads, "spread sweep in bp (one config per value)")
      ->delimiter(',');
  suite->add_option("--threads", threads, "max parallel runs (0: hardware)");
  suite->add_option("--seed-stride", seed_stride, "seed increment between repeats");

  // report
  auto* report = app.add_subcommand("report", "recompute analytics from a run directory");
  std::string run_dir;
  std::string report_dataset;
  report->add_option("--run-dir", run_dir, "run directory with runlog.csv and trades.csv")
      ->required();
  report->add_option("--dataset", report_dataset, "dataset cache for baseline curves")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      return cmd_ingest(ingest_dir, ingest_out, synthetic, synthetic_kind, synthetic_seed);
    }
    if (*train) return cmd_train(train_opts, resume);
    if (*suite) return cmd_suite(suite_opts, repeats, spreads, threads, seed_stride);
    if (*report) return cmd_report(run_dir, report_dataset);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
