#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "drqn/common.hpp"
#include "drqn/features.hpp"
#include "drqn/market_data.hpp"

namespace drqn {

// Target-position action: the value IS the desired position in units.
// index 0 <-> -1, 1 <-> 0, 2 <-> +1.
struct Action {
  int value = 0;

  static Action from_index(std::size_t index) {
    if (index > 2) throw std::invalid_argument("action index out of range");
    return Action{static_cast<int>(index) - 1};
  }

  static Action from_value(int value) {
    if (value < -1 || value > 1) throw std::invalid_argument("action value out of range");
    return Action{value};
  }

  std::size_t index() const { return static_cast<std::size_t>(value + 1); }
};

inline constexpr std::size_t kNumActions = 3;

// Entry/exit commissions are attributed to the trade; a reversal splits its
// doubled commission half to the closing trade, half to the opening one.
struct TradeRecord {
  int direction = 0;  // +1 long, -1 short
  std::size_t entry_slot = 0;
  std::size_t exit_slot = 0;
  double entry_price = 0.0;
  double exit_price = 0.0;
  double pnl = 0.0;
};

// Commission for moving the position from a_prev to a_new: c * |da| * spread.
inline double commission(Action a_prev, Action a_new, double trade_size, double spread_price) {
  return trade_size * std::abs(a_new.value - a_prev.value) * spread_price;
}

struct PortfolioLedger {
  double value = 0.0;
  int position = 0;
  double trade_size = 0.0;
  double spread_price = 0.0;
  std::vector<TradeRecord> trades;           // closed round trips
  std::optional<TradeRecord> open_trade;
};

// Per-action portfolio values for the upcoming bar under the zero market
// impact hypothesis: v(a) = v + a*c*(close - open) - c*|a - position|*spread.
inline std::array<double, kNumActions> candidate_values(const PortfolioLedger& ledger,
                                                        const Bar& bar) {
  std::array<double, kNumActions> v{};
  for (std::size_t i = 0; i < kNumActions; ++i) {
    const Action a = Action::from_index(i);
    v[i] = ledger.value + a.value * ledger.trade_size * (bar.close - bar.open) -
           commission(Action::from_value(ledger.position), a, ledger.trade_size,
                      ledger.spread_price);
  }
  return v;
}

// Per-action log-return rewards for the upcoming bar.
inline std::array<double, kNumActions> augment_rewards(const PortfolioLedger& ledger,
                                                       const Bar& bar) {
  const auto v = candidate_values(ledger, bar);
  std::array<double, kNumActions> r{};
  for (std::size_t i = 0; i < kNumActions; ++i) {
    if (!(v[i] > 0.0)) {
      throw BankruptcyError("portfolio value non-positive under action " +
                            std::to_string(static_cast<int>(i) - 1));
    }
    r[i] = std::log(v[i] / ledger.value);
  }
  return r;
}

// One timestep: observed state, per-action reward vector, the 195 shared
// non-position features of the next state, and the executed action.
struct AugmentedTransition {
  std::vector<double> state;
  std::array<double, kNumActions> reward_vec{};
  std::vector<double> next_core;
  std::size_t executed_index = 1;
  std::int64_t slot = 0;  // grid slot of the stepped bar

  std::vector<double> next_state(std::size_t action_index) const {
    std::vector<double> s;
    s.reserve(next_core.size() + kNumActions);
    s.insert(s.end(), next_core.begin(), next_core.end());
    for (std::size_t i = 0; i < kNumActions; ++i) s.push_back(i == action_index ? 1.0 : 0.0);
    return s;
  }
};

struct StepResult {
  double reward = 0.0;
  MarketState next_state;
  AugmentedTransition transition;
};

// The trading MDP over one traded pair of an aligned panel. Orders execute
// at the next bar's open; each step marks the book over that bar's
// open-to-close move and advances the feature pipeline by one slot.
class TradingEnv {
 public:
  TradingEnv(const AlignedDataset& dataset, std::size_t traded_pair, double spread_price,
             double initial_cash, double trade_size)
      : dataset_(&dataset),
        traded_pair_(traded_pair),
        pipeline_(dataset),
        initial_cash_(initial_cash) {
    if (traded_pair >= dataset.pairs.size()) {
      throw std::invalid_argument("traded pair index out of range");
    }
    if (spread_price < 0.0) throw std::invalid_argument("spread must be non-negative");
    ledger_.trade_size = trade_size;
    ledger_.spread_price = spread_price;
    reset();
  }

  // Warms the feature windows and returns the initial observation.
  MarketState reset() {
    if (dataset_->num_slots() <= kFirstObservableSlot) {
      throw FeatureError("dataset too short for feature warm-up: " +
                         std::to_string(dataset_->num_slots()) + " slots");
    }
    pipeline_ = FeaturePipeline(*dataset_);
    for (std::size_t s = 0; s <= kFirstObservableSlot; ++s) pipeline_.ingest(s);
    cursor_ = kFirstObservableSlot;
    ledger_.value = initial_cash_;
    ledger_.position = 0;
    ledger_.trades.clear();
    ledger_.open_trade.reset();
    current_state_ = pipeline_.state(0);
    return current_state_;
  }

  bool has_next() const { return cursor_ + 1 < dataset_->num_slots(); }

  std::size_t cursor() const { return cursor_; }
  const PortfolioLedger& ledger() const { return ledger_; }
  const MarketState& current_state() const { return current_state_; }
  const AlignedDataset& dataset() const { return *dataset_; }
  std::size_t traded_pair() const { return traded_pair_; }

  // Applies the target-position action at the next bar's open.
  StepResult step(Action action) {
    if (!has_next()) throw std::out_of_range("no bars left to step");
    const std::size_t slot = cursor_ + 1;
    const Bar& bar = dataset_->bars[traded_pair_][slot];

    StepResult res;
    res.transition.state = current_state_.to_vector();
    res.transition.reward_vec = augment_rewards(ledger_, bar);  // throws on bankruptcy
    res.transition.executed_index = action.index();
    res.transition.slot = static_cast<std::int64_t>(slot);
    res.reward = res.transition.reward_vec[action.index()];

    // Commit the executed action to the ledger and trade log.
    const auto values = candidate_values(ledger_, bar);
    update_trades(action, bar, slot);
    ledger_.value = values[action.index()];
    ledger_.position = action.value;

    pipeline_.ingest(slot);
    cursor_ = slot;
    res.transition.next_core = pipeline_.core_features();
    res.next_state = pipeline_.state(ledger_.position);
    current_state_ = res.next_state;
    return res;
  }

  void save(std::ostream& os) const {
    write_u64(os, cursor_);
    write_f64(os, ledger_.value);
    write_i64(os, ledger_.position);
    write_u64(os, ledger_.trades.size());
    for (const TradeRecord& t : ledger_.trades) write_trade(os, t);
    write_u64(os, ledger_.open_trade ? 1 : 0);
    if (ledger_.open_trade) write_trade(os, *ledger_.open_trade);
    pipeline_.save(os);
  }

  void load(std::istream& is) {
    cursor_ = read_u64(is, "env cursor");
    ledger_.value = read_f64(is, "ledger value");
    ledger_.position = static_cast<int>(read_i64(is, "ledger position"));
    ledger_.trades.resize(read_u64(is, "trade count"));
    for (TradeRecord& t : ledger_.trades) t = read_trade(is);
    ledger_.open_trade.reset();
    if (read_u64(is, "open trade flag") != 0) ledger_.open_trade = read_trade(is);
    pipeline_ = FeaturePipeline(*dataset_);
    pipeline_.load(is);
    current_state_ = pipeline_.state(ledger_.position);
  }

 private:
  static void write_trade(std::ostream& os, const TradeRecord& t) {
    write_i64(os, t.direction);
    write_u64(os, t.entry_slot);
    write_u64(os, t.exit_slot);
    write_f64(os, t.entry_price);
    write_f64(os, t.exit_price);
    write_f64(os, t.pnl);
  }

  static TradeRecord read_trade(std::istream& is) {
    TradeRecord t;
    t.direction = static_cast<int>(read_i64(is, "trade direction"));
    t.entry_slot = read_u64(is, "trade entry slot");
    t.exit_slot = read_u64(is, "trade exit slot");
    t.entry_price = read_f64(is, "trade entry price");
    t.exit_price = read_f64(is, "trade exit price");
    t.pnl = read_f64(is, "trade pnl");
    return t;
  }

  void close_open_trade(const Bar& bar, std::size_t slot, double commission_share) {
    auto& t = *ledger_.open_trade;
    t.exit_slot = slot;
    t.exit_price = bar.open;
    t.pnl -= commission_share;
    ledger_.trades.push_back(t);
    ledger_.open_trade.reset();
  }

  void open_new_trade(Action a, const Bar& bar, std::size_t slot, double commission_share) {
    TradeRecord t;
    t.direction = a.value;
    t.entry_slot = slot;
    t.entry_price = bar.open;
    t.pnl = -commission_share;
    ledger_.open_trade = t;
  }

  // A trade opens when the position leaves 0 or reverses and closes when it
  // returns to 0 or reverses. The trade holding the position over this bar
  // accrues its open-to-close PnL.
  void update_trades(Action a, const Bar& bar, std::size_t slot) {
    const int prev = ledger_.position;
    const double d = commission(Action::from_value(prev), a, ledger_.trade_size,
                                ledger_.spread_price);
    if (a.value != prev) {
      if (prev == 0) {
        open_new_trade(a, bar, slot, d);
      } else if (a.value == 0) {
        close_open_trade(bar, slot, d);
      } else {  // reversal
        close_open_trade(bar, slot, 0.5 * d);
        open_new_trade(a, bar, slot, 0.5 * d);
      }
    }
    if (ledger_.open_trade) {
      ledger_.open_trade->pnl += a.value * ledger_.trade_size * (bar.close - bar.open);
    }
  }

  const AlignedDataset* dataset_;
  std::size_t traded_pair_;
  FeaturePipeline pipeline_;
  double initial_cash_;
  PortfolioLedger ledger_;
  MarketState current_state_;
  std::size_t cursor_ = 0;
};

enum class BaselineMode { buy_and_hold, sell_and_hold };

// Equity of holding a constant +/-1 unit position over [first_slot,
// num_slots), commission charged once at entry. Element k is the portfolio
// value after the bar at first_slot + k.
inline std::vector<double> baseline_equity(const AlignedDataset& dataset, std::size_t pair,
                                           BaselineMode mode, double spread_price,
                                           double initial_cash, double trade_size,
                                           std::size_t first_slot = 0) {
  if (dataset.num_slots() == 0 || first_slot >= dataset.num_slots()) return {};
  const int a = mode == BaselineMode::buy_and_hold ? 1 : -1;
  std::vector<double> equity;
  equity.reserve(dataset.num_slots() - first_slot);
  double v = initial_cash - trade_size * spread_price;
  for (std::size_t s = first_slot; s < dataset.num_slots(); ++s) {
    const Bar& bar = dataset.bars[pair][s];
    v += a * trade_size * (bar.close - bar.open);
    equity.push_back(v);
  }
  return equity;
}

}  // namespace drqn
