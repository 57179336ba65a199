#include <catch2/catch.hpp>

#include <cmath>

#include "drqn/rng.hpp"
#include "drqn/synthetic.hpp"
#include "drqn/trading_env.hpp"

using namespace drqn;

namespace {

constexpr double kCash = 100000.0;
constexpr double kSize = 100000.0;

// Synthetic panel whose traded pair takes prescribed (open, close) bars from
// the first stepped slot onward.
AlignedDataset scripted_dataset(std::size_t traded,
                                const std::vector<std::pair<double, double>>& bars,
                                std::size_t total_slots = 0) {
  const std::size_t first = kFirstObservableSlot + 1;
  const std::size_t slots = total_slots > 0 ? total_slots : first + bars.size();
  AlignedDataset ds = synthetic_sine_dataset(slots);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    Bar& b = ds.bars[traded][first + i];
    b.open = bars[i].first;
    b.close = bars[i].second;
    b.high = std::max(b.open, b.close);
    b.low = std::min(b.open, b.close);
  }
  return ds;
}

}  // namespace

TEST_CASE("action value/index bijection") {
  CHECK(Action::from_index(0).value == -1);
  CHECK(Action::from_index(1).value == 0);
  CHECK(Action::from_index(2).value == 1);
  for (std::size_t i = 0; i < kNumActions; ++i) CHECK(Action::from_index(i).index() == i);
  CHECK_THROWS_AS(Action::from_value(2), std::invalid_argument);
  CHECK_THROWS_AS(Action::from_index(3), std::invalid_argument);
}

TEST_CASE("commission follows c * |da| * spread") {
  const double spread = 8e-6;
  CHECK(commission(Action::from_value(0), Action::from_value(1), kSize, spread) ==
        Approx(0.8).epsilon(1e-12));
  CHECK(commission(Action::from_value(1), Action::from_value(1), kSize, spread) == 0.0);
  // reversal doubles the transaction cost
  CHECK(commission(Action::from_value(1), Action::from_value(-1), kSize, spread) ==
        Approx(1.6).epsilon(1e-12));
}

TEST_CASE("step marks the book over the next bar's open-to-close move") {
  const AlignedDataset ds = scripted_dataset(0, {{1.0000, 1.0010}, {1.0010, 1.0010}});
  TradingEnv env(ds, 0, 8e-6, kCash, kSize);

  const StepResult r1 = env.step(Action::from_value(1));
  CHECK(env.ledger().value == Approx(100099.2).epsilon(1e-12));
  CHECK(r1.reward == Approx(std::log(1.000992)).epsilon(1e-12));
  CHECK(r1.reward == Approx(9.915e-4).epsilon(1e-3));
  CHECK(env.ledger().position == 1);

  // held position over a flat bar: no move, no commission
  const StepResult r2 = env.step(Action::from_value(1));
  CHECK(r2.reward == 0.0);
  CHECK(env.ledger().value == Approx(100099.2).epsilon(1e-12));
}

TEST_CASE("flat position over any bar is reward zero") {
  const AlignedDataset ds = scripted_dataset(3, {{1.0, 1.2}});
  TradingEnv env(ds, 3, 8e-6, kCash, kSize);
  const StepResult r = env.step(Action::from_value(0));
  CHECK(r.reward == 0.0);
  CHECK(env.ledger().value == kCash);
}

TEST_CASE("augmented rewards cover all actions under zero market impact") {
  SECTION("ten currency units of unrealized PnL, zero spread") {
    const AlignedDataset ds = scripted_dataset(0, {{1.0, 1.0001}});
    TradingEnv env(ds, 0, 0.0, kCash, kSize);
    const StepResult r = env.step(Action::from_value(1));
    CHECK(r.transition.reward_vec[2] == Approx(std::log(1.0 + 10.0 / kCash)).epsilon(1e-12));
    CHECK(r.transition.reward_vec[1] == 0.0);
    CHECK(r.transition.reward_vec[0] == Approx(std::log(1.0 - 10.0 / kCash)).epsilon(1e-12));
  }
  SECTION("zero price move from flat with zero spread") {
    const AlignedDataset ds = scripted_dataset(0, {{1.0, 1.0}});
    TradingEnv env(ds, 0, 0.0, kCash, kSize);
    const StepResult r = env.step(Action::from_value(0));
    CHECK(r.transition.reward_vec == std::array<double, 3>{0.0, 0.0, 0.0});
  }
}

TEST_CASE("executed entry of the reward vector is the step reward, bit for bit") {
  const AlignedDataset ds = synthetic_random_dataset(400, 77);
  TradingEnv env(ds, 5, 8e-6, kCash, kSize);
  Rng rng(123);
  while (env.has_next()) {
    const Action a = Action::from_index(rng.uniform_int(kNumActions));
    const StepResult r = env.step(a);
    CHECK(r.transition.reward_vec[a.index()] == r.reward);
    CHECK(r.transition.executed_index == a.index());
  }
}

TEST_CASE("next_core is identical regardless of the executed action") {
  const AlignedDataset ds = synthetic_random_dataset(300, 19);
  TradingEnv env_a(ds, 2, 8e-6, kCash, kSize);
  TradingEnv env_b(ds, 2, 8e-6, kCash, kSize);
  Rng rng(5);
  while (env_a.has_next()) {
    const Action aa = Action::from_index(rng.uniform_int(kNumActions));
    const Action ab = Action::from_index(rng.uniform_int(kNumActions));
    const StepResult ra = env_a.step(aa);
    const StepResult rb = env_b.step(ab);
    REQUIRE(ra.transition.next_core == rb.transition.next_core);
  }
}

TEST_CASE("rewards telescope to the total portfolio log return") {
  const AlignedDataset ds = synthetic_random_dataset(2200, 31);
  TradingEnv env(ds, 7, 8e-6, kCash, kSize);
  Rng rng(7);
  double sum = 0.0;
  while (env.has_next()) {
    sum += env.step(Action::from_index(rng.uniform_int(kNumActions))).reward;
  }
  const double total = std::log(env.ledger().value / kCash);
  CHECK(sum == Approx(total).epsilon(1e-9));
}

TEST_CASE("trade log books round trips with split reversal commission") {
  // commission per unit position change: 100000 * 1e-5 = 1
  const double spread = 1e-5;
  const AlignedDataset ds = scripted_dataset(
      0, {{1.00, 1.01}, {1.01, 1.02}, {1.02, 1.00}, {1.00, 0.995}, {0.995, 0.995}});
  TradingEnv env(ds, 0, spread, kCash, kSize);
  const std::size_t first = kFirstObservableSlot + 1;

  env.step(Action::from_value(1));   // open long
  env.step(Action::from_value(1));   // hold
  env.step(Action::from_value(-1));  // reversal
  env.step(Action::from_value(0));   // close short
  env.step(Action::from_value(0));   // stay flat

  const auto& trades = env.ledger().trades;
  REQUIRE(trades.size() == 2);
  CHECK_FALSE(env.ledger().open_trade.has_value());

  CHECK(trades[0].direction == 1);
  CHECK(trades[0].entry_slot == first);
  CHECK(trades[0].exit_slot == first + 2);
  CHECK(trades[0].entry_price == 1.00);
  CHECK(trades[0].exit_price == 1.02);
  CHECK(trades[0].pnl == Approx(1998.0).epsilon(1e-12));

  // -1 half reversal commission, +2000 short gain, -1 exit commission
  CHECK(trades[1].direction == -1);
  CHECK(trades[1].entry_slot == first + 2);
  CHECK(trades[1].exit_slot == first + 3);
  CHECK(trades[1].entry_price == 1.02);
  CHECK(trades[1].exit_price == 1.00);
  CHECK(trades[1].pnl == Approx(1998.0).epsilon(1e-12));

  // closed trade PnL accounts for the full equity change
  CHECK(trades[0].pnl + trades[1].pnl ==
        Approx(env.ledger().value - kCash).epsilon(1e-12));
  CHECK(env.ledger().value == Approx(103996.0).epsilon(1e-12));
}

TEST_CASE("a wiped-out portfolio raises a bankruptcy error") {
  const AlignedDataset ds = scripted_dataset(0, {{1.0, 0.9}});
  TradingEnv env(ds, 0, 0.0, 100.0, kSize);  // 10000 loss on a 100 account
  CHECK_THROWS_AS(env.step(Action::from_value(0)), BankruptcyError);
}

TEST_CASE("baseline equity curves") {
  SECTION("monotone rising price makes buy-and-hold strictly rise") {
    std::vector<std::pair<double, double>> bars;
    double p = 1.0;
    for (int i = 0; i < 10; ++i) {
      bars.emplace_back(p, p + 0.001);
      p += 0.001;
    }
    const AlignedDataset ds = scripted_dataset(0, bars);
    const auto eq = baseline_equity(ds, 0, BaselineMode::buy_and_hold, 8e-6, kCash, kSize,
                                    kFirstObservableSlot + 1);
    REQUIRE(eq.size() == bars.size());
    for (std::size_t i = 1; i < eq.size(); ++i) CHECK(eq[i] > eq[i - 1]);
  }
  SECTION("sell-and-hold mirrors buy-and-hold around initial equity at zero spread") {
    const AlignedDataset ds = synthetic_random_dataset(300, 3);
    const auto buy = baseline_equity(ds, 4, BaselineMode::buy_and_hold, 0.0, kCash, kSize);
    const auto sell = baseline_equity(ds, 4, BaselineMode::sell_and_hold, 0.0, kCash, kSize);
    REQUIRE(buy.size() == sell.size());
    for (std::size_t i = 0; i < buy.size(); ++i) {
      CHECK(buy[i] - kCash == Approx(-(sell[i] - kCash)).margin(1e-6));
    }
  }
  SECTION("flat prices cost exactly the entry commission") {
    AlignedDataset ds = synthetic_sine_dataset(120);
    for (Bar& b : ds.bars[1]) {
      b.open = b.high = b.low = b.close = 1.25;
    }
    const auto eq = baseline_equity(ds, 1, BaselineMode::buy_and_hold, 8e-6, kCash, kSize);
    for (double v : eq) CHECK(v == Approx(kCash - 0.8).epsilon(1e-12));
  }
}

TEST_CASE("constant-action environment equity equals the baseline at zero spread") {
  const AlignedDataset ds = synthetic_random_dataset(400, 13);
  TradingEnv env(ds, 9, 0.0, kCash, kSize);
  const auto baseline = baseline_equity(ds, 9, BaselineMode::sell_and_hold, 0.0, kCash, kSize,
                                        kFirstObservableSlot + 1);
  std::size_t i = 0;
  while (env.has_next()) {
    env.step(Action::from_value(-1));
    REQUIRE(env.ledger().value == baseline[i]);
    ++i;
  }
  CHECK(i == baseline.size());
}

TEST_CASE("environment state round-trips through save/load") {
  const AlignedDataset ds = synthetic_random_dataset(350, 99);
  TradingEnv env(ds, 6, 8e-6, kCash, kSize);
  Rng rng(17);
  for (int i = 0; i < 120; ++i) env.step(Action::from_index(rng.uniform_int(kNumActions)));

  std::stringstream buf;
  env.save(buf);
  TradingEnv restored(ds, 6, 8e-6, kCash, kSize);
  restored.load(buf);

  CHECK(restored.ledger().value == env.ledger().value);
  CHECK(restored.ledger().position == env.ledger().position);
  CHECK(restored.cursor() == env.cursor());
  Rng rng2(29);
  while (env.has_next()) {
    const Action a = Action::from_index(rng2.uniform_int(kNumActions));
    const StepResult ra = env.step(a);
    const StepResult rb = restored.step(a);
    REQUIRE(ra.reward == rb.reward);
    REQUIRE(ra.transition.state == rb.transition.state);
    REQUIRE(ra.transition.next_core == rb.transition.next_core);
  }
}
