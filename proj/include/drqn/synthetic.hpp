#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "drqn/common.hpp"
#include "drqn/market_data.hpp"
#include "drqn/rng.hpp"

namespace drqn {

// Synthetic aligned panels over the 12-pair universe, for experiments and
// simulations that do not depend on vendor tick data. Bars are gap-free:
// each open equals the previous close.

namespace detail {

inline Bar make_bar(std::int64_t start_ms, double open, double close, std::int64_t volume) {
  Bar b;
  b.start_ms = start_ms;
  b.open = open;
  b.close = close;
  b.high = std::max(open, close);
  b.low = std::min(open, close);
  b.tick_volume = volume;
  return b;
}

}  // namespace detail

// Deterministic sinusoidal panel: pair p follows
//   price(t) = base_p * (1 + amplitude * sin(2*pi*t/period + phase_p)).
// Volumes carry their own slow cycle so volume features are non-degenerate.
inline AlignedDataset synthetic_sine_dataset(std::size_t n_slots, double amplitude = 0.01,
                                             double period = 192.0,
                                             std::int64_t start_ms = 1325462400000LL) {
  AlignedDataset ds;
  ds.pairs = pair_universe();
  ds.grid.resize(n_slots);
  for (std::size_t s = 0; s < n_slots; ++s) {
    ds.grid[s] = start_ms + static_cast<std::int64_t>(s) * kBarIntervalMs;
  }
  ds.bars.resize(ds.pairs.size());
  for (std::size_t p = 0; p < ds.pairs.size(); ++p) {
    const double base = is_jpy_quoted(ds.pairs[p]) ? 100.0 : 1.3;
    const double phase = 0.37 * static_cast<double>(p);
    auto price = [&](std::size_t t) {
      return base * (1.0 + amplitude * std::sin(kTwoPi * static_cast<double>(t) / period + phase));
    };
    ds.bars[p].reserve(n_slots);
    for (std::size_t s = 0; s < n_slots; ++s) {
      const auto volume = static_cast<std::int64_t>(
          100.0 + 40.0 * std::sin(kTwoPi * static_cast<double>(s) / 96.0 + phase));
      ds.bars[p].push_back(detail::make_bar(ds.grid[s], price(s), price(s + 1), volume));
    }
  }
  return ds;
}

// Geometric random-walk panel with per-step volatility `sigma`.
inline AlignedDataset synthetic_random_dataset(std::size_t n_slots, std::uint64_t seed,
                                               double sigma = 5e-4,
                                               std::int64_t start_ms = 1325462400000LL) {
  AlignedDataset ds;
  ds.pairs = pair_universe();
  ds.grid.resize(n_slots);
  for (std::size_t s = 0; s < n_slots; ++s) {
    ds.grid[s] = start_ms + static_cast<std::int64_t>(s) * kBarIntervalMs;
  }
  Rng rng(seed);
  ds.bars.resize(ds.pairs.size());
  for (std::size_t p = 0; p < ds.pairs.size(); ++p) {
    double price = is_jpy_quoted(ds.pairs[p]) ? 100.0 : 1.3;
    ds.bars[p].reserve(n_slots);
    for (std::size_t s = 0; s < n_slots; ++s) {
      const double next = price * std::exp(sigma * rng.normal());
      const auto volume = static_cast<std::int64_t>(20 + rng.uniform_int(200));
      ds.bars[p].push_back(detail::make_bar(ds.grid[s], price, next, volume));
      price = next;
    }
  }
  return ds;
}

}  // namespace drqn
