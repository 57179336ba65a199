#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "drqn/common.hpp"
#include "drqn/market_data.hpp"
#include "drqn/serialize.hpp"
#include "drqn/time_utils.hpp"

namespace drqn {

struct TimeFeatures {
  double minute_enc = 0.0;
  double hour_enc = 0.0;
  double dow_enc = 0.0;
};

// Cyclic encoding sin(2*pi*t/T), zero-based t. Minute of hour, hour of day,
// day of week with Monday = 0.
inline TimeFeatures time_features(std::int64_t epoch_ms) {
  TimeFeatures f;
  f.minute_enc = std::sin(kTwoPi * minute_of_hour(epoch_ms) / 60.0);
  f.hour_enc = std::sin(kTwoPi * hour_of_day(epoch_ms) / 24.0);
  f.dow_enc = std::sin(kTwoPi * weekday(epoch_ms) / 7.0);
  return f;
}

struct MarketFeatures {
  std::array<double, kMarketDim> values{};
};

struct PositionFeature {
  std::array<double, kPositionDim> one_hot{};
};

inline PositionFeature encode_position(int position) {
  if (position < -1 || position > 1) throw std::invalid_argument("position must be in {-1,0,1}");
  PositionFeature f;
  f.one_hot[static_cast<std::size_t>(position + 1)] = 1.0;
  return f;
}

struct MarketState {
  TimeFeatures time;
  MarketFeatures market;
  PositionFeature position;

  // Flattened [time | market | position], length 198.
  std::vector<double> to_vector() const {
    std::vector<double> v;
    v.reserve(kStateDim);
    v.push_back(time.minute_enc);
    v.push_back(time.hour_enc);
    v.push_back(time.dow_enc);
    v.insert(v.end(), market.values.begin(), market.values.end());
    v.insert(v.end(), position.one_hot.begin(), position.one_hot.end());
    return v;
  }
};

inline MarketState assemble_state(const TimeFeatures& time, const MarketFeatures& market,
                                  int position) {
  MarketState s;
  s.time = time;
  s.market = market;
  s.position = encode_position(position);
  return s;
}

// out[i] = ln(x[n-1-i] / x[n-2-i]): the 8 most recent log returns, newest
// first, from the last 9 values.
inline std::array<double, kReturnWindow> log_return_stack(std::span<const double> series) {
  if (series.size() != kReturnWindow + 1) {
    throw FeatureError("log_return_stack needs exactly 9 values");
  }
  std::array<double, kReturnWindow> out{};
  for (std::size_t i = 0; i < kReturnWindow; ++i) {
    const double num = series[kReturnWindow - i];
    const double den = series[kReturnWindow - i - 1];
    if (!(num > 0.0) || !(den > 0.0)) {
      throw FeatureError("log_return_stack requires positive values");
    }
    out[i] = std::log(num / den);
  }
  return out;
}

// Rolling z-score over the most recent `window` raw values, current value
// included in its own window. Statistics are recomputed over the stored
// window on every emission, so streaming output matches direct recomputation
// bit for bit.
class RollingNormalizer {
 public:
  explicit RollingNormalizer(std::size_t window = kZScoreWindow, double clip = kZScoreClip)
      : window_(window), clip_(clip), buf_(window, 0.0) {}

  double update(double raw) {
    buf_[next_] = raw;
    next_ = (next_ + 1) % window_;
    if (count_ < window_) ++count_;

    double mean = 0.0;
    for (std::size_t i = 0; i < count_; ++i) mean += buf_[i];
    mean /= static_cast<double>(count_);
    double var = 0.0;
    for (std::size_t i = 0; i < count_; ++i) {
      const double d = buf_[i] - mean;
      var += d * d;
    }
    const double std_dev = std::sqrt(var / static_cast<double>(count_));
    if (std_dev < 1e-8) return 0.0;
    const double z = (raw - mean) / std_dev;
    return std::clamp(z, -clip_, clip_);
  }

  std::size_t count() const { return count_; }

  void save(std::ostream& os) const {
    write_u64(os, window_);
    write_u64(os, count_);
    write_u64(os, next_);
    write_f64_vec(os, buf_);
  }

  static RollingNormalizer load(std::istream& is) {
    RollingNormalizer n(1);
    n.window_ = read_u64(is, "normalizer window");
    n.count_ = read_u64(is, "normalizer count");
    n.next_ = read_u64(is, "normalizer cursor");
    n.buf_ = read_f64_vec(is, "normalizer buffer");
    return n;
  }

 private:
  std::size_t window_;
  double clip_;
  std::vector<double> buf_;
  std::size_t count_ = 0;
  std::size_t next_ = 0;  // slot the next value lands in == oldest value
};

// Causal feature pipeline over the aligned panel. Feed slots in order; once
// kFirstObservableSlot slots are in, core_features() yields the 195 non-
// position entries of the state at the last ingested slot.
class FeaturePipeline {
 public:
  explicit FeaturePipeline(const AlignedDataset& dataset) : dataset_(&dataset) {
    if (dataset.pairs.size() != kNumPairs) {
      throw FeatureError("feature pipeline requires exactly 12 pairs, got " +
                         std::to_string(dataset.pairs.size()));
    }
    pair_hist_.resize(kNumPairs);
    normalizers_.resize(kMarketDim, RollingNormalizer(kZScoreWindow, kZScoreClip));
  }

  // Ingests grid slot `slot`; must be called for slots 0,1,2,... in order.
  void ingest(std::size_t slot) {
    if (slot != next_slot_) throw std::invalid_argument("pipeline slots must be fed in order");
    ++next_slot_;

    for (std::size_t p = 0; p < kNumPairs; ++p) {
      const Bar& bar = dataset_->bars[p][slot];
      auto& hist = pair_hist_[p];
      hist.push(bar.close, std::max<double>(static_cast<double>(bar.tick_volume), 1.0));
    }
    if (pair_hist_[0].full()) {
      for (std::size_t p = 0; p < kNumPairs; ++p) {
        const auto close_rets = log_return_stack(pair_hist_[p].closes());
        const auto vol_rets = log_return_stack(pair_hist_[p].volumes());
        const std::size_t base = p * kFeaturesPerPair;
        for (std::size_t i = 0; i < kReturnWindow; ++i) {
          market_.values[base + i] = normalizers_[base + i].update(close_rets[i]);
          market_.values[base + kReturnWindow + i] =
              normalizers_[base + kReturnWindow + i].update(vol_rets[i]);
        }
      }
    }
  }

  bool state_available() const { return next_slot_ > kFirstObservableSlot; }

  // [time | market] of the last ingested slot, length 195.
  std::vector<double> core_features() const {
    if (!state_available()) throw FeatureError("feature pipeline still warming up");
    const TimeFeatures t = time_features(dataset_->grid[next_slot_ - 1]);
    std::vector<double> core;
    core.reserve(kCoreDim);
    core.push_back(t.minute_enc);
    core.push_back(t.hour_enc);
    core.push_back(t.dow_enc);
    core.insert(core.end(), market_.values.begin(), market_.values.end());
    return core;
  }

  MarketState state(int position) const {
    if (!state_available()) throw FeatureError("feature pipeline still warming up");
    return assemble_state(time_features(dataset_->grid[next_slot_ - 1]), market_, position);
  }

  std::size_t next_slot() const { return next_slot_; }

  void save(std::ostream& os) const {
    write_u64(os, next_slot_);
    for (const auto& h : pair_hist_) h.save(os);
    for (const auto& n : normalizers_) n.save(os);
    for (double v : market_.values) write_f64(os, v);
  }

  void load(std::istream& is) {
    next_slot_ = read_u64(is, "pipeline slot");
    for (auto& h : pair_hist_) h.load(is);
    for (auto& n : normalizers_) n = RollingNormalizer::load(is);
    for (double& v : market_.values) v = read_f64(is, "pipeline market value");
  }

 private:
  // Last 9 closes and floored volumes of one pair, oldest first.
  struct History {
    std::array<double, kReturnWindow + 1> close{};
    std::array<double, kReturnWindow + 1> volume{};
    std::size_t count = 0;

    void push(double c, double v) {
      if (count < close.size()) {
        close[count] = c;
        volume[count] = v;
        ++count;
      } else {
        for (std::size_t i = 0; i + 1 < close.size(); ++i) {
          close[i] = close[i + 1];
          volume[i] = volume[i + 1];
        }
        close.back() = c;
        volume.back() = v;
      }
    }

    bool full() const { return count == close.size(); }
    std::span<const double> closes() const { return {close.data(), close.size()}; }
    std::span<const double> volumes() const { return {volume.data(), volume.size()}; }

    void save(std::ostream& os) const {
      write_u64(os, count);
      for (double v : close) write_f64(os, v);
      for (double v : volume) write_f64(os, v);
    }

    void load(std::istream& is) {
      count = read_u64(is, "history count");
      for (double& v : close) v = read_f64(is, "history close");
      for (double& v : volume) v = read_f64(is, "history volume");
    }
  };

  const AlignedDataset* dataset_;
  std::vector<History> pair_hist_;
  std::vector<RollingNormalizer> normalizers_;
  MarketFeatures market_{};
  std::size_t next_slot_ = 0;
};

}  // namespace drqn
