#pragma once

#include <stdexcept>
#include <string>

namespace drqn {

// Fixed dimensions of the production market state.
inline constexpr std::size_t kNumPairs = 12;
inline constexpr std::size_t kFeaturesPerPair = 16;   // 8 close returns + 8 volume returns
inline constexpr std::size_t kMarketDim = kNumPairs * kFeaturesPerPair;  // 192
inline constexpr std::size_t kTimeDim = 3;
inline constexpr std::size_t kPositionDim = 3;
inline constexpr std::size_t kCoreDim = kTimeDim + kMarketDim;           // 195
inline constexpr std::size_t kStateDim = kCoreDim + kPositionDim;        // 198

inline constexpr std::size_t kReturnWindow = 8;    // log returns per series
inline constexpr std::size_t kZScoreWindow = 96;   // rolling normalization period
inline constexpr double kZScoreClip = 10.0;

// Grid slots consumed before the first observation: 96 z-score slots plus
// the slot the first state is computed on. First observable slot index is 96.
inline constexpr std::size_t kFirstObservableSlot = 96;

inline constexpr std::int64_t kBarIntervalMs = 15 * 60 * 1000;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AlignmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FeatureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BankruptcyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace drqn
