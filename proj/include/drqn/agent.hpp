#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "drqn/common.hpp"
#include "drqn/neural.hpp"
#include "drqn/rng.hpp"
#include "drqn/trading_env.hpp"

namespace drqn {

enum class ExplorationMode {
  greedy_augmented,  // greedy policy; exploration comes from augmented rewards
  epsilon_greedy,
};

struct AgentConfig {
  std::size_t memory_capacity = 480;
  std::size_t seq_len = 96;  // train period T and sampled sequence length
  double gamma = 0.99;
  double tau = 0.001;
  AdamConfig adam{};  // lr 2.5e-4
  double grad_clip_norm = 10.0;
  ExplorationMode mode = ExplorationMode::greedy_augmented;
  double epsilon = 0.1;
};

// Fixed-capacity ring of time-contiguous transitions, oldest evicted first.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity), buf_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return size_; }
  bool full() const { return size_ == capacity_; }

  void store(AugmentedTransition t) {
    if (size_ > 0 && t.slot != last_slot_ + 1) {
      throw std::logic_error("replay memory requires gap-free, increasing time order");
    }
    last_slot_ = t.slot;
    buf_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
  }

  // Logical index 0 is the oldest stored transition.
  const AugmentedTransition& at(std::size_t logical) const {
    if (logical >= size_) throw std::out_of_range("replay index out of range");
    const std::size_t head = (next_ + capacity_ - size_) % capacity_;
    return buf_[(head + logical) % capacity_];
  }

  // Uniformly random time-contiguous window of length seq_len; empty optional
  // until the memory is full.
  std::optional<std::vector<const AugmentedTransition*>> sample_sequence(std::size_t seq_len,
                                                                         Rng& rng) const {
    if (!full() || seq_len > size_) return std::nullopt;
    const std::size_t n_windows = size_ - seq_len + 1;
    const std::size_t start = static_cast<std::size_t>(rng.uniform_int(n_windows));
    std::vector<const AugmentedTransition*> window;
    window.reserve(seq_len);
    for (std::size_t i = 0; i < seq_len; ++i) window.push_back(&at(start + i));
    return window;
  }

  void save(std::ostream& os) const {
    write_u64(os, capacity_);
    write_u64(os, size_);
    write_i64(os, last_slot_);
    for (std::size_t i = 0; i < size_; ++i) {
      const AugmentedTransition& t = at(i);
      write_f64_vec(os, t.state);
      for (double r : t.reward_vec) write_f64(os, r);
      write_f64_vec(os, t.next_core);
      write_u64(os, t.executed_index);
      write_i64(os, t.slot);
    }
  }

  static ReplayMemory load(std::istream& is) {
    const std::size_t capacity = read_u64(is, "replay capacity");
    ReplayMemory mem(capacity);
    const std::size_t size = read_u64(is, "replay size");
    const std::int64_t last_slot = read_i64(is, "replay last slot");
    for (std::size_t i = 0; i < size; ++i) {
      AugmentedTransition t;
      t.state = read_f64_vec(is, "transition state");
      for (double& r : t.reward_vec) r = read_f64(is, "transition reward");
      t.next_core = read_f64_vec(is, "transition next core");
      t.executed_index = read_u64(is, "transition action");
      t.slot = read_i64(is, "transition slot");
      mem.store(std::move(t));
    }
    mem.last_slot_ = last_slot;
    return mem;
  }

 private:
  std::size_t capacity_;
  std::vector<AugmentedTransition> buf_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
  std::int64_t last_slot_ = INT64_MIN;
};

// Greedy argmax with ties broken toward the flat action (index 1), then the
// lower index.
inline std::size_t greedy_index(const std::array<double, kQOutputs>& q) {
  double best = q[0];
  for (std::size_t i = 1; i < kQOutputs; ++i) best = std::max(best, q[i]);
  if (q[1] == best) return 1;
  return q[0] == best ? 0 : 2;
}

using TargetMatrix = std::vector<std::array<double, kQOutputs>>;

// Double-Q action-augmentation targets for a contiguous sequence:
// target[t][a] = r[t][a] + gamma * Q_target(s'_a, argmax_a' Q_online(s'_a, a')).
// Both networks are rolled over the executed trajectory once; the per-action
// next states reuse the hidden state reached on that path.
inline TargetMatrix compute_targets(std::span<const AugmentedTransition* const> seq,
                                    const QNetworkParams& online, const QNetworkParams& target,
                                    double gamma) {
  const std::size_t T = seq.size();
  TargetMatrix out(T);

  RecurrentState online_state(online.hidden_dim);
  RecurrentState target_state(target.hidden_dim);
  RecurrentState scratch(online.hidden_dim);
  std::array<double, kQOutputs> q_online{}, q_target{};

  for (std::size_t t = 0; t < T; ++t) {
    const AugmentedTransition& tr = *seq[t];
    forward_step(online, online_state, tr.state, q_online, online_state);
    forward_step(target, target_state, tr.state, q_target, target_state);
    for (std::size_t a = 0; a < kNumActions; ++a) {
      const std::vector<double> next = tr.next_state(a);
      forward_step(online, online_state, next, q_online, scratch);
      std::size_t best = 0;
      for (std::size_t k = 1; k < kQOutputs; ++k) {
        if (q_online[k] > q_online[best]) best = k;
      }
      forward_step(target, target_state, next, q_target, scratch);
      out[t][a] = tr.reward_vec[a] + gamma * q_target[best];
    }
  }
  return out;
}

// Mean squared error over all T x 3 entries against gradient-constant
// targets, with gradients through the unrolled online network.
inline std::pair<double, GradientSet> loss_and_grads_given_targets(
    std::span<const AugmentedTransition* const> seq, const QNetworkParams& online,
    const TargetMatrix& targets) {
  const std::size_t T = seq.size();
  if (targets.size() != T) throw std::invalid_argument("target/sequence length mismatch");

  std::vector<std::vector<double>> xs;
  xs.reserve(T);
  for (const AugmentedTransition* tr : seq) xs.push_back(tr->state);

  const SequenceForward fwd = forward_sequence(online, xs, /*keep_caches=*/true);

  double loss = 0.0;
  std::vector<std::array<double, kQOutputs>> dq(T);
  const double scale = 1.0 / static_cast<double>(T * kNumActions);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t a = 0; a < kNumActions; ++a) {
      const double diff = fwd.q[t][a] - targets[t][a];
      loss += diff * diff * scale;
      dq[t][a] = 2.0 * diff * scale;
    }
  }
  if (!std::isfinite(loss)) throw NumericalFault("non-finite training loss");
  return {loss, backward_sequence(online, fwd.caches, dq)};
}

inline std::pair<double, GradientSet> compute_loss_and_grads(
    std::span<const AugmentedTransition* const> seq, const QNetworkParams& online,
    const QNetworkParams& target, double gamma) {
  return loss_and_grads_given_targets(seq, online, compute_targets(seq, online, target, gamma));
}

// theta_target <- (1 - tau) * theta_target + tau * theta.
inline void soft_update(QNetworkParams& target, const QNetworkParams& online, double tau) {
  std::vector<std::vector<double>*> ts;
  std::vector<const std::vector<double>*> os;
  for_each_tensor(target, [&](const char*, std::vector<double>& t) { ts.push_back(&t); });
  for_each_tensor(online, [&](const char*, const std::vector<double>& t) { os.push_back(&t); });
  for (std::size_t i = 0; i < ts.size(); ++i) {
    auto& dst = *ts[i];
    const auto& src = *os[i];
    if (dst.size() != src.size()) throw std::invalid_argument("soft_update: shape mismatch");
    for (std::size_t j = 0; j < dst.size(); ++j) {
      dst[j] = (1.0 - tau) * dst[j] + tau * src[j];
    }
  }
}

// Online learner: greedy (or epsilon-greedy) acting with a persistent
// recurrent state, augmented replay, and periodic sequence training.
class DrqnAgent {
 public:
  DrqnAgent(const AgentConfig& cfg, std::uint64_t seed, std::size_t input_dim = kStateDim,
            std::size_t hidden_dim = 256)
      : cfg_(cfg),
        online_(init_network(seed, input_dim, hidden_dim)),
        target_(online_),
        adam_(online_),
        acting_state_(hidden_dim),
        memory_(cfg.memory_capacity),
        rng_(seed ^ 0x9E3779B97F4A7C15ULL) {
    if (cfg.seq_len > cfg.memory_capacity) {
      throw std::invalid_argument("sequence length exceeds memory capacity");
    }
  }

  Action act(const MarketState& state) {
    const std::vector<double> x = state.to_vector();
    std::array<double, kQOutputs> q{};
    forward_step(online_, acting_state_, x, q, acting_state_);
    std::size_t index = greedy_index(q);
    if (cfg_.mode == ExplorationMode::epsilon_greedy && rng_.uniform() < cfg_.epsilon) {
      index = static_cast<std::size_t>(rng_.uniform_int(kNumActions));
    }
    return Action::from_index(index);
  }

  void store(AugmentedTransition t) { memory_.store(std::move(t)); }

  // One training event: sample a window, regress on augmented targets, clip,
  // Adam. Returns the loss, or nothing while the memory is still filling.
  std::optional<double> train_once() {
    auto window = memory_.sample_sequence(cfg_.seq_len, rng_);
    if (!window) return std::nullopt;
    auto [loss, grads] = compute_loss_and_grads(*window, online_, target_, cfg_.gamma);
    clip_gradients(grads, cfg_.grad_clip_norm);
    adam_step(online_, grads, adam_, cfg_.adam);
    return loss;
  }

  void soft_update_target() { soft_update(target_, online_, cfg_.tau); }

  const AgentConfig& config() const { return cfg_; }
  const QNetworkParams& online() const { return online_; }
  const QNetworkParams& target() const { return target_; }
  const ReplayMemory& memory() const { return memory_; }
  ReplayMemory& memory() { return memory_; }
  const RecurrentState& acting_state() const { return acting_state_; }

  void save(std::ostream& os) const {
    save_params(os, online_);
    save_params(os, target_);
    save_adam(os, adam_);
    write_f64_vec(os, acting_state_.h);
    write_f64_vec(os, acting_state_.c);
    memory_.save(os);
    for (std::uint64_t w : rng_.state()) write_u64(os, w);
  }

  void load(std::istream& is) {
    online_ = load_params(is);
    target_ = load_params(is);
    adam_ = load_adam(is);
    acting_state_.h = read_f64_vec(is, "acting state h");
    acting_state_.c = read_f64_vec(is, "acting state c");
    memory_ = ReplayMemory::load(is);
    std::array<std::uint64_t, 4> s{};
    for (auto& w : s) w = read_u64(is, "agent rng");
    rng_.set_state(s);
  }

 private:
  AgentConfig cfg_;
  QNetworkParams online_;
  QNetworkParams target_;
  AdamState adam_;
  RecurrentState acting_state_;
  ReplayMemory memory_;
  Rng rng_;
};

}  // namespace drqn
