#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "drqn/common.hpp"
#include "drqn/linalg.hpp"
#include "drqn/rng.hpp"
#include "drqn/serialize.hpp"

namespace drqn {

inline constexpr std::size_t kQOutputs = 3;

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

// ELU' recovered from the post-activation value: 1 above zero, y + 1 below.
inline double elu_deriv_from_output(double y) { return y > 0.0 ? 1.0 : y + 1.0; }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct DenseLayer {
  Matrix w;
  std::vector<double> b;

  DenseLayer() = default;
  DenseLayer(std::size_t out, std::size_t in) : w(out, in), b(out, 0.0) {}
};

// Packed LSTM parameters; gate rows ordered [input | forget | candidate |
// output], each block `hidden` rows.
struct LstmParams {
  Matrix wx;              // 4H x input
  Matrix wh;              // 4H x H
  std::vector<double> b;  // 4H

  LstmParams() = default;
  LstmParams(std::size_t hidden, std::size_t in)
      : wx(4 * hidden, in), wh(4 * hidden, hidden), b(4 * hidden, 0.0) {}
};

// dense(in->H) + ELU, dense(H->H) + ELU, LSTM(H), dense(H->3).
struct QNetworkParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  DenseLayer fc1;
  DenseLayer fc2;
  LstmParams lstm;
  DenseLayer out;

  QNetworkParams() = default;
  QNetworkParams(std::size_t in, std::size_t hidden)
      : input_dim(in),
        hidden_dim(hidden),
        fc1(hidden, in),
        fc2(hidden, hidden),
        lstm(hidden, hidden),
        out(kQOutputs, hidden) {}
};

// Gradients (and Adam moments) share the parameter layout.
using GradientSet = QNetworkParams;

inline QNetworkParams zeros_like(const QNetworkParams& p) {
  return QNetworkParams(p.input_dim, p.hidden_dim);
}

// Canonical tensor order used by Adam, soft updates, clipping, checkpoints
// and finite differences.
template <typename Params, typename F>
void for_each_tensor(Params&& p, F&& f) {
  f("fc1.w", p.fc1.w.a);
  f("fc1.b", p.fc1.b);
  f("fc2.w", p.fc2.w.a);
  f("fc2.b", p.fc2.b);
  f("lstm.wx", p.lstm.wx.a);
  f("lstm.wh", p.lstm.wh.a);
  f("lstm.b", p.lstm.b);
  f("out.w", p.out.w.a);
  f("out.b", p.out.b);
}

inline std::size_t count_parameters(const QNetworkParams& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](const char*, const std::vector<double>& t) { n += t.size(); });
  return n;
}

struct RecurrentState {
  std::vector<double> h;
  std::vector<double> c;

  RecurrentState() = default;
  explicit RecurrentState(std::size_t hidden) : h(hidden, 0.0), c(hidden, 0.0) {}
};

// Intermediates of one forward step, retained for backpropagation.
struct StepCache {
  std::vector<double> x;
  std::vector<double> h1, h2;
  std::vector<double> gi, gf, gg, go;
  std::vector<double> h_prev, c_prev;
  std::vector<double> tanh_c;
  std::vector<double> h;
};

namespace detail {

inline void check_shapes(const QNetworkParams& p, std::size_t x_size, std::size_t state_size) {
  if (x_size != p.input_dim || state_size != p.hidden_dim) {
    throw std::invalid_argument("forward_step: shape mismatch");
  }
}

}  // namespace detail

// q = W_out * LSTM(ELU(W2 * ELU(W1 x + b1) + b2), state_in) + b_out.
// state_out may alias state_in.
inline void forward_step(const QNetworkParams& p, const RecurrentState& state_in,
                         std::span<const double> x, std::array<double, kQOutputs>& q,
                         RecurrentState& state_out, StepCache* cache = nullptr) {
  detail::check_shapes(p, x.size(), state_in.h.size());
  const std::size_t H = p.hidden_dim;

  std::vector<double> h1(H), h2(H), z(4 * H);
  matvec(p.fc1.w, x.data(), h1.data());
  for (std::size_t j = 0; j < H; ++j) h1[j] = elu(h1[j] + p.fc1.b[j]);
  matvec(p.fc2.w, h1.data(), h2.data());
  for (std::size_t j = 0; j < H; ++j) h2[j] = elu(h2[j] + p.fc2.b[j]);

  matvec(p.lstm.wx, h2.data(), z.data());
  matvec_add(p.lstm.wh, state_in.h.data(), z.data());
  for (std::size_t j = 0; j < 4 * H; ++j) z[j] += p.lstm.b[j];

  std::vector<double> gi(H), gf(H), gg(H), go(H), c(H), tc(H), h(H);
  for (std::size_t j = 0; j < H; ++j) {
    gi[j] = sigmoid(z[j]);
    gf[j] = sigmoid(z[H + j]);
    gg[j] = std::tanh(z[2 * H + j]);
    go[j] = sigmoid(z[3 * H + j]);
  }
  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h_prev = state_in.h;
    cache->c_prev = state_in.c;
  }
  for (std::size_t j = 0; j < H; ++j) {
    c[j] = gf[j] * state_in.c[j] + gi[j] * gg[j];
    tc[j] = std::tanh(c[j]);
    h[j] = go[j] * tc[j];
  }

  for (std::size_t k = 0; k < kQOutputs; ++k) {
    q[k] = dot(p.out.w.row(k), h.data(), H) + p.out.b[k];
    if (!std::isfinite(q[k])) throw NumericalFault("non-finite Q-value in forward pass");
  }

  if (cache) {
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->gi = std::move(gi);
    cache->gf = std::move(gf);
    cache->gg = std::move(gg);
    cache->go = std::move(go);
    cache->tanh_c = tc;
    cache->h = h;
  }
  state_out.h = std::move(h);
  state_out.c = std::move(c);
}

struct SequenceForward {
  std::vector<std::array<double, kQOutputs>> q;  // one row per step
  std::vector<RecurrentState> states;            // recurrent state after each step
  std::vector<StepCache> caches;                 // empty unless requested
};

// Chained forward over a sequence, zero initial recurrent state by default.
inline SequenceForward forward_sequence(const QNetworkParams& p,
                                        std::span<const std::vector<double>> xs,
                                        bool keep_caches = false,
                                        const RecurrentState* initial = nullptr) {
  if (xs.empty()) throw std::invalid_argument("forward_sequence: empty sequence");
  SequenceForward out;
  out.q.resize(xs.size());
  out.states.resize(xs.size());
  if (keep_caches) out.caches.resize(xs.size());

  RecurrentState state = initial ? *initial : RecurrentState(p.hidden_dim);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    forward_step(p, state, xs[t], out.q[t], state, keep_caches ? &out.caches[t] : nullptr);
    out.states[t] = state;
  }
  return out;
}

// Exact gradients, via backpropagation through time, of the scalar loss whose
// per-step per-output partials are dq.
inline GradientSet backward_sequence(const QNetworkParams& p, std::span<const StepCache> caches,
                                     std::span<const std::array<double, kQOutputs>> dq) {
  if (caches.size() != dq.size()) {
    throw std::invalid_argument("backward_sequence: cache/gradient length mismatch");
  }
  const std::size_t H = p.hidden_dim;
  GradientSet g = zeros_like(p);

  std::vector<double> dh(H, 0.0), dc(H, 0.0);
  std::vector<double> dz(4 * H), dh2(H), dh1(H), da(H);
  for (std::size_t ti = caches.size(); ti-- > 0;) {
    const StepCache& cc = caches[ti];

    // output layer; dh also carries the gradient arriving from step t+1
    for (std::size_t k = 0; k < kQOutputs; ++k) {
      const double dqk = dq[ti][k];
      if (dqk != 0.0) {
        double* wrow = g.out.w.row(k);
        const double* wsrc = p.out.w.row(k);
        for (std::size_t j = 0; j < H; ++j) {
          wrow[j] += dqk * cc.h[j];
          dh[j] += dqk * wsrc[j];
        }
        g.out.b[k] += dqk;
      }
    }

    // LSTM cell
    for (std::size_t j = 0; j < H; ++j) {
      const double do_ = dh[j] * cc.tanh_c[j];
      const double dcj = dc[j] + dh[j] * cc.go[j] * (1.0 - cc.tanh_c[j] * cc.tanh_c[j]);
      const double di = dcj * cc.gg[j];
      const double dg = dcj * cc.gi[j];
      const double df = dcj * cc.c_prev[j];
      dz[j] = di * cc.gi[j] * (1.0 - cc.gi[j]);
      dz[H + j] = df * cc.gf[j] * (1.0 - cc.gf[j]);
      dz[2 * H + j] = dg * (1.0 - cc.gg[j] * cc.gg[j]);
      dz[3 * H + j] = do_ * cc.go[j] * (1.0 - cc.go[j]);
      dc[j] = dcj * cc.gf[j];  // flows to step t-1
    }
    outer_add(g.lstm.wx, dz.data(), cc.h2.data());
    outer_add(g.lstm.wh, dz.data(), cc.h_prev.data());
    for (std::size_t j = 0; j < 4 * H; ++j) g.lstm.b[j] += dz[j];

    std::fill(dh2.begin(), dh2.end(), 0.0);
    matvec_transpose_add(p.lstm.wx, dz.data(), dh2.data());
    std::fill(dh.begin(), dh.end(), 0.0);
    matvec_transpose_add(p.lstm.wh, dz.data(), dh.data());  // dh_prev for step t-1

    // fc2
    for (std::size_t j = 0; j < H; ++j) da[j] = dh2[j] * elu_deriv_from_output(cc.h2[j]);
    outer_add(g.fc2.w, da.data(), cc.h1.data());
    for (std::size_t j = 0; j < H; ++j) g.fc2.b[j] += da[j];
    std::fill(dh1.begin(), dh1.end(), 0.0);
    matvec_transpose_add(p.fc2.w, da.data(), dh1.data());

    // fc1
    for (std::size_t j = 0; j < H; ++j) da[j] = dh1[j] * elu_deriv_from_output(cc.h1[j]);
    outer_add(g.fc1.w, da.data(), cc.x.data());
    for (std::size_t j = 0; j < H; ++j) g.fc1.b[j] += da[j];
  }
  return g;
}

// -- optimizer ---------------------------------------------------------------

struct AdamState {
  QNetworkParams m;
  QNetworkParams v;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(const QNetworkParams& p) : m(zeros_like(p)), v(zeros_like(p)) {}
};

struct AdamConfig {
  double lr = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline void adam_step(QNetworkParams& params, const GradientSet& grads, AdamState& state,
                      const AdamConfig& cfg = {}) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  std::vector<std::vector<double>*> ts, ms, vs;
  std::vector<const std::vector<double>*> gs;
  for_each_tensor(params, [&](const char*, std::vector<double>& t) { ts.push_back(&t); });
  for_each_tensor(grads, [&](const char*, const std::vector<double>& t) { gs.push_back(&t); });
  for_each_tensor(state.m, [&](const char*, std::vector<double>& t) { ms.push_back(&t); });
  for_each_tensor(state.v, [&](const char*, std::vector<double>& t) { vs.push_back(&t); });

  for (std::size_t i = 0; i < ts.size(); ++i) {
    auto& theta = *ts[i];
    const auto& grad = *gs[i];
    auto& m = *ms[i];
    auto& v = *vs[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * grad[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      theta[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

// Scales gradients so their global L2 norm does not exceed max_norm.
// Returns the pre-clip norm.
inline double clip_gradients(GradientSet& grads, double max_norm) {
  double sq = 0.0;
  for_each_tensor(grads, [&](const char*, std::vector<double>& t) {
    for (double v : t) sq += v * v;
  });
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for_each_tensor(grads, [&](const char*, std::vector<double>& t) {
      for (double& v : t) v *= scale;
    });
  }
  return norm;
}

// -- initialization -----------------------------------------------------------

inline constexpr std::size_t kSparseOutFanIn = 15;
inline constexpr double kSparseOutVariance = 0.001;

namespace detail {

inline void he_fill(Matrix& m, std::size_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : m.a) v = rng.normal(0.0, stddev);
}

}  // namespace detail

// He-initialized dense and LSTM input-to-hidden weights, identity
// hidden-to-hidden blocks, zero biases except forget-gate biases at 1, and a
// sparse output layer with 15 N(0, 0.001) entries per output unit.
inline QNetworkParams init_network(std::uint64_t seed, std::size_t input_dim = kStateDim,
                                   std::size_t hidden_dim = 256) {
  Rng rng(seed);
  QNetworkParams p(input_dim, hidden_dim);
  const std::size_t H = hidden_dim;

  detail::he_fill(p.fc1.w, input_dim, rng);
  detail::he_fill(p.fc2.w, H, rng);
  detail::he_fill(p.lstm.wx, H, rng);

  for (std::size_t gate = 0; gate < 4; ++gate) {
    for (std::size_t j = 0; j < H; ++j) p.lstm.wh(gate * H + j, j) = 1.0;
  }
  for (std::size_t j = 0; j < H; ++j) p.lstm.b[H + j] = 1.0;  // forget gate

  const std::size_t nonzeros = std::min(kSparseOutFanIn, H);
  const double out_std = std::sqrt(kSparseOutVariance);
  std::vector<std::size_t> cols(H);
  for (std::size_t r = 0; r < kQOutputs; ++r) {
    std::iota(cols.begin(), cols.end(), 0);
    for (std::size_t k = 0; k < nonzeros; ++k) {
      const std::size_t pick = k + rng.uniform_int(H - k);
      std::swap(cols[k], cols[pick]);
      p.out.w(r, cols[k]) = rng.normal(0.0, out_std);
    }
  }
  return p;
}

// -- serialization ------------------------------------------------------------

inline void save_params(std::ostream& os, const QNetworkParams& p) {
  write_u64(os, p.input_dim);
  write_u64(os, p.hidden_dim);
  for_each_tensor(p, [&](const char*, const std::vector<double>& t) { write_f64_vec(os, t); });
}

inline QNetworkParams load_params(std::istream& is) {
  const std::size_t in = read_u64(is, "params input_dim");
  const std::size_t hidden = read_u64(is, "params hidden_dim");
  QNetworkParams p(in, hidden);
  for_each_tensor(p, [&](const char* name, std::vector<double>& t) {
    auto v = read_f64_vec(is, name);
    if (v.size() != t.size()) throw IoError(std::string("tensor size mismatch for ") + name);
    t = std::move(v);
  });
  return p;
}

inline void save_adam(std::ostream& os, const AdamState& s) {
  write_i64(os, s.step);
  save_params(os, s.m);
  save_params(os, s.v);
}

inline AdamState load_adam(std::istream& is) {
  AdamState s;
  s.step = read_i64(is, "adam step");
  s.m = load_params(is);
  s.v = load_params(is);
  return s;
}

}  // namespace drqn
