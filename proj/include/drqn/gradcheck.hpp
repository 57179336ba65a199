#pragma once

#include <string>
#include <vector>

#include "drqn/neural.hpp"
#include "drqn/rng.hpp"

namespace drqn {

struct GradCheckSpec {
  std::size_t input_dim = 12;
  std::size_t hidden_dim = 4;
  std::size_t seq_len = 3;
  std::uint64_t seed = 1;
  double fd_epsilon = 1e-5;
  bool linear_chain = false;  // check the harness itself on an exactly linear model
  bool corrupt = false;       // negative control: damage one analytic gradient
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
};

namespace detail {

inline double rel_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

// chain q = W3 W2 W1 x against finite differences; validates the FD harness
// on a model whose central difference is exact up to rounding.
inline GradCheckReport linear_chain_check(const GradCheckSpec& spec) {
  Rng rng(spec.seed);
  const std::size_t H = spec.hidden_dim;
  Matrix w1(H, spec.input_dim), w2(H, H), w3(kQOutputs, H);
  for (double& v : w1.a) v = rng.normal(0.0, 0.5);
  for (double& v : w2.a) v = rng.normal(0.0, 0.5);
  for (double& v : w3.a) v = rng.normal(0.0, 0.5);
  std::vector<double> x(spec.input_dim);
  for (double& v : x) v = rng.normal(0.0, 1.0);
  std::array<double, kQOutputs> y{};
  for (double& v : y) v = rng.normal(0.0, 1.0);

  auto loss_of = [&](const Matrix& a, const Matrix& b, const Matrix& c) {
    std::vector<double> t1(H), t2(H);
    matvec(a, x.data(), t1.data());
    matvec(b, t1.data(), t2.data());
    double loss = 0.0;
    for (std::size_t k = 0; k < kQOutputs; ++k) {
      const double q = dot(c.row(k), t2.data(), H) - y[k];
      loss += 0.5 * q * q;
    }
    return loss;
  };

  // analytic gradients
  std::vector<double> t1(H), t2(H);
  matvec(w1, x.data(), t1.data());
  matvec(w2, t1.data(), t2.data());
  std::array<double, kQOutputs> dq{};
  for (std::size_t k = 0; k < kQOutputs; ++k) dq[k] = dot(w3.row(k), t2.data(), H) - y[k];
  Matrix g1(H, spec.input_dim), g2(H, H), g3(kQOutputs, H);
  std::vector<double> dt2(H, 0.0), dt1(H, 0.0);
  for (std::size_t k = 0; k < kQOutputs; ++k) {
    for (std::size_t j = 0; j < H; ++j) {
      g3(k, j) += dq[k] * t2[j];
      dt2[j] += dq[k] * w3(k, j);
    }
  }
  outer_add(g2, dt2.data(), t1.data());
  matvec_transpose_add(w2, dt2.data(), dt1.data());
  outer_add(g1, dt1.data(), x.data());

  if (spec.corrupt) g1.a[0] += 0.5;

  GradCheckReport report;
  const char* names[3] = {"w1", "w2", "w3"};
  Matrix* weights[3] = {&w1, &w2, &w3};
  Matrix* grads[3] = {&g1, &g2, &g3};
  for (int m = 0; m < 3; ++m) {
    for (std::size_t i = 0; i < weights[m]->a.size(); ++i) {
      const double save = weights[m]->a[i];
      weights[m]->a[i] = save + spec.fd_epsilon;
      const double up = loss_of(w1, w2, w3);
      weights[m]->a[i] = save - spec.fd_epsilon;
      const double down = loss_of(w1, w2, w3);
      weights[m]->a[i] = save;
      const double numeric = (up - down) / (2.0 * spec.fd_epsilon);
      const double err = rel_error(grads[m]->a[i], numeric);
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_tensor = names[m];
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace detail

// Compares backward_sequence against central finite differences of a random
// quadratic loss over a random sequence, on a small network instance.
inline GradCheckReport grad_check(const GradCheckSpec& spec) {
  if (spec.linear_chain) return detail::linear_chain_check(spec);

  Rng rng(spec.seed);
  QNetworkParams params = init_network(spec.seed, spec.input_dim, spec.hidden_dim);
  // shake the structured init so identity blocks and zero biases do not hide
  // wrong gradient terms behind special values
  for_each_tensor(params, [&](const char*, std::vector<double>& t) {
    for (double& v : t) v += rng.normal(0.0, 0.05);
  });

  std::vector<std::vector<double>> xs(spec.seq_len, std::vector<double>(spec.input_dim));
  std::vector<std::array<double, kQOutputs>> targets(spec.seq_len);
  for (auto& x : xs) {
    for (double& v : x) v = rng.normal(0.0, 1.0);
  }
  for (auto& y : targets) {
    for (double& v : y) v = rng.normal(0.0, 1.0);
  }

  auto loss_of = [&](const QNetworkParams& p) {
    const SequenceForward fwd = forward_sequence(p, xs);
    double loss = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      for (std::size_t k = 0; k < kQOutputs; ++k) {
        const double d = fwd.q[t][k] - targets[t][k];
        loss += 0.5 * d * d;
      }
    }
    return loss;
  };

  const SequenceForward fwd = forward_sequence(params, xs, /*keep_caches=*/true);
  std::vector<std::array<double, kQOutputs>> dq(spec.seq_len);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    for (std::size_t k = 0; k < kQOutputs; ++k) dq[t][k] = fwd.q[t][k] - targets[t][k];
  }
  GradientSet analytic = backward_sequence(params, fwd.caches, dq);
  if (spec.corrupt) analytic.fc1.w.a[0] += 0.5;

  GradCheckReport report;
  std::vector<std::pair<const char*, std::vector<double>*>> param_tensors;
  for_each_tensor(params, [&](const char* name, std::vector<double>& t) {
    param_tensors.emplace_back(name, &t);
  });
  std::vector<const std::vector<double>*> grad_tensors;
  for_each_tensor(analytic, [&](const char*, const std::vector<double>& t) {
    grad_tensors.push_back(&t);
  });

  for (std::size_t m = 0; m < param_tensors.size(); ++m) {
    auto& tensor = *param_tensors[m].second;
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double save = tensor[i];
      tensor[i] = save + spec.fd_epsilon;
      const double up = loss_of(params);
      tensor[i] = save - spec.fd_epsilon;
      const double down = loss_of(params);
      tensor[i] = save;
      const double numeric = (up - down) / (2.0 * spec.fd_epsilon);
      const double err = detail::rel_error((*grad_tensors[m])[i], numeric);
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_tensor = param_tensors[m].first;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace drqn
