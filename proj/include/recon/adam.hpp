#pragma once

#include "recon/types.hpp"

#include <cmath>
#include <cstdint>

namespace recon {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  Vector<Scalar> first;
  Vector<Scalar> second;
  std::int64_t step = 0;
  AdamHyper hyper;

  AdamState() = default;
  explicit AdamState(Index size, AdamHyper h = {})
      : first(Vector<Scalar>::Zero(size)), second(Vector<Scalar>::Zero(size)), hyper(h) {}
};

/// One bias-corrected Adam step, params -= lr * m_hat / (sqrt(v_hat) + eps),
/// with a learning rate per entry.
template <typename Scalar>
void adam_update(AdamState<Scalar>& state, Vector<Scalar>& params, const Vector<Scalar>& grads,
                 const Vector<Scalar>& learning_rates) {
  const Index n = params.size();
  if (grads.size() != n || learning_rates.size() != n || state.first.size() != n || state.second.size() != n)
    throw ShapeError("adam_update: parameter, gradient, learning-rate and state sizes differ");
  using std::pow;
  const Scalar b1(state.hyper.beta1), b2(state.hyper.beta2), eps(state.hyper.eps);
  ++state.step;
  state.first = b1 * state.first + (Scalar(1) - b1) * grads;
  state.second = b2 * state.second + (Scalar(1) - b2) * grads.cwiseAbs2();
  const Scalar c1 = Scalar(1) - pow(b1, Scalar(state.step));
  const Scalar c2 = Scalar(1) - pow(b2, Scalar(state.step));
  params.array() -= learning_rates.array() * (state.first.array() / c1) /
                    ((state.second.array() / c2).sqrt() + eps);
}

}  // namespace recon
