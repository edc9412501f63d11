#pragma once

#include <functional>
#include <vector>

#include "emoint/rnn.hpp"

namespace emoint::nn {

double global_norm(const TensorList& tensors);

// Scales every tensor by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the pre-clip norm.
double clip_gradients_by_norm(const TensorList& grads, double max_norm);

void zero_tensors(const TensorList& tensors);

struct AdamConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Vector> m;  // one flat buffer per tensor, same order as the param list
  std::vector<Vector> v;
  long step = 0;

  explicit AdamState(AdamConfig cfg = {}) : config(cfg) {}
};

// Bias-corrected Adam step; lazily sizes the moment buffers on first use.
// Throws Error(kNumeric) on non-finite gradients before touching anything.
void adam_update(AdamState& state, const TensorList& params, const TensorList& grads);

/// Central-difference check of `analytic` against `loss()`.
///
/// Every element of every tensor in `params` is perturbed by +/- eps in place
/// (and restored). Returns the max over elements of
/// |a - n| / max(|a| + |n|, 1e-12).
double gradient_check(const TensorList& params, const TensorList& analytic,
                      const std::function<double()>& loss, double eps);

}  // namespace emoint::nn
