#include "emoint/optim.hpp"

#include <algorithm>
#include <cmath>

#include "emoint/error.hpp"

namespace emoint::nn {

namespace {

void require_aligned(const TensorList& a, const TensorList& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShape, "parameter/gradient list mismatch");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].rows != b[k].rows || a[k].cols != b[k].cols) {
      throw Error(ErrorCode::kShape, "gradient shape mismatch for " + a[k].name);
    }
  }
}

}  // namespace

double global_norm(const TensorList& tensors) {
  double sq = 0.0;
  for (const auto& t : tensors) {
    for (double v : t.values()) sq += v * v;
  }
  return std::sqrt(sq);
}

double clip_gradients_by_norm(const TensorList& grads, double max_norm) {
  if (!(max_norm > 0)) throw Error(ErrorCode::kConfig, "clip norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& t : grads) {
      for (double& v : t.values()) v *= scale;
    }
  }
  return norm;
}

void zero_tensors(const TensorList& tensors) {
  for (const auto& t : tensors) std::fill(t.values().begin(), t.values().end(), 0.0);
}

void adam_update(AdamState& state, const TensorList& params, const TensorList& grads) {
  require_aligned(params, grads);
  for (const auto& g : grads) {
    for (double v : g.values()) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kNumeric, "non-finite gradient in " + g.name);
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Vector::Zero(p.rows * p.cols));
      state.v.push_back(Vector::Zero(p.rows * p.cols));
    }
  } else if (state.m.size() != params.size()) {
    throw Error(ErrorCode::kShape, "optimizer state does not match parameter list");
  }

  const auto& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].values();
    auto g = grads[k].values();
    Vector& m = state.m[k];
    Vector& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      m(ii) = cfg.beta1 * m(ii) + (1.0 - cfg.beta1) * g[i];
      v(ii) = cfg.beta2 * v(ii) + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m(ii) / bc1;
      const double v_hat = v(ii) / bc2;
      p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

double gradient_check(const TensorList& params, const TensorList& analytic,
                      const std::function<double()>& loss, double eps) {
  require_aligned(params, analytic);
  if (!(eps > 0)) throw Error(ErrorCode::kConfig, "gradient check eps must be positive");
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].values();
    auto a = analytic[k].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + eps;
      const double up = loss();
      p[i] = saved - eps;
      const double down = loss();
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max(std::abs(a[i]) + std::abs(numeric), 1e-12);
      worst = std::max(worst, std::abs(a[i] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace emoint::nn
