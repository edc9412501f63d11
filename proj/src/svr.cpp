#include "emoint/svr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "emoint/archive.hpp"
#include "emoint/data.hpp"
#include "emoint/error.hpp"

namespace emoint {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Derivative of the minimization objective when beta_k moves up / down.
double up_derivative(double g, double beta, double eps) { return g + (beta >= 0.0 ? eps : -eps); }
double down_derivative(double g, double beta, double eps) { return g + (beta > 0.0 ? eps : -eps); }

// Minimizes q(t) = lin*t + quad/2*t^2 + eps*|bi + t| + eps*|bj - t| over [lo, hi].
double line_minimize(double lin, double quad, double bi, double bj, double eps, double lo, double hi) {
  // change relative to t = 0, so tiny improvements are not lost to roundoff
  auto abs_change = [](double b, double d) {
    if (b > 0.0 && b + d >= 0.0) return d;
    if (b < 0.0 && b + d <= 0.0) return -d;
    return std::abs(b + d) - std::abs(b);
  };
  auto f = [&](double t) {
    const double a = eps * abs_change(bi, t);
    const double b = eps * abs_change(bj, -t);
    // same-sign moves cancel exactly before they meet the quadratic part
    return t * (lin + 0.5 * quad * t) + (a + b);
  };
  std::array<double, 5> cuts = {lo, hi, -bi, bj, 0.0};
  std::vector<double> pts;
  for (double c : cuts) {
    if (c >= lo && c <= hi) pts.push_back(c);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  double best_t = 0.0;
  double best_f = 0.0;
  auto consider = [&](double t) {
    const double v = f(t);
    if (v < best_f) {
      best_f = v;
      best_t = t;
    }
  };
  for (double p : pts) consider(p);
  if (quad > 0.0) {
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      const double mid = 0.5 * (pts[k] + pts[k + 1]);
      const double si = (bi + mid) >= 0.0 ? 1.0 : -1.0;
      const double sj = (bj - mid) >= 0.0 ? 1.0 : -1.0;
      const double t = -(lin + eps * si - eps * sj) / quad;
      consider(std::clamp(t, pts[k], pts[k + 1]));
    }
  }
  return best_t;
}

double primal_style_objective(const nn::Vector& beta, const nn::Vector& grad, std::span<const double> y,
                              double eps) {
  // f = 1/2 b'Qb - y'b + eps|b|_1, with Qb = grad + y.
  double f = 0.0;
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    const double yk = y[static_cast<std::size_t>(k)];
    f += 0.5 * beta(k) * (grad(k) + yk) - yk * beta(k) + eps * std::abs(beta(k));
  }
  return f;
}

}  // namespace

Standardization fit_standardization(const nn::Matrix& x) {
  Standardization s;
  const double n = static_cast<double>(x.rows());
  s.mean = x.colwise().sum().transpose() / n;
  s.scale.resize(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - s.mean(c)).square().sum() / n;
    const double sd = std::sqrt(var);
    s.scale(c) = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

nn::Matrix apply_standardization(const Standardization& s, const nn::Matrix& x) {
  nn::Matrix z = x.rowwise() - s.mean.transpose();
  return z.array().rowwise() / s.scale.transpose().array();
}

SvrModel train_svr(const nn::Matrix& x, std::span<const double> y, const SvrConfig& config,
                   SvrTrainingTrace* trace) {
  const Eigen::Index n = x.rows();
  if (n < 1) throw Error(ErrorCode::kInput, "SVR needs at least one training row");
  if (static_cast<std::size_t>(n) != y.size()) throw Error(ErrorCode::kShape, "SVR targets and rows differ in count");
  if (!(config.C > 0.0)) throw Error(ErrorCode::kConfig, "SVR C must be positive");
  if (!(config.epsilon >= 0.0)) throw Error(ErrorCode::kConfig, "SVR epsilon must be non-negative");
  if (!x.allFinite()) throw Error(ErrorCode::kNumeric, "SVR features contain non-finite values");
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNumeric, "SVR targets contain non-finite values");
  }

  const double C = config.C;
  const double eps = config.epsilon;
  Standardization st = fit_standardization(x);
  const nn::Matrix z = apply_standardization(st, x);
  const nn::Matrix q = z * z.transpose();

  nn::Vector beta = nn::Vector::Zero(n);
  nn::Vector grad(n);  // Q beta - y
  for (Eigen::Index k = 0; k < n; ++k) grad(k) = -y[static_cast<std::size_t>(k)];

  nn::Rng rng(config.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  auto max_violation = [&]() {
    double min_up = kInf;
    double max_down = -kInf;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (beta(k) < C) min_up = std::min(min_up, up_derivative(grad(k), beta(k), eps));
      if (beta(k) > -C) max_down = std::max(max_down, down_derivative(grad(k), beta(k), eps));
    }
    return std::max(0.0, max_down - min_up);
  };

  SvrTrainingTrace local;
  SvrTrainingTrace& tr = trace ? *trace : local;
  tr = SvrTrainingTrace{};

  double violation = max_violation();
  while (tr.sweeps < config.max_iter && violation >= config.tol && n > 1) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index i : order) {
      const double up_i = beta(i) < C ? up_derivative(grad(i), beta(i), eps) : kInf;
      const double down_i = beta(i) > -C ? down_derivative(grad(i), beta(i), eps) : -kInf;
      Eigen::Index best_j = -1;
      double best_gain = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        double gain = -kInf;
        if (beta(j) > -C) gain = down_derivative(grad(j), beta(j), eps) - up_i;
        if (beta(j) < C) gain = std::max(gain, down_i - up_derivative(grad(j), beta(j), eps));
        if (gain > best_gain) {
          best_gain = gain;
          best_j = j;
        }
      }
      if (best_j < 0) continue;
      const Eigen::Index j = best_j;

      const double lo = std::max(-C - beta(i), beta(j) - C);
      const double hi = std::min(C - beta(i), beta(j) + C);
      const double quad = std::max(q(i, i) + q(j, j) - 2.0 * q(i, j), 0.0);
      const double t = line_minimize(grad(i) - grad(j), quad, beta(i), beta(j), eps, lo, hi);
      if (t == 0.0) continue;
      beta(i) = std::clamp(beta(i) + t, -C, C);
      beta(j) = std::clamp(beta(j) - t, -C, C);
      grad += t * (q.col(i) - q.col(j));
    }
    ++tr.sweeps;
    tr.sweep_objective.push_back(-primal_style_objective(beta, grad, y, eps));
    violation = max_violation();
  }
  tr.final_violation = violation;
  tr.converged = violation < config.tol;
  tr.dual.beta = beta;

  SvrModel model;
  model.C = C;
  model.epsilon = eps;
  model.mean = st.mean;
  model.scale = st.scale;
  model.weights = z.transpose() * beta;

  // Bias: prediction - y = -eps on free alpha, +eps on free alpha*.
  double sum = 0.0;
  int free_count = 0;
  double upper = kInf;   // -max down-derivative
  double lower = -kInf;  // -min up-derivative
  for (Eigen::Index k = 0; k < n; ++k) {
    const double b = beta(k);
    if (b > 0.0 && b < C) {
      sum += -(grad(k) + eps);
      ++free_count;
    } else if (b < 0.0 && b > -C) {
      sum += -(grad(k) - eps);
      ++free_count;
    }
    if (b < C) lower = std::max(lower, -up_derivative(grad(k), b, eps));
    if (b > -C) upper = std::min(upper, -down_derivative(grad(k), b, eps));
  }
  if (free_count > 0) {
    model.bias = sum / free_count;
  } else if (std::isfinite(lower) && std::isfinite(upper)) {
    model.bias = 0.5 * (lower + upper);
  } else {
    model.bias = std::isfinite(lower) ? lower : upper;
  }
  return model;
}

double predict_svr_raw(const SvrModel& model, const nn::Vector& x) {
  if (x.size() != model.dim()) {
    throw Error(ErrorCode::kShape, "SVR input has dimension " + std::to_string(x.size()) +
                                       ", model expects " + std::to_string(model.dim()));
  }
  const nn::Vector zs = ((x - model.mean).array() / model.scale.array()).matrix();
  return model.weights.dot(zs) + model.bias;
}

double predict_svr(const SvrModel& model, const nn::Vector& x) {
  return std::clamp(predict_svr_raw(model, x), 0.0, 1.0);
}

double dual_objective(const SvrDual& dual, const nn::Matrix& z, std::span<const double> y, double epsilon) {
  const auto& b = dual.beta;
  if (b.size() != z.rows() || static_cast<std::size_t>(b.size()) != y.size()) {
    throw Error(ErrorCode::kShape, "dual variables do not match the data");
  }
  const nn::Vector w = z.transpose() * b;
  double lin = 0.0;
  for (Eigen::Index k = 0; k < b.size(); ++k) lin += y[static_cast<std::size_t>(k)] * b(k);
  return -0.5 * w.squaredNorm() + lin - epsilon * b.lpNorm<1>();
}

void save_svr(const SvrModel& model, const std::string& path, std::uint64_t seed) {
  SvrModel copy = model;
  Archive a;
  a.kind = "svr";
  a.seed = seed;
  a.put("dim", std::to_string(copy.dim()));
  a.put("C", format_decimal(copy.C));
  a.put("epsilon", format_decimal(copy.epsilon));
  nn::Vector bias(1);
  bias(0) = copy.bias;
  a.put_tensor(nn::tensor_ref("weights", copy.weights));
  a.put_tensor(nn::tensor_ref("bias", bias));
  a.put_tensor(nn::tensor_ref("mean", copy.mean));
  a.put_tensor(nn::tensor_ref("scale", copy.scale));
  a.save(path);
}

SvrModel load_svr(const std::string& path) {
  Archive a = Archive::load(path);
  a.require_kind("svr");
  const long d = a.get_int("dim");
  if (d < 0) throw Error(ErrorCode::kFormat, "bad SVR dimension");
  SvrModel m;
  m.C = a.get_double("C");
  m.epsilon = a.get_double("epsilon");
  m.weights.setZero(d);
  m.mean.setZero(d);
  m.scale.setZero(d);
  nn::Vector bias(1);
  a.load_into(nn::tensor_ref("weights", m.weights));
  a.load_into(nn::tensor_ref("bias", bias));
  a.load_into(nn::tensor_ref("mean", m.mean));
  a.load_into(nn::tensor_ref("scale", m.scale));
  m.bias = bias(0);
  if ((m.scale.array() <= 0.0).any()) throw Error(ErrorCode::kFormat, "SVR scale must be positive");
  return m;
}

}  // namespace emoint
