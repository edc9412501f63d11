#pragma once

// Straight-line reference implementations used to check the library. They
// only read matrix entries one at a time and never call into the library's
// arithmetic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "emoint/rnn.hpp"

namespace oracle {

using Vec = std::vector<double>;
using emoint::nn::Matrix;
using emoint::nn::Vector;

inline double sig(double a) { return 1.0 / (1.0 + std::exp(-a)); }

inline Vec to_vec(const Vector& v) {
  Vec out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i);
  return out;
}

// w x + u r + b, row k
inline double affine(const Matrix& w, const Vec& x, const Matrix& u, const Vec& r, const Vector& b,
                     Eigen::Index k) {
  double s = b(k);
  for (Eigen::Index j = 0; j < w.cols(); ++j) s += w(k, j) * x[static_cast<std::size_t>(j)];
  for (Eigen::Index j = 0; j < u.cols(); ++j) s += u(k, j) * r[static_cast<std::size_t>(j)];
  return s;
}

inline Vec matvec(const Matrix& m, const Vec& x) {
  Vec out(static_cast<std::size_t>(m.rows()), 0.0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += m(i, j) * x[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = s;
  }
  return out;
}

struct HC {
  Vec h, c;
};

inline HC lstm_with_recur(const emoint::nn::LstmCellParams& p, const Vec& x, const Vec& recur, const Vec& c_prev) {
  const auto n = static_cast<std::size_t>(p.hidden_dim());
  HC out{Vec(n), Vec(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const auto K = static_cast<Eigen::Index>(k);
    const double i = sig(affine(p.w_i, x, p.u_i, recur, p.b_i, K));
    const double f = sig(affine(p.w_f, x, p.u_f, recur, p.b_f, K));
    const double o = sig(affine(p.w_o, x, p.u_o, recur, p.b_o, K));
    const double g = std::tanh(affine(p.w_g, x, p.u_g, recur, p.b_g, K));
    out.c[k] = f * c_prev[k] + i * g;
    out.h[k] = o * std::tanh(out.c[k]);
  }
  return out;
}

inline HC lstm(const emoint::nn::LstmCellParams& p, const Vec& x, const Vec& h_prev, const Vec& c_prev) {
  return lstm_with_recur(p, x, h_prev, c_prev);
}

inline HC mlstm(const emoint::nn::MlstmCellParams& p, const Vec& x, const Vec& h_prev, const Vec& c_prev) {
  const Vec a = matvec(p.w_mx, x);
  const Vec b = matvec(p.w_mh, h_prev);
  Vec m(a.size());
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = a[k] * b[k];
  return lstm_with_recur(p.gates, x, m, c_prev);
}

inline Vec gru(const emoint::nn::GruCellParams& p, const Vec& x, const Vec& h_prev) {
  const auto n = static_cast<std::size_t>(p.hidden_dim());
  Vec r(n), z(n), h(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto K = static_cast<Eigen::Index>(k);
    z[k] = sig(affine(p.w_z, x, p.u_z, h_prev, p.b_z, K));
    r[k] = sig(affine(p.w_r, x, p.u_r, h_prev, p.b_r, K));
  }
  Vec rh(n);
  for (std::size_t k = 0; k < n; ++k) rh[k] = r[k] * h_prev[k];
  for (std::size_t k = 0; k < n; ++k) {
    const double cand = std::tanh(affine(p.w_h, x, p.u_h, rh, p.b_h, static_cast<Eigen::Index>(k)));
    h[k] = (1.0 - z[k]) * h_prev[k] + z[k] * cand;
  }
  return h;
}

inline double max_abs_diff(const Vec& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b(static_cast<Eigen::Index>(i))));
  return a.size() == static_cast<std::size_t>(b.size()) ? m : std::numeric_limits<double>::infinity();
}

// Pearson by the textbook two-pass formula; nullopt-like NaN when undefined.
inline double pearson(const Vec& x, const Vec& y) {
  const std::size_t n = x.size();
  if (n < 2) return std::nan("");
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nan("");
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// O(n^2) average rank: 1 + #smaller + (#equal - 1) / 2.
inline Vec ranks(const Vec& x) {
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) less += 1;
      if (x[j] == x[i]) equal += 1;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double spearman(const Vec& x, const Vec& y) { return pearson(ranks(x), ranks(y)); }

// Scalar Adam on f(w) = w^2.
inline std::vector<double> adam_w_squared(double w0, int steps, double lr, double b1, double b2, double eps) {
  std::vector<double> path;
  double w = w0, m = 0, v = 0;
  for (int t = 1; t <= steps; ++t) {
    const double g = 2.0 * w;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    w -= lr * mh / (std::sqrt(vh) + eps);
    path.push_back(w);
  }
  return path;
}

// Dual objective of the epsilon-SVR for standardized rows z (n x d).
inline double svr_dual(const std::vector<Vec>& z, const Vec& y, double eps, const Vec& beta) {
  const std::size_t n = z.size();
  double quad = 0, lin = 0, l1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double k = 0;
      for (std::size_t d = 0; d < z[i].size(); ++d) k += z[i][d] * z[j][d];
      quad += beta[i] * beta[j] * k;
    }
    lin += y[i] * beta[i];
    l1 += std::abs(beta[i]);
  }
  return -0.5 * quad + lin - eps * l1;
}

// Grid maximization of the 4-point dual with beta_4 = -(beta_1 + beta_2 + beta_3),
// coarse pass then a refined pass around the best point.
inline double svr_dual_brute_force_n4(const std::vector<Vec>& z, const Vec& y, double eps, double C) {
  double best = -std::numeric_limits<double>::infinity();
  Vec best_b(4, 0.0);
  auto scan = [&](const Vec& center, double half, int steps) {
    const double h = 2.0 * half / steps;
    for (int a = 0; a <= steps; ++a) {
      for (int b = 0; b <= steps; ++b) {
        for (int c = 0; c <= steps; ++c) {
          Vec beta = {center[0] - half + a * h, center[1] - half + b * h, center[2] - half + c * h, 0.0};
          beta[3] = -(beta[0] + beta[1] + beta[2]);
          bool ok = true;
          for (double v : beta) ok = ok && v >= -C - 1e-12 && v <= C + 1e-12;
          if (!ok) continue;
          const double f = svr_dual(z, y, eps, beta);
          if (f > best) {
            best = f;
            best_b = beta;
          }
        }
      }
    }
  };
  scan({0, 0, 0}, C, 160);
  const double coarse = 2.0 * C / 160;
  scan(best_b, 2 * coarse, 80);
  scan(best_b, 2 * coarse / 40, 40);
  return best;
}

}  // namespace oracle
