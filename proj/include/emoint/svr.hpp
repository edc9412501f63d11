#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emoint/rnn.hpp"

namespace emoint {

struct SvrConfig {
  double C = 1.0;
  double epsilon = 0.05;
  double tol = 1e-4;
  int max_iter = 1000;  // sweeps
  std::uint64_t seed = 1;
};

// Linear epsilon-SVR on z-scored features.
struct SvrModel {
  nn::Vector weights;  // in standardized feature space
  double bias = 0.0;
  double C = 1.0;
  double epsilon = 0.05;
  nn::Vector mean;
  nn::Vector scale;  // population std; 1 for constant features

  Eigen::Index dim() const { return weights.size(); }
};

// Dual variables: beta_i = alpha_i - alpha_i^*, so alpha_i = max(beta_i, 0)
// and alpha_i^* = max(-beta_i, 0).
struct SvrDual {
  nn::Vector beta;

  nn::Vector alpha() const { return beta.cwiseMax(0.0); }
  nn::Vector alpha_star() const { return (-beta).cwiseMax(0.0); }
};

struct SvrTrainingTrace {
  SvrDual dual;
  std::vector<double> sweep_objective;  // dual objective after each sweep
  int sweeps = 0;
  double final_violation = 0.0;
  bool converged = false;
};

struct Standardization {
  nn::Vector mean;
  nn::Vector scale;
};

Standardization fit_standardization(const nn::Matrix& x);
nn::Matrix apply_standardization(const Standardization& s, const nn::Matrix& x);

/// Solves the epsilon-SVR dual
///
///   max  -1/2 beta' Q beta + y' beta - eps * |beta|_1
///   s.t. sum(beta) = 0,  -C <= beta_i <= C,   Q = Z Z'
///
/// over standardized rows Z by pairwise coordinate descent. Each sweep visits
/// every i in a seeded random order, pairs it with its maximal KKT violator
/// j, and minimizes exactly along e_i - e_j. Stops when the maximal violation
/// drops below tol or after max_iter sweeps. The bias is averaged over free
/// support vectors, else taken as the midpoint of its feasible interval.
///
/// Keeps the n x n kernel in memory.
SvrModel train_svr(const nn::Matrix& x, std::span<const double> y, const SvrConfig& config,
                   SvrTrainingTrace* trace = nullptr);

// w . standardize(x) + b, before clamping.
double predict_svr_raw(const SvrModel& model, const nn::Vector& x);
// Clamped to [0,1].
double predict_svr(const SvrModel& model, const nn::Vector& x);

// Dual objective (maximization form) for standardized rows `z`.
double dual_objective(const SvrDual& dual, const nn::Matrix& z, std::span<const double> y,
                      double epsilon);

void save_svr(const SvrModel& model, const std::string& path, std::uint64_t seed);
SvrModel load_svr(const std::string& path);

}  // namespace emoint
