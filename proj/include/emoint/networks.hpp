#pragma once

#include <span>
#include <vector>

#include "emoint/rnn.hpp"

namespace emoint::nn {

/// Next-token model: token input (embedding row or one-hot) -> recurrent
/// cell -> dense projection over the vocabulary -> softmax.
struct TokenLm {
  bool one_hot = false;
  EmbeddingTable embedding;  // unused (0 x 0) when one_hot
  CellParams cell;
  DenseParams output;

  // embed_dim == 0 selects one-hot inputs.
  static TokenLm create(CellKind kind, Eigen::Index vocab, Eigen::Index embed_dim,
                        Eigen::Index hidden, Rng& rng);
  TokenLm zeros_like() const;

  Eigen::Index vocab_size() const { return output.out_dim(); }
  Eigen::Index hidden_dim() const { return nn::hidden_dim(cell); }
  Vector input_vector(int token) const;
  std::vector<Vector> input_vectors(std::span<const int> tokens) const;
  void validate() const;
  TensorList tensors();
};

// One truncated-BPTT window: predict targets[t] from inputs[0..t], starting at init.
struct LmWindow {
  std::vector<int> inputs;
  std::vector<int> targets;
  CellState init;
};

struct LmBatchResult {
  double loss = 0.0;  // mean cross-entropy per target token, nats
  std::size_t tokens = 0;
  std::vector<CellState> final_states;
};

LmBatchResult lm_loss(const TokenLm& model, std::span<const LmWindow> batch);
// Gradients of the mean loss accumulate into `grads` (same architecture).
LmBatchResult lm_loss_and_gradients(const TokenLm& model, std::span<const LmWindow> batch,
                                    TokenLm& grads);

/// Sequence regressor: embeddings -> bidirectional cell ->
/// concat(forward state at the last token, backward state at the first) ->
/// dense(1) -> optional logistic squashing.
struct BiRegressor {
  EmbeddingTable embedding;
  CellParams forward;
  CellParams backward;
  DenseParams head;
  bool squash = true;

  static BiRegressor create(CellKind kind, Eigen::Index vocab, Eigen::Index embed_dim,
                            Eigen::Index hidden, Rng& rng);
  BiRegressor zeros_like() const;

  double predict(std::span<const int> tokens) const;
  void validate() const;
  TensorList tensors();
};

struct RegressionExample {
  std::vector<int> tokens;
  double target = 0.0;
};

// scale * mean squared error over the batch.
double regression_loss(const BiRegressor& model, std::span<const RegressionExample> batch,
                       double scale = 1.0);
double regression_loss_and_gradients(const BiRegressor& model,
                                     std::span<const RegressionExample> batch,
                                     BiRegressor& grads, double scale = 1.0);

}  // namespace emoint::nn
