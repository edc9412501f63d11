#include "emoint/networks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emoint/error.hpp"

namespace emoint::nn {

namespace {

void check_token(int token, Eigen::Index vocab) {
  if (token < 0 || token >= vocab) {
    throw Error(ErrorCode::kShape, "token id " + std::to_string(token) + " outside vocabulary of " +
                                       std::to_string(vocab));
  }
}

std::vector<Vector> embed(const EmbeddingTable& e, std::span<const int> tokens) {
  std::vector<Vector> xs;
  xs.reserve(tokens.size());
  for (int t : tokens) {
    check_token(t, e.vocab_size());
    xs.push_back(e.table.row(t).transpose());
  }
  return xs;
}

void require_same_cell_dims(const CellParams& a, const CellParams& b) {
  if (a.index() != b.index() || input_dim(a) != input_dim(b) || hidden_dim(a) != hidden_dim(b)) {
    throw Error(ErrorCode::kShape, "forward and backward cells differ in kind or shape");
  }
}

}  // namespace

// ---- TokenLm ----

TokenLm TokenLm::create(CellKind kind, Eigen::Index vocab, Eigen::Index embed_dim,
                        Eigen::Index hidden, Rng& rng) {
  TokenLm m;
  m.one_hot = embed_dim == 0;
  Eigen::Index in = vocab;
  if (!m.one_hot) {
    m.embedding = EmbeddingTable::random(vocab, embed_dim, 0.05, rng);
    in = embed_dim;
  }
  m.cell = make_cell(kind, in, hidden, rng);
  m.output = DenseParams::random(hidden, vocab, rng);
  return m;
}

TokenLm TokenLm::zeros_like() const {
  TokenLm g;
  g.one_hot = one_hot;
  g.embedding = EmbeddingTable::zeros(embedding.vocab_size(), embedding.dim());
  g.cell = nn::zeros_like(cell);
  g.output = DenseParams::zeros(output.in_dim(), output.out_dim());
  return g;
}

Vector TokenLm::input_vector(int token) const {
  check_token(token, vocab_size());
  if (one_hot) {
    Vector x = Vector::Zero(vocab_size());
    x(token) = 1.0;
    return x;
  }
  return embedding.table.row(token).transpose();
}

std::vector<Vector> TokenLm::input_vectors(std::span<const int> tokens) const {
  std::vector<Vector> xs;
  xs.reserve(tokens.size());
  for (int t : tokens) xs.push_back(input_vector(t));
  return xs;
}

void TokenLm::validate() const {
  std::visit([](const auto& c) { c.validate(); }, cell);
  output.validate();
  if (output.in_dim() != hidden_dim()) {
    throw Error(ErrorCode::kShape, "output projection input dim != hidden dim");
  }
  const Eigen::Index expected_in = one_hot ? vocab_size() : embedding.dim();
  if (!one_hot) {
    embedding.validate();
    if (embedding.vocab_size() != vocab_size()) {
      throw Error(ErrorCode::kShape, "embedding rows (" + std::to_string(embedding.vocab_size()) +
                                         ") != vocabulary size (" + std::to_string(vocab_size()) + ")");
    }
  }
  if (nn::input_dim(cell) != expected_in) {
    throw Error(ErrorCode::kShape, "cell input dim does not match the input encoding");
  }
}

TensorList TokenLm::tensors() {
  TensorList out;
  if (!one_hot) embedding.collect("embedding", out);
  collect(cell, "cell", out);
  output.collect("output", out);
  return out;
}

namespace {

LmBatchResult lm_pass(const TokenLm& model, std::span<const LmWindow> batch, TokenLm* grads) {
  std::size_t total = 0;
  for (const auto& w : batch) {
    if (w.inputs.size() != w.targets.size()) {
      throw Error(ErrorCode::kShape, "window inputs and targets differ in length");
    }
    total += w.targets.size();
  }
  if (total == 0) throw Error(ErrorCode::kInput, "empty language-model batch");
  const double inv = 1.0 / static_cast<double>(total);

  LmBatchResult result;
  result.tokens = total;
  for (const auto& w : batch) {
    if (w.inputs.empty()) {
      result.final_states.push_back(w.init);
      continue;
    }
    CellState init = w.init.h.size() ? w.init : zero_state(model.cell);
    auto xs = model.input_vectors(w.inputs);
    SequenceTrace trace = forward_sequence(model.cell, xs, init);
    std::vector<Vector> dh(trace.length());
    for (std::size_t t = 0; t < trace.length(); ++t) {
      check_token(w.targets[t], model.vocab_size());
      Vector logits = dense_forward(model.output, trace.hidden(t));
      Vector dlogits;
      result.loss += softmax_cross_entropy(logits, w.targets[t], grads ? &dlogits : nullptr) * inv;
      if (grads) dh[t] = dense_backward(model.output, trace.hidden(t), dlogits * inv, grads->output);
    }
    result.final_states.push_back(trace.final_state());
    if (grads) {
      std::vector<Vector> dx;
      backward_sequence(model.cell, trace, dh, CellState{}, grads->cell, &dx);
      if (!model.one_hot) {
        for (std::size_t t = 0; t < dx.size(); ++t) {
          grads->embedding.table.row(w.inputs[t]) += dx[t].transpose();
        }
      }
    }
  }
  if (!std::isfinite(result.loss)) throw Error(ErrorCode::kNumeric, "language-model loss is not finite");
  return result;
}

}  // namespace

LmBatchResult lm_loss(const TokenLm& model, std::span<const LmWindow> batch) {
  return lm_pass(model, batch, nullptr);
}

LmBatchResult lm_loss_and_gradients(const TokenLm& model, std::span<const LmWindow> batch,
                                    TokenLm& grads) {
  return lm_pass(model, batch, &grads);
}

// ---- BiRegressor ----

BiRegressor BiRegressor::create(CellKind kind, Eigen::Index vocab, Eigen::Index embed_dim,
                                Eigen::Index hidden, Rng& rng) {
  BiRegressor m;
  m.embedding = EmbeddingTable::random(vocab, embed_dim, 0.05, rng);
  m.forward = make_cell(kind, embed_dim, hidden, rng);
  m.backward = make_cell(kind, embed_dim, hidden, rng);
  m.head = DenseParams::random(2 * hidden, 1, rng);
  return m;
}

BiRegressor BiRegressor::zeros_like() const {
  BiRegressor g;
  g.embedding = EmbeddingTable::zeros(embedding.vocab_size(), embedding.dim());
  g.forward = nn::zeros_like(forward);
  g.backward = nn::zeros_like(backward);
  g.head = DenseParams::zeros(head.in_dim(), head.out_dim());
  g.squash = squash;
  return g;
}

void BiRegressor::validate() const {
  embedding.validate();
  std::visit([](const auto& c) { c.validate(); }, forward);
  std::visit([](const auto& c) { c.validate(); }, backward);
  require_same_cell_dims(forward, backward);
  head.validate();
  if (input_dim(forward) != embedding.dim()) {
    throw Error(ErrorCode::kShape, "cell input dim != embedding dim");
  }
  if (head.in_dim() != 2 * hidden_dim(forward) || head.out_dim() != 1) {
    throw Error(ErrorCode::kShape, "head must map 2*hidden -> 1");
  }
}

TensorList BiRegressor::tensors() {
  TensorList out;
  embedding.collect("embedding", out);
  collect(forward, "forward", out);
  collect(backward, "backward", out);
  head.collect("head", out);
  return out;
}

namespace {

struct RegressionForward {
  SequenceTrace fwd;
  SequenceTrace bwd;  // over the reversed tokens
  Vector features;
  double raw = 0.0;
  double output = 0.0;
};

RegressionForward regression_forward(const BiRegressor& m, std::span<const int> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::kInput, "cannot regress on an empty token list");
  auto xs = embed(m.embedding, tokens);
  RegressionForward r;
  r.fwd = forward_sequence(m.forward, xs, zero_state(m.forward));
  std::reverse(xs.begin(), xs.end());
  r.bwd = forward_sequence(m.backward, xs, zero_state(m.backward));
  const Eigen::Index h = hidden_dim(m.forward);
  r.features.resize(2 * h);
  r.features << r.fwd.steps.back().h, r.bwd.steps.back().h;
  r.raw = dense_forward(m.head, r.features)(0);
  r.output = m.squash ? sigmoid(r.raw) : r.raw;
  return r;
}

double regression_pass(const BiRegressor& m, std::span<const RegressionExample> batch,
                       BiRegressor* grads, double scale) {
  if (batch.empty()) throw Error(ErrorCode::kInput, "empty regression batch");
  const double inv = scale / static_cast<double>(batch.size());
  const Eigen::Index h = hidden_dim(m.forward);
  double loss = 0.0;
  for (const auto& ex : batch) {
    RegressionForward r = regression_forward(m, ex.tokens);
    const double err = r.output - ex.target;
    loss += inv * err * err;
    if (!grads) continue;

    double d_out = 2.0 * inv * err;
    double d_raw = m.squash ? d_out * r.output * (1.0 - r.output) : d_out;
    Vector dy(1);
    dy(0) = d_raw;
    Vector dfeat = dense_backward(m.head, r.features, dy, grads->head);

    std::vector<Vector> dx_f;
    std::vector<Vector> dx_b;
    backward_sequence(m.forward, r.fwd, {}, CellState{dfeat.head(h), Vector()}, grads->forward, &dx_f);
    backward_sequence(m.backward, r.bwd, {}, CellState{dfeat.tail(h), Vector()}, grads->backward,
                      &dx_b);
    const std::size_t n = ex.tokens.size();
    for (std::size_t t = 0; t < n; ++t) {
      grads->embedding.table.row(ex.tokens[t]) += (dx_f[t] + dx_b[n - 1 - t]).transpose();
    }
  }
  if (!std::isfinite(loss)) throw Error(ErrorCode::kNumeric, "regression loss is not finite");
  return loss;
}

}  // namespace

double BiRegressor::predict(std::span<const int> tokens) const {
  return regression_forward(*this, tokens).output;
}

double regression_loss(const BiRegressor& model, std::span<const RegressionExample> batch,
                       double scale) {
  return regression_pass(model, batch, nullptr, scale);
}

double regression_loss_and_gradients(const BiRegressor& model,
                                     std::span<const RegressionExample> batch, BiRegressor& grads,
                                     double scale) {
  return regression_pass(model, batch, &grads, scale);
}

}  // namespace emoint::nn
