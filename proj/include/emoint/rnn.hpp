#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace emoint::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

// Portable uniform double in [lo, hi): 53 random bits, no library distribution.
double uniform(Rng& rng, double lo, double hi);
void fill_uniform(Matrix& m, Rng& rng, double scale);
void fill_glorot(Matrix& m, Rng& rng);

/// Named, shape-annotated view over a parameter tensor's storage.
///
/// Storage is Eigen's column-major layout; `values()` spans all of it.
struct TensorRef {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  double* data = nullptr;

  std::span<double> values() const {
    return {data, static_cast<std::size_t>(rows * cols)};
  }
};

using TensorList = std::vector<TensorRef>;

template <class Derived>
TensorRef tensor_ref(std::string name, Eigen::PlainObjectBase<Derived>& m) {
  return TensorRef{std::move(name), m.rows(), m.cols(), m.data()};
}

struct LstmCellParams {
  Matrix w_i, w_f, w_o, w_g;  // hidden x input
  Matrix u_i, u_f, u_o, u_g;  // hidden x hidden
  Vector b_i, b_f, b_o, b_g;

  static LstmCellParams zeros(Eigen::Index input_dim, Eigen::Index hidden_dim);
  // Glorot matrices, zero biases, forget bias 1.
  static LstmCellParams random(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng);

  Eigen::Index input_dim() const { return w_i.cols(); }
  Eigen::Index hidden_dim() const { return w_i.rows(); }
  void validate() const;
  void collect(std::string_view prefix, TensorList& out);
};

// Multiplicative LSTM: m = (w_mx x) * (w_mh h_prev) feeds the recurrent
// matrices in place of h_prev.
struct MlstmCellParams {
  LstmCellParams gates;
  Matrix w_mx;  // hidden x input
  Matrix w_mh;  // hidden x hidden

  static MlstmCellParams zeros(Eigen::Index input_dim, Eigen::Index hidden_dim);
  static MlstmCellParams random(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng);

  Eigen::Index input_dim() const { return gates.input_dim(); }
  Eigen::Index hidden_dim() const { return gates.hidden_dim(); }
  void validate() const;
  void collect(std::string_view prefix, TensorList& out);
};

struct GruCellParams {
  Matrix w_z, w_r, w_h;  // hidden x input
  Matrix u_z, u_r, u_h;  // hidden x hidden
  Vector b_z, b_r, b_h;

  static GruCellParams zeros(Eigen::Index input_dim, Eigen::Index hidden_dim);
  static GruCellParams random(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng);

  Eigen::Index input_dim() const { return w_z.cols(); }
  Eigen::Index hidden_dim() const { return w_z.rows(); }
  void validate() const;
  void collect(std::string_view prefix, TensorList& out);
};

struct DenseParams {
  Matrix weight;  // out x in
  Vector bias;

  static DenseParams zeros(Eigen::Index in_dim, Eigen::Index out_dim);
  static DenseParams random(Eigen::Index in_dim, Eigen::Index out_dim, Rng& rng);

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
  void validate() const;
  void collect(std::string_view prefix, TensorList& out);
};

// Row index is the token id.
struct EmbeddingTable {
  Matrix table;  // vocab x dim

  static EmbeddingTable zeros(Eigen::Index vocab, Eigen::Index dim);
  static EmbeddingTable random(Eigen::Index vocab, Eigen::Index dim, double scale, Rng& rng);

  Eigen::Index vocab_size() const { return table.rows(); }
  Eigen::Index dim() const { return table.cols(); }
  void validate() const;
  void collect(std::string_view prefix, TensorList& out);
};

enum class CellKind { kLstm, kMlstm, kGru };

std::string_view cell_kind_name(CellKind kind);
CellKind parse_cell_kind(std::string_view name);

using CellParams = std::variant<LstmCellParams, MlstmCellParams, GruCellParams>;

CellKind cell_kind(const CellParams& p);
CellParams make_cell(CellKind kind, Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng);
CellParams zeros_like(const CellParams& p);
Eigen::Index input_dim(const CellParams& p);
Eigen::Index hidden_dim(const CellParams& p);
void collect(CellParams& p, std::string_view prefix, TensorList& out);

// `c` is empty for GRU cells.
struct CellState {
  Vector h;
  Vector c;
};

CellState zero_state(const CellParams& p);

CellState lstm_step(const LstmCellParams& p, const Vector& x, const Vector& h_prev,
                    const Vector& c_prev);
CellState mlstm_step(const MlstmCellParams& p, const Vector& x, const Vector& h_prev,
                     const Vector& c_prev);
Vector gru_step(const GruCellParams& p, const Vector& x, const Vector& h_prev);

// Everything a step's backward pass needs. Fields a cell kind does not use stay empty.
struct StepCache {
  Vector x, h_prev, c_prev;
  Vector gate_a, gate_b, gate_c, gate_d;  // lstm: i f o g; gru: z r n
  Vector c, tanh_c;
  Vector recur;       // vector multiplied by the U matrices (h_prev, m, or r*h_prev)
  Vector mx, mh;      // mlstm factors
  Vector h;
};

struct SequenceTrace {
  std::vector<StepCache> steps;

  std::size_t length() const { return steps.size(); }
  const Vector& hidden(std::size_t t) const { return steps[t].h; }
  CellState final_state() const;
};

SequenceTrace forward_sequence(const CellParams& p, std::span<const Vector> inputs,
                               const CellState& init);

// Hidden state after each step, left to right. Throws on an empty sequence.
std::vector<Vector> run_sequence(const CellParams& p, std::span<const Vector> inputs,
                                 const CellState& init);
std::vector<Vector> run_sequence(const CellParams& p, std::span<const Vector> inputs);

// `backward[t]` is the state after the reverse pass consumed inputs T-1..t,
// so `backward.front()` is the backward direction's final state.
struct BidirectionalStates {
  std::vector<Vector> forward;
  std::vector<Vector> backward;
};

BidirectionalStates run_bidirectional(const CellParams& fwd, const CellParams& bwd,
                                      std::span<const Vector> inputs);

/// Backpropagation through a recorded sequence.
///
/// `dh_steps` is either empty or holds one loss gradient per step (a
/// zero-sized entry means none); `d_final` is the gradient flowing into the
/// last state. Parameter gradients accumulate into `grads`, which must hold
/// the same cell kind as `p`. Input gradients are written to `dx` when
/// non-null. Returns the gradient w.r.t. the initial state.
CellState backward_sequence(const CellParams& p, const SequenceTrace& trace,
                            std::span<const Vector> dh_steps, const CellState& d_final,
                            CellParams& grads, std::vector<Vector>* dx);

Vector dense_forward(const DenseParams& p, const Vector& x);
// Accumulates into grads; returns dL/dx.
Vector dense_backward(const DenseParams& p, const Vector& x, const Vector& dy, DenseParams& grads);

double sigmoid(double x);

// Softmax cross-entropy in nats for one target; writes dL/dlogits when non-null.
double softmax_cross_entropy(const Vector& logits, Eigen::Index target, Vector* dlogits);

}  // namespace emoint::nn
