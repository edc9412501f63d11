#include "emoint/rnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emoint/error.hpp"

namespace emoint::nn {

namespace {

[[noreturn]] void shape_error(const std::string& what) { throw Error(ErrorCode::kShape, what); }

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view name) {
  if (m.rows() != rows || m.cols() != cols) {
    shape_error(std::string(name) + ": expected " + std::to_string(rows) + "x" +
                std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()));
  }
}

void require_size(const Vector& v, Eigen::Index n, std::string_view name) {
  if (v.size() != n) {
    shape_error(std::string(name) + ": expected length " + std::to_string(n) + ", got " +
                std::to_string(v.size()));
  }
}

std::string join(std::string_view prefix, std::string_view name) {
  std::string out(prefix);
  if (!out.empty()) out.push_back('.');
  out.append(name);
  return out;
}

Vector sigmoid(const Vector& a) {
  return a.unaryExpr([](double v) { return nn::sigmoid(v); });
}

Vector tanh_of(const Vector& a) { return a.array().tanh().matrix(); }

Vector one_minus_sq(const Vector& t) { return (1.0 - t.array().square()).matrix(); }

Vector sigmoid_deriv(const Vector& s) { return (s.array() * (1.0 - s.array())).matrix(); }

void check_step_inputs(Eigen::Index in, Eigen::Index hid, const Vector& x, const Vector& h_prev) {
  require_size(x, in, "x_t");
  require_size(h_prev, hid, "h_prev");
}

// Shared LSTM gate arithmetic; `recur` is h_prev (lstm) or m (mlstm).
void lstm_gates(const LstmCellParams& p, const Vector& x, const Vector& recur,
                const Vector& c_prev, StepCache& s) {
  s.gate_a = sigmoid(p.w_i * x + p.u_i * recur + p.b_i);
  s.gate_b = sigmoid(p.w_f * x + p.u_f * recur + p.b_f);
  s.gate_c = sigmoid(p.w_o * x + p.u_o * recur + p.b_o);
  s.gate_d = tanh_of(p.w_g * x + p.u_g * recur + p.b_g);
  s.c = s.gate_b.cwiseProduct(c_prev) + s.gate_a.cwiseProduct(s.gate_d);
  s.tanh_c = tanh_of(s.c);
  s.h = s.gate_c.cwiseProduct(s.tanh_c);
}

StepCache lstm_forward(const LstmCellParams& p, const Vector& x, const Vector& h_prev,
                       const Vector& c_prev) {
  check_step_inputs(p.input_dim(), p.hidden_dim(), x, h_prev);
  require_size(c_prev, p.hidden_dim(), "c_prev");
  StepCache s;
  s.x = x;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  s.recur = h_prev;
  lstm_gates(p, x, h_prev, c_prev, s);
  return s;
}

StepCache mlstm_forward(const MlstmCellParams& p, const Vector& x, const Vector& h_prev,
                        const Vector& c_prev) {
  check_step_inputs(p.input_dim(), p.hidden_dim(), x, h_prev);
  require_size(c_prev, p.hidden_dim(), "c_prev");
  StepCache s;
  s.x = x;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  s.mx = p.w_mx * x;
  s.mh = p.w_mh * h_prev;
  s.recur = s.mx.cwiseProduct(s.mh);
  lstm_gates(p.gates, x, s.recur, c_prev, s);
  return s;
}

StepCache gru_forward(const GruCellParams& p, const Vector& x, const Vector& h_prev) {
  check_step_inputs(p.input_dim(), p.hidden_dim(), x, h_prev);
  StepCache s;
  s.x = x;
  s.h_prev = h_prev;
  s.gate_a = sigmoid(p.w_z * x + p.u_z * h_prev + p.b_z);
  s.gate_b = sigmoid(p.w_r * x + p.u_r * h_prev + p.b_r);
  s.recur = s.gate_b.cwiseProduct(h_prev);
  s.gate_c = tanh_of(p.w_h * x + p.u_h * s.recur + p.b_h);
  s.h = h_prev + s.gate_a.cwiseProduct(s.gate_c - h_prev);
  return s;
}

struct StepGrad {
  Vector dx;
  Vector dh_prev;
  Vector dc_prev;
};

// Backward through the LSTM gate block. Returns d(recur); fills dx and dc_prev.
Vector lstm_gates_backward(const LstmCellParams& p, const StepCache& s, const Vector& dh,
                           const Vector& dc, LstmCellParams& g, StepGrad& out) {
  const Vector& i = s.gate_a;
  const Vector& f = s.gate_b;
  const Vector& o = s.gate_c;
  const Vector& cand = s.gate_d;

  Vector d_o = dh.cwiseProduct(s.tanh_c);
  Vector dc_total = dc + dh.cwiseProduct(o).cwiseProduct(one_minus_sq(s.tanh_c));
  Vector d_f = dc_total.cwiseProduct(s.c_prev);
  Vector d_i = dc_total.cwiseProduct(cand);
  Vector d_g = dc_total.cwiseProduct(i);
  out.dc_prev = dc_total.cwiseProduct(f);

  Vector a_i = d_i.cwiseProduct(sigmoid_deriv(i));
  Vector a_f = d_f.cwiseProduct(sigmoid_deriv(f));
  Vector a_o = d_o.cwiseProduct(sigmoid_deriv(o));
  Vector a_g = d_g.cwiseProduct(one_minus_sq(cand));

  g.w_i.noalias() += a_i * s.x.transpose();
  g.w_f.noalias() += a_f * s.x.transpose();
  g.w_o.noalias() += a_o * s.x.transpose();
  g.w_g.noalias() += a_g * s.x.transpose();
  g.u_i.noalias() += a_i * s.recur.transpose();
  g.u_f.noalias() += a_f * s.recur.transpose();
  g.u_o.noalias() += a_o * s.recur.transpose();
  g.u_g.noalias() += a_g * s.recur.transpose();
  g.b_i += a_i;
  g.b_f += a_f;
  g.b_o += a_o;
  g.b_g += a_g;

  out.dx = p.w_i.transpose() * a_i + p.w_f.transpose() * a_f + p.w_o.transpose() * a_o +
           p.w_g.transpose() * a_g;
  return p.u_i.transpose() * a_i + p.u_f.transpose() * a_f + p.u_o.transpose() * a_o +
         p.u_g.transpose() * a_g;
}

StepGrad lstm_backward(const LstmCellParams& p, const StepCache& s, const Vector& dh,
                       const Vector& dc, LstmCellParams& g) {
  StepGrad out;
  out.dh_prev = lstm_gates_backward(p, s, dh, dc, g, out);
  return out;
}

StepGrad mlstm_backward(const MlstmCellParams& p, const StepCache& s, const Vector& dh,
                        const Vector& dc, MlstmCellParams& g) {
  StepGrad out;
  Vector dm = lstm_gates_backward(p.gates, s, dh, dc, g.gates, out);
  Vector dmx = dm.cwiseProduct(s.mh);
  Vector dmh = dm.cwiseProduct(s.mx);
  g.w_mx.noalias() += dmx * s.x.transpose();
  g.w_mh.noalias() += dmh * s.h_prev.transpose();
  out.dx += p.w_mx.transpose() * dmx;
  out.dh_prev = p.w_mh.transpose() * dmh;
  return out;
}

StepGrad gru_backward(const GruCellParams& p, const StepCache& s, const Vector& dh,
                      GruCellParams& g) {
  const Vector& z = s.gate_a;
  const Vector& r = s.gate_b;
  const Vector& n = s.gate_c;

  StepGrad out;
  Vector d_z = dh.cwiseProduct(n - s.h_prev);
  Vector d_n = dh.cwiseProduct(z);
  out.dh_prev = dh - dh.cwiseProduct(z);

  Vector a_n = d_n.cwiseProduct(one_minus_sq(n));
  g.w_h.noalias() += a_n * s.x.transpose();
  g.u_h.noalias() += a_n * s.recur.transpose();
  g.b_h += a_n;
  Vector d_rh = p.u_h.transpose() * a_n;
  Vector d_r = d_rh.cwiseProduct(s.h_prev);
  out.dh_prev += d_rh.cwiseProduct(r);

  Vector a_z = d_z.cwiseProduct(sigmoid_deriv(z));
  Vector a_r = d_r.cwiseProduct(sigmoid_deriv(r));
  g.w_z.noalias() += a_z * s.x.transpose();
  g.w_r.noalias() += a_r * s.x.transpose();
  g.u_z.noalias() += a_z * s.h_prev.transpose();
  g.u_r.noalias() += a_r * s.h_prev.transpose();
  g.b_z += a_z;
  g.b_r += a_r;

  out.dx = p.w_z.transpose() * a_z + p.w_r.transpose() * a_r + p.w_h.transpose() * a_n;
  out.dh_prev += p.u_z.transpose() * a_z + p.u_r.transpose() * a_r;
  return out;
}

}  // namespace

double uniform(Rng& rng, double lo, double hi) {
  double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

void fill_uniform(Matrix& m, Rng& rng, double scale) {
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = uniform(rng, -scale, scale);
}

void fill_glorot(Matrix& m, Rng& rng) {
  double s = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  fill_uniform(m, rng, s);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// ---- parameter containers ----

LstmCellParams LstmCellParams::zeros(Eigen::Index in, Eigen::Index hid) {
  LstmCellParams p;
  for (Matrix* m : {&p.w_i, &p.w_f, &p.w_o, &p.w_g}) m->setZero(hid, in);
  for (Matrix* m : {&p.u_i, &p.u_f, &p.u_o, &p.u_g}) m->setZero(hid, hid);
  for (Vector* v : {&p.b_i, &p.b_f, &p.b_o, &p.b_g}) v->setZero(hid);
  return p;
}

LstmCellParams LstmCellParams::random(Eigen::Index in, Eigen::Index hid, Rng& rng) {
  LstmCellParams p = zeros(in, hid);
  for (Matrix* m : {&p.w_i, &p.w_f, &p.w_o, &p.w_g, &p.u_i, &p.u_f, &p.u_o, &p.u_g}) {
    fill_glorot(*m, rng);
  }
  p.b_f.setOnes();
  return p;
}

void LstmCellParams::validate() const {
  const auto in = input_dim();
  const auto hid = hidden_dim();
  require_shape(w_i, hid, in, "w_i");
  require_shape(w_f, hid, in, "w_f");
  require_shape(w_o, hid, in, "w_o");
  require_shape(w_g, hid, in, "w_g");
  require_shape(u_i, hid, hid, "u_i");
  require_shape(u_f, hid, hid, "u_f");
  require_shape(u_o, hid, hid, "u_o");
  require_shape(u_g, hid, hid, "u_g");
  require_size(b_i, hid, "b_i");
  require_size(b_f, hid, "b_f");
  require_size(b_o, hid, "b_o");
  require_size(b_g, hid, "b_g");
}

void LstmCellParams::collect(std::string_view prefix, TensorList& out) {
  out.push_back(tensor_ref(join(prefix, "w_i"), w_i));
  out.push_back(tensor_ref(join(prefix, "w_f"), w_f));
  out.push_back(tensor_ref(join(prefix, "w_o"), w_o));
  out.push_back(tensor_ref(join(prefix, "w_g"), w_g));
  out.push_back(tensor_ref(join(prefix, "u_i"), u_i));
  out.push_back(tensor_ref(join(prefix, "u_f"), u_f));
  out.push_back(tensor_ref(join(prefix, "u_o"), u_o));
  out.push_back(tensor_ref(join(prefix, "u_g"), u_g));
  out.push_back(tensor_ref(join(prefix, "b_i"), b_i));
  out.push_back(tensor_ref(join(prefix, "b_f"), b_f));
  out.push_back(tensor_ref(join(prefix, "b_o"), b_o));
  out.push_back(tensor_ref(join(prefix, "b_g"), b_g));
}

MlstmCellParams MlstmCellParams::zeros(Eigen::Index in, Eigen::Index hid) {
  MlstmCellParams p;
  p.gates = LstmCellParams::zeros(in, hid);
  p.w_mx.setZero(hid, in);
  p.w_mh.setZero(hid, hid);
  return p;
}

MlstmCellParams MlstmCellParams::random(Eigen::Index in, Eigen::Index hid, Rng& rng) {
  MlstmCellParams p;
  p.gates = LstmCellParams::random(in, hid, rng);
  p.w_mx.setZero(hid, in);
  p.w_mh.setZero(hid, hid);
  fill_glorot(p.w_mx, rng);
  fill_glorot(p.w_mh, rng);
  return p;
}

void MlstmCellParams::validate() const {
  gates.validate();
  require_shape(w_mx, hidden_dim(), input_dim(), "w_mx");
  require_shape(w_mh, hidden_dim(), hidden_dim(), "w_mh");
}

void MlstmCellParams::collect(std::string_view prefix, TensorList& out) {
  gates.collect(prefix, out);
  out.push_back(tensor_ref(join(prefix, "w_mx"), w_mx));
  out.push_back(tensor_ref(join(prefix, "w_mh"), w_mh));
}

GruCellParams GruCellParams::zeros(Eigen::Index in, Eigen::Index hid) {
  GruCellParams p;
  for (Matrix* m : {&p.w_z, &p.w_r, &p.w_h}) m->setZero(hid, in);
  for (Matrix* m : {&p.u_z, &p.u_r, &p.u_h}) m->setZero(hid, hid);
  for (Vector* v : {&p.b_z, &p.b_r, &p.b_h}) v->setZero(hid);
  return p;
}

GruCellParams GruCellParams::random(Eigen::Index in, Eigen::Index hid, Rng& rng) {
  GruCellParams p = zeros(in, hid);
  for (Matrix* m : {&p.w_z, &p.w_r, &p.w_h, &p.u_z, &p.u_r, &p.u_h}) fill_glorot(*m, rng);
  return p;
}

void GruCellParams::validate() const {
  const auto in = input_dim();
  const auto hid = hidden_dim();
  require_shape(w_z, hid, in, "w_z");
  require_shape(w_r, hid, in, "w_r");
  require_shape(w_h, hid, in, "w_h");
  require_shape(u_z, hid, hid, "u_z");
  require_shape(u_r, hid, hid, "u_r");
  require_shape(u_h, hid, hid, "u_h");
  require_size(b_z, hid, "b_z");
  require_size(b_r, hid, "b_r");
  require_size(b_h, hid, "b_h");
}

void GruCellParams::collect(std::string_view prefix, TensorList& out) {
  out.push_back(tensor_ref(join(prefix, "w_z"), w_z));
  out.push_back(tensor_ref(join(prefix, "w_r"), w_r));
  out.push_back(tensor_ref(join(prefix, "w_h"), w_h));
  out.push_back(tensor_ref(join(prefix, "u_z"), u_z));
  out.push_back(tensor_ref(join(prefix, "u_r"), u_r));
  out.push_back(tensor_ref(join(prefix, "u_h"), u_h));
  out.push_back(tensor_ref(join(prefix, "b_z"), b_z));
  out.push_back(tensor_ref(join(prefix, "b_r"), b_r));
  out.push_back(tensor_ref(join(prefix, "b_h"), b_h));
}

DenseParams DenseParams::zeros(Eigen::Index in, Eigen::Index out) {
  DenseParams p;
  p.weight.setZero(out, in);
  p.bias.setZero(out);
  return p;
}

DenseParams DenseParams::random(Eigen::Index in, Eigen::Index out, Rng& rng) {
  DenseParams p = zeros(in, out);
  fill_glorot(p.weight, rng);
  return p;
}

void DenseParams::validate() const { require_size(bias, out_dim(), "bias"); }

void DenseParams::collect(std::string_view prefix, TensorList& out) {
  out.push_back(tensor_ref(join(prefix, "weight"), weight));
  out.push_back(tensor_ref(join(prefix, "bias"), bias));
}

EmbeddingTable EmbeddingTable::zeros(Eigen::Index vocab, Eigen::Index dim) {
  EmbeddingTable e;
  e.table.setZero(vocab, dim);
  return e;
}

EmbeddingTable EmbeddingTable::random(Eigen::Index vocab, Eigen::Index dim, double scale,
                                      Rng& rng) {
  EmbeddingTable e = zeros(vocab, dim);
  // Row-major fill so that a row's values do not depend on the vocabulary size.
  for (Eigen::Index r = 0; r < vocab; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) e.table(r, c) = uniform(rng, -scale, scale);
  }
  return e;
}

void EmbeddingTable::validate() const {
  if (dim() <= 0) shape_error("embedding dim must be positive");
  if (!table.allFinite()) shape_error("embedding table has non-finite entries");
}

void EmbeddingTable::collect(std::string_view prefix, TensorList& out) {
  out.push_back(tensor_ref(join(prefix, "table"), table));
}

std::string_view cell_kind_name(CellKind kind) {
  switch (kind) {
    case CellKind::kLstm: return "lstm";
    case CellKind::kMlstm: return "mlstm";
    case CellKind::kGru: return "gru";
  }
  return "?";
}

CellKind parse_cell_kind(std::string_view name) {
  if (name == "lstm") return CellKind::kLstm;
  if (name == "mlstm") return CellKind::kMlstm;
  if (name == "gru") return CellKind::kGru;
  throw Error(ErrorCode::kConfig, "unknown cell kind '" + std::string(name) + "'");
}

CellKind cell_kind(const CellParams& p) { return static_cast<CellKind>(p.index()); }

CellParams make_cell(CellKind kind, Eigen::Index in, Eigen::Index hid, Rng& rng) {
  switch (kind) {
    case CellKind::kLstm: return LstmCellParams::random(in, hid, rng);
    case CellKind::kMlstm: return MlstmCellParams::random(in, hid, rng);
    case CellKind::kGru: return GruCellParams::random(in, hid, rng);
  }
  shape_error("bad cell kind");
}

CellParams zeros_like(const CellParams& p) {
  return std::visit(
      [](const auto& c) -> CellParams {
        using T = std::decay_t<decltype(c)>;
        return T::zeros(c.input_dim(), c.hidden_dim());
      },
      p);
}

Eigen::Index input_dim(const CellParams& p) {
  return std::visit([](const auto& c) { return c.input_dim(); }, p);
}

Eigen::Index hidden_dim(const CellParams& p) {
  return std::visit([](const auto& c) { return c.hidden_dim(); }, p);
}

void collect(CellParams& p, std::string_view prefix, TensorList& out) {
  std::visit([&](auto& c) { c.collect(prefix, out); }, p);
}

CellState zero_state(const CellParams& p) {
  CellState s;
  s.h = Vector::Zero(hidden_dim(p));
  if (cell_kind(p) != CellKind::kGru) s.c = Vector::Zero(hidden_dim(p));
  return s;
}

// ---- single steps ----

CellState lstm_step(const LstmCellParams& p, const Vector& x, const Vector& h_prev,
                    const Vector& c_prev) {
  StepCache s = lstm_forward(p, x, h_prev, c_prev);
  return {std::move(s.h), std::move(s.c)};
}

CellState mlstm_step(const MlstmCellParams& p, const Vector& x, const Vector& h_prev,
                     const Vector& c_prev) {
  StepCache s = mlstm_forward(p, x, h_prev, c_prev);
  return {std::move(s.h), std::move(s.c)};
}

Vector gru_step(const GruCellParams& p, const Vector& x, const Vector& h_prev) {
  return gru_forward(p, x, h_prev).h;
}

// ---- sequences ----

CellState SequenceTrace::final_state() const {
  const StepCache& last = steps.back();
  return {last.h, last.c};
}

SequenceTrace forward_sequence(const CellParams& p, std::span<const Vector> inputs,
                               const CellState& init) {
  if (inputs.empty()) throw Error(ErrorCode::kInput, "empty input sequence");
  SequenceTrace trace;
  trace.steps.reserve(inputs.size());
  Vector h = init.h;
  Vector c = init.c;
  for (const Vector& x : inputs) {
    StepCache s = std::visit(
        [&](const auto& cell) -> StepCache {
          using T = std::decay_t<decltype(cell)>;
          if constexpr (std::is_same_v<T, LstmCellParams>) {
            return lstm_forward(cell, x, h, c);
          } else if constexpr (std::is_same_v<T, MlstmCellParams>) {
            return mlstm_forward(cell, x, h, c);
          } else {
            return gru_forward(cell, x, h);
          }
        },
        p);
    h = s.h;
    c = s.c;
    trace.steps.push_back(std::move(s));
  }
  return trace;
}

std::vector<Vector> run_sequence(const CellParams& p, std::span<const Vector> inputs,
                                 const CellState& init) {
  SequenceTrace trace = forward_sequence(p, inputs, init);
  std::vector<Vector> states;
  states.reserve(trace.length());
  for (auto& s : trace.steps) states.push_back(std::move(s.h));
  return states;
}

std::vector<Vector> run_sequence(const CellParams& p, std::span<const Vector> inputs) {
  return run_sequence(p, inputs, zero_state(p));
}

BidirectionalStates run_bidirectional(const CellParams& fwd, const CellParams& bwd,
                                      std::span<const Vector> inputs) {
  BidirectionalStates out;
  out.forward = run_sequence(fwd, inputs);
  std::vector<Vector> reversed(inputs.rbegin(), inputs.rend());
  out.backward = run_sequence(bwd, reversed);
  std::reverse(out.backward.begin(), out.backward.end());
  return out;
}

CellState backward_sequence(const CellParams& p, const SequenceTrace& trace,
                            std::span<const Vector> dh_steps, const CellState& d_final,
                            CellParams& grads, std::vector<Vector>* dx) {
  if (grads.index() != p.index()) shape_error("gradient container holds a different cell kind");
  if (!dh_steps.empty() && dh_steps.size() != trace.length()) {
    shape_error("dh_steps length does not match the trace");
  }
  const Eigen::Index hid = hidden_dim(p);
  const bool has_cell = cell_kind(p) != CellKind::kGru;
  Vector dh = d_final.h.size() ? d_final.h : Vector::Zero(hid);
  Vector dc = has_cell ? (d_final.c.size() ? d_final.c : Vector::Zero(hid)) : Vector();
  if (dx) dx->assign(trace.length(), Vector());

  for (std::size_t k = trace.length(); k-- > 0;) {
    if (!dh_steps.empty() && dh_steps[k].size() != 0) dh += dh_steps[k];
    const StepCache& s = trace.steps[k];
    StepGrad g = std::visit(
        [&](const auto& cell) -> StepGrad {
          using T = std::decay_t<decltype(cell)>;
          auto& gcell = std::get<T>(grads);
          if constexpr (std::is_same_v<T, LstmCellParams>) {
            return lstm_backward(cell, s, dh, dc, gcell);
          } else if constexpr (std::is_same_v<T, MlstmCellParams>) {
            return mlstm_backward(cell, s, dh, dc, gcell);
          } else {
            return gru_backward(cell, s, dh, gcell);
          }
        },
        p);
    dh = std::move(g.dh_prev);
    if (has_cell) dc = std::move(g.dc_prev);
    if (dx) (*dx)[k] = std::move(g.dx);
  }
  return {dh, dc};
}

// ---- dense + losses ----

Vector dense_forward(const DenseParams& p, const Vector& x) {
  require_size(x, p.in_dim(), "dense input");
  return p.weight * x + p.bias;
}

Vector dense_backward(const DenseParams& p, const Vector& x, const Vector& dy, DenseParams& g) {
  g.weight.noalias() += dy * x.transpose();
  g.bias += dy;
  return p.weight.transpose() * dy;
}

double softmax_cross_entropy(const Vector& logits, Eigen::Index target, Vector* dlogits) {
  if (target < 0 || target >= logits.size()) shape_error("softmax target out of range");
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp().matrix();
  const double z = e.sum();
  const double loss = std::log(z) - (logits(target) - mx);
  if (dlogits) {
    *dlogits = e / z;
    (*dlogits)(target) -= 1.0;
  }
  return loss;
}

}  // namespace emoint::nn
