#include <cmath>

#include "doctest.h"
#include "emoint/error.hpp"
#include "emoint/networks.hpp"
#include "emoint/optim.hpp"
#include "grad_cases.hpp"
#include "oracles.hpp"

using namespace emoint;
using namespace emoint::nn;

namespace {

Vector random_vector(Eigen::Index n, Rng& rng, double s = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, -s, s);
  return v;
}

// Non-zero biases so the oracle exercises every term.
template <class P>
void randomize_biases(P& p, Rng& rng) {
  TensorList ts;
  p.collect("", ts);
  for (auto& t : ts) {
    if (t.cols == 1) {
      for (auto& v : t.values()) v = uniform(rng, -0.5, 0.5);
    }
  }
}

bool same(const Vector& a, const Vector& b) { return a.size() == b.size() && (a - b).cwiseAbs().maxCoeff() == 0.0; }

}  // namespace

TEST_CASE("zero-parameter cells") {
  auto lstm = LstmCellParams::zeros(3, 4);
  Vector x = Vector::Constant(3, 0.7);
  auto s = lstm_step(lstm, x, Vector::Zero(4), Vector::Zero(4));
  CHECK(s.h.isZero(0));
  CHECK(s.c.isZero(0));

  Vector c(4);
  c << 1.0, -2.0, 0.5, 3.0;
  s = lstm_step(lstm, x, Vector::Zero(4), c);
  for (Eigen::Index k = 0; k < 4; ++k) {
    CHECK(s.c(k) == doctest::Approx(0.5 * c(k)).epsilon(1e-15));
    CHECK(s.h(k) == doctest::Approx(0.5 * std::tanh(0.5 * c(k))).epsilon(1e-15));
  }

  auto gru = GruCellParams::zeros(3, 4);
  CHECK(gru_step(gru, x, Vector::Zero(4)).isZero(0));
  Vector v(4);
  v << 1.0, -1.0, 0.25, 2.0;
  auto h = gru_step(gru, x, v);
  for (Eigen::Index k = 0; k < 4; ++k) CHECK(h(k) == doctest::Approx(0.5 * v(k)).epsilon(1e-15));
}

TEST_CASE("mlstm with zero history ignores recurrent weights") {
  Rng rng(3);
  auto p = MlstmCellParams::random(3, 4, rng);
  auto q = p;
  q.gates.u_i.setRandom();
  q.gates.u_g.setRandom();
  q.w_mh.setRandom();
  Vector x = random_vector(3, rng);
  Vector c = random_vector(4, rng);
  auto a = mlstm_step(p, x, Vector::Zero(4), c);
  auto b = mlstm_step(q, x, Vector::Zero(4), c);
  CHECK(same(a.h, b.h));
  CHECK(same(a.c, b.c));
}

TEST_CASE("mlstm with identity factors uses x * h_prev") {
  Rng rng(4);
  auto p = MlstmCellParams::random(4, 4, rng);
  p.w_mx.setIdentity();
  p.w_mh.setIdentity();
  Vector x = random_vector(4, rng);
  Vector h = random_vector(4, rng);
  Vector c = random_vector(4, rng);
  auto got = mlstm_step(p, x, h, c);
  // An LSTM whose recurrent input is x*h_prev.
  auto m = oracle::to_vec(x.cwiseProduct(h));
  auto want = oracle::lstm_with_recur(p.gates, oracle::to_vec(x), m, oracle::to_vec(c));
  CHECK(oracle::max_abs_diff(want.h, got.h) <= 1e-12);
  CHECK(oracle::max_abs_diff(want.c, got.c) <= 1e-12);
}

TEST_CASE("cells match the straight-line oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto lstm = LstmCellParams::random(3, 4, rng);
    randomize_biases(lstm, rng);
    auto ml = MlstmCellParams::random(3, 4, rng);
    randomize_biases(ml, rng);
    auto gru = GruCellParams::random(3, 4, rng);
    randomize_biases(gru, rng);
    Vector x = random_vector(3, rng), h = random_vector(4, rng), c = random_vector(4, rng);
    auto X = oracle::to_vec(x), H = oracle::to_vec(h), Cc = oracle::to_vec(c);

    auto a = lstm_step(lstm, x, h, c);
    auto ao = oracle::lstm(lstm, X, H, Cc);
    CHECK(oracle::max_abs_diff(ao.h, a.h) <= 1e-12);
    CHECK(oracle::max_abs_diff(ao.c, a.c) <= 1e-12);

    auto b = mlstm_step(ml, x, h, c);
    auto bo = oracle::mlstm(ml, X, H, Cc);
    CHECK(oracle::max_abs_diff(bo.h, b.h) <= 1e-12);
    CHECK(oracle::max_abs_diff(bo.c, b.c) <= 1e-12);

    CHECK(oracle::max_abs_diff(oracle::gru(gru, X, H), gru_step(gru, x, h)) <= 1e-12);
  }
}

TEST_CASE("cell shape errors") {
  auto lstm = LstmCellParams::zeros(3, 4);
  auto shape_error = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code() == ErrorCode::kShape;
    }
    return false;
  };
  CHECK(shape_error([&] { lstm_step(lstm, Vector::Zero(2), Vector::Zero(4), Vector::Zero(4)); }));
  CHECK(shape_error([&] { lstm_step(lstm, Vector::Zero(3), Vector::Zero(5), Vector::Zero(4)); }));
  CHECK(shape_error([&] { lstm_step(lstm, Vector::Zero(3), Vector::Zero(4), Vector::Zero(3)); }));
  auto gru = GruCellParams::zeros(3, 4);
  CHECK(shape_error([&] { gru_step(gru, Vector::Zero(4), Vector::Zero(4)); }));
  auto bad = LstmCellParams::zeros(3, 4);
  bad.u_f.resize(4, 3);
  CHECK(shape_error([&] { bad.validate(); }));
}

TEST_CASE("run_sequence") {
  Rng rng(8);
  for (auto kind : {CellKind::kLstm, CellKind::kMlstm, CellKind::kGru}) {
    CAPTURE(cell_kind_name(kind));
    auto cell = make_cell(kind, 3, 5, rng);
    std::vector<Vector> seq;
    for (int t = 0; t < 7; ++t) seq.push_back(random_vector(3, rng));

    // length 1 equals a single step
    auto one = run_sequence(cell, std::span(seq).first(1));
    REQUIRE(one.size() == 1);
    Vector step;
    if (kind == CellKind::kGru) {
      step = gru_step(std::get<GruCellParams>(cell), seq[0], Vector::Zero(5));
    } else if (kind == CellKind::kLstm) {
      step = lstm_step(std::get<LstmCellParams>(cell), seq[0], Vector::Zero(5), Vector::Zero(5)).h;
    } else {
      step = mlstm_step(std::get<MlstmCellParams>(cell), seq[0], Vector::Zero(5), Vector::Zero(5)).h;
    }
    CHECK(same(one[0], step));

    // causal prefix
    auto all = run_sequence(cell, seq);
    auto prefix = run_sequence(cell, std::span(seq).first(4));
    for (std::size_t t = 0; t < 4; ++t) CHECK(same(all[t], prefix[t]));

    // step-by-step oracle
    oracle::Vec h(5, 0.0), c(5, 0.0);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      auto x = oracle::to_vec(seq[t]);
      if (kind == CellKind::kGru) {
        h = oracle::gru(std::get<GruCellParams>(cell), x, h);
      } else {
        auto s = kind == CellKind::kLstm ? oracle::lstm(std::get<LstmCellParams>(cell), x, h, c)
                                         : oracle::mlstm(std::get<MlstmCellParams>(cell), x, h, c);
        h = s.h;
        c = s.c;
      }
      CHECK(oracle::max_abs_diff(h, all[t]) <= 1e-12);
    }

    CHECK_THROWS_AS(run_sequence(cell, std::span<const Vector>{}), Error);
  }
}

TEST_CASE("run_bidirectional") {
  Rng rng(9);
  for (auto kind : {CellKind::kLstm, CellKind::kGru}) {
    auto cell = make_cell(kind, 2, 3, rng);
    Vector a = random_vector(2, rng), b = random_vector(2, rng), c = random_vector(2, rng);
    std::vector<Vector> pal = {a, b, c, b, a};
    auto st = run_bidirectional(cell, cell, pal);
    REQUIRE(st.forward.size() == 5);
    REQUIRE(st.backward.size() == 5);
    for (std::size_t t = 0; t < 5; ++t) CHECK(same(st.forward[t], st.backward[4 - t]));

    std::vector<Vector> single = {a};
    auto s1 = run_bidirectional(cell, cell, single);
    CHECK(same(s1.forward[0], s1.backward[0]));

    auto other = make_cell(kind, 2, 3, rng);
    std::vector<Vector> seq = {a, c, b, b};
    auto st2 = run_bidirectional(cell, other, seq);
    auto fwd = run_sequence(cell, seq);
    std::vector<Vector> rev(seq.rbegin(), seq.rend());
    auto bwd = run_sequence(other, rev);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      CHECK(same(st2.forward[t], fwd[t]));
      CHECK(same(st2.backward[t], bwd[seq.size() - 1 - t]));
    }
  }
}

TEST_CASE("gradients match finite differences") {
  for (auto kind : {CellKind::kLstm, CellKind::kMlstm, CellKind::kGru}) {
    CAPTURE(cell_kind_name(kind));
    for (bool one_hot : {false, true}) {
      auto r = gradcase::lm_case(kind, one_hot, 21);
      CHECK(r.all < 1e-4);
    }
    auto r = gradcase::regression_case(kind, 22);
    CHECK(r.all < 1e-4);
  }
  CHECK(gradcase::linear_mse_case(5) < 1e-8);
}

TEST_CASE("zero-loss regression leaves the head bias gradient at zero") {
  Rng rng(30);
  auto model = BiRegressor::create(CellKind::kGru, 7, 4, 3, rng);
  std::vector<RegressionExample> batch = {{{1, 2, 3}, 0.0}, {{4}, 0.0}};
  for (auto& ex : batch) ex.target = model.predict(ex.tokens);
  auto grads = model.zeros_like();
  const double loss = regression_loss_and_gradients(model, batch, grads);
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-20));
  CHECK(std::abs(grads.head.bias(0)) < 1e-15);
}

TEST_CASE("doubling the loss scale doubles every gradient") {
  Rng rng(31);
  auto model = BiRegressor::create(CellKind::kLstm, 7, 4, 3, rng);
  std::vector<RegressionExample> batch = {{{1, 2, 3}, 0.9}, {{4, 6}, 0.1}};
  auto g1 = model.zeros_like();
  auto g2 = model.zeros_like();
  regression_loss_and_gradients(model, batch, g1, 1.0);
  regression_loss_and_gradients(model, batch, g2, 2.0);
  auto t1 = g1.tensors();
  auto t2 = g2.tensors();
  REQUIRE(t1.size() == t2.size());
  for (std::size_t i = 0; i < t1.size(); ++i) {
    auto a = t1[i].values();
    auto b = t2[i].values();
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == doctest::Approx(2.0 * a[k]).epsilon(1e-13));
  }
}

TEST_CASE("softmax cross-entropy") {
  Vector logits = Vector::Zero(4);
  Vector d;
  CHECK(softmax_cross_entropy(logits, 2, &d) == doctest::Approx(std::log(4.0)));
  CHECK(d(2) == doctest::Approx(-0.75));
  CHECK(d(0) == doctest::Approx(0.25));
  logits << 1000.0, 0.0, 0.0, 0.0;
  CHECK(std::isfinite(softmax_cross_entropy(logits, 1, nullptr)));
}
