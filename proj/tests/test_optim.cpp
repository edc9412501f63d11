#include <cmath>
#include <sstream>

#include "doctest.h"
#include "emoint/archive.hpp"
#include "emoint/error.hpp"
#include "emoint/optim.hpp"
#include "oracles.hpp"

using namespace emoint;
using namespace emoint::nn;

namespace {

struct Pair {
  Matrix a;
  Vector b;
  TensorList list() {
    return {tensor_ref("a", a), tensor_ref("b", b)};
  }
};

}  // namespace

TEST_CASE("clipping by global norm") {
  Pair g{Matrix::Zero(1, 2), Vector::Zero(2)};
  g.a << 0.3, 0.0;
  g.b << 0.4, 0.0;
  CHECK(clip_gradients_by_norm(g.list(), 1.0) == doctest::Approx(0.5));
  CHECK(g.a(0, 0) == 0.3);
  CHECK(g.b(0) == 0.4);

  g.a << 2.4, 0.0;
  g.b << 3.2, 0.0;
  CHECK(clip_gradients_by_norm(g.list(), 1.0) == doctest::Approx(4.0));
  CHECK(g.a(0, 0) == doctest::Approx(0.6));
  CHECK(g.b(0) == doctest::Approx(0.8));
  CHECK(global_norm(g.list()) <= 1.0 + 1e-12);

  Pair z{Matrix::Zero(2, 2), Vector::Zero(3)};
  CHECK(clip_gradients_by_norm(z.list(), 1.0) == 0.0);
  CHECK(z.a.isZero(0));

  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    Pair r{Matrix(3, 3), Vector(4)};
    for (Eigen::Index i = 0; i < 9; ++i) r.a.data()[i] = uniform(rng, -5, 5);
    for (Eigen::Index i = 0; i < 4; ++i) r.b(i) = uniform(rng, -5, 5);
    const double max_norm = uniform(rng, 0.1, 3.0);
    clip_gradients_by_norm(r.list(), max_norm);
    CHECK(global_norm(r.list()) <= max_norm + 1e-12);
  }
}

TEST_CASE("adam with zero gradients changes nothing") {
  Pair p{Matrix::Constant(2, 2, 1.5), Vector::Constant(2, -1.0)};
  Pair g{Matrix::Zero(2, 2), Vector::Zero(2)};
  AdamState st;
  adam_update(st, p.list(), g.list());
  CHECK(p.a.isApprox(Matrix::Constant(2, 2, 1.5)));
  CHECK((p.a.array() == 1.5).all());
  CHECK((p.b.array() == -1.0).all());
  CHECK(st.step == 1);
  for (const auto& m : st.m) CHECK(m.isZero(0));
  for (const auto& v : st.v) CHECK(v.isZero(0));
}

TEST_CASE("first adam step moves by lr against the gradient sign") {
  Pair p{Matrix::Zero(1, 3), Vector::Zero(1)};
  Pair g{Matrix(1, 3), Vector(1)};
  g.a << 0.3, -2.0, 7.0;
  g.b << -0.01;
  AdamState st(AdamConfig{0.0005});
  adam_update(st, p.list(), g.list());
  CHECK(p.a(0, 0) == doctest::Approx(-0.0005).epsilon(1e-6));
  CHECK(p.a(0, 1) == doctest::Approx(0.0005).epsilon(1e-6));
  CHECK(p.a(0, 2) == doctest::Approx(-0.0005).epsilon(1e-6));
  CHECK(p.b(0) == doctest::Approx(0.0005).epsilon(1e-5));
}

TEST_CASE("adam on w^2 follows the scalar oracle") {
  const double lr = 0.1;
  auto want = oracle::adam_w_squared(1.0, 10, lr, 0.9, 0.999, 1e-8);
  Vector w = Vector::Constant(1, 1.0);
  Vector g(1);
  AdamState st(AdamConfig{lr});
  for (int t = 0; t < 10; ++t) {
    g(0) = 2.0 * w(0);
    adam_update(st, {tensor_ref("w", w)}, {tensor_ref("w", g)});
    CHECK(std::abs(w(0) - want[static_cast<std::size_t>(t)]) <= 1e-12);
  }
  for (const auto& v : st.v) CHECK((v.array() >= 0.0).all());
}

TEST_CASE("adam rejects non-finite gradients untouched") {
  Vector w = Vector::Constant(2, 1.0);
  Vector g(2);
  g << 1.0, std::nan("");
  AdamState st;
  try {
    adam_update(st, {tensor_ref("w", w)}, {tensor_ref("w", g)});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNumeric);
  }
  CHECK((w.array() == 1.0).all());
  CHECK(st.step == 0);
}

TEST_CASE("archive round trip and corruption") {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  Vector v(2);
  v << -1.5, 1e-300;
  Archive a;
  a.kind = "test";
  a.seed = 99;
  a.put("k", "value with spaces");
  a.put_tensors({tensor_ref("m", m), tensor_ref("v", v)});
  std::stringstream buf;
  a.write(buf);
  const std::string bytes = buf.str();

  std::istringstream in(bytes);
  Archive b = Archive::read(in);
  CHECK(b.kind == "test");
  CHECK(b.seed == 99);
  CHECK(b.get("k") == "value with spaces");
  Matrix m2 = Matrix::Zero(2, 3);
  Vector v2 = Vector::Zero(2);
  b.load_into(tensor_ref("m", m2));
  b.load_into(tensor_ref("v", v2));
  CHECK(m2 == m);
  CHECK(v2 == v);

  Matrix wrong = Matrix::Zero(3, 2);
  CHECK_THROWS_AS(b.load_into(tensor_ref("m", wrong)), Error);
  try {
    b.require_kind("svr");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kFormat);
  }

  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{13}, bytes.size() / 2, bytes.size() - 1}) {
    std::istringstream trunc(bytes.substr(0, cut));
    try {
      Archive::read(trunc);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kFormat);
    }
  }
  std::string bad_version = bytes;
  bad_version[8] = 7;
  std::istringstream bv(bad_version);
  CHECK_THROWS_AS(Archive::read(bv), Error);
}
