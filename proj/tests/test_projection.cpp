#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "superlora/projection.hpp"

using namespace superlora;

namespace {

ProjectionSpec spec_of(ProjectionMode mode, std::uint64_t seed, std::size_t n_in,
                       std::size_t n_out) {
  ProjectionSpec s;
  s.mode = mode;
  s.seed = seed;
  s.n_in = n_in;
  s.n_out = n_out;
  return s;
}

double dot(const DenseTensor& a, const DenseTensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// dense matrix of the linear operator, built by applying it to basis vectors
DenseTensor dense_matrix(const ProjectionState& state) {
  DenseTensor m(Shape{state.spec.n_out, state.spec.n_in});
  for (std::size_t j = 0; j < state.spec.n_in; ++j) {
    DenseTensor e(Shape{state.spec.n_in});
    e[j] = 1.0;
    const DenseTensor col = apply_linear_part(state, e);
    for (std::size_t i = 0; i < state.spec.n_out; ++i) m(i, j) = col[i];
  }
  return m;
}

}  // namespace

TEST_CASE("make_projection is bitwise deterministic") {
  const ProjectionSpec spec = spec_of(ProjectionMode::linear, 99, 13, 29);
  const ProjectionState a = make_projection(spec);
  const ProjectionState b = make_projection(spec);
  CHECK(a.permutation == b.permutation);
  CHECK(a.gauss == b.gauss);
  CHECK(a.right_diag == b.right_diag);

  const ProjectionState c = make_projection(spec_of(ProjectionMode::linear, 100, 13, 29));
  CHECK(a.gauss != c.gauss);
}

TEST_CASE("shuffle state is a bijection on [0, n)") {
  const ProjectionState state = make_projection(spec_of(ProjectionMode::shuffle, 5, 8, 8));
  std::vector<std::size_t> sorted = state.permutation;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> eye(8);
  std::iota(eye.begin(), eye.end(), 0);
  CHECK(sorted == eye);
}

TEST_CASE("fastfood sizing follows N = ceil(log2(max))") {
  const ProjectionState state = make_projection(spec_of(ProjectionMode::linear, 1, 100, 1000));
  CHECK(state.exponent == 10);
  CHECK(state.padded == 1024);
  CHECK(state.gauss.size() == 1024);
  CHECK(state.right_diag.size() == 1000);
  for (double b : state.right_diag) CHECK(std::abs(b) == 1.0);

  const ProjectionState v2 = make_projection(spec_of(ProjectionMode::linear_v2, 1, 100, 1000));
  bool any_non_unit = false;
  for (double b : v2.right_diag)
    if (std::abs(std::abs(b) - 1.0) > 1e-9) any_non_unit = true;
  CHECK(any_non_unit);
}

TEST_CASE("invalid size combinations are rejected") {
  CHECK_THROWS_AS(make_projection(spec_of(ProjectionMode::identity, 0, 4, 5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_projection(spec_of(ProjectionMode::shuffle, 0, 4, 5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_projection(spec_of(ProjectionMode::linear, 0, 6, 5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_projection(spec_of(ProjectionMode::linear, 0, 0, 0)),
                  std::invalid_argument);
}

TEST_CASE("identity mode returns its input") {
  const ProjectionState state = make_projection(spec_of(ProjectionMode::identity, 3, 9, 9));
  const DenseTensor x = oracles::random_tensor(Shape{9}, 17);
  CHECK(apply(state, x) == x);
  CHECK(apply_adjoint(state, x) == x);
}

TEST_CASE("shuffle preserves the multiset of values and the norm") {
  const ProjectionState state = make_projection(spec_of(ProjectionMode::shuffle, 3, 9, 9));
  const DenseTensor x = oracles::random_tensor(Shape{9}, 18);
  const DenseTensor y = apply(state, x);

  std::vector<double> xs(x.values().begin(), x.values().end());
  std::vector<double> ys(y.values().begin(), y.values().end());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  CHECK(xs == ys);
  CHECK(frobenius_norm(x) == doctest::Approx(frobenius_norm(y)).epsilon(1e-14));
}

TEST_CASE("linear modes are linear operators") {
  for (ProjectionMode mode : {ProjectionMode::linear, ProjectionMode::linear_v2}) {
    const ProjectionState state = make_projection(spec_of(mode, 11, 10, 24));
    const DenseTensor x = oracles::random_tensor(Shape{10}, 19);
    const DenseTensor y = oracles::random_tensor(Shape{10}, 20);
    const double a = 1.7, b = -0.4;
    DenseTensor combo(Shape{10});
    for (std::size_t i = 0; i < 10; ++i) combo[i] = a * x[i] + b * y[i];

    const DenseTensor lhs = apply(state, combo);
    const DenseTensor fx = apply(state, x);
    const DenseTensor fy = apply(state, y);
    for (std::size_t i = 0; i < lhs.size(); ++i)
      CHECK(std::abs(lhs[i] - (a * fx[i] + b * fy[i])) < 1e-10);
  }
}

TEST_CASE("adjoint identity <Ax, y> == <x, A^T y>") {
  struct Case {
    ProjectionMode mode;
    std::size_t n_in, n_out;
  };
  const Case cases[] = {
      {ProjectionMode::identity, 16, 16},
      {ProjectionMode::shuffle, 16, 16},
      {ProjectionMode::linear, 10, 24},
      {ProjectionMode::linear_v2, 10, 24},
      {ProjectionMode::linear, 32, 32},
  };
  for (const Case& c : cases) {
    const ProjectionState state = make_projection(spec_of(c.mode, 23, c.n_in, c.n_out));
    for (int trial = 0; trial < 5; ++trial) {
      const DenseTensor x = oracles::random_tensor(Shape{c.n_in}, 300 + trial);
      const DenseTensor y = oracles::random_tensor(Shape{c.n_out}, 400 + trial);
      const double lhs = dot(apply(state, x), y);
      const double rhs = dot(x, apply_adjoint(state, y));
      CHECK(std::abs(lhs - rhs) < 1e-10);
    }
  }
}

TEST_CASE("dense matrices of apply and apply_adjoint are transposes") {
  const ProjectionState state = make_projection(spec_of(ProjectionMode::linear, 31, 8, 8));
  const DenseTensor forward = dense_matrix(state);

  DenseTensor adjoint(Shape{8, 8});
  for (std::size_t j = 0; j < 8; ++j) {
    DenseTensor e(Shape{8});
    e[j] = 1.0;
    const DenseTensor col = apply_adjoint(state, e);
    for (std::size_t i = 0; i < 8; ++i) adjoint(i, j) = col[i];
  }
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(std::abs(forward(i, j) - adjoint(j, i)) < 1e-12);
}

TEST_CASE("the dense linear operator factors as the pipeline says") {
  // rebuild diag(B) . truncate . H . perm . diag(G) . H . pad as explicit
  // matrices and compare with the operator built column by column
  const std::size_t n_in = 6, n_out = 8;
  const ProjectionState state = make_projection(spec_of(ProjectionMode::linear, 37, n_in, n_out));
  const std::size_t padded = state.padded;

  DenseTensor hadamard(Shape{padded, padded});
  for (std::size_t j = 0; j < padded; ++j) {
    DenseTensor e(Shape{padded});
    e[j] = 1.0;
    const DenseTensor col = fwht(e);
    for (std::size_t i = 0; i < padded; ++i) hadamard(i, j) = col[i];
  }

  DenseTensor pad(Shape{padded, n_in});
  for (std::size_t j = 0; j < n_in; ++j) pad(j, j) = 1.0;
  DenseTensor diag_g(Shape{padded, padded});
  for (std::size_t i = 0; i < padded; ++i) diag_g(i, i) = state.gauss[i];
  DenseTensor perm(Shape{padded, padded});
  for (std::size_t i = 0; i < padded; ++i) perm(i, state.permutation[i]) = 1.0;
  DenseTensor trunc(Shape{n_out, padded});
  for (std::size_t i = 0; i < n_out; ++i) trunc(i, i) = 1.0;
  DenseTensor diag_b(Shape{n_out, n_out});
  for (std::size_t i = 0; i < n_out; ++i) diag_b(i, i) = state.right_diag[i];

  const DenseTensor factored = matmul(
      diag_b, matmul(trunc, matmul(hadamard, matmul(perm, matmul(diag_g, matmul(hadamard, pad))))));
  CHECK(oracles::max_abs_diff(factored, dense_matrix(state)) < 1e-12);
}

TEST_CASE("tanhshrink modes keep zero at zero and match the composed form") {
  for (ProjectionMode mode : {ProjectionMode::nonlinear, ProjectionMode::nonlinear_v2}) {
    const ProjectionState state = make_projection(spec_of(mode, 41, 12, 20));
    const DenseTensor zeros(Shape{12});
    const DenseTensor mapped = apply(state, zeros);
    for (double v : mapped.values()) CHECK(v == 0.0);

    const DenseTensor x = oracles::random_tensor(Shape{12}, 500);
    const DenseTensor lin = apply_linear_part(state, x);
    const DenseTensor out = apply(state, x);
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(out[i] == doctest::Approx(lin[i] - std::tanh(lin[i])).epsilon(1e-14));
  }
}

TEST_CASE("length mismatches are rejected") {
  const ProjectionState state = make_projection(spec_of(ProjectionMode::linear, 2, 10, 24));
  CHECK_THROWS_AS(apply(state, DenseTensor(Shape{11})), std::invalid_argument);
  CHECK_THROWS_AS(apply_adjoint(state, DenseTensor(Shape{10})), std::invalid_argument);
}

TEST_CASE("apply output is bitwise reproducible across state rebuilds") {
  const ProjectionSpec spec = spec_of(ProjectionMode::nonlinear_v2, 77, 20, 40);
  const DenseTensor x = oracles::random_tensor(Shape{20}, 600);
  const DenseTensor y1 = apply(make_projection(spec), x);
  const DenseTensor y2 = apply(make_projection(spec), x);
  CHECK(y1 == y2);
}
