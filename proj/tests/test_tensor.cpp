#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "superlora/tensor.hpp"

using namespace superlora;

TEST_CASE("reshape keeps the flat sequence and only swaps metadata") {
  DenseTensor t(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  DenseTensor r = reshape(t, Shape{3, 2});
  CHECK(r.shape() == Shape{3, 2});
  for (std::size_t i = 0; i < 6; ++i) CHECK(r[i] == t[i]);
}

TEST_CASE("reshape and vectorize preserve the flat bytes verbatim") {
  // -0.0 and denormals distinguish byte identity from value equality
  DenseTensor t(Shape{2, 2}, {-0.0, 5e-324, 1.0, -3.5});
  const DenseTensor r = vectorize(reshape(t, Shape{4, 1}));
  CHECK(std::memcmp(r.values().data(), t.values().data(), 4 * sizeof(double)) == 0);
}

TEST_CASE("reshape round-trips through vectorize") {
  DenseTensor t(Shape{4}, {1, 2, 3, 4});
  DenseTensor sq = reshape(t, Shape{2, 2});
  DenseTensor back = vectorize(sq);
  CHECK(back == t);
}

TEST_CASE("reshape rejects element-count mismatch and reports both counts") {
  DenseTensor t(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  try {
    reshape(t, Shape{4, 2});
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find('6') != std::string::npos);
    CHECK(msg.find('8') != std::string::npos);
  }
}

TEST_CASE("vectorize flattens row-major") {
  DenseTensor m(Shape{2, 2}, {1, 2, 3, 4});
  CHECK(vectorize(m) == DenseTensor(Shape{4}, {1, 2, 3, 4}));

  DenseTensor v(Shape{3}, {7, 8, 9});
  CHECK(vectorize(v) == v);

  DenseTensor cube(Shape{2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(vectorize(cube) == DenseTensor(Shape{8}, {0, 1, 2, 3, 4, 5, 6, 7}));
}

TEST_CASE("mode_product identity core passes the factor through") {
  DenseTensor eye(Shape{2, 2}, {1, 0, 0, 1});
  DenseTensor factor(Shape{2, 2}, {1, 2, 3, 4});
  CHECK(mode_product(eye, factor, 0) == factor);
}

TEST_CASE("mode_product matches the contraction definition on mode 1") {
  DenseTensor eye(Shape{2, 2}, {1, 0, 0, 1});
  DenseTensor ones(Shape{3, 2}, {1, 1, 1, 1, 1, 1});
  DenseTensor out = mode_product(eye, ones, 1);
  CHECK(out.shape() == Shape{2, 3});
  for (double v : out.values()) CHECK(v == doctest::Approx(1.0));
  CHECK(oracles::max_abs_diff(out, oracles::naive_mode_product(eye, ones, 1)) == 0.0);
}

TEST_CASE("mode_product on a 3-D core matches brute-force contraction") {
  DenseTensor core = oracles::random_tensor(Shape{2, 2, 2}, 42);
  DenseTensor factor = oracles::random_tensor(Shape{4, 2}, 43);
  DenseTensor out = mode_product(core, factor, 2);
  CHECK(out.shape() == Shape{2, 2, 4});
  CHECK(oracles::max_abs_diff(out, oracles::naive_mode_product(core, factor, 2)) < 1e-14);
}

TEST_CASE("mode_product rejects bad modes and mismatched extents") {
  DenseTensor core = oracles::random_tensor(Shape{2, 3}, 1);
  DenseTensor factor = oracles::random_tensor(Shape{4, 2}, 2);
  CHECK_THROWS_AS(mode_product(core, factor, 1), std::invalid_argument);  // 3 != 2
  CHECK_THROWS_AS(mode_product(core, factor, 2), std::invalid_argument);  // out of range
}

TEST_CASE("mode_product with an identity factor is the identity") {
  CounterRng shapes(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t order = 1 + shapes.next_below(4);
    Shape shape;
    for (std::size_t m = 0; m < order; ++m) shape.dims.push_back(1 + shapes.next_below(5));
    DenseTensor core = oracles::random_tensor(shape, 100 + trial);
    const std::size_t mode = shapes.next_below(order);
    const std::size_t d = shape.dims[mode];
    DenseTensor eye(Shape{d, d});
    for (std::size_t i = 0; i < d; ++i) eye(i, i) = 1.0;
    CHECK(oracles::max_abs_diff(mode_product(core, eye, mode), core) == 0.0);
  }
}

TEST_CASE("kronecker of identities is the identity") {
  DenseTensor eye2(Shape{2, 2}, {1, 0, 0, 1});
  DenseTensor out = kronecker(eye2, eye2);
  CHECK(out.shape() == Shape{4, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(out(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("kronecker matches the four-index definition") {
  DenseTensor a(Shape{2, 2}, {1, 2, 3, 4});
  DenseTensor b(Shape{2, 2}, {0, 1, 1, 0});
  CHECK(oracles::max_abs_diff(kronecker(a, b), oracles::naive_kronecker(a, b)) == 0.0);

  DenseTensor c = oracles::random_tensor(Shape{3, 2}, 5);
  DenseTensor d = oracles::random_tensor(Shape{2, 4}, 6);
  CHECK(kronecker(c, d).size() == c.size() * d.size());
  CHECK(oracles::max_abs_diff(kronecker(c, d), oracles::naive_kronecker(c, d)) == 0.0);
}

TEST_CASE("kronecker is associative up to reshape") {
  DenseTensor a = oracles::random_tensor(Shape{2, 3}, 11);
  DenseTensor b = oracles::random_tensor(Shape{3, 2}, 12);
  DenseTensor c = oracles::random_tensor(Shape{2, 2}, 13);
  DenseTensor left = kronecker(kronecker(a, b), c);
  DenseTensor right = kronecker(a, kronecker(b, c));
  CHECK(left.shape() == right.shape());
  CHECK(oracles::max_abs_diff(left, right) < 1e-14);
}

TEST_CASE("kronecker rejects non-2-D input") {
  DenseTensor v(Shape{4}, {1, 2, 3, 4});
  DenseTensor m(Shape{2, 2}, {1, 0, 0, 1});
  CHECK_THROWS_AS(kronecker(v, m), std::invalid_argument);
}

TEST_CASE("fwht maps a unit impulse to the first Hadamard column") {
  DenseTensor x(Shape{4}, {1, 0, 0, 0});
  DenseTensor y = fwht(x);
  for (double v : y.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("fwht is an involution and preserves the l2 norm") {
  DenseTensor x = oracles::random_tensor(Shape{8}, 21);
  DenseTensor twice = fwht(fwht(x));
  CHECK(oracles::max_abs_diff(twice, x) < 1e-12);

  const double before = frobenius_norm(x);
  const double after = frobenius_norm(fwht(x));
  CHECK(std::abs(before - after) < 1e-12);
}

TEST_CASE("fwht rejects non-power-of-two lengths") {
  DenseTensor x(Shape{6});
  CHECK_THROWS_AS(fwht(x), std::invalid_argument);
}

TEST_CASE("svd_topk on a diagonal matrix") {
  DenseTensor m(Shape{3, 3});
  m(0, 0) = 3;
  m(1, 1) = 2;
  m(2, 2) = 1;
  SvdResult svd = svd_topk(m, 3);
  CHECK(svd.s[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(svd.s[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(svd.s[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd_topk recovers a rank-1 outer product up to sign") {
  const std::size_t n = 5;
  DenseTensor u = oracles::random_tensor(Shape{n}, 31);
  DenseTensor v = oracles::random_tensor(Shape{n}, 32);
  double nu = frobenius_norm(u), nv = frobenius_norm(v);
  for (double& x : u.values()) x /= nu;
  for (double& x : v.values()) x /= nv;
  DenseTensor m(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = u[i] * v[j];

  SvdResult svd = svd_topk(m, 1);
  CHECK(svd.s[0] == doctest::Approx(1.0).epsilon(1e-10));
  const double sign = svd.u(0, 0) / u[0] > 0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(svd.u(i, 0) == doctest::Approx(sign * u[i]).epsilon(1e-8));
    CHECK(svd.v(i, 0) == doctest::Approx(sign * v[i]).epsilon(1e-8));
  }
}

TEST_CASE("svd_topk singular values match the Gram-matrix eigensolver oracle") {
  DenseTensor m = oracles::random_tensor(Shape{8, 8}, 77);
  SvdResult svd = svd_topk(m, 5);
  const std::vector<double> reference = oracles::gram_singular_values(m);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(std::abs(svd.s[i] - reference[i]) < 1e-8);
}

TEST_CASE("svd_topk columns are orthonormal and reconstruct the matrix") {
  for (std::uint64_t seed : {101, 102, 103}) {
    DenseTensor m = oracles::random_tensor(Shape{8, 8}, seed);
    SvdResult svd = svd_topk(m, 8);

    const DenseTensor utu = matmul_tn(svd.u, svd.u);
    const DenseTensor vtv = matmul_tn(svd.v, svd.v);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        CHECK(std::abs(utu(i, j) - (i == j ? 1.0 : 0.0)) < 1e-10);
        CHECK(std::abs(vtv(i, j) - (i == j ? 1.0 : 0.0)) < 1e-10);
      }

    DenseTensor recon(Shape{8, 8});
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 8; ++k) acc += svd.s[k] * svd.u(i, k) * svd.v(j, k);
        recon(i, j) = acc;
      }
    double err = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) err += (recon[i] - m[i]) * (recon[i] - m[i]);
    CHECK(std::sqrt(err) < 1e-8 * frobenius_norm(m));
  }
}

TEST_CASE("svd_topk matches the best rank-k approximation from the oracle") {
  DenseTensor m = oracles::random_tensor(Shape{6, 4}, 55);
  const std::size_t k = 2;
  SvdResult svd = svd_topk(m, k);
  DenseTensor recon(Shape{6, 4});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < k; ++c) acc += svd.s[c] * svd.u(i, c) * svd.v(j, c);
      recon(i, j) = acc;
    }
  // best rank-k residual^2 = sum of squared trailing singular values
  const std::vector<double> all = oracles::gram_singular_values(m);
  double expected_residual2 = 0.0;
  for (std::size_t c = k; c < all.size(); ++c) expected_residual2 += all[c] * all[c];
  double got_residual2 = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    got_residual2 += (m[i] - recon[i]) * (m[i] - recon[i]);
  CHECK(std::abs(got_residual2 - expected_residual2) < 1e-8);
}

TEST_CASE("svd_topk rejects oversized k and non-finite input") {
  DenseTensor m = oracles::random_tensor(Shape{3, 2}, 9);
  CHECK_THROWS_AS(svd_topk(m, 3), std::invalid_argument);
  m(0, 0) = std::nan("");
  CHECK_THROWS_AS(svd_topk(m, 1), std::invalid_argument);
}

TEST_CASE("SLTF round-trips bitwise through a file") {
  DenseTensor t(Shape{2, 3}, {1.5, -0.0, 1e-308, 3.141592653589793, -2.5e300, 42.0});
  const std::filesystem::path path = std::filesystem::temp_directory_path() / "sltf_rt.sltf";
  write_sltf(path, t);
  DenseTensor back = read_sltf(path);
  CHECK(back.shape() == t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double a = t[i], b = back[i];
    CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("SLTF rejects bad magic, truncation and unknown versions") {
  std::ostringstream good;
  write_sltf(good, DenseTensor(Shape{2}, {1.0, 2.0}));
  const std::string bytes = good.str();

  {
    std::istringstream bad("XXXX" + bytes.substr(4));
    CHECK_THROWS_WITH_AS(read_sltf(bad), doctest::Contains("magic"), std::runtime_error);
  }
  {
    std::istringstream trunc(bytes.substr(0, bytes.size() - 4));
    CHECK_THROWS_AS(read_sltf(trunc), std::runtime_error);
  }
  {
    std::string versioned = bytes;
    versioned[4] = 2;  // little-endian version field
    std::istringstream in(versioned);
    CHECK_THROWS_WITH_AS(read_sltf(in), doctest::Contains("version"), std::runtime_error);
  }
}
