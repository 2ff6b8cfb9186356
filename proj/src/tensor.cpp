#include "superlora/tensor.hpp"

#include "superlora/detail/binary_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace superlora {

std::size_t Shape::element_count() const {
  std::size_t count = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw std::invalid_argument("Shape: zero extent in " + to_string(*this));
    if (d > std::numeric_limits<std::size_t>::max() / count)
      throw std::overflow_error("Shape: element count overflow in " + to_string(*this));
    count *= d;
  }
  return count;
}

std::string to_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.dims.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s.dims[i]);
  }
  out += ")";
  return out;
}

DenseTensor::DenseTensor(Shape shape)
    : shape_(std::move(shape)), data_(shape_.element_count(), 0.0) {}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_.element_count())
    throw std::invalid_argument("DenseTensor: data length " + std::to_string(data_.size()) +
                                " does not match shape " + to_string(shape_));
}

double DenseTensor::operator()(std::size_t i, std::size_t j) const {
  if (order() != 2) throw std::invalid_argument("DenseTensor: 2-D access on order-" + std::to_string(order()) + " tensor");
  return data_[i * shape_.dims[1] + j];
}

double& DenseTensor::operator()(std::size_t i, std::size_t j) {
  if (order() != 2) throw std::invalid_argument("DenseTensor: 2-D access on order-" + std::to_string(order()) + " tensor");
  return data_[i * shape_.dims[1] + j];
}

std::size_t flat_index(const Shape& shape, std::span<const std::size_t> idx) {
  if (idx.size() != shape.order())
    throw std::invalid_argument("flat_index: index order mismatch");
  std::size_t flat = 0;
  for (std::size_t m = 0; m < idx.size(); ++m) {
    if (idx[m] >= shape.dims[m]) throw std::out_of_range("flat_index: index out of range");
    flat = flat * shape.dims[m] + idx[m];
  }
  return flat;
}

double DenseTensor::at(std::span<const std::size_t> idx) const {
  return data_[flat_index(shape_, idx)];
}

double& DenseTensor::at(std::span<const std::size_t> idx) {
  return data_[flat_index(shape_, idx)];
}

DenseTensor reshape(const DenseTensor& t, Shape new_shape) {
  const std::size_t have = t.shape().element_count();
  const std::size_t want = new_shape.element_count();
  if (have != want)
    throw std::invalid_argument("reshape: element count mismatch (" + std::to_string(have) +
                                " vs " + std::to_string(want) + ")");
  return DenseTensor(std::move(new_shape),
                     std::vector<double>(t.values().begin(), t.values().end()));
}

DenseTensor vectorize(const DenseTensor& t) {
  return reshape(t, Shape{t.size()});
}

DenseTensor mode_product(const DenseTensor& core, const DenseTensor& factor,
                         std::size_t mode) {
  if (factor.order() != 2)
    throw std::invalid_argument("mode_product: factor must be 2-D, got " +
                                to_string(factor.shape()));
  if (mode >= core.order())
    throw std::invalid_argument("mode_product: mode " + std::to_string(mode) +
                                " out of range for order " + std::to_string(core.order()));
  const std::size_t d = factor.extent(0);
  const std::size_t r = factor.extent(1);
  if (core.extent(mode) != r)
    throw std::invalid_argument("mode_product: core extent " + std::to_string(core.extent(mode)) +
                                " at mode " + std::to_string(mode) +
                                " does not match factor columns " + std::to_string(r));

  std::size_t outer = 1, inner = 1;
  for (std::size_t m = 0; m < mode; ++m) outer *= core.extent(m);
  for (std::size_t m = mode + 1; m < core.order(); ++m) inner *= core.extent(m);

  Shape out_shape = core.shape();
  out_shape.dims[mode] = d;
  DenseTensor out(out_shape);

  std::span<const double> src = core.values();
  std::span<double> dst = out.values();
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src_block = src.data() + o * r * inner;
    double* dst_block = dst.data() + o * d * inner;
    for (std::size_t a = 0; a < d; ++a) {
      double* dst_row = dst_block + a * inner;
      for (std::size_t b = 0; b < r; ++b) {
        const double f = factor(a, b);
        if (f == 0.0) continue;
        const double* src_row = src_block + b * inner;
        for (std::size_t i = 0; i < inner; ++i) dst_row[i] += f * src_row[i];
      }
    }
  }
  return out;
}

DenseTensor unfold_mode(const DenseTensor& t, std::size_t mode) {
  if (mode >= t.order())
    throw std::invalid_argument("unfold_mode: mode " + std::to_string(mode) +
                                " out of range for order " + std::to_string(t.order()));
  const std::size_t d = t.extent(mode);
  const std::size_t rest = t.size() / d;
  std::size_t outer = 1, inner = 1;
  for (std::size_t m = 0; m < mode; ++m) outer *= t.extent(m);
  for (std::size_t m = mode + 1; m < t.order(); ++m) inner *= t.extent(m);

  DenseTensor out(Shape{d, rest});
  std::span<const double> src = t.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t i = 0; i < inner; ++i)
        out(a, o * inner + i) = src[(o * d + a) * inner + i];
  return out;
}

DenseTensor kronecker(const DenseTensor& a, const DenseTensor& b) {
  if (a.order() != 2 || b.order() != 2)
    throw std::invalid_argument("kronecker: both inputs must be 2-D (got " +
                                to_string(a.shape()) + " and " + to_string(b.shape()) + ")");
  const std::size_t ar = a.extent(0), ac = a.extent(1);
  const std::size_t br = b.extent(0), bc = b.extent(1);
  DenseTensor out(Shape{ar * br, ac * bc});
  for (std::size_t i = 0; i < ar; ++i)
    for (std::size_t j = 0; j < ac; ++j) {
      const double aij = a(i, j);
      for (std::size_t p = 0; p < br; ++p) {
        double* dst = out.values().data() + (i * br + p) * (ac * bc) + j * bc;
        const double* src = b.values().data() + p * bc;
        for (std::size_t q = 0; q < bc; ++q) dst[q] = aij * src[q];
      }
    }
  return out;
}

void fwht_inplace(std::span<double> x) {
  const std::size_t n = x.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fwht: length " + std::to_string(n) + " is not a power of two");
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  for (std::size_t len = 1; len < n; len <<= 1) {
    for (std::size_t i = 0; i < n; i += len << 1) {
      for (std::size_t j = i; j < i + len; ++j) {
        const double a = x[j];
        const double b = x[j + len];
        x[j] = (a + b) * inv_sqrt2;
        x[j + len] = (a - b) * inv_sqrt2;
      }
    }
  }
}

DenseTensor fwht(const DenseTensor& v) {
  if (v.order() != 1)
    throw std::invalid_argument("fwht: input must be 1-D, got " + to_string(v.shape()));
  DenseTensor out = v;
  fwht_inplace(out.values());
  return out;
}

namespace {

// One-sided Jacobi on the columns of a (rows >= cols assumed by caller).
// Rotations are accumulated into v (cols x cols, identity on entry).
// Returns the worst off-diagonal ratio left after the final sweep.
double jacobi_orthogonalize(std::vector<double>& w, std::size_t rows, std::size_t cols,
                            std::vector<double>& v) {
  constexpr int kMaxSweeps = 64;
  constexpr double kTol = 1e-15;
  auto col = [&](std::size_t c) { return w.data() + c * rows; };
  auto vcol = [&](std::size_t c) { return v.data() + c * cols; };

  double worst = 0.0;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    worst = 0.0;
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        const double* wp = col(p);
        const double* wq = col(q);
        for (std::size_t i = 0; i < rows; ++i) {
          alpha += wp[i] * wp[i];
          beta += wq[i] * wq[i];
          gamma += wp[i] * wq[i];
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        const double ratio = std::abs(gamma) / std::sqrt(alpha * beta);
        worst = std::max(worst, ratio);
        if (ratio <= kTol) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        double* mp = col(p);
        double* mq = col(q);
        for (std::size_t i = 0; i < rows; ++i) {
          const double a = mp[i];
          const double b = mq[i];
          mp[i] = c * a - s * b;
          mq[i] = s * a + c * b;
        }
        double* pv = vcol(p);
        double* qv = vcol(q);
        for (std::size_t i = 0; i < cols; ++i) {
          const double a = pv[i];
          const double b = qv[i];
          pv[i] = c * a - s * b;
          qv[i] = s * a + c * b;
        }
      }
    }
    if (!rotated) return worst;
  }
  if (worst > 1e-10) {
    std::ostringstream msg;
    msg << "svd_topk: Jacobi sweep cap reached, residual " << worst;
    throw NumericalError(msg.str());
  }
  return worst;
}

}  // namespace

SvdResult svd_topk(const DenseTensor& m, std::size_t k) {
  if (m.order() != 2)
    throw std::invalid_argument("svd_topk: input must be 2-D, got " + to_string(m.shape()));
  const std::size_t rows0 = m.extent(0), cols0 = m.extent(1);
  if (k > std::min(rows0, cols0))
    throw std::invalid_argument("svd_topk: k=" + std::to_string(k) + " exceeds min(" +
                                std::to_string(rows0) + "," + std::to_string(cols0) + ")");
  for (double x : m.values())
    if (!std::isfinite(x)) throw std::invalid_argument("svd_topk: non-finite input");

  const bool flipped = rows0 < cols0;
  const DenseTensor& a = flipped ? transpose(m) : m;
  const std::size_t rows = a.extent(0), cols = a.extent(1);

  // column-major working copy
  std::vector<double> w(rows * cols);
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r) w[c * rows + r] = a(r, c);
  std::vector<double> v(cols * cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) v[c * cols + c] = 1.0;

  jacobi_orthogonalize(w, rows, cols, v);

  std::vector<double> sigma(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    double norm2 = 0.0;
    for (std::size_t r = 0; r < rows; ++r) norm2 += w[c * rows + r] * w[c * rows + r];
    sigma[c] = std::sqrt(norm2);
  }
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  DenseTensor u_full(Shape{rows, k});
  DenseTensor v_full(Shape{cols, k});
  DenseTensor s(Shape{k});
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t c = order[j];
    s[j] = sigma[c];
    for (std::size_t i = 0; i < cols; ++i) v_full(i, j) = v[c * cols + i];
    if (sigma[c] > 1e-300) {
      for (std::size_t i = 0; i < rows; ++i) u_full(i, j) = w[c * rows + i] / sigma[c];
    } else {
      // zero singular value: complete U with a unit vector orthogonal to the
      // columns already placed
      for (std::size_t cand = 0; cand < rows; ++cand) {
        std::vector<double> e(rows, 0.0);
        e[cand] = 1.0;
        for (std::size_t jj = 0; jj < j; ++jj) {
          double dot = 0.0;
          for (std::size_t i = 0; i < rows; ++i) dot += e[i] * u_full(i, jj);
          for (std::size_t i = 0; i < rows; ++i) e[i] -= dot * u_full(i, jj);
        }
        double norm = 0.0;
        for (double x : e) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.5) {
          for (std::size_t i = 0; i < rows; ++i) u_full(i, j) = e[i] / norm;
          break;
        }
      }
    }
  }

  if (flipped) return {std::move(v_full), std::move(s), std::move(u_full)};
  return {std::move(u_full), std::move(s), std::move(v_full)};
}

DenseTensor transpose(const DenseTensor& a) {
  if (a.order() != 2)
    throw std::invalid_argument("transpose: input must be 2-D, got " + to_string(a.shape()));
  const std::size_t r = a.extent(0), c = a.extent(1);
  DenseTensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = a(i, j);
  return out;
}

DenseTensor matmul(const DenseTensor& a, const DenseTensor& b) {
  if (a.order() != 2 || b.order() != 2 || a.extent(1) != b.extent(0))
    throw std::invalid_argument("matmul: incompatible shapes " + to_string(a.shape()) +
                                " x " + to_string(b.shape()));
  const std::size_t m = a.extent(0), kk = a.extent(1), n = b.extent(1);
  DenseTensor out(Shape{m, n});
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* pc = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = pc + i * n;
    for (std::size_t k = 0; k < kk; ++k) {
      const double aik = pa[i * kk + k];
      if (aik == 0.0) continue;
      const double* brow = pb + k * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return out;
}

DenseTensor matmul_tn(const DenseTensor& a, const DenseTensor& b) {
  if (a.order() != 2 || b.order() != 2 || a.extent(0) != b.extent(0))
    throw std::invalid_argument("matmul_tn: incompatible shapes " + to_string(a.shape()) +
                                " x " + to_string(b.shape()));
  const std::size_t kk = a.extent(0), m = a.extent(1), n = b.extent(1);
  DenseTensor out(Shape{m, n});
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* pc = out.values().data();
  for (std::size_t k = 0; k < kk; ++k) {
    const double* arow = pa + k * m;
    const double* brow = pb + k * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
    }
  }
  return out;
}

DenseTensor matmul_nt(const DenseTensor& a, const DenseTensor& b) {
  if (a.order() != 2 || b.order() != 2 || a.extent(1) != b.extent(1))
    throw std::invalid_argument("matmul_nt: incompatible shapes " + to_string(a.shape()) +
                                " x " + to_string(b.shape()));
  const std::size_t m = a.extent(0), kk = a.extent(1), n = b.extent(0);
  DenseTensor out(Shape{m, n});
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * kk;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = pb + j * kk;
      double acc = 0.0;
      for (std::size_t k = 0; k < kk; ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

double frobenius_norm(const DenseTensor& t) {
  double acc = 0.0;
  for (double x : t.values()) acc += x * x;
  return std::sqrt(acc);
}

// --- SLTF -------------------------------------------------------------------

namespace {

using detail::get_f64le;
using detail::get_u32le;
using detail::get_u64le;
using detail::put_f64le;
using detail::put_u32le;
using detail::put_u64le;

constexpr char kSltfMagic[4] = {'S', 'L', 'T', 'F'};
constexpr std::uint32_t kSltfVersion = 1;

}  // namespace

void write_sltf(std::ostream& out, const DenseTensor& t) {
  out.write(kSltfMagic, 4);
  put_u32le(out, kSltfVersion);
  put_u32le(out, static_cast<std::uint32_t>(t.order()));
  for (std::size_t d : t.shape().dims) put_u64le(out, d);
  for (double x : t.values()) put_f64le(out, x);
  if (!out) throw std::runtime_error("SLTF: write failure");
}

DenseTensor read_sltf(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kSltfMagic, 4) != 0)
    throw std::runtime_error("SLTF: bad magic");
  const std::uint32_t version = get_u32le(in);
  if (version != kSltfVersion)
    throw std::runtime_error("SLTF: unsupported version " + std::to_string(version));
  const std::uint32_t ndim = get_u32le(in);
  Shape shape;
  shape.dims.reserve(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i)
    shape.dims.push_back(static_cast<std::size_t>(get_u64le(in)));
  const std::size_t count = shape.element_count();
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = get_f64le(in);
  return DenseTensor(std::move(shape), std::move(data));
}

void write_sltf(const std::filesystem::path& path, const DenseTensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("SLTF: cannot open " + path.string() + " for writing");
  write_sltf(out, t);
}

DenseTensor read_sltf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("SLTF: cannot open " + path.string());
  return read_sltf(in);
}

}  // namespace superlora
