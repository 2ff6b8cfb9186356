#ifndef SUPERLORA_TENSOR_HPP
#define SUPERLORA_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace superlora {

// An algorithm failed to converge or produced non-finite values.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordered extents of an N-dimensional array. All extents are >= 1 and the
// element count must be representable in size_t.
struct Shape {
  std::vector<std::size_t> dims;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> d) : dims(d) {}
  explicit Shape(std::vector<std::size_t> d) : dims(std::move(d)) {}

  std::size_t order() const { return dims.size(); }
  std::size_t element_count() const;  // throws on zero extent or overflow
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

// Dense N-D array of 64-bit reals, flat row-major (last index fastest).
// The universal value type for weights, deltas and factors.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape);  // zero-filled
  DenseTensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t order() const { return shape_.order(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.dims.at(axis); }

  // spans into the flat storage; not offered on temporaries since the span
  // would dangle as soon as the full expression ends
  std::span<const double> values() const& { return data_; }
  std::span<double> values() & { return data_; }
  std::span<const double> values() const&& = delete;
  std::span<double> values() && = delete;

  double operator[](std::size_t flat) const { return data_[flat]; }
  double& operator[](std::size_t flat) { return data_[flat]; }

  // 2-D convenience accessors (checked order, unchecked bounds).
  double operator()(std::size_t i, std::size_t j) const;
  double& operator()(std::size_t i, std::size_t j);

  double at(std::span<const std::size_t> idx) const;
  double& at(std::span<const std::size_t> idx);

  bool operator==(const DenseTensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t flat_index(const Shape& shape, std::span<const std::size_t> idx);

// --- core operations -------------------------------------------------------

// Same flat data, new extents; element counts must agree.
DenseTensor reshape(const DenseTensor& t, Shape new_shape);

// Row-major flattening to a 1-D tensor.
DenseTensor vectorize(const DenseTensor& t);

// Mode-m tensor product with a 2-D factor of shape (d, r) where r is the
// core's extent at `mode`; the result replaces that extent by d:
//   out[..., a, ...] = sum_b factor(a, b) * core[..., b, ...]
DenseTensor mode_product(const DenseTensor& core, const DenseTensor& factor,
                         std::size_t mode);

// Mode-m matricization: rows indexed by axis `mode`, columns by the remaining
// axes in row-major order. Contraction partner of mode_product adjoints.
DenseTensor unfold_mode(const DenseTensor& t, std::size_t mode);

// Kronecker product of two matrices: out(i*br+p, j*bc+q) = a(i,j)*b(p,q).
DenseTensor kronecker(const DenseTensor& a, const DenseTensor& b);

// Orthonormal fast Walsh-Hadamard transform of a 1-D tensor whose length is
// a power of two. Each butterfly stage carries a 1/sqrt(2) factor, so the
// transform preserves the l2 norm and is its own inverse.
DenseTensor fwht(const DenseTensor& v);
void fwht_inplace(std::span<double> x);

struct SvdResult {
  DenseTensor u;  // rows x k, orthonormal columns
  DenseTensor s;  // 1-D, k descending nonnegative singular values
  DenseTensor v;  // cols x k, orthonormal columns
};

// Top-k singular triplets by one-sided Jacobi. Intended for small/medium
// dense matrices (<= ~1024 per side).
SvdResult svd_topk(const DenseTensor& m, std::size_t k);

// --- dense 2-D helpers ------------------------------------------------------

DenseTensor transpose(const DenseTensor& a);
DenseTensor matmul(const DenseTensor& a, const DenseTensor& b);     // a * b
DenseTensor matmul_tn(const DenseTensor& a, const DenseTensor& b);  // a^T * b
DenseTensor matmul_nt(const DenseTensor& a, const DenseTensor& b);  // a * b^T

double frobenius_norm(const DenseTensor& t);

// --- SLTF binary tensor format ----------------------------------------------
//
// Magic "SLTF", u32 LE version=1, u32 LE ndim, ndim x u64 LE extents, then
// element_count x f64 LE row-major payload. Round-trips are bit-exact.

void write_sltf(std::ostream& out, const DenseTensor& t);
DenseTensor read_sltf(std::istream& in);
void write_sltf(const std::filesystem::path& path, const DenseTensor& t);
DenseTensor read_sltf(const std::filesystem::path& path);

}  // namespace superlora

#endif  // SUPERLORA_TENSOR_HPP
