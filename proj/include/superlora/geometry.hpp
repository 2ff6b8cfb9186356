#ifndef SUPERLORA_GEOMETRY_HPP
#define SUPERLORA_GEOMETRY_HPP

#include <cstddef>
#include <string>

#include "superlora/tensor.hpp"

namespace superlora {

enum class SimilaritySide { left, right };
enum class NormKind { frobenius, spectral };

// Subspace similarity of the top-k left (or right) singular vectors:
//   (1/sqrt(k)) * || U1[:, :k]^T U2[:, :k] ||
// 1 for identical matrices, 0 for orthogonal top-k subspaces. The Frobenius
// norm is the default: it is the reading under which identical inputs give
// exactly 1 after the 1/sqrt(k) scaling.
double singular_similarity(const DenseTensor& w1, const DenseTensor& w2, std::size_t k,
                           SimilaritySide side, NormKind norm = NormKind::frobenius);

// ||W1 - W2|| / ||W1||, with W1 in the dense-reference role. Errors when
// ||W1|| is zero.
double euclidean_distance(const DenseTensor& w1, const DenseTensor& w2,
                          NormKind norm = NormKind::frobenius);

struct GeometryReport {
  double d_left = 0.0;
  double d_right = 0.0;
  double d_euclid = 0.0;
  std::size_t k = 0;
};

GeometryReport analyze_pair(const DenseTensor& w1, const DenseTensor& w2, std::size_t k,
                            NormKind norm = NormKind::frobenius);

std::string report_to_json(const GeometryReport& report);

}  // namespace superlora

#endif  // SUPERLORA_GEOMETRY_HPP
