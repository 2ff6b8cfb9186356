#include "superlora/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace superlora {

namespace {

double matrix_norm(const DenseTensor& m, NormKind norm) {
  if (norm == NormKind::frobenius) return frobenius_norm(m);
  if (m.size() == 0) return 0.0;
  return svd_topk(m, 1).s[0];
}

}  // namespace

double singular_similarity(const DenseTensor& w1, const DenseTensor& w2, std::size_t k,
                           SimilaritySide side, NormKind norm) {
  if (w1.order() != 2 || w2.order() != 2 || !(w1.shape() == w2.shape()))
    throw std::invalid_argument("singular_similarity: inputs must be 2-D with equal shapes");
  if (k < 1 || k > std::min(w1.extent(0), w1.extent(1)))
    throw std::invalid_argument("singular_similarity: invalid k=" + std::to_string(k));

  const SvdResult s1 = svd_topk(w1, k);
  const SvdResult s2 = svd_topk(w2, k);
  const DenseTensor& b1 = side == SimilaritySide::left ? s1.u : s1.v;
  const DenseTensor& b2 = side == SimilaritySide::left ? s2.u : s2.v;
  const DenseTensor overlap = matmul_tn(b1, b2);  // k x k
  return matrix_norm(overlap, norm) / std::sqrt(static_cast<double>(k));
}

double euclidean_distance(const DenseTensor& w1, const DenseTensor& w2, NormKind norm) {
  if (!(w1.shape() == w2.shape()))
    throw std::invalid_argument("euclidean_distance: shape mismatch " + to_string(w1.shape()) +
                                " vs " + to_string(w2.shape()));
  const double ref = matrix_norm(w1, norm);
  if (ref == 0.0)
    throw std::invalid_argument("euclidean_distance: reference matrix has zero norm");
  DenseTensor diff = w1;
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= w2[i];
  return matrix_norm(diff, norm) / ref;
}

GeometryReport analyze_pair(const DenseTensor& w1, const DenseTensor& w2, std::size_t k,
                            NormKind norm) {
  GeometryReport report;
  report.k = k;
  report.d_left = singular_similarity(w1, w2, k, SimilaritySide::left, norm);
  report.d_right = singular_similarity(w1, w2, k, SimilaritySide::right, norm);
  report.d_euclid = euclidean_distance(w1, w2, norm);
  return report;
}

std::string report_to_json(const GeometryReport& report) {
  nlohmann::json doc;
  doc["d_left"] = report.d_left;
  doc["d_right"] = report.d_right;
  doc["d_euclid"] = report.d_euclid;
  doc["k"] = report.k;
  return doc.dump();
}

}  // namespace superlora
