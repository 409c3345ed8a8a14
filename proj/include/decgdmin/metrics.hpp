#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "decgdmin/numerics.hpp"
#include "decgdmin/problem.hpp"

namespace decgdmin {

/// Per-node estimate: basis U^(g) and coefficients B_g for columns S_g.
struct NodeState {
  std::size_t node_id = 0;
  std::vector<std::size_t> columns;
  Matrix u;  // n×r
  Matrix b;  // r×|S_g|
};

struct MetricsRecord {
  std::size_t iteration = 0;
  double elapsed_seconds = 0.0;
  double error_x = 0.0;
  double se2_node1 = 0.0;
  double max_disagreement_frob = 0.0;
  std::optional<double> cons_err_max;
};

struct MetricsTrace {
  std::string algorithm_tag;
  std::size_t trial_id = 0;
  std::vector<MetricsRecord> records;

  const MetricsRecord& final_record() const { return records.back(); }
};

inline double orthonormality_defect(const Matrix& u) {
  Matrix g = transpose_times(u, u);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return frobenius_norm(g);
}

/// SE₂(U₁, U₂) = ||(I − U₁U₁ᵀ)U₂||.
///
/// The residual U₂ − U₁(U₁ᵀU₂) is formed explicitly (n×r) and its norm read off
/// its r×r Gram matrix. Reducing to 1 − σ_min²(U₁ᵀU₂) instead would lose every
/// digit below ~1e-8 to cancellation.
inline double subspace_distance(const Matrix& u1, const Matrix& u2) {
  if (u1.rows() != u2.rows()) throw Error(Errc::ShapeMismatch, "bases live in different spaces");
  if (orthonormality_defect(u1) > 1e-6 || orthonormality_defect(u2) > 1e-6)
    throw Error(Errc::NotOrthonormal, "subspace_distance needs orthonormal bases");
  const Matrix overlap = transpose_times(u1, u2);  // r1×r2
  Matrix residual = u2 - u1 * overlap;
  return std::min(spectral_norm(residual), 1.0 + 1e-8);
}

/// ||X − X*||_F / ||X*||_F over the columns the states cover.
inline double error_x(const std::vector<NodeState>& states, const GroundTruth& gt) {
  double err = 0.0;
  double ref = 0.0;
  for (const auto& s : states) {
    const Matrix xg = s.u * s.b;
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
      const std::size_t k = s.columns[c];
      for (std::size_t i = 0; i < gt.n; ++i) {
        const double d = xg(i, c) - gt.x_star(i, k);
        err += d * d;
        ref += gt.x_star(i, k) * gt.x_star(i, k);
      }
    }
  }
  if (ref == 0.0) return err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(err / ref);
}

/// max over unordered pairs of ||U^(g) − U^(g′)||_F; 0 for a single node.
inline double node_disagreement(const std::vector<Matrix>& bases) {
  double worst = 0.0;
  for (std::size_t a = 0; a < bases.size(); ++a)
    for (std::size_t b = a + 1; b < bases.size(); ++b)
      worst = std::max(worst, frobenius_norm(bases[a] - bases[b]));
  return worst;
}

inline double node_disagreement(const std::vector<NodeState>& states) {
  std::vector<Matrix> bases;
  bases.reserve(states.size());
  for (const auto& s : states) bases.push_back(s.u);
  return node_disagreement(bases);
}

/// max_g ||exact_sum − approx_g||_F
inline double consensus_error(const std::vector<Matrix>& approx, const Matrix& exact_sum) {
  double worst = 0.0;
  for (const auto& a : approx) {
    if (!a.same_shape(exact_sum)) throw Error(Errc::ShapeMismatch, "consensus_error shapes differ");
    worst = std::max(worst, frobenius_norm(exact_sum - a));
  }
  return worst;
}

}  // namespace decgdmin
