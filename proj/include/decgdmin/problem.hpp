#pragma once

// Planted low-rank instances, column-wise Gaussian sketches, node column
// partitions and sample-split batches.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "decgdmin/numerics.hpp"

namespace decgdmin {

struct GroundTruth {
  std::size_t n = 0;
  std::size_t q = 0;
  std::size_t r = 0;
  Matrix u_star;  // n×r orthonormal
  Matrix b_star;  // r×q
  Matrix x_star;  // n×q
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double kappa = 1.0;
  double mu = 1.0;

  Vector x_column(std::size_t k) const { return x_star.column(k); }
  Vector b_column(std::size_t k) const { return b_star.column(k); }
};

/// Smallest μ with ||b*_k||² ≤ μ² r σ_max² / q for every column.
inline double incoherence_mu(const GroundTruth& gt) {
  double max_energy = 0.0;
  for (std::size_t k = 0; k < gt.q; ++k) {
    double e = 0.0;
    for (std::size_t i = 0; i < gt.r; ++i) e += gt.b_star(i, k) * gt.b_star(i, k);
    max_energy = std::max(max_energy, e);
  }
  if (gt.sigma_max == 0.0) return 1.0;
  return std::sqrt(static_cast<double>(gt.q) * max_energy /
                   (static_cast<double>(gt.r) * gt.sigma_max * gt.sigma_max));
}

/// Fills sigma/kappa/mu from u_star and b_star, and forms x_star.
inline void finalize_ground_truth(GroundTruth& gt) {
  gt.x_star = gt.u_star * gt.b_star;
  const auto [smax, smin] = extreme_singular_values(gt.b_star);
  gt.sigma_max = smax;
  gt.sigma_min = smin;
  gt.kappa = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  gt.mu = incoherence_mu(gt);
}

inline GroundTruth generate_ground_truth(std::size_t n, std::size_t q, std::size_t r,
                                         const RngStream& stream) {
  if (r < 1 || r > std::min(n, q))
    throw Error(Errc::InvalidDimensions, "need 1 <= r <= min(n, q)");
  GroundTruth gt;
  gt.n = n;
  gt.q = q;
  gt.r = r;
  gt.u_star = thin_qr(gaussian_matrix(n, r, stream.substream(1))).q;
  gt.b_star = gaussian_matrix(r, q, stream.substream(2));
  finalize_ground_truth(gt);
  return gt;
}

// ---------------------------------------------------------------------------

struct ColumnPartition {
  std::vector<std::vector<std::size_t>> sets;  // zero-based column indices

  std::size_t nodes() const noexcept { return sets.size(); }
  std::size_t total_columns() const {
    std::size_t t = 0;
    for (const auto& s : sets) t += s.size();
    return t;
  }
};

/// Contiguous blocks; the first q mod L nodes get one extra column.
inline ColumnPartition partition_columns(std::size_t q, std::size_t nodes) {
  if (nodes < 1) throw Error(Errc::InvalidDimensions, "need at least one node");
  if (nodes > q) throw Error(Errc::TooManyNodes, "more nodes than columns");
  ColumnPartition p;
  p.sets.resize(nodes);
  const std::size_t base = q / nodes;
  const std::size_t extra = q % nodes;
  std::size_t next = 0;
  for (std::size_t g = 0; g < nodes; ++g) {
    const std::size_t len = base + (g < extra ? 1 : 0);
    for (std::size_t i = 0; i < len; ++i) p.sets[g].push_back(next++);
  }
  return p;
}

/// Everything on a single node.
inline ColumnPartition single_node_partition(std::size_t q) { return partition_columns(q, 1); }

// ---------------------------------------------------------------------------

/// Index into the 2T+2 sample-split batches: 0 is "00", 1 is "0", 1+j is j.
class BatchLabel {
 public:
  static constexpr BatchLabel threshold() { return BatchLabel(0); }
  static constexpr BatchLabel init() { return BatchLabel(1); }
  static constexpr BatchLabel gd(std::size_t j) { return BatchLabel(1 + j); }

  constexpr std::size_t index() const noexcept { return index_; }
  std::string name() const {
    if (index_ == 0) return "00";
    return std::to_string(index_ - 1);
  }
  constexpr bool operator==(const BatchLabel&) const = default;

 private:
  constexpr explicit BatchLabel(std::size_t i) : index_(i) {}
  std::size_t index_;
};

/// One labeled batch: for each column k a sketch A_k (m×n) and y_k = A_k x*_k.
struct Batch {
  std::vector<Matrix> sketches;
  std::vector<Vector> measurements;
};

enum class BatchStorage { Materialized, OnDemand };

/// Measurement set with 2T+2 sample-split batches, or a single batch reused
/// for every label when sample splitting is disabled.
///
/// Sketch A_k^(ℓ) is drawn from its own substream (ℓ, k), so on-demand
/// regeneration produces the same bits as the materialized copy.
class MeasurementSet {
 public:
  MeasurementSet(std::shared_ptr<const Matrix> x_star, std::size_t m, std::size_t t_iters,
                 bool sample_split, BatchStorage storage, RngStream stream)
      : x_star_(std::move(x_star)),
        m_(m),
        t_iters_(t_iters),
        sample_split_(sample_split),
        storage_(storage),
        stream_(stream) {
    if (m_ < 1) throw Error(Errc::InvalidDimensions, "m must be >= 1");
    if (t_iters_ < 1) throw Error(Errc::InvalidDimensions, "T must be >= 1");
    if (storage_ == BatchStorage::Materialized) {
      cache_.resize(batch_count());
      for (std::size_t b = 0; b < batch_count(); ++b) cache_[b] = build(b);
    }
  }

  std::size_t m_per_batch() const noexcept { return m_; }
  std::size_t n() const noexcept { return x_star_->rows(); }
  std::size_t q() const noexcept { return x_star_->cols(); }
  std::size_t iterations() const noexcept { return t_iters_; }
  bool sample_split() const noexcept { return sample_split_; }
  BatchStorage storage() const noexcept { return storage_; }

  /// Number of physically distinct batches (2T+2, or 1 without splitting).
  std::size_t batch_count() const noexcept { return sample_split_ ? 2 * t_iters_ + 2 : 1; }

  /// Physical batch backing a label.
  std::size_t resolve(BatchLabel label) const {
    if (label.index() >= 2 * t_iters_ + 2)
      throw Error(Errc::InvalidDimensions, "batch label " + label.name() + " out of range");
    return sample_split_ ? label.index() : 0;
  }

  std::shared_ptr<const Batch> batch(BatchLabel label) const {
    const std::size_t b = resolve(label);
    if (storage_ == BatchStorage::Materialized) return cache_[b];
    return build(b);
  }

  /// Bytes needed to hold every batch at once.
  static double materialized_bytes(std::size_t n, std::size_t q, std::size_t m,
                                   std::size_t t_iters, bool sample_split) {
    const double batches = sample_split ? 2.0 * static_cast<double>(t_iters) + 2.0 : 1.0;
    return batches * static_cast<double>(q) * static_cast<double>(m) *
           (static_cast<double>(n) + 1.0) * sizeof(double);
  }

 private:
  std::shared_ptr<const Batch> build(std::size_t b) const {
    auto out = std::make_shared<Batch>();
    const std::size_t nn = n();
    out->sketches.reserve(q());
    out->measurements.reserve(q());
    const RngStream batch_stream = stream_.substream(b);
    for (std::size_t k = 0; k < q(); ++k) {
      Matrix a = gaussian_matrix(m_, nn, batch_stream.substream(k));
      Vector xk = x_star_->column(k);
      out->measurements.push_back(a * std::span<const double>(xk));
      out->sketches.push_back(std::move(a));
    }
    return out;
  }

  std::shared_ptr<const Matrix> x_star_;
  std::size_t m_;
  std::size_t t_iters_;
  bool sample_split_;
  BatchStorage storage_;
  RngStream stream_;
  std::vector<std::shared_ptr<const Batch>> cache_;
};

inline MeasurementSet generate_measurements(const GroundTruth& gt, std::size_t m,
                                            std::size_t t_iters, const RngStream& stream,
                                            bool sample_split = true,
                                            BatchStorage storage = BatchStorage::Materialized) {
  return MeasurementSet(std::make_shared<const Matrix>(gt.x_star), m, t_iters, sample_split,
                        storage, stream);
}

}  // namespace decgdmin
