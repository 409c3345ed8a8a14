#pragma once

// Decentralized truncated spectral initialization: threshold consensus,
// measurement truncation, local X₀ blocks and the consensus power method.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "decgdmin/metrics.hpp"
#include "decgdmin/network.hpp"
#include "decgdmin/numerics.hpp"
#include "decgdmin/problem.hpp"

namespace decgdmin {

enum class InitVariant { OneLoop, TwoLoop };

inline std::string_view init_variant_name(InitVariant v) {
  return v == InitVariant::OneLoop ? "one-loop" : "two-loop";
}

struct InitConfig {
  InitVariant variant = InitVariant::TwoLoop;
  std::size_t t_pm = 1;
  std::size_t t_con = 1;
  double trunc_constant = 9.0;  // 9κ²μ²; see truncation_constant()
};

/// Values below this for σ_min(U*ᵀ U_init) are flagged for the one-loop variant.
inline constexpr double kInitAlignmentFloor = 0.1;

struct InitResult {
  std::vector<Matrix> u0;      // per-node bases
  std::vector<Matrix> r_last;  // per-node R from the last PM iteration (empty if t_pm = 0)
  std::vector<double> alpha;   // per-node thresholds
  Matrix u_init;               // shared random start
  std::vector<double> disagreement_trace;  // max_{g,g′} ||U^(g) − U^(g′)||_F after each PM step
  std::optional<double> init_alignment;    // σ_min(U*ᵀ U_init) when ground truth was supplied
};

inline double truncation_constant(double kappa, double mu) {
  return 9.0 * kappa * kappa * mu * mu;
}

/// trunc_constant · (Σ_{k∈S_g} Σ_i y_ki²) / (m q)
inline double local_alpha(std::span<const Vector> ys, double trunc_constant, std::size_t m,
                          std::size_t q) {
  double energy = 0.0;
  for (const auto& y : ys)
    for (double v : y) energy += v * v;
  return trunc_constant * energy / (static_cast<double>(m) * static_cast<double>(q));
}

inline double local_alpha(const Batch& batch, std::span<const std::size_t> cols,
                          double trunc_constant, std::size_t m, std::size_t q) {
  double energy = 0.0;
  for (std::size_t k : cols)
    for (double v : batch.measurements[k]) energy += v * v;
  return trunc_constant * energy / (static_cast<double>(m) * static_cast<double>(q));
}

inline std::vector<double> consensus_alpha(std::span<const double> local, const Network& net,
                                           std::size_t t_con) {
  std::vector<Matrix> payload;
  payload.reserve(local.size());
  for (double a : local) payload.emplace_back(1, 1, a);
  const auto out = avg_cons(std::move(payload), net, t_con);
  std::vector<double> alpha(out.size());
  for (std::size_t g = 0; g < out.size(); ++g) alpha[g] = out[g](0, 0);
  return alpha;
}

/// Zeroes entries with y_i² > alpha.
inline Vector truncate_measurements(std::span<const double> y, double alpha) {
  if (alpha < 0.0) throw Error(Errc::InvalidDimensions, "threshold must be >= 0");
  Vector out(y.begin(), y.end());
  for (double& v : out)
    if (v * v > alpha) v = 0.0;
  return out;
}

/// Column c is (1/m) A_kᵀ y_trunc,k for k = cols[c].
inline Matrix init_x0_block(const Batch& batch, std::span<const std::size_t> cols,
                            std::span<const Vector> truncated) {
  if (cols.size() != truncated.size()) throw Error(Errc::ShapeMismatch, "one truncated vector per column");
  if (cols.empty()) throw Error(Errc::InvalidDimensions, "empty column block");
  const Matrix& first = batch.sketches[cols.front()];
  const double inv_m = 1.0 / static_cast<double>(first.rows());
  Matrix block(first.cols(), cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    Vector col = transpose_times(batch.sketches[cols[c]], truncated[c]);
    for (double& v : col) v *= inv_m;
    block.set_column(c, col);
  }
  return block;
}

/// Consensus power method on Σ_g (X₀)_g(X₀)_gᵀ.
///
/// One-loop: every node orthonormalizes its own consensus output.
/// Two-loop: node 0 orthonormalizes, then a second consensus round broadcasts
/// its basis (node 0 sends U, the rest send zeros) and every other node adopts
/// the output. Other nodes still factor their own consensus output once per
/// iteration so each holds an R for its step-size estimate.
inline InitResult dec_power_method(const std::vector<Matrix>& x0_blocks, const Network& net,
                                   const InitConfig& config, std::size_t rank,
                                   const RngStream& shared_stream, const Matrix* u_star = nullptr) {
  const std::size_t nodes = net.nodes;
  if (x0_blocks.size() != nodes) throw Error(Errc::ShapeMismatch, "one X0 block per node");
  const std::size_t n = x0_blocks.front().rows();
  for (const auto& blk : x0_blocks)
    if (blk.rows() != n) throw Error(Errc::ShapeMismatch, "X0 blocks disagree on n");

  auto orthonormalize = [](const Matrix& m) {
    try {
      return thin_qr(m);
    } catch (const Error& e) {
      if (e.code() == Errc::RankDeficient) throw Error(Errc::RankCollapse, e.what());
      throw;
    }
  };

  InitResult res;
  res.u_init = orthonormalize(gaussian_matrix(n, rank, shared_stream)).q;
  if (u_star != nullptr) {
    const auto [smax, smin] = extreme_singular_values(transpose_times(*u_star, res.u_init));
    (void)smax;
    res.init_alignment = smin;
  }
  res.u0.assign(nodes, res.u_init);
  res.r_last.assign(nodes, Matrix());

  std::vector<Matrix> payload(nodes);
  for (std::size_t tau = 0; tau < config.t_pm; ++tau) {
    for (std::size_t g = 0; g < nodes; ++g) {
      const Matrix proj = transpose_times(x0_blocks[g], res.u0[g]);  // |S_g|×r
      payload[g] = x0_blocks[g] * proj;
    }
    std::vector<Matrix> mixed = avg_cons(payload, net, config.t_con);

    if (config.variant == InitVariant::OneLoop) {
      for (std::size_t g = 0; g < nodes; ++g) {
        auto qr = orthonormalize(mixed[g]);
        res.u0[g] = std::move(qr.q);
        res.r_last[g] = std::move(qr.r);
      }
    } else {
      auto lead = orthonormalize(mixed[0]);
      res.u0[0] = lead.q;
      res.r_last[0] = std::move(lead.r);
      for (std::size_t g = 1; g < nodes; ++g) res.r_last[g] = orthonormalize(mixed[g]).r;
      if (nodes > 1) {
        std::vector<Matrix> share(nodes, Matrix(n, rank));
        share[0] = std::move(lead.q);
        std::vector<Matrix> received = avg_cons(std::move(share), net, config.t_con);
        for (std::size_t g = 1; g < nodes; ++g) res.u0[g] = std::move(received[g]);
      }
    }
    res.disagreement_trace.push_back(node_disagreement(res.u0));
  }
  return res;
}

/// Full initialization: thresholds from batch "00", X₀ blocks from batch "0",
/// then the consensus power method.
inline InitResult spectral_init(const MeasurementSet& ms, const ColumnPartition& partition,
                                const Network& net, const InitConfig& config, std::size_t rank,
                                const RngStream& shared_stream, const Matrix* u_star = nullptr) {
  const std::size_t nodes = partition.nodes();
  if (nodes != net.nodes) throw Error(Errc::ShapeMismatch, "partition and network sizes differ");
  const std::size_t m = ms.m_per_batch();
  const std::size_t q = partition.total_columns();

  const auto thr_batch = ms.batch(BatchLabel::threshold());
  std::vector<double> local(nodes);
  for (std::size_t g = 0; g < nodes; ++g)
    local[g] = local_alpha(*thr_batch, partition.sets[g], config.trunc_constant, m, q);
  std::vector<double> alpha = consensus_alpha(local, net, config.t_con);

  const auto x0_batch = ms.batch(BatchLabel::init());
  std::vector<Matrix> blocks;
  blocks.reserve(nodes);
  for (std::size_t g = 0; g < nodes; ++g) {
    std::vector<Vector> truncated;
    truncated.reserve(partition.sets[g].size());
    for (std::size_t k : partition.sets[g])
      truncated.push_back(truncate_measurements(x0_batch->measurements[k], std::max(alpha[g], 0.0)));
    blocks.push_back(init_x0_block(*x0_batch, partition.sets[g], truncated));
  }

  InitResult res = dec_power_method(blocks, net, config, rank, shared_stream, u_star);
  res.alpha = std::move(alpha);
  return res;
}

}  // namespace decgdmin
