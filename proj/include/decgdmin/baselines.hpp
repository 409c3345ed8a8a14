#pragma once

// Comparison algorithms: centralized AltGDmin, the DGD-style modification
// with three initializations, and AltGDmin on a single node's columns.

#include <chrono>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "decgdmin/gdmin.hpp"
#include "decgdmin/init.hpp"

namespace decgdmin {

enum class BaselineKind { Centralized, DgdRand, DgdZero, DgdSpect, OneNode };

inline std::string_view baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::Centralized: return "centralized";
    case BaselineKind::DgdRand: return "dgd-rand";
    case BaselineKind::DgdZero: return "dgd-zero";
    case BaselineKind::DgdSpect: return "dgd-spect";
    case BaselineKind::OneNode: return "one-node";
  }
  return "?";
}

enum class DgdInit { Rand, Zero, Spect };

/// Copies per-node σ̂ estimates from an init result into a GD config.
inline GdConfig with_sigma_estimates(GdConfig config, const InitResult& init) {
  if (config.eta_mode == EtaMode::TheoremDefault) config.sigma_max_est = estimate_sigma_max(init.r_last);
  return config;
}

/// AltGDmin with every column on one node: a one-node network, so consensus is exact.
inline RunResult run_centralized_altgdmin(const MeasurementSet& ms, const GroundTruth& gt,
                                          const InitConfig& init_config, GdConfig config,
                                          const RngStream& shared_stream) {
  const auto start = std::chrono::steady_clock::now();
  const ColumnPartition part = single_node_partition(ms.q());
  const Network net = single_node_network();
  const InitResult init = spectral_init(ms, part, net, init_config, gt.r, shared_stream, &gt.u_star);
  config = with_sigma_estimates(std::move(config), init);
  config.elapsed_offset = detail::seconds_since(start);
  return run_dec_altgdmin(&gt, ms, part, net, init, config);
}

/// AltGDmin restricted to node 0's columns S_1; error_x is over S_1 only.
inline RunResult run_one_node_altgdmin(const MeasurementSet& ms, const GroundTruth& gt,
                                       const ColumnPartition& partition,
                                       const InitConfig& init_config, GdConfig config,
                                       const RngStream& shared_stream) {
  const auto start = std::chrono::steady_clock::now();
  ColumnPartition part;
  part.sets.push_back(partition.sets.front());
  const Network net = single_node_network();
  const InitResult init = spectral_init(ms, part, net, init_config, gt.r, shared_stream, &gt.u_star);
  config = with_sigma_estimates(std::move(config), init);
  config.elapsed_offset = detail::seconds_since(start);
  return run_dec_altgdmin(&gt, ms, part, net, init, config);
}

/// U₊^(g) = QR((1/d_g) Σ_{g′∈N_g} U^(g′) − η ∇f_g(U^(g), B_g)).
///
/// The neighbor average excludes the node itself; a node without neighbors
/// (L = 1) uses its own iterate, which makes the update plain AltGDmin. A
/// single η, node 0's, is shared by all nodes. Least-squares systems that are
/// singular (zero start) leave b_k = 0. Iterates whose QR is rank deficient are
/// kept un-orthonormalized until the factorization succeeds.
///
/// `spect` supplies the starting bases for DgdInit::Spect; `rand_stream`
/// seeds the per-node Gaussian starts for DgdInit::Rand.
inline RunResult run_dgd_altgdmin(const GroundTruth* gt, const MeasurementSet& ms,
                                  const ColumnPartition& partition, const Network& net,
                                  DgdInit mode, const InitResult* spect, const GdConfig& config,
                                  const RngStream& rand_stream, std::size_t rank) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t nodes = partition.nodes();
  if (nodes != net.nodes) throw Error(Errc::ShapeMismatch, "partition and network sizes differ");
  if (config.t > ms.iterations())
    throw Error(Errc::InvalidDimensions, "measurement set holds fewer iterations than requested");
  const std::size_t n = ms.n();
  const std::size_t m = ms.m_per_batch();
  const std::size_t t_total = ms.iterations();

  RunResult res;
  res.trace.algorithm_tag = config.algorithm_tag;
  res.trace.trial_id = config.trial_id;
  res.states.resize(nodes);
  for (std::size_t g = 0; g < nodes; ++g) {
    NodeState& s = res.states[g];
    s.node_id = g;
    s.columns = partition.sets[g];
    s.b = Matrix(rank, s.columns.size());
    switch (mode) {
      case DgdInit::Rand: s.u = thin_qr(gaussian_matrix(n, rank, rand_stream.substream(g))).q; break;
      case DgdInit::Zero: s.u = Matrix(n, rank); break;
      case DgdInit::Spect:
        if (spect == nullptr || spect->u0.size() != nodes)
          throw Error(Errc::ShapeMismatch, "spectral start needs one basis per node");
        s.u = spect->u0[g];
        break;
    }
  }
  const double eta = config.eta_for(0, m);
  if (!(eta > 0.0) || !std::isfinite(eta))
    throw Error(Errc::ConfigInvalid, "step size must be positive and finite");

  SplitLedger ledger(ms);
  std::vector<Matrix> grads(nodes);
  try {
    for (std::size_t t = 1; t <= config.t; ++t) {
      const BatchLabel ls_label = BatchLabel::gd(t);
      const BatchLabel grad_label = BatchLabel::gd(t_total + t);
      ledger.claim(ls_label);
      ledger.claim(grad_label);
      const bool same = ms.resolve(ls_label) == ms.resolve(grad_label);
      const auto ls_batch = ms.batch(ls_label);
      const auto grad_batch = same ? ls_batch : ms.batch(grad_label);

      std::vector<NodeState> fitted = res.states;
      for (std::size_t g = 0; g < nodes; ++g) {
        NodeState& s = res.states[g];
        std::vector<Matrix> au = detail::sketch_times_basis(s.u, *ls_batch, s.columns);
        s.b = detail::min_step_b_from(au, *ls_batch, s.columns, rank, true);
        if (!same) au = detail::sketch_times_basis(s.u, *grad_batch, s.columns);
        grads[g] = detail::local_gradient_from(au, s.b, *grad_batch, s.columns, n);
        fitted[g].b = s.b;
      }

      std::vector<Matrix> next(nodes);
      for (std::size_t g = 0; g < nodes; ++g) {
        const auto& nbrs = net.neighbors[g];
        Matrix moved;
        if (nbrs.empty()) {
          moved = res.states[g].u;
        } else {
          moved = res.states[nbrs.front()].u;
          for (std::size_t j = 1; j < nbrs.size(); ++j) moved += res.states[nbrs[j]].u;
          moved *= 1.0 / static_cast<double>(nbrs.size());
        }
        moved.add_scaled(-eta, grads[g]);
        try {
          next[g] = thin_qr(moved).q;
        } catch (const Error& e) {
          if (e.code() != Errc::RankDeficient) throw;
          next[g] = std::move(moved);
        }
      }
      for (std::size_t g = 0; g < nodes; ++g) res.states[g].u = std::move(next[g]);

      MetricsRecord rec;
      rec.iteration = t;
      rec.error_x = gt ? error_x(fitted, *gt) : std::numeric_limits<double>::quiet_NaN();
      rec.se2_node1 = gt ? detail::se2_or_one(gt->u_star, res.states[0].u)
                         : std::numeric_limits<double>::quiet_NaN();
      rec.max_disagreement_frob = node_disagreement(res.states);
      rec.elapsed_seconds = config.elapsed_offset + detail::seconds_since(start);
      res.trace.records.push_back(rec);
    }
  } catch (const Error& e) {
    res.failure = e;
  }
  return res;
}

}  // namespace decgdmin
