#pragma once

// The Dec-AltGDmin iteration: per-node least squares over B, local gradients,
// gradient consensus and the projected (QR) gradient step on U.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "decgdmin/init.hpp"
#include "decgdmin/metrics.hpp"
#include "decgdmin/network.hpp"
#include "decgdmin/numerics.hpp"
#include "decgdmin/problem.hpp"

namespace decgdmin {

enum class EtaMode { TheoremDefault, Fixed };

inline std::string_view eta_mode_name(EtaMode m) {
  return m == EtaMode::Fixed ? "fixed" : "theorem-default";
}

struct GdConfig {
  std::size_t t = 1;       // GD iterations
  std::size_t t_con = 1;   // consensus rounds per iteration
  EtaMode eta_mode = EtaMode::TheoremDefault;
  double eta = 0.0;        // used as-is in fixed mode
  double c_eta = 0.4;      // η = c_eta / (m σ̂²) in theorem-default mode
  std::vector<double> sigma_max_est;  // per node, theorem-default mode only
  bool exact_consensus = false;       // replace avg_cons by the exact sum
  bool diagnostics = false;           // record ConsErr against the exact sum
  double elapsed_offset = 0.0;        // seconds already spent (e.g. initialization)
  std::string algorithm_tag = "dec-altgdmin";
  std::size_t trial_id = 0;

  double eta_for(std::size_t node, std::size_t m) const {
    if (eta_mode == EtaMode::Fixed) return eta;
    const double s = sigma_max_est.at(node);
    return c_eta / (static_cast<double>(m) * s * s);
  }
};

/// sqrt of the largest diagonal entry of each node's final PM factor R.
inline std::vector<double> estimate_sigma_max(const std::vector<Matrix>& r_factors) {
  std::vector<double> out;
  out.reserve(r_factors.size());
  for (const auto& r : r_factors) {
    if (r.rows() == 0) throw Error(Errc::InvalidDimensions, "empty R factor");
    double best = 0.0;
    for (std::size_t i = 0; i < std::min(r.rows(), r.cols()); ++i) best = std::max(best, r(i, i));
    out.push_back(std::sqrt(best));
  }
  return out;
}

namespace detail {
/// A_k U for every column of the block.
inline std::vector<Matrix> sketch_times_basis(const Matrix& u, const Batch& batch,
                                              std::span<const std::size_t> cols) {
  std::vector<Matrix> out;
  out.reserve(cols.size());
  for (std::size_t k : cols) out.push_back(batch.sketches[k] * u);
  return out;
}

inline Matrix min_step_b_from(const std::vector<Matrix>& au, const Batch& batch,
                              std::span<const std::size_t> cols, std::size_t r,
                              bool zero_on_singular) {
  Matrix b(r, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    try {
      b.set_column(c, least_squares(au[c], batch.measurements[cols[c]]));
    } catch (const Error& e) {
      if (e.code() != Errc::SingularSystem) throw;
      if (zero_on_singular) continue;
      throw Error(Errc::SingularSystem, "column " + std::to_string(cols[c]) + ": " + e.what());
    }
  }
  return b;
}

inline Matrix local_gradient_from(const std::vector<Matrix>& au, const Matrix& b,
                                  const Batch& batch, std::span<const std::size_t> cols,
                                  std::size_t n) {
  const std::size_t r = b.rows();
  Matrix grad(n, r);
  Vector bk(r);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const std::size_t k = cols[c];
    for (std::size_t i = 0; i < r; ++i) bk[i] = b(i, c);
    Vector resid = au[c] * std::span<const double>(bk);
    const Vector& y = batch.measurements[k];
    for (std::size_t i = 0; i < resid.size(); ++i) resid[i] -= y[i];
    const Vector back = transpose_times(batch.sketches[k], std::span<const double>(resid));
    for (std::size_t i = 0; i < n; ++i) {
      double* row = &grad(i, 0);
      for (std::size_t j = 0; j < r; ++j) row[j] += back[i] * bk[j];
    }
  }
  return grad;
}

/// Basis for SE₂ when an iterate may not be orthonormal (DGD before its first QR).
inline std::optional<Matrix> basis_of(const Matrix& u) {
  if (orthonormality_defect(u) <= 1e-6) return u;
  try {
    return thin_qr(u).q;
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline double se2_or_one(const Matrix& u_star, const Matrix& u) {
  const auto basis = basis_of(u);
  return basis ? subspace_distance(u_star, *basis) : 1.0;
}
}  // namespace detail

/// Column c of the result is the least-squares fit of y_k by A_k u, k = cols[c].
inline Matrix min_step_b(const Matrix& u, const Batch& batch, std::span<const std::size_t> cols) {
  return detail::min_step_b_from(detail::sketch_times_basis(u, batch, cols), batch, cols,
                                 u.cols(), false);
}

/// Σ_{k∈cols} A_kᵀ(A_k u b_k − y_k) b_kᵀ. No factor 2; the step size absorbs it.
inline Matrix local_gradient(const Matrix& u, const Matrix& b, const Batch& batch,
                             std::span<const std::size_t> cols) {
  if (b.cols() != cols.size() || b.rows() != u.cols())
    throw Error(Errc::ShapeMismatch, "B block does not match U and the column set");
  return detail::local_gradient_from(detail::sketch_times_basis(u, batch, cols), b, batch, cols,
                                     u.rows());
}

inline Matrix gd_step(const Matrix& u, const Matrix& grad_hat, double eta) {
  if (!(eta > 0.0)) throw Error(Errc::InvalidDimensions, "step size must be positive");
  Matrix moved = u;
  moved.add_scaled(-eta, grad_hat);
  try {
    return thin_qr(moved).q;
  } catch (const Error& e) {
    if (e.code() == Errc::RankDeficient) throw Error(Errc::RankCollapse, e.what());
    throw;
  }
}

struct RunResult {
  std::vector<NodeState> states;
  MetricsTrace trace;
  std::optional<Error> failure;  // set when an iteration aborted the run
};

/// Tracks physical batches consumed so far; with sample splitting every
/// iteration must draw on batches nothing earlier has touched.
class SplitLedger {
 public:
  explicit SplitLedger(const MeasurementSet& ms) : ms_(ms) {
    if (ms_.sample_split()) {
      used_.insert(ms_.resolve(BatchLabel::threshold()));
      used_.insert(ms_.resolve(BatchLabel::init()));
    }
  }

  void claim(BatchLabel label) {
    if (!ms_.sample_split()) return;
    if (!used_.insert(ms_.resolve(label)).second)
      throw Error(Errc::InvalidDimensions, "batch " + label.name() + " was already consumed");
  }

 private:
  const MeasurementSet& ms_;
  std::set<std::size_t> used_;
};

namespace detail {
inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}
}  // namespace detail

/// Full Dec-AltGDmin loop from per-node initial bases. At iteration t the
/// B-step uses batch t and the gradient uses batch T+t. error_x at iteration t
/// is measured with U_{t−1} and the B_t fitted to it; SE₂ and disagreement
/// use U_t.
inline RunResult run_dec_altgdmin(const GroundTruth* gt, const MeasurementSet& ms,
                                  const ColumnPartition& partition, const Network& net,
                                  const InitResult& init, const GdConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t nodes = partition.nodes();
  if (nodes != net.nodes || init.u0.size() != nodes)
    throw Error(Errc::ShapeMismatch, "partition, network and init disagree on node count");
  if (config.t > ms.iterations())
    throw Error(Errc::InvalidDimensions, "measurement set holds fewer iterations than requested");
  const std::size_t n = ms.n();
  const std::size_t r = init.u0.front().cols();
  const std::size_t m = ms.m_per_batch();
  const std::size_t t_total = ms.iterations();

  RunResult res;
  res.trace.algorithm_tag = config.algorithm_tag;
  res.trace.trial_id = config.trial_id;
  res.states.resize(nodes);
  std::vector<double> eta(nodes);
  for (std::size_t g = 0; g < nodes; ++g) {
    res.states[g].node_id = g;
    res.states[g].columns = partition.sets[g];
    res.states[g].u = init.u0[g];
    res.states[g].b = Matrix(r, partition.sets[g].size());
    eta[g] = config.eta_for(g, m);
    if (!(eta[g] > 0.0) || !std::isfinite(eta[g]))
      throw Error(Errc::ConfigInvalid, "step size must be positive and finite");
  }

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

      std::vector<NodeState> fitted = res.states;  // U_{t−1} with B_t, for error_x
      for (std::size_t g = 0; g < nodes; ++g) {
        NodeState& s = res.states[g];
        std::vector<Matrix> au = detail::sketch_times_basis(s.u, *ls_batch, s.columns);
        s.b = detail::min_step_b_from(au, *ls_batch, s.columns, r, false);
        if (!same) au = detail::sketch_times_basis(s.u, *grad_batch, s.columns);
        grads[g] = detail::local_gradient_from(au, s.b, *grad_batch, s.columns, n);
        fitted[g].b = s.b;
      }

      std::vector<Matrix> grad_hat;
      std::optional<double> cons_err;
      if (config.exact_consensus) {
        grad_hat.assign(nodes, exact_sum(grads));
        if (config.diagnostics) cons_err = 0.0;
      } else {
        grad_hat = avg_cons(grads, net, config.t_con);
        if (config.diagnostics) cons_err = consensus_error(grad_hat, exact_sum(grads));
      }

      for (std::size_t g = 0; g < nodes; ++g)
        res.states[g].u = gd_step(res.states[g].u, grad_hat[g], eta[g]);

      MetricsRecord rec;
      rec.iteration = t;
      rec.error_x = gt ? error_x(fitted, *gt) : std::numeric_limits<double>::quiet_NaN();
      rec.se2_node1 = gt ? subspace_distance(gt->u_star, res.states[0].u)
                         : std::numeric_limits<double>::quiet_NaN();
      rec.max_disagreement_frob = node_disagreement(res.states);
      rec.cons_err_max = cons_err;
      rec.elapsed_seconds = config.elapsed_offset + detail::seconds_since(start);
      res.trace.records.push_back(rec);
    }
  } catch (const Error& e) {
    res.failure = e;
  }
  return res;
}

}  // namespace decgdmin
