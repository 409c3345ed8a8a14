#pragma once

// Communication graphs, consensus weights, spectral gap and the AvgCons
// gossip primitive over matrix payloads.

#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "decgdmin/numerics.hpp"

namespace decgdmin {

using Edge = std::pair<std::size_t, std::size_t>;  // (i, j) with i < j
using EdgeSet = std::vector<Edge>;

enum class WeightScheme { EqualNeighbor, Metropolis };

inline std::string_view weight_scheme_name(WeightScheme s) {
  return s == WeightScheme::Metropolis ? "metropolis" : "equal-neighbor";
}

/// Each unordered pair (i, j), i < j, visited in lexicographic order and kept
/// when its uniform draw falls below p. Graphs drawn from the same stream at
/// different p are therefore nested.
inline EdgeSet er_graph(std::size_t nodes, double p, RngStream stream) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::InvalidDimensions, "edge probability out of [0,1]");
  EdgeSet edges;
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = i + 1; j < nodes; ++j)
      if (stream.uniform() <= p && p > 0.0) edges.emplace_back(i, j);
  return edges;
}

inline std::vector<std::vector<std::size_t>> adjacency_lists(const EdgeSet& edges,
                                                             std::size_t nodes) {
  std::vector<std::vector<std::size_t>> adj(nodes);
  for (const auto& [i, j] : edges) {
    if (i >= nodes || j >= nodes || i == j)
      throw Error(Errc::InvalidDimensions, "edge endpoint out of range");
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

/// Breadth-first reachability from node 0.
inline bool is_connected(const EdgeSet& edges, std::size_t nodes) {
  if (nodes <= 1) return true;
  const auto adj = adjacency_lists(edges, nodes);
  std::vector<bool> seen(nodes, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t g = frontier.front();
    frontier.pop();
    for (std::size_t j : adj[g])
      if (!seen[j]) {
        seen[j] = true;
        ++reached;
        frontier.push(j);
      }
  }
  return reached == nodes;
}

/// Equal-neighbor: W_gj = 1/d_g on edges, zero diagonal (row stochastic only).
/// Metropolis: W_gj = 1/(1 + max(d_g, d_j)) on edges, W_gg = 1 − Σ_j W_gj.
inline Matrix weight_matrix(const EdgeSet& edges, std::size_t nodes, WeightScheme scheme) {
  if (nodes == 1) return Matrix::identity(1);
  const auto adj = adjacency_lists(edges, nodes);
  for (std::size_t g = 0; g < nodes; ++g)
    if (adj[g].empty()) throw Error(Errc::IsolatedNode, "node " + std::to_string(g) + " has no neighbors");
  Matrix w(nodes, nodes);
  for (std::size_t g = 0; g < nodes; ++g) {
    const double dg = static_cast<double>(adj[g].size());
    if (scheme == WeightScheme::EqualNeighbor) {
      for (std::size_t j : adj[g]) w(g, j) = 1.0 / dg;
    } else {
      double off = 0.0;
      for (std::size_t j : adj[g]) {
        const double dj = static_cast<double>(adj[j].size());
        w(g, j) = 1.0 / (1.0 + std::max(dg, dj));
        off += w(g, j);
      }
      w(g, g) = 1.0 - off;
    }
  }
  return w;
}

namespace detail {
inline bool is_symmetric(const Matrix& w, double tol) {
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = i + 1; j < w.cols(); ++j)
      if (std::abs(w(i, j) - w(j, i)) > tol) return false;
  return true;
}
}  // namespace detail

/// γ(W) = max(|λ₂|, |λ_L|) with eigenvalues sorted descending.
///
/// A non-symmetric W is treated as a reversible row-stochastic matrix
/// D⁻¹A (d_g = number of off-diagonal nonzeros in row g); its spectrum is
/// read from the similar symmetric matrix D^{1/2} W D^{-1/2}.
inline double gamma_of(const Matrix& w) {
  const std::size_t nodes = w.rows();
  if (w.cols() != nodes) throw Error(Errc::NotAnalyzable, "weight matrix is not square");
  if (nodes <= 1) return 0.0;
  Matrix s = w;
  if (!detail::is_symmetric(w, 1e-12)) {
    Vector d(nodes, 0.0);
    for (std::size_t g = 0; g < nodes; ++g)
      for (std::size_t j = 0; j < nodes; ++j)
        if (j != g && w(g, j) != 0.0) d[g] += 1.0;
    for (std::size_t g = 0; g < nodes; ++g) {
      if (d[g] == 0.0) throw Error(Errc::NotAnalyzable, "row without neighbors");
      for (std::size_t j = 0; j < nodes; ++j) s(g, j) = std::sqrt(d[g]) * w(g, j) / std::sqrt(d[j]);
    }
    if (!detail::is_symmetric(s, 1e-10))
      throw Error(Errc::NotAnalyzable, "weight matrix is not symmetrizable by degree scaling");
  }
  const auto eig = sym_eig(s);
  return std::max(std::abs(eig.values[1]), std::abs(eig.values.back()));
}

/// ⌈log(L/ε)/log(1/γ)⌉, never below 1.
inline std::size_t t_con_for(double eps_con, double gamma, std::size_t nodes) {
  if (!(eps_con > 0.0 && eps_con < 1.0)) throw Error(Errc::InvalidDimensions, "eps_con must be in (0,1)");
  if (gamma >= 1.0) throw Error(Errc::NoContraction, "gamma >= 1: consensus does not contract");
  if (gamma <= 0.0) return 1;
  const double raw = std::log(static_cast<double>(nodes) / eps_con) / std::log(1.0 / gamma);
  // absorb rounding so exact integers (e.g. log 4 / log 2) are not bumped up
  const double rounded = std::ceil(raw - 1e-9);
  return rounded < 1.0 ? 1 : static_cast<std::size_t>(rounded);
}

/// Connected graph with its weights and spectral data.
struct Network {
  std::size_t nodes = 1;
  EdgeSet edges;
  std::vector<std::vector<std::size_t>> neighbors;
  std::vector<std::size_t> degrees;
  WeightScheme scheme = WeightScheme::Metropolis;
  Matrix w = Matrix::identity(1);
  double gamma = 0.0;
  std::size_t attempt = 0;  // accepted ER attempt index

  /// Nonzero weights of row g in ascending column order.
  std::vector<std::pair<std::size_t, double>> row_weights(std::size_t g) const {
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t j = 0; j < nodes; ++j)
      if (w(g, j) != 0.0) out.emplace_back(j, w(g, j));
    return out;
  }
};

/// Validates connectivity and builds weights; rejects γ ≥ 1.
inline Network make_network(const EdgeSet& edges, std::size_t nodes, WeightScheme scheme) {
  if (nodes < 1) throw Error(Errc::InvalidDimensions, "network needs at least one node");
  if (!is_connected(edges, nodes)) throw Error(Errc::Disconnected, "graph is not connected");
  Network net;
  net.nodes = nodes;
  net.edges = edges;
  std::sort(net.edges.begin(), net.edges.end());
  net.neighbors = adjacency_lists(net.edges, nodes);
  net.degrees.resize(nodes);
  for (std::size_t g = 0; g < nodes; ++g) net.degrees[g] = net.neighbors[g].size();
  net.scheme = scheme;
  net.w = weight_matrix(net.edges, nodes, scheme);
  net.gamma = gamma_of(net.w);
  if (net.gamma >= 1.0 - 1e-12)
    throw Error(Errc::NoContraction, "gamma(W) = 1; consensus would not contract on this graph");
  return net;
}

inline Network single_node_network() { return make_network({}, 1, WeightScheme::Metropolis); }

/// ER graph resampled from fresh substreams until connected (≤ 1000 attempts).
inline Network make_er_network(std::size_t nodes, double p, WeightScheme scheme,
                               const RngStream& stream, std::size_t max_attempts = 1000) {
  if (nodes == 1) return single_node_network();
  if (!(p > 0.0 && p <= 1.0)) throw Error(Errc::InvalidDimensions, "edge probability must be in (0,1]");
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    EdgeSet edges = er_graph(nodes, p, stream.substream(attempt));
    if (!is_connected(edges, nodes)) continue;
    Network net = make_network(edges, nodes, scheme);
    net.attempt = attempt;
    return net;
  }
  throw Error(Errc::Disconnected, "no connected ER graph within " +
                                      std::to_string(max_attempts) + " attempts");
}

// ---------------------------------------------------------------------------

/// Synchronous rounds Z^(g) ← Σ_j W_gj Z^(j), t_con times, then scaled by L.
/// Each node reduces its neighbors in ascending node order (double-buffered).
inline std::vector<Matrix> avg_cons(std::vector<Matrix> inputs, const Network& net,
                                    std::size_t t_con) {
  const std::size_t nodes = net.nodes;
  if (inputs.size() != nodes) throw Error(Errc::ShapeMismatch, "one payload per node required");
  for (const auto& z : inputs)
    if (!z.same_shape(inputs.front())) throw Error(Errc::ShapeMismatch, "payload shapes differ");

  std::vector<std::vector<std::pair<std::size_t, double>>> rows(nodes);
  for (std::size_t g = 0; g < nodes; ++g) rows[g] = net.row_weights(g);

  std::vector<Matrix> next = inputs;
  const std::size_t len = inputs.front().size();
  for (std::size_t t = 0; t < t_con; ++t) {
    for (std::size_t g = 0; g < nodes; ++g) {
      double* out = next[g].data();
      std::fill(out, out + len, 0.0);
      for (const auto& [j, wgj] : rows[g]) {
        const double* in = inputs[j].data();
        for (std::size_t e = 0; e < len; ++e) out[e] += wgj * in[e];
      }
    }
    std::swap(inputs, next);
  }
  const double scale = static_cast<double>(nodes);
  for (auto& z : inputs) z *= scale;
  return inputs;
}

/// Σ_g inputs[g] in node order; what every node would get from exact consensus.
inline Matrix exact_sum(const std::vector<Matrix>& inputs) {
  Matrix total = inputs.front();
  for (std::size_t g = 1; g < inputs.size(); ++g) total += inputs[g];
  return total;
}

}  // namespace decgdmin
