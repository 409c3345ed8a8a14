#include <gtest/gtest.h>

#include <cmath>

#include "decgdmin/metrics.hpp"
#include "decgdmin/network.hpp"
#include "oracles.hpp"

using namespace decgdmin;

namespace {

Matrix random_basis(std::size_t n, std::size_t r, std::uint64_t seed) {
  return thin_qr(gaussian_matrix(n, r, RngStream(seed, 0))).q;
}

Matrix random_rotation(std::size_t r, std::uint64_t seed) {
  return thin_qr(gaussian_matrix(r, r, RngStream(seed, 1))).q;
}

std::vector<NodeState> split_states(const GroundTruth& gt, const ColumnPartition& part) {
  std::vector<NodeState> states;
  for (std::size_t g = 0; g < part.nodes(); ++g) {
    NodeState s;
    s.node_id = g;
    s.columns = part.sets[g];
    s.u = gt.u_star;
    s.b = Matrix(gt.r, s.columns.size());
    for (std::size_t c = 0; c < s.columns.size(); ++c)
      for (std::size_t i = 0; i < gt.r; ++i) s.b(i, c) = gt.b_star(i, s.columns[c]);
    states.push_back(std::move(s));
  }
  return states;
}

}  // namespace

TEST(SubspaceDistance, IdenticalIsZero) {
  const Matrix u = random_basis(20, 3, 1);
  EXPECT_LE(subspace_distance(u, u), 1e-10);
}

TEST(SubspaceDistance, OrthogonalLinesAreOne) {
  const Matrix e1 = Matrix::from_rows({{1}, {0}});
  const Matrix e2 = Matrix::from_rows({{0}, {1}});
  EXPECT_NEAR(subspace_distance(e1, e2), 1.0, 1e-12);
}

TEST(SubspaceDistance, MatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix u1 = random_basis(30, 3, 10 + seed);
    const Matrix u2 = random_basis(30, 3, 100 + seed);
    const auto ref = oracle::subspace_distance(oracle::to_eigen(u1), oracle::to_eigen(u2));
    EXPECT_NEAR(subspace_distance(u1, u2), static_cast<double>(ref), 1e-9);
  }
}

TEST(SubspaceDistance, ResolvesTinyAngles) {
  // one column tilted by θ: SE₂ = sin θ, far below where 1 − cos² cancels
  for (double theta : {1e-4, 1e-9, 1e-13}) {
    Matrix u(10, 2);
    u(0, 0) = 1.0;
    u(1, 1) = std::cos(theta);
    u(2, 1) = std::sin(theta);
    Matrix v(10, 2);
    v(0, 0) = 1.0;
    v(1, 1) = 1.0;
    EXPECT_NEAR(subspace_distance(v, u) / std::sin(theta), 1.0, 1e-6);
  }
}

TEST(SubspaceDistance, RejectsNonOrthonormal) {
  const Matrix u = 2.0 * random_basis(10, 2, 3);
  try {
    subspace_distance(u, random_basis(10, 2, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotOrthonormal);
  }
}

TEST(SubspaceDistance, BoundedByTwiceFrobeniusGap) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Matrix u1 = random_basis(15, 2, seed);
    Matrix pert = gaussian_matrix(15, 2, RngStream(seed, 7));
    const double scale = std::pow(10.0, -static_cast<double>(seed % 6));
    const Matrix u2 = seed % 7 == 0 ? random_basis(15, 2, seed + 1000) : thin_qr(u1 + scale * pert).q;
    EXPECT_LE(subspace_distance(u1, u2), 2.0 * frobenius_norm(u1 - u2) + 1e-8);
  }
}

TEST(SubspaceDistance, RotationInvariant) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Matrix u1 = random_basis(25, 3, seed);
    const Matrix u2 = random_basis(25, 3, seed + 500);
    const Matrix q = random_rotation(3, seed);
    const double base = subspace_distance(u1, u2);
    EXPECT_NEAR(subspace_distance(u1 * q, u2), base, 1e-9);
    EXPECT_NEAR(subspace_distance(u1, u2 * q), base, 1e-9);
  }
}

TEST(ErrorX, ExactRecoveryIsZero) {
  const GroundTruth gt = generate_ground_truth(20, 12, 2, RngStream(5, 0));
  EXPECT_LE(error_x(split_states(gt, partition_columns(12, 3)), gt), 1e-12);
}

TEST(ErrorX, ZeroEstimateIsOne) {
  const GroundTruth gt = generate_ground_truth(20, 12, 2, RngStream(6, 0));
  auto states = split_states(gt, partition_columns(12, 4));
  for (auto& s : states) s.b = Matrix(gt.r, s.columns.size());
  EXPECT_DOUBLE_EQ(error_x(states, gt), 1.0);
}

TEST(ErrorX, SinglePerturbedColumn) {
  const GroundTruth gt = generate_ground_truth(20, 12, 2, RngStream(7, 0));
  auto states = split_states(gt, partition_columns(12, 3));
  // shift b_k along e₁; with orthonormal U the column moves by exactly that much
  const double delta = 0.03;
  const double shift = delta * frobenius_norm(gt.x_star);
  states[1].b(0, 2) += shift;
  EXPECT_NEAR(error_x(states, gt), delta, 1e-10);
}

TEST(ErrorX, ReparameterizationInvariant) {
  const GroundTruth gt = generate_ground_truth(20, 12, 2, RngStream(8, 0));
  auto states = split_states(gt, partition_columns(12, 3));
  for (auto& s : states) s.b += 0.1 * gaussian_matrix(2, s.b.cols(), RngStream(8, 1 + s.node_id));
  const double base = error_x(states, gt);
  const Matrix r = Matrix::from_rows({{2.0, 0.5}, {0.0, 0.7}});
  const Matrix r_inv = Matrix::from_rows({{0.5, -0.5 / 1.4}, {0.0, 1.0 / 0.7}});
  for (auto& s : states) {
    s.u = s.u * r;
    s.b = r_inv * s.b;
  }
  EXPECT_NEAR(error_x(states, gt), base, 1e-9);
}

TEST(NodeDisagreement, Conventions) {
  const Matrix u = random_basis(8, 2, 9);
  EXPECT_EQ(node_disagreement(std::vector<Matrix>{u}), 0.0);
  EXPECT_EQ(node_disagreement(std::vector<Matrix>{u, u, u}), 0.0);
  Matrix shifted = u;
  shifted(0, 0) += 0.25;
  EXPECT_NEAR(node_disagreement(std::vector<Matrix>{u, u, shifted}), 0.25, 1e-15);
}

TEST(NodeDisagreement, PerturbedQrBound) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Matrix z1 = gaussian_matrix(20, 2, RngStream(seed, 11));
    const Matrix z2 = z1 + 1e-3 * gaussian_matrix(20, 2, RngStream(seed, 12));
    const auto [smax, smin] = extreme_singular_values(z1);
    (void)smax;
    const double bound = std::sqrt(2.0) * frobenius_norm(z2 - z1) / smin;
    if (bound >= std::sqrt(2.0) * 4.0 / std::sqrt(10.0)) continue;
    EXPECT_LE(node_disagreement(std::vector<Matrix>{thin_qr(z1).q, thin_qr(z2).q}), bound + 1e-9);
  }
}

TEST(ConsensusError, ShapeMismatch) {
  try {
    consensus_error({Matrix(2, 2)}, Matrix(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST(ConsensusError, ExactCopiesGiveZero) {
  const Matrix s = gaussian_matrix(4, 3, RngStream(1, 1));
  EXPECT_EQ(consensus_error({s, s, s}, s), 0.0);
}

TEST(ConsensusError, ZeroRoundsIsTheInputError) {
  const Network net = make_er_network(8, 0.5, WeightScheme::Metropolis, RngStream(2, 2));
  std::vector<Matrix> grads;
  for (std::size_t g = 0; g < 8; ++g) grads.push_back(gaussian_matrix(5, 2, RngStream(2, 10 + g)));
  const Matrix total = exact_sum(grads);
  double expected = 0.0;
  for (const auto& g : grads) expected = std::max(expected, frobenius_norm(8.0 * g - total));
  EXPECT_NEAR(consensus_error(avg_cons(grads, net, 0), total), expected, 1e-12 * expected);
}

TEST(ConsensusError, ContractAtPrescribedRounds) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Network net = make_er_network(12, 0.4, WeightScheme::Metropolis, RngStream(seed, 3));
    std::vector<Matrix> grads;
    for (std::size_t g = 0; g < 12; ++g) grads.push_back(gaussian_matrix(6, 2, RngStream(seed, 20 + g)));
    const Matrix total = exact_sum(grads);
    double in_err = 0.0;
    for (const auto& g : grads) in_err = std::max(in_err, frobenius_norm(12.0 * g - total));
    for (double eps : {1e-2, 1e-4, 1e-6}) {
      const std::size_t t_con = t_con_for(eps, net.gamma, 12);
      EXPECT_LE(consensus_error(avg_cons(grads, net, t_con), total), eps * in_err + 1e-12);
    }
  }
}
