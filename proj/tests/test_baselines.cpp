#include <gtest/gtest.h>

#include "decgdmin/baselines.hpp"

using namespace decgdmin;

namespace {

struct Fixture {
  GroundTruth gt;
  MeasurementSet ms;
  ColumnPartition part;
  Network net;
  InitConfig ic;
  GdConfig gc;
};

Fixture desk_fixture(std::size_t L, std::size_t m, std::size_t T, std::uint64_t seed) {
  GroundTruth gt = generate_ground_truth(100, 100, 2, RngStream(seed, 1));
  MeasurementSet ms = generate_measurements(gt, m, T, RngStream(seed, 2), false);
  Network net = L == 1 ? single_node_network() : make_er_network(L, 0.5, WeightScheme::Metropolis, RngStream(seed, 3));
  InitConfig ic;
  ic.t_pm = 30;
  ic.t_con = 30;
  ic.trunc_constant = truncation_constant(gt.kappa, gt.mu);
  GdConfig gc;
  gc.t = T;
  gc.t_con = 30;
  return {std::move(gt), std::move(ms), partition_columns(100, L), std::move(net), ic, gc};
}

}  // namespace

TEST(BaselineKind, Names) {
  EXPECT_EQ(baseline_name(BaselineKind::Centralized), "centralized");
  EXPECT_EQ(baseline_name(BaselineKind::DgdRand), "dgd-rand");
  EXPECT_EQ(baseline_name(BaselineKind::DgdZero), "dgd-zero");
  EXPECT_EQ(baseline_name(BaselineKind::DgdSpect), "dgd-spect");
  EXPECT_EQ(baseline_name(BaselineKind::OneNode), "one-node");
}

TEST(Centralized, ConvergesAtDeskScale) {
  const Fixture s = desk_fixture(1, 40, 400, 1);
  const RunResult res = run_centralized_altgdmin(s.ms, s.gt, s.ic, s.gc, RngStream(1, 4));
  ASSERT_FALSE(res.failure.has_value());
  EXPECT_LE(res.trace.final_record().error_x, 1e-8);
}

TEST(Centralized, StarvedOfSamplesDoesNotConverge) {
  const Fixture s = desk_fixture(1, 5, 400, 2);
  const RunResult res = run_centralized_altgdmin(s.ms, s.gt, s.ic, s.gc, RngStream(2, 4));
  ASSERT_FALSE(res.failure.has_value());
  EXPECT_GE(res.trace.final_record().error_x, 0.1);
}

TEST(Dgd, SingleNodeReducesToCentralized) {
  const Fixture s = desk_fixture(1, 40, 60, 3);
  const RngStream shared(3, 4);
  const InitResult init = spectral_init(s.ms, s.part, s.net, s.ic, 2, shared);
  const GdConfig gc = with_sigma_estimates(s.gc, init);
  const RunResult dgd = run_dgd_altgdmin(&s.gt, s.ms, s.part, s.net, DgdInit::Spect, &init, gc, RngStream(3, 5), 2);
  const RunResult cen = run_centralized_altgdmin(s.ms, s.gt, s.ic, s.gc, shared);
  ASSERT_EQ(dgd.trace.records.size(), cen.trace.records.size());
  for (std::size_t i = 0; i < dgd.trace.records.size(); ++i) {
    EXPECT_EQ(dgd.trace.records[i].error_x, cen.trace.records[i].error_x);
    EXPECT_EQ(dgd.trace.records[i].se2_node1, cen.trace.records[i].se2_node1);
  }
}

TEST(Dgd, TwoNodesSwapTheirBases) {
  // each node's only neighbour is the other one, and its own iterate is left out
  const Fixture s = desk_fixture(2, 40, 1, 5);
  const InitResult init = spectral_init(s.ms, s.part, s.net, s.ic, 2, RngStream(5, 4));
  GdConfig gc = s.gc;
  gc.t = 1;
  gc.eta_mode = EtaMode::Fixed;
  gc.eta = 1e-14;
  InitResult swapped = init;
  swapped.u0[0] = thin_qr(gaussian_matrix(100, 2, RngStream(5, 6))).q;
  const RunResult res = run_dgd_altgdmin(&s.gt, s.ms, s.part, s.net, DgdInit::Spect, &swapped, gc, RngStream(5, 5), 2);
  ASSERT_FALSE(res.failure.has_value());
  EXPECT_LE(frobenius_norm(res.states[0].u - init.u0[1]), 1e-10);
  EXPECT_LE(frobenius_norm(res.states[1].u - swapped.u0[0]), 1e-10);
}

TEST(Dgd, ZeroStartRunsWithoutAborting) {
  const Fixture s = desk_fixture(5, 40, 20, 6);
  GdConfig gc = s.gc;
  gc.eta_mode = EtaMode::Fixed;
  gc.eta = 1e-4;
  const RunResult res = run_dgd_altgdmin(&s.gt, s.ms, s.part, s.net, DgdInit::Zero, nullptr, gc, RngStream(6, 5), 2);
  ASSERT_FALSE(res.failure.has_value());
  ASSERT_EQ(res.trace.records.size(), 20u);
  // b_k = 0 makes the gradient vanish, so a zero start never leaves zero
  EXPECT_DOUBLE_EQ(res.trace.final_record().error_x, 1.0);
  EXPECT_DOUBLE_EQ(res.trace.final_record().se2_node1, 1.0);
}

TEST(Dgd, RandomStartsDifferPerNode) {
  const Fixture s = desk_fixture(5, 40, 2, 7);
  GdConfig gc = s.gc;
  gc.eta_mode = EtaMode::Fixed;
  gc.eta = 1e-4;
  gc.t = 1;
  const RunResult res = run_dgd_altgdmin(&s.gt, s.ms, s.part, s.net, DgdInit::Rand, nullptr, gc, RngStream(7, 5), 2);
  ASSERT_FALSE(res.failure.has_value());
  EXPECT_GT(res.trace.records[0].max_disagreement_frob, 0.1);
}

TEST(Dgd, AgreeingExactBasesAreAFixedPoint) {
  const Fixture s = desk_fixture(6, 40, 30, 8);
  InitResult init;
  init.u0.assign(6, s.gt.u_star);
  GdConfig gc = s.gc;
  gc.eta_mode = EtaMode::Fixed;
  gc.eta = 0.4 / (40.0 * s.gt.sigma_max * s.gt.sigma_max);
  const RunResult res = run_dgd_altgdmin(&s.gt, s.ms, s.part, s.net, DgdInit::Spect, &init, gc, RngStream(8, 5), 2);
  ASSERT_FALSE(res.failure.has_value());
  for (const auto& st : res.states) EXPECT_LE(frobenius_norm(st.u - s.gt.u_star), 1e-10);
}

TEST(Dgd, AveragingDoesNotChangeTheBasis) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix m = gaussian_matrix(30, 3, RngStream(seed, 9));
    const Matrix q = thin_qr(m).q;
    for (double c : {1.0 / 19.0, 0.5, 7.0}) EXPECT_LE(frobenius_norm(thin_qr(c * m).q - q), 1e-10);
  }
}

TEST(OneNode, SingleNodeIsCentralized) {
  const Fixture s = desk_fixture(1, 40, 40, 9);
  const RngStream shared(9, 4);
  const RunResult one = run_one_node_altgdmin(s.ms, s.gt, s.part, s.ic, s.gc, shared);
  const RunResult cen = run_centralized_altgdmin(s.ms, s.gt, s.ic, s.gc, shared);
  for (std::size_t i = 0; i < one.trace.records.size(); ++i)
    EXPECT_EQ(one.trace.records[i].error_x, cen.trace.records[i].error_x);
}

TEST(OneNode, HalfTheDataIsEnough) {
  const Fixture s = desk_fixture(2, 40, 600, 10);
  const RunResult res = run_one_node_altgdmin(s.ms, s.gt, s.part, s.ic, s.gc, RngStream(10, 4));
  ASSERT_FALSE(res.failure.has_value());
  EXPECT_LE(res.trace.final_record().error_x, 1e-3);
  EXPECT_EQ(res.states.size(), 1u);
  EXPECT_EQ(res.states[0].columns, s.part.sets[0]);
}

TEST(OneNode, FiveColumnsAreNotEnough) {
  const Fixture s = desk_fixture(20, 40, 400, 11);
  const RunResult res = run_one_node_altgdmin(s.ms, s.gt, s.part, s.ic, s.gc, RngStream(11, 4));
  ASSERT_FALSE(res.failure.has_value());
  EXPECT_GE(res.trace.final_record().se2_node1, 0.05);
}
