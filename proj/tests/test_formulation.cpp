#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "noma/certify.hpp"
#include "noma/errors.hpp"
#include "noma/formulation.hpp"
#include "oracles.hpp"
#include "problems.hpp"

using namespace noma;

namespace {

std::vector<ComplexVector> random_channels(std::mt19937_64& rng, int m, int k) {
  std::vector<ComplexVector> h;
  for (int u = 0; u < k; ++u) h.emplace_back(oracle::random_vector(rng, m));
  return h;
}

int count_dim(const LmiProblem& p, int dim) {
  int n = 0;
  for (const auto& b : p.blocks) n += b.dim == dim;
  return n;
}

}  // namespace

TEST(BuildRobust, BlockCounts) {
  std::mt19937_64 rng(1);
  const Scenario s = Scenario::uniform(8, 3, 0.06, 10.0, 0.01);
  const auto h = random_channels(rng, 8, 3);
  const SdpProblem p = build_robust_sdp(s, h, order_users(h));
  EXPECT_EQ(p.lmi.blocks.size(), 3u + 6u + 6u);
  EXPECT_EQ(count_dim(p.lmi, 8), 3);
  EXPECT_EQ(count_dim(p.lmi, 9), 6);
  EXPECT_EQ(count_dim(p.lmi, 1), 6);
  EXPECT_EQ(p.index.num_multipliers(), 6);
  EXPECT_EQ(p.lmi.num_vars, 3 * 64 + 6);
  double cost = 0.0;
  for (double c : p.lmi.objective) cost += c;
  EXPECT_EQ(cost, 24.0);  // one per diagonal entry of each W_k
}

TEST(BuildRobust, ErrorFreeLayersBecomeScalar) {
  std::mt19937_64 rng(2);
  Scenario s = Scenario::uniform(4, 3, 0.05, 0.0, 0.01);
  const auto h = random_channels(rng, 4, 3);
  const auto order = order_users(h);
  s.epsilon[static_cast<std::size_t>(order[1])] = 0.0;
  const SdpProblem p = build_robust_sdp(s, h, order);
  // Layer l = 1 has no multiplier: (0,1) and (1,1) are scalar blocks.
  EXPECT_FALSE(p.index.has_multiplier(0, 1));
  EXPECT_FALSE(p.index.has_multiplier(1, 1));
  EXPECT_TRUE(p.index.has_multiplier(0, 2));
  EXPECT_EQ(p.index.num_multipliers(), 4);
  EXPECT_EQ(p.lmi.blocks[static_cast<std::size_t>(p.layer_block[0][1])].dim, 1);
  EXPECT_EQ(p.lmi.blocks[static_cast<std::size_t>(p.layer_block[1][0])].dim, 1);
  EXPECT_EQ(p.lmi.blocks[static_cast<std::size_t>(p.layer_block[2][0])].dim, 5);
  EXPECT_THROW(p.index.lambda(0, 1), ContractError);
}

TEST(BuildRobust, LmiMatchesFormulaAtRandomPoint) {
  std::mt19937_64 rng(3);
  const int m = 3;
  const int users = 3;
  const Scenario s = Scenario::uniform(m, users, 0.2, 4.0, 0.05);
  const auto h = random_channels(rng, m, users);
  const auto order = order_users(h);
  const SdpProblem p = build_robust_sdp(s, h, order);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(static_cast<std::size_t>(p.lmi.num_vars));
  for (double& v : x) v = g(rng);
  std::vector<Eigen::MatrixXcd> w;
  for (int k = 0; k < users; ++k) w.push_back(p.index.unpack(x, k).eigen());
  const double gamma = db_to_linear(4.0);
  for (int k = 0; k < users; ++k) {
    Eigen::MatrixXcd phi = w[static_cast<std::size_t>(k)] / gamma;
    Eigen::MatrixXcd nu = Eigen::MatrixXcd::Zero(m, m);
    for (int q = k + 1; q < users; ++q) phi -= w[static_cast<std::size_t>(q)];
    for (int q = 0; q < k; ++q) nu -= w[static_cast<std::size_t>(q)];
    for (int l = k; l < users; ++l) {
      const Eigen::VectorXcd hl = h[static_cast<std::size_t>(order[static_cast<std::size_t>(l)])].eigen();
      const double lam = x[static_cast<std::size_t>(p.index.lambda(k, l))];
      Eigen::MatrixXcd c(m + 1, m + 1);
      c.topLeftCorner(m, m) = lam * Eigen::MatrixXcd::Identity(m, m) + phi + nu;
      c.topRightCorner(m, 1) = phi * hl;
      c.bottomLeftCorner(1, m) = hl.adjoint() * phi;
      c(m, m) = hl.dot(phi * hl).real() - 0.05 - lam * 0.04;
      const LmiBlock& blk = p.lmi.blocks[static_cast<std::size_t>(p.layer_block[static_cast<std::size_t>(k)][static_cast<std::size_t>(l - k)])];
      EXPECT_LE((blk.evaluate(x).eigen() - c).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(BuildRobust, SingleUserSpecialisation) {
  const Scenario s = Scenario::uniform(2, 1, 0.1, 0.0, 0.5);
  const std::vector<ComplexVector> h{ComplexVector{1.0, cplx(0.0, 2.0)}};
  const SdpProblem p = build_robust_sdp(s, h, std::vector<int>{0});
  EXPECT_EQ(p.lmi.blocks.size(), 3u);
  std::vector<double> x(static_cast<std::size_t>(p.lmi.num_vars), 0.0);
  x[static_cast<std::size_t>(p.index.diag(0, 0))] = 2.0;
  x[static_cast<std::size_t>(p.index.diag(0, 1))] = 1.0;
  x[static_cast<std::size_t>(p.index.lambda(0, 0))] = 0.5;
  const HermitianMatrix c = p.lmi.blocks[1].evaluate(x);
  // phi = W / gamma = diag(2, 1), h = (1, 2i).
  EXPECT_NEAR(c(0, 0).real(), 2.5, 1e-14);
  EXPECT_NEAR(std::abs(c(1, 2) - cplx(0.0, 2.0)), 0.0, 1e-14);
  EXPECT_NEAR(c(2, 2).real(), 2.0 + 4.0 - 0.5 - 0.5 * 0.01, 1e-14);
}

TEST(BuildRobust, ZeroRadiusEqualsNonRobust) {
  std::mt19937_64 rng(4);
  const auto h = random_channels(rng, 4, 3);
  const Scenario s = Scenario::uniform(4, 3, 0.0, 6.0, 0.01);
  const auto order = order_users(h);
  EXPECT_EQ(build_robust_sdp(s, h, order), build_nonrobust_sdp(s, h, order));
  EXPECT_EQ(build_nonrobust_sdp(s.with_epsilon(0.1), h, order), build_robust_sdp(s, h, order));
}

TEST(BuildRobust, RejectsBadInputs) {
  std::mt19937_64 rng(5);
  const auto h = random_channels(rng, 4, 3);
  const Scenario s = Scenario::uniform(4, 3, 0.05, 0.0, 0.01);
  EXPECT_THROW(build_robust_sdp(s, std::span(h).first(2), std::vector<int>{0, 1}), ContractError);
  EXPECT_THROW(build_robust_sdp(s, h, std::vector<int>{0, 0, 1}), ContractError);
  EXPECT_THROW(build_robust_sdp(Scenario::uniform(3, 3, 0.05, 0.0, 0.01), h, std::vector<int>{0, 1, 2}),
               ContractError);
}

TEST(ClosedForm, ScalarNonRobust) {
  const Scenario s = Scenario::uniform(1, 1, 0.0, 10.0, 0.01);
  const std::vector<ComplexVector> h{ComplexVector{1.0}};
  const BeamDesign d = design_noma(s, h, std::vector<int>{0}, Scheme::robust);
  ASSERT_TRUE(d.solved());
  EXPECT_NEAR(d.total_power, 0.1, 1e-6 * 0.1);
}

TEST(ClosedForm, ScalarRobust) {
  const Scenario s = Scenario::uniform(1, 1, 0.3, 10.0, 0.01);
  const std::vector<ComplexVector> h{ComplexVector{1.0}};
  const BeamDesign d = design_noma(s, h, std::vector<int>{0}, Scheme::robust);
  ASSERT_TRUE(d.solved());
  const double expect = 10.0 * 0.01 / (0.7 * 0.7);
  EXPECT_NEAR(d.total_power, expect, 1e-5 * expect);
}

TEST(ClosedForm, MaximumRatioTransmission) {
  const Scenario s = Scenario::uniform(2, 1, 0.0, 0.0, 1.0);
  const std::vector<ComplexVector> h{ComplexVector{1.0, 0.0}};
  const BeamDesign d = design_noma(s, h, std::vector<int>{0}, Scheme::nonrobust);
  ASSERT_TRUE(d.solved());
  EXPECT_NEAR(d.total_power, 1.0, 1e-6);
  const double cosine = std::abs(h[0].inner(d.w[0])) / d.w[0].norm();
  EXPECT_LE(std::acos(std::min(1.0, cosine)), 1e-6);
}

TEST(ClosedForm, MrtDirectionForComplexChannel) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 5; ++t) {
    const ComplexVector h(oracle::random_vector(rng, 4));
    const Scenario s = Scenario::uniform(4, 1, 0.0, 3.0, 0.1);
    const BeamDesign d = design_noma(s, std::vector<ComplexVector>{h}, std::vector<int>{0}, Scheme::nonrobust);
    ASSERT_TRUE(d.solved());
    const double cosine = std::abs(h.inner(d.w[0])) / (h.norm() * d.w[0].norm());
    EXPECT_LE(std::acos(std::min(1.0, cosine)), 1e-6);
    EXPECT_NEAR(d.total_power, db_to_linear(3.0) * 0.1 / h.squared_norm(), 1e-6 * d.total_power);
  }
}

TEST(Extract, Examples) {
  std::mt19937_64 rng(7);
  Eigen::VectorXcd u = oracle::random_vector(rng, 3);
  u /= u.norm();
  const std::vector<HermitianMatrix> w{HermitianMatrix::hermitian_part(4.0 * u * u.adjoint())};
  const Extraction ex = extract_beamformers(w, 1e-4);
  EXPECT_NEAR(ex.w[0].norm(), 2.0, 1e-12);
  EXPECT_NEAR(std::abs(ex.w[0].eigen().dot(u)), 2.0, 1e-10);
  EXPECT_LE(ex.rank_ratio[0], 1e-12);

  const std::vector<double> diag{1.0, 0.5};
  const std::vector<HermitianMatrix> bad{HermitianMatrix::diagonal(diag)};
  try {
    extract_beamformers(bad, 1e-4);
    FAIL() << "expected RankOneViolation";
  } catch (const RankOneViolation& e) {
    EXPECT_EQ(e.position(), 0);
    EXPECT_NEAR(e.ratio(), 0.5, 1e-12);
  }
  EXPECT_NEAR(extract_beamformers(bad).rank_ratio[0], 0.5, 1e-12);
  EXPECT_EQ(extract_beamformers(std::vector<HermitianMatrix>{HermitianMatrix::zeros(2)}).rank_ratio[0], 0.0);
}

TEST(Oma, TargetAndSingleUser) {
  EXPECT_NEAR(oma_target(10.0, 3), 1330.0, 1e-9);
  EXPECT_NEAR(oma_target(db_to_linear(10.0), 3), std::pow(2.0, 3.0 * std::log2(11.0)) - 1.0, 1e-9);
  std::mt19937_64 rng(8);
  const std::vector<ComplexVector> h{ComplexVector(oracle::random_vector(rng, 4))};
  const Scenario s = Scenario::uniform(4, 1, 0.05, 5.0, 0.01);
  const BeamDesign a = design_oma(s, h);
  const BeamDesign b = design_noma(s, h, std::vector<int>{0}, Scheme::robust);
  ASSERT_TRUE(a.solved());
  ASSERT_TRUE(b.solved());
  EXPECT_NEAR(a.total_power, b.total_power, 1e-6 * b.total_power);
  EXPECT_EQ(build_oma_design(Scenario::uniform(4, 3, 0.05, 5.0, 0.01), random_channels(rng, 4, 3)).size(), 3u);
}

TEST(Designs, NonRobustNeverAboveRobust) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 8; ++t) {
    const auto inst = fixtures::robust_instance(rng, 4, 1 + t % 3, 0.05, 2.0);
    const BeamDesign r = design_noma(inst.scenario, inst.h_hat, inst.order, Scheme::robust);
    const BeamDesign n = design_noma(inst.scenario, inst.h_hat, inst.order, Scheme::nonrobust);
    ASSERT_TRUE(n.solved());
    if (!r.solved()) continue;
    EXPECT_LE(n.sdp_objective, r.sdp_objective * (1.0 + 1e-6));
  }
}

TEST(Designs, ObjectiveMonotoneInGammaAndEpsilon) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 4; ++t) {
    const auto inst = fixtures::robust_instance(rng, 4, 2);
    double prev_gamma = 0.0;
    for (double g : {-2.0, 0.0, 2.0, 4.0}) {
      const BeamDesign d = design_noma(inst.scenario.with_gamma_db(g), inst.h_hat, inst.order, Scheme::robust);
      if (!d.solved()) break;
      EXPECT_GE(d.sdp_objective, prev_gamma * (1.0 - 1e-6));
      prev_gamma = d.sdp_objective;
    }
    double prev_eps = 0.0;
    for (double e : {0.0, 0.02, 0.05, 0.1}) {
      const BeamDesign d = design_noma(inst.scenario.with_epsilon(e), inst.h_hat, inst.order, Scheme::robust);
      if (!d.solved()) break;
      EXPECT_GE(d.sdp_objective, prev_eps * (1.0 - 1e-6));
      prev_eps = d.sdp_objective;
    }
  }
}

TEST(Designs, TraceMatchesBeamPowerWhenRankOne) {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int t = 0; t < 12; ++t) {
    const auto inst = fixtures::robust_instance(rng, 4, 1 + t % 3);
    const BeamDesign d = design_noma(inst.scenario, inst.h_hat, inst.order, Scheme::robust);
    ASSERT_TRUE(d.solved());
    EXPECT_GE(d.total_power, 0.0);
    EXPECT_EQ(d.rank_violation, d.max_rank_ratio() > 1e-4);
    if (d.rank_violation) continue;
    ++checked;
    EXPECT_LE(std::abs(d.sdp_objective - d.total_power) / d.total_power, 1e-3);
  }
  EXPECT_GT(checked, 0);
}

// Accepted robust designs keep every layer above target for sampled errors.
TEST(Designs, ConstraintFaithfulnessOfAcceptedDesigns) {
  std::mt19937_64 rng(12);
  int accepted = 0;
  for (int t = 0; t < 10; ++t) {
    const auto inst = fixtures::robust_instance(rng, 3, 1 + t % 3, 0.1, 3.0);
    const BeamDesign d = design_noma(inst.scenario, inst.h_hat, inst.order, Scheme::robust);
    if (!d.accepted()) continue;
    ++accepted;
    std::vector<Eigen::VectorXcd> w;
    for (const auto& v : d.w) w.push_back(v.eigen());
    const double gamma = db_to_linear(3.0);
    for (int k = 0; k < inst.scenario.num_users; ++k) {
      for (int l = k; l < inst.scenario.num_users; ++l) {
        const auto& h = inst.h_hat[static_cast<std::size_t>(inst.order[static_cast<std::size_t>(l)])].eigen();
        const double worst = oracle::sampled_worst_sinr(rng, w, h, 0.1, 0.01, k, 10000);
        EXPECT_GE(worst, gamma - 1e-3) << "trial " << t << " k " << k << " l " << l;
      }
    }
  }
  EXPECT_GT(accepted, 0);
}

// Relaxed matrices satisfy every sampled constraint even when not rank one.
TEST(Designs, RelaxedMatricesSatisfySampledConstraints) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 6; ++t) {
    const auto inst = fixtures::robust_instance(rng, 3, 3, 0.1, 3.0);
    const BeamDesign d = design_noma(inst.scenario, inst.h_hat, inst.order, Scheme::robust);
    if (!d.solved()) continue;
    const double gamma = db_to_linear(3.0);
    for (int k = 0; k < 3; ++k) {
      for (int l = k; l < 3; ++l) {
        const auto& h = inst.h_hat[static_cast<std::size_t>(inst.order[static_cast<std::size_t>(l)])].eigen();
        for (int s = 0; s < 2000; ++s) {
          const Eigen::VectorXcd dlt = 0.1 * oracle::unit_direction(rng, 3);
          const Eigen::VectorXcd ht = h + dlt;
          double num = ht.dot(d.W[static_cast<std::size_t>(k)].eigen() * ht).real();
          double den = 0.01;
          for (int q = 0; q < 3; ++q) {
            const Eigen::MatrixXcd& wq = d.W[static_cast<std::size_t>(q)].eigen();
            if (q < k) den += dlt.dot(wq * dlt).real();
            if (q > k) den += ht.dot(wq * ht).real();
          }
          EXPECT_GE(num / den, gamma * (1.0 - 1e-5));
        }
      }
    }
  }
}

TEST(Designs, RankOneSubstitutionAgreesWithSampling) {
  std::mt19937_64 rng(14);
  int cases = 0;
  for (int t = 0; t < 12 && cases < 12; ++t) {
    const auto inst = fixtures::robust_instance(rng, 2, 2, 0.1, 0.0);
    const BeamDesign d = design_noma(inst.scenario, inst.h_hat, inst.order, Scheme::nonrobust);
    ASSERT_TRUE(d.solved());
    std::vector<Eigen::VectorXcd> w;
    for (const auto& v : d.w) w.push_back(v.eigen());
    for (int k = 0; k < 2; ++k) {
      for (int l = k; l < 2; ++l) {
        const ComplexVector& h = inst.h_hat[static_cast<std::size_t>(inst.order[static_cast<std::size_t>(l)])];
        const SinrEntry cert = worst_case_sinr(d.w, h, 0.1, 0.01, k);
        for (double target : {0.5 * cert.worst_case, 0.9 * cert.worst_case, 1.1 * cert.worst_case, 2.0 * cert.worst_case}) {
          if (target <= 0.0) continue;
          // Fresh multiplier search at this target.
          double best = -1e300;
          for (double lam = 0.0; lam < 50.0; lam += 0.01) {
            best = std::max(best, sprocedure_margin(d.w, h, 0.1, 0.01, k, target, lam));
          }
          const bool lmi_holds = best >= 0.0;
          const double sampled = oracle::sampled_worst_sinr(rng, w, h.eigen(), 0.1, 0.01, k, 20000);
          EXPECT_EQ(lmi_holds, sampled >= target) << "target " << target << " sampled " << sampled;
          ++cases;
        }
      }
    }
  }
}

TEST(SolveMinPower, MatchesDirectSolve) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 8; ++t) {
    const auto inst = fixtures::robust_instance(rng, 2 + 2 * (t % 2), 1 + t % 3);
    const SdpSolution direct = solve(inst.problem.lmi);
    const SdpSolution normalized = solve_min_power(inst.problem);
    ASSERT_EQ(direct.status, SolveStatus::optimal);
    ASSERT_EQ(normalized.status, SolveStatus::optimal);
    // Both routes stop at gap <= 1e-6 on the (1 + |p| + |d|) scale.
    EXPECT_LE(std::abs(direct.objective - normalized.objective),
              2e-6 * (1.0 + std::abs(direct.objective) + std::abs(normalized.objective)));
    const Residuals r = residuals(inst.problem.lmi, normalized);
    EXPECT_LE(r.primal_infeas, 1e-7);
    EXPECT_LE(r.gap, 1e-6);
  }
}

TEST(SolveMinPower, ReportsInfeasible) {
  // Error ball contains the zero channel.
  const Scenario s = Scenario::uniform(2, 1, 1.0, 0.0, 0.01);
  const std::vector<ComplexVector> h{ComplexVector{0.5, 0.0}};
  const SdpProblem p = build_robust_sdp(s, h, std::vector<int>{0});
  EXPECT_EQ(solve_min_power(p).status, SolveStatus::infeasible);
  DesignOptions o;
  o.prescreen = false;
  EXPECT_EQ(design_noma(s, h, std::vector<int>{0}, Scheme::robust, o).status, SolveStatus::infeasible);
}

// The closed-form prescreen only rejects draws the SDP also rejects.
TEST(Prescreen, NeverRejectsFeasibleDraws) {
  DesignOptions no_screen;
  no_screen.prescreen = false;
  int rejected = 0;
  for (auto [eps, gamma_db, trials] : {std::tuple{0.06, 10.0, 150}, std::tuple{0.02, 4.0, 100}}) {
    const Scenario s = Scenario::uniform(8, 3, eps, gamma_db, 0.01);
    for (int t = 0; t < trials; ++t) {
      const ChannelSet cs = generate_channels(s, static_cast<std::uint64_t>(t));
      if (robust_may_be_feasible(s, cs.h_hat, cs.order)) continue;
      ++rejected;
      const BeamDesign d = design(s, cs, Scheme::robust, no_screen);
      EXPECT_EQ(d.status, SolveStatus::infeasible) << "eps " << eps << " trial " << t;
    }
  }
  EXPECT_GT(rejected, 50);
}

TEST(Criterion4Corpus, DirectSolvesMeetTolerances) {
  std::mt19937_64 rng(16);
  for (int t = 0; t < 20; ++t) {
    const int m = std::array{2, 4, 8}[static_cast<std::size_t>(t % 3)];
    const int k = 1 + (t / 3) % 3;
    const auto inst = fixtures::robust_instance(rng, m, k);
    const SdpSolution sol = solve(inst.problem.lmi);
    ASSERT_EQ(sol.status, SolveStatus::optimal) << "M " << m << " K " << k;
    const Residuals r = residuals(inst.problem.lmi, sol);
    EXPECT_LE(r.gap, 1e-6);
    EXPECT_LE(r.primal_infeas, 1e-7);
  }
}

TEST(Scheme, Names) {
  EXPECT_EQ(scheme_from_string("robust"), Scheme::robust);
  EXPECT_EQ(scheme_from_string("non-robust"), Scheme::nonrobust);
  EXPECT_EQ(to_string(Scheme::oma), "oma");
  EXPECT_THROW(scheme_from_string("mse"), ContractError);
}
