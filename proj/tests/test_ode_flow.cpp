#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "attnflow/gradients.hpp"
#include "attnflow/losses.hpp"
#include "attnflow/ode_flow.hpp"
#include "test_support.hpp"

using namespace attnflow;

TEST(FlowScalars, AlphaBetaZ) {
  EXPECT_NEAR(focus_alpha(0.0, 20), 1.0 / 20.0, 1e-16);
  EXPECT_NEAR(focus_alpha(std::log(19.0), 20), 0.5, 1e-15);
  EXPECT_NEAR(focus_alpha(-3.0, 4), std::exp(-3.0) / (std::exp(-3.0) + 3.0), 1e-16);
  EXPECT_EQ(focus_alpha(1e6, 20), 1.0);
  EXPECT_GT(focus_alpha_complement(600.0, 20), 0.0);
  EXPECT_NEAR(focus_alpha_complement(2.0, 5) + focus_alpha(2.0, 5), 1.0, 1e-15);
  EXPECT_NEAR(class_beta(0.0, 7), 1.0 / 7.0, 1e-16);
  EXPECT_NEAR(mixture_norm(0.3, 0.6, 4), 0.3 * 0.6 + 0.7 / 4.0, 1e-16);
}

TEST(MuRhs, EqualInitialRate) {
  for (std::size_t C : {2u, 20u, 1000u})
    for (int i = 1; i <= 10; ++i) {
      const double alpha = 0.1 * i;
      for (Paradigm par : kAllParadigms)
        EXPECT_NEAR(mu_rhs({0.0, 0.0, 0.0}, par, alpha, C), alpha / static_cast<double>(C), 1e-15);
    }
}

TEST(MuRhs, ZeroAlpha) {
  for (Paradigm par : kAllParadigms) EXPECT_EQ(mu_rhs({3.0, 0.0, 0.0}, par, 0.0, 5), 0.0);
}

TEST(MuRhs, WorkedValues) {
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(mu_rhs({2.0, 0.0, 0.0}, Paradigm::SA, 0.5, 20), 0.5 / (std::exp(1.0) + 19.0), 1e-16);
  const double beta = e2 / (e2 + 19.0);
  EXPECT_NEAR(mu_rhs({2.0, 0.0, 0.0}, Paradigm::HA, 0.5, 20), 0.5 * beta / e2, 1e-16);
  const double Z = 0.5 * beta + 0.5 / 20.0;
  EXPECT_NEAR(mu_rhs({2.0, 0.0, 0.0}, Paradigm::LV, 0.5, 20), 0.5 * beta * beta / (Z * e2), 1e-16);
}

TEST(MuRhs, NonnegativeAndFiniteProperty) {
  Rng rng(1);
  std::uniform_real_distribution<double> mu(0.0, 800.0), a(0.0, 1.0);
  for (int t = 0; t < 2000; ++t)
    for (Paradigm par : kAllParadigms) {
      const double v = mu_rhs({mu(rng), 0.0, 0.0}, par, a(rng), 1 + 1 + t % 50);
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
}

TEST(NuRhs, VanishesAtZeroMu) {
  for (double nu : {0.0, 1.0, 5.0})
    for (Paradigm par : kAllParadigms) EXPECT_EQ(nu_rhs({0.0, nu, 0.0}, par, 6, 4), 0.0);
}

TEST(NuRhs, VanishesAsFocusSaturates) {
  for (Paradigm par : {Paradigm::SA, Paradigm::HA}) EXPECT_LT(std::abs(nu_rhs({2.0, 60.0, 0.0}, par, 20, 20)), 1e-20);
}

TEST(NuRhs, WorkedValues) {
  const std::size_t m = 20, C = 20;
  const double mu = 1.0, alpha = 1.0 / 20.0, beta = std::exp(1.0) / (std::exp(1.0) + 19.0);
  const double spread = alpha - alpha * alpha;
  EXPECT_NEAR(nu_rhs({mu, 0.0, 0.0}, Paradigm::SA, m, C),
              mu * 19.0 * spread / (20.0 * (std::exp(alpha * mu) + 19.0)), 1e-17);
  EXPECT_NEAR(nu_rhs({mu, 0.0, 0.0}, Paradigm::HA, m, C), std::log(20.0 * beta) / 20.0 * spread, 1e-17);
  const double Z = alpha * beta + (1 - alpha) / 20.0;
  EXPECT_NEAR(nu_rhs({mu, 0.0, 0.0}, Paradigm::LV, m, C), alpha / 20.0 * (beta / Z - 1.0), 1e-16);
}

TEST(NuRhs, SignFollowsMuProperty) {
  Rng rng(2);
  std::uniform_real_distribution<double> mu(-10.0, 10.0), nu(-5.0, 15.0);
  for (int t = 0; t < 2000; ++t) {
    const FlowState s{mu(rng), nu(rng), 0.0};
    for (Paradigm par : {Paradigm::HA, Paradigm::LV}) {
      const double v = nu_rhs(s, par, 7, 5);
      EXPECT_TRUE(std::isfinite(v));
      if (s.mu > 0) {
        EXPECT_GE(v, 0.0);
      }
      if (s.mu < 0) {
        EXPECT_LE(v, 0.0);
      }
    }
  }
}

TEST(NuRhs, StableForLargeMu) {
  for (Paradigm par : kAllParadigms) {
    const double v = nu_rhs({700.0, 3.0, 0.0}, par, 20, 20);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
  }
  const double alpha = focus_alpha(3.0, 20);
  EXPECT_NEAR(nu_rhs({700.0, 3.0, 0.0}, Paradigm::HA, 20, 20), std::log(20.0) / 20.0 * alpha * (1 - alpha), 1e-15);
}

TEST(IntegrateFixedFocus, ZeroAlphaStaysAtZero) {
  const FlowTrace tr = integrate_fixed_focus(Paradigm::LV, 0.0, 5, 10.0, 0.1);
  for (const auto& s : tr.samples) EXPECT_EQ(s.mu, 0.0);
}

TEST(IntegrateFixedFocus, AlphaOneSoftEqualsHard) {
  const FlowTrace sa = integrate_fixed_focus(Paradigm::SA, 1.0, 20, 50.0, 0.05);
  const FlowTrace ha = integrate_fixed_focus(Paradigm::HA, 1.0, 20, 50.0, 0.05);
  ASSERT_EQ(sa.samples.size(), ha.samples.size());
  for (std::size_t i = 0; i < sa.samples.size(); ++i) EXPECT_EQ(sa.samples[i].mu, ha.samples[i].mu);
}

TEST(IntegrateFixedFocus, MonotoneAndStrictlyIncreasingTime) {
  for (Paradigm par : kAllParadigms) {
    const FlowTrace tr = integrate_fixed_focus(par, 0.6, 20, 200.0, 0.1);
    EXPECT_EQ(tr.samples.front().t, 0.0);
    EXPECT_EQ(tr.back().t, 200.0);
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
      EXPECT_GT(tr.samples[i].t, tr.samples[i - 1].t);
      EXPECT_GE(tr.samples[i].mu, tr.samples[i - 1].mu);
      EXPECT_EQ(tr.samples[i].alpha, 0.6);
    }
  }
}

TEST(IntegrateFixedFocus, SoftClosedForm) {
  // mu' = a / (e^{a mu} + C - 1) integrates to e^{a mu}/a + (C-1) mu = a t + 1/a.
  const double a = 0.7, C = 9.0;
  const FlowTrace tr = integrate_fixed_focus(Paradigm::SA, a, 9, 40.0, 0.01);
  for (const auto& s : tr.samples) EXPECT_NEAR(std::exp(a * s.mu) / a + (C - 1) * s.mu, a * s.t + 1 / a, 1e-9);
}

TEST(IntegrateJoint, InitialDerivatives) {
  for (Paradigm par : kAllParadigms) {
    EXPECT_NEAR(mu_rhs({0, 0, 0}, par, focus_alpha(0.0, 8), 5), 1.0 / 40.0, 1e-17);
    EXPECT_EQ(nu_rhs({0, 0, 0}, par, 8, 5), 0.0);
  }
}

TEST(IntegrateJoint, FourthOrderConvergence) {
  for (Paradigm par : kAllParadigms) {
    auto end = [&](double dt) { return integrate_joint(par, 5, 3, 40.0, dt).back(); };
    const FlowSample a = end(0.8), b = end(0.4), c = end(0.2);
    const double ratio_mu = (a.mu - b.mu) / (b.mu - c.mu);
    const double ratio_nu = (a.nu - b.nu) / (b.nu - c.nu);
    EXPECT_NEAR(ratio_mu, 16.0, 2.0) << to_string(par);
    EXPECT_NEAR(ratio_nu, 16.0, 2.0) << to_string(par);
  }
}

TEST(IntegrateJoint, MonotoneFromZero) {
  for (Paradigm par : kAllParadigms) {
    const FlowTrace tr = integrate_joint(par, 20, 20, 600.0, 0.05, 10);
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
      EXPECT_GE(tr.samples[i].mu, tr.samples[i - 1].mu);
      EXPECT_GE(tr.samples[i].nu, tr.samples[i - 1].nu);
      EXPECT_NEAR(tr.samples[i].alpha, focus_alpha(tr.samples[i].nu, 20), 1e-15);
    }
  }
}

TEST(IntegrateJoint, StrideKeepsEndpoints) {
  const FlowTrace tr = integrate_joint(Paradigm::HA, 4, 3, 1.05, 0.1, 4);
  ASSERT_EQ(tr.samples.size(), 4u);  // t = 0, 0.4, 0.8, 1.05
  EXPECT_EQ(tr.samples.front().t, 0.0);
  EXPECT_NEAR(tr.samples[1].t, 0.4, 1e-15);
  EXPECT_EQ(tr.back().t, 1.05);
}

TEST(IntegrateJoint, RejectsBadGrid) {
  EXPECT_THROW(integrate_joint(Paradigm::SA, 4, 3, 0.0, 0.1), InvalidInputError);
  EXPECT_THROW(integrate_joint(Paradigm::SA, 4, 3, 1.0, -0.1), InvalidInputError);
  EXPECT_THROW(integrate_joint(Paradigm::SA, 1, 3, 1.0, 0.1), InvalidInputError);
  EXPECT_THROW(integrate_fixed_focus(Paradigm::SA, 1.5, 3, 1.0, 0.1), InvalidInputError);
}

TEST(ReconstructParams, ZeroAndRowSums) {
  SdcConfig c;
  c.d = 9;
  c.m = 3;
  c.C = 5;
  c.seed = 8;
  const SdcDataset ds = generate_dataset(c, 1);
  const FcamParams z = reconstruct_params(0.0, 0.0, ds.basis);
  EXPECT_EQ(z.u.norm(), 0.0);
  EXPECT_EQ(z.W.norm(), 0.0);
  const FcamParams p = reconstruct_params(2.5, 1.5, ds.basis);
  EXPECT_LT(p.W.colwise().sum().norm(), 1e-14);
  const StructuredProjection pr = project_structured(p, ds.basis);
  EXPECT_NEAR(pr.mu, 2.5, 1e-14);
  EXPECT_NEAR(pr.nu, 1.5, 1e-14);
  EXPECT_LT(pr.residual_W, 1e-14);
  EXPECT_LT(pr.residual_u, 1e-14);
}

TEST(ReconstructParams, FixedFocusLossMatchesFloorExpressions) {
  SdcConfig c;
  c.d = 20;
  c.m = 20;
  c.C = 20;
  c.seed = 2;
  const SdcDataset ds = generate_dataset(c, 50);
  const FlowTrace tr = integrate_fixed_focus(Paradigm::HA, 0.4, 20, 200.0, 0.05);
  const double mu = tr.back().mu, beta = tr.back().beta;
  const FcamParams p = reconstruct_params(mu, 0.0, ds.basis);
  EXPECT_NEAR(dataset_loss(p, ds, Paradigm::HA, FixedFocusSpec{0.4}),
              -(0.4 * std::log(beta) + 0.6 * std::log(1.0 / 20.0)), 1e-12);
  EXPECT_NEAR(dataset_loss(p, ds, Paradigm::LV, FixedFocusSpec{0.4}), -std::log(tr.back().Z), 1e-12);
}

TEST(FlowRhs, MatchesPopulationGradientProjection) {
  SdcConfig c;
  c.d = 20;
  c.m = 20;
  c.C = 20;
  c.seed = 3;
  const SdcDataset ds = generate_dataset(c, 1);
  const auto atoms = enumerate_population(c);
  const FlowState s{1.0, 0.0, 0.0};
  for (Paradigm par : kAllParadigms) {
    const FcamGradient g = population_grad(reconstruct_params(1.0, 0.0, ds.basis), atoms, par);
    const StructuredProjection pr = project_structured(g.grad_u, g.grad_W, ds.basis);
    const double mu_dot = mu_rhs(s, par, focus_alpha(0.0, 20), 20), nu_dot = nu_rhs(s, par, 20, 20);
    EXPECT_NEAR(-pr.mu, mu_dot, 1e-10 * mu_dot);
    EXPECT_NEAR(-pr.nu, nu_dot, 1e-10 * nu_dot);
  }
}

TEST(FlowRhs, FixedFocusRademacherBackgroundMatchesToo) {
  SdcConfig c;
  c.d = 6;
  c.m = 4;
  c.C = 3;
  c.mode = SdcMode::OrthoRademacherBg;
  c.seed = 3;
  const SdcDataset ds = generate_dataset(c, 1);
  const auto atoms = enumerate_population(c);
  for (double mu : {0.5, 2.0})
    for (Paradigm par : kAllParadigms) {
      const FcamGradient g = population_grad(reconstruct_params(mu, 0.0, ds.basis), atoms, par, FixedFocusSpec{0.7});
      const double mu_dot = mu_rhs({mu, 0.0, 0.0}, par, 0.7, 3);
      const double got = -project_structured(g.grad_u, g.grad_W, ds.basis).mu;
      EXPECT_NEAR(got, mu_dot, 1e-10 * mu_dot);
    }
}

TEST(TraceCsv, HeaderAndColumns) {
  const FlowTrace tr = integrate_joint(Paradigm::LV, 4, 3, 0.2, 0.1);
  std::ostringstream os;
  io::HeaderBlock h;
  h.set("m", std::uint64_t{4});
  write_trace_csv(os, tr, h);
  const std::string s = os.str();
  EXPECT_NE(s.find("# m=4\n"), std::string::npos);
  EXPECT_NE(s.find("t,mu,nu,alpha,beta,Z,paradigm,mode\n"), std::string::npos);
  EXPECT_NE(s.find(",lv,joint\n"), std::string::npos);
}
