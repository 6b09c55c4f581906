#include <gtest/gtest.h>

#include "affinebody/chart.hpp"
#include "affinebody/constraints.hpp"
#include "affinebody/residuals.hpp"
#include "test_support.hpp"

namespace affinebody {
namespace {

using testing::random_matrix;
using testing::random_placement;
using testing::random_spd;
using testing::rk4;

const ConstraintKind kAllKinds[] = {ConstraintKind::Free,
                                    ConstraintKind::Rigid,
                                    ConstraintKind::ShapePreserving,
                                    ConstraintKind::Incompressible,
                                    ConstraintKind::SpatialRotationless,
                                    ConstraintKind::MaterialRotationless};

Potential quadratic_I1(double k, double ref) {
  return Potential({{k, {2}}, {-2.0 * k * ref, {1}}, {k * ref * ref, {}}});
}

// State whose velocity is projected onto the admissible subspace.
PhaseState consistent_state(std::mt19937_64& rng, ConstraintKind kind, const Metric& g,
                            const Metric& eta, int n) {
  PhaseState s{random_matrix(rng, n, 1), random_placement(rng, n), random_matrix(rng, n, 1),
               random_matrix(rng, n, n)};
  s.phidot = project_velocity(admissible_subspace(kind, s.phi, g, eta), s);
  return s;
}

// X^{ij} = phi^i_A J^{AB} phiddot^j_B by explicit summation.
Mat balance_lhs(const Mat& phi, const Mat& J, const Mat& phiddot) {
  const int n = static_cast<int>(phi.rows());
  Mat X = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int A = 0; A < n; ++A)
        for (int B = 0; B < n; ++B) X(i, j) += phi(i, A) * J(A, B) * phiddot(j, B);
  return X;
}

Mat flat_vec_to_mat(const Vec& v, int offset, int n) {
  Mat M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = v(offset + i * n + j);
  return M;
}

void put_mat(Vec& v, int offset, const Mat& M) {
  const int n = static_cast<int>(M.rows());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) v(offset + i * n + j) = M(i, j);
}

struct Body {
  Metric g;
  Metric eta;
  Inertia inertia;
  ForceModel force;
};

Body planar_body(std::mt19937_64& rng, double k) {
  Body b{Metric(random_spd(rng, 2, 0.8, 1.3)), Metric(random_spd(rng, 2, 0.8, 1.3)), {}, {}};
  b.inertia.m = 1.0;
  b.inertia.J = random_spd(rng, 2, 0.5, 1.5);
  if (k != 0.0) b.force.potential = quadratic_I1(k, 2.0);
  return b;
}

// Rotation-less d'Alembert trajectory from the matrix-subspace engine.
std::vector<PhaseState> matrix_trajectory(const Body& b, const PhaseState& s0, double h, int steps) {
  const int n = s0.dim();
  auto f = [&](double t, const Vec& y) {
    PhaseState s{Vec::Zero(n), flat_vec_to_mat(y, 0, n), Vec::Zero(n), flat_vec_to_mat(y, n * n, n)};
    const auto acc = dalembert_rhs(s, b.inertia, b.force, ConstraintKind::SpatialRotationless, b.g,
                                   b.eta, t, {false});
    Vec dy(2 * n * n);
    put_mat(dy, 0, s.phidot);
    put_mat(dy, n * n, acc.phiddot);
    return dy;
  };
  Vec y(2 * n * n);
  put_mat(y, 0, s0.phi);
  put_mat(y, n * n, s0.phidot);
  std::vector<PhaseState> out;
  for (int k = 0; k <= steps; ++k) {
    out.push_back({Vec::Zero(n), flat_vec_to_mat(y, 0, n), Vec::Zero(n), flat_vec_to_mat(y, n * n, n)});
    if (k < steps) y = rk4(f, y, k * h, h, 1);
  }
  return out;
}

// Chart trajectory; state (q, qdot, mu).  mu is empty for d'Alembert.
std::vector<Vec> chart_trajectory(const ChartSystem& sys, const Vec& q0, const Vec& v0,
                                  const Vec* mu0, double h, int steps) {
  const int d = sys.dim();
  const int m = mu0 ? static_cast<int>(mu0->size()) : 0;
  auto f = [&](double t, const Vec& y) {
    Vec dy(2 * d + m);
    dy.head(d) = y.segment(d, d);
    if (mu0) {
      const auto r = vakonomic_pfaff_rhs(sys, {y.head(d), y.segment(d, d), y.tail(m)}, t, false);
      dy.segment(d, d) = r.qddot;
      dy.tail(m) = r.lambda;
    } else {
      dy.segment(d, d) = dalembert_pfaff_rhs(sys, y.head(d), y.segment(d, d), t, false).qddot;
    }
    return dy;
  };
  Vec y(2 * d + m);
  y << q0, v0, (mu0 ? *mu0 : Vec());
  std::vector<Vec> out{y};
  for (int k = 0; k < steps; ++k) {
    y = rk4(f, y, k * h, h, 1);
    out.push_back(y);
  }
  return out;
}

TEST(AdmissibleSubspace, PlanarRigidIsTheRotationGenerator) {
  const auto I = Metric::identity(2);
  const auto S = admissible_subspace(ConstraintKind::Rigid, Mat::Identity(2, 2), I, I);
  ASSERT_EQ(S.basis.size(), 1u);
  Mat expected(2, 2);
  expected << 0, -1, 1, 0;
  EXPECT_LT((S.basis[0] - expected).norm(), 1e-15);
}

TEST(AdmissibleSubspace, DimensionsAndReactionPairing) {
  std::mt19937_64 rng(101);
  for (int n : {2, 3}) {
    const Metric g(random_spd(rng, n));
    const Metric eta(random_spd(rng, n));
    const Mat phi = random_placement(rng, n);
    const std::size_t expected[] = {std::size_t(n * n), std::size_t(n * (n - 1) / 2),
                                    std::size_t(n * (n - 1) / 2 + 1), std::size_t(n * n - 1),
                                    std::size_t(n * (n + 1) / 2), std::size_t(n * (n + 1) / 2)};
    for (int k = 0; k < 6; ++k) {
      const auto S = admissible_subspace(kAllKinds[k], phi, g, eta);
      EXPECT_EQ(S.basis.size(), expected[k]) << to_string(kAllKinds[k]);
      EXPECT_EQ(S.basis.size() + S.annihilator_basis.size(), std::size_t(n * n));
      for (const Mat& Om : S.basis)
        for (const Mat& NR : S.annihilator_basis)
          EXPECT_LT(std::abs((NR * g.matrix() * Om).trace()), 1e-12 * NR.norm() * Om.norm());
    }
  }
}

TEST(AdmissibleSubspace, MaterialMatchesSpatialAtIdentity) {
  const auto I = Metric::identity(2);
  const Mat id = Mat::Identity(2, 2);
  const auto a = admissible_subspace(ConstraintKind::MaterialRotationless, id, I, I);
  const auto b = admissible_subspace(ConstraintKind::SpatialRotationless, id, I, I);
  ASSERT_EQ(a.basis.size(), 3u);
  for (const Mat& Om : a.basis)
    for (const Mat& z : b.forms) EXPECT_LT(std::abs((z * Om).trace()), 1e-14);
}

TEST(AdmissibleSubspace, MaterialRotationlessIsCauchySymmetric) {
  std::mt19937_64 rng(5);
  const Metric g(random_spd(rng, 3));
  const Metric eta(random_spd(rng, 3));
  const Mat phi = random_placement(rng, 3);
  const Mat C = phi.inverse().transpose() * eta.matrix() * phi.inverse();
  for (const Mat& Om : admissible_subspace(ConstraintKind::MaterialRotationless, phi, g, eta).basis) {
    const Mat CO = C * Om;
    EXPECT_LT((CO - CO.transpose()).norm(), 1e-11 * CO.norm());
  }
}

TEST(VelocityProjection, IsIdempotentAndAdmissible) {
  std::mt19937_64 rng(7);
  const Metric g(random_spd(rng, 3));
  const Metric eta(random_spd(rng, 3));
  for (auto kind : kAllKinds) {
    PhaseState s = consistent_state(rng, kind, g, eta, 3);
    const auto S = admissible_subspace(kind, s.phi, g, eta);
    EXPECT_LT(velocity_violation(S, s), 1e-12);
    EXPECT_LT((project_velocity(S, s) - s.phidot).norm(), 1e-12);
  }
}

TEST(DAlembert, RejectsInconsistentVelocity) {
  std::mt19937_64 rng(8);
  const auto I = Metric::identity(2);
  PhaseState s{Vec::Zero(2), random_placement(rng, 2), Vec::Zero(2), random_matrix(rng, 2, 2)};
  const auto in = Inertia::make_isotropic(1.0, 1.0, I);
  EXPECT_THROW(
      try { dalembert_rhs(s, in, {}, ConstraintKind::Rigid, I, I, 0.0); } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InconsistentInitialData);
        throw;
      },
      Error);
  EXPECT_NO_THROW(dalembert_rhs(s, in, {}, ConstraintKind::Rigid, I, I, 0.0, {false}));
}

TEST(DAlembert, SingularInertiaGivesSingularSaddle) {
  const auto I = Metric::identity(2);
  PhaseState s{Vec::Zero(2), Mat::Identity(2, 2), Vec::Zero(2), Mat::Zero(2, 2)};
  Inertia in;
  in.J = Mat::Zero(2, 2);
  try {
    dalembert_rhs(s, in, {}, ConstraintKind::Incompressible, I, I, 0.0);
    FAIL() << "expected SingularSaddle";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularSaddle);
  }
}

// Reaction-free balance laws for each kind, evaluated independently of the
// library's helper.
double specialized_residual(ConstraintKind kind, const Mat& X, const Mat& N, const Mat& phi,
                            const Metric& g, const Metric& eta) {
  const int n = static_cast<int>(X.rows());
  switch (kind) {
    case ConstraintKind::Free: return (X - N).norm();
    case ConstraintKind::Rigid: return ((X - X.transpose()) - (N - N.transpose())).norm();
    case ConstraintKind::ShapePreserving:
      return ((X - X.transpose()) - (N - N.transpose())).norm() +
             std::abs((g.matrix() * X).trace() - (g.matrix() * N).trace());
    case ConstraintKind::Incompressible: {
      const Mat a = X - (g.matrix() * X).trace() / n * g.inverse();
      const Mat b = N - (g.matrix() * N).trace() / n * g.inverse();
      return (a - b).norm();
    }
    case ConstraintKind::SpatialRotationless:
      return ((X + X.transpose()) - (N + N.transpose())).norm();
    case ConstraintKind::MaterialRotationless: {
      Mat Cup = Mat::Zero(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int A = 0; A < n; ++A)
            for (int B = 0; B < n; ++B) Cup(i, j) += phi(i, A) * eta.inverse()(A, B) * phi(j, B);
      const Mat a = X * g.matrix() * Cup;
      const Mat b = N * g.matrix() * Cup;
      return ((a + a.transpose()) - (b + b.transpose())).norm();
    }
  }
  return 1.0;
}

TEST(DAlembert, SatisfiesTheSpecializedBalanceLaws) {
  std::mt19937_64 rng(11);
  for (int n : {2, 3}) {
    const Metric g(random_spd(rng, n));
    const Metric eta(random_spd(rng, n));
    Inertia in;
    in.J = random_spd(rng, n);
    ForceModel force;
    force.potential = quadratic_I1(0.7, n);
    force.nu = 0.3;
    force.zeta = 0.1;
    for (auto kind : kAllKinds) {
      const PhaseState s = consistent_state(rng, kind, g, eta, n);
      const auto acc = dalembert_rhs(s, in, force, kind, g, eta, 0.0);
      const Mat N = torque(s, force, g, eta, 0.0);
      const Mat X = balance_lhs(s.phi, in.J, acc.phiddot);
      const double scale = std::max(1.0, N.norm() + X.norm());
      EXPECT_LT(specialized_residual(kind, X, N, s.phi, g, eta), 1e-9 * scale) << to_string(kind);
      EXPECT_LT(reaction_free_residual(kind, s.phi, acc.phiddot, N, in.J, g, eta), 1e-9);
      // Full balance with the reaction included.
      EXPECT_LT((X - N - acc.reaction).norm(), 1e-9 * scale);
      // Reaction does no work on admissible velocities.
      const Mat Om = affine_velocities(s).Omega;
      EXPECT_LT(std::abs((acc.reaction * g.matrix() * Om).trace()),
                1e-10 * std::max(1e-300, acc.reaction.norm() * Om.norm()) + 1e-14);
    }
  }
}

TEST(DAlembert, ConstraintIsPreservedToFirstOrder) {
  std::mt19937_64 rng(12);
  const Metric g(random_spd(rng, 3));
  const Metric eta(random_spd(rng, 3));
  Inertia in;
  in.J = random_spd(rng, 3);
  ForceModel force;
  force.potential = quadratic_I1(1.0, 3.0);
  for (auto kind : kAllKinds) {
    const PhaseState s = consistent_state(rng, kind, g, eta, 3);
    const auto acc = dalembert_rhs(s, in, force, kind, g, eta, 0.0);
    // Constraint forms are constant on Omega for the spatial kinds; for the
    // material kind differentiate the configuration-dependent violation.
    const double dt = 1e-6;
    PhaseState plus = s;
    plus.phi += dt * s.phidot + 0.5 * dt * dt * acc.phiddot;
    plus.phidot += dt * acc.phiddot;
    const auto Sp = admissible_subspace(kind, plus.phi, g, eta);
    EXPECT_LT(velocity_violation(Sp, plus), 1e-9) << to_string(kind);
  }
}

TEST(DAlembert, RigidSphericalFreeBodyKeepsCoMovingVelocity) {
  std::mt19937_64 rng(13);
  const Metric g(random_spd(rng, 3));
  const Metric eta(random_spd(rng, 3));
  const auto in = Inertia::make_isotropic(1.0, 0.8, eta);
  PhaseState s = consistent_state(rng, ConstraintKind::Rigid, g, eta, 3);
  const Mat U = project_isometry(Placement(s.phi), g, eta);
  s.phidot = s.phidot * s.phi.inverse() * U;
  s.phi = U;
  const auto acc = dalembert_rhs(s, in, {}, ConstraintKind::Rigid, g, eta, 0.0);
  const Mat OmegaHat = s.phi.inverse() * s.phidot;
  const Mat dOmegaHat = s.phi.inverse() * acc.phiddot - OmegaHat * OmegaHat;
  EXPECT_LT(dOmegaHat.norm(), 1e-11);
}

TEST(DAlembert, IncompressibleKeepsVolumeToSecondOrder) {
  std::mt19937_64 rng(14);
  const Metric g(random_spd(rng, 3));
  const Metric eta(random_spd(rng, 3));
  Inertia in;
  in.J = random_spd(rng, 3);
  ForceModel force;
  force.potential = quadratic_I1(2.0, 3.0);
  const PhaseState s = consistent_state(rng, ConstraintKind::Incompressible, g, eta, 3);
  const auto acc = dalembert_rhs(s, in, force, ConstraintKind::Incompressible, g, eta, 0.0);
  const Mat Om = s.phidot * s.phi.inverse();
  const Mat dOm = acc.phiddot * s.phi.inverse() - Om * Om;
  EXPECT_LT(std::abs(Om.trace()), 1e-12);
  // d^2 det / dt^2 = det (tr dOmega + (tr Omega)^2)
  EXPECT_LT(std::abs(dOm.trace()), 1e-11);
}

TEST(Chart, PfaffDerivativeMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (int n : {2, 3}) {
    const Metric g(random_spd(rng, n));
    const Metric eta(random_spd(rng, n));
    RotationlessChart chart(n, Inertia::make_isotropic(1.0, 1.0, eta), {}, g, eta);
    PhaseState s{Vec::Zero(n), random_placement(rng, n), Vec::Zero(n), random_matrix(rng, n, n)};
    const auto c = chart.from_phase(s);
    const auto analytic = chart.pfaff_derivative(c.q);
    const auto numeric = chart.ChartSystem::pfaff_derivative(c.q);
    for (std::size_t j = 0; j < analytic.size(); ++j)
      EXPECT_LT((analytic[j] - numeric[j]).norm(), 1e-7) << "n=" << n << " j=" << j;
  }
}

TEST(Chart, RoundTripsPhaseStates) {
  std::mt19937_64 rng(22);
  for (int n : {2, 3}) {
    const Metric g(random_spd(rng, n));
    const Metric eta(random_spd(rng, n));
    RotationlessChart chart(n, Inertia::make_isotropic(1.0, 1.0, eta), {}, g, eta);
    PhaseState s{Vec::Zero(n), random_placement(rng, n), Vec::Zero(n), random_matrix(rng, n, n)};
    const auto c = chart.from_phase(s);
    const PhaseState back = chart.to_phase(c.q, c.qdot);
    EXPECT_LT((back.phi - s.phi).norm(), 1e-12);
    EXPECT_LT((back.phidot - s.phidot).norm(), 1e-11);
  }
}

TEST(Chart, PfaffFormVanishesExactlyOnRotationlessVelocities) {
  std::mt19937_64 rng(23);
  for (int n : {2, 3}) {
    const Metric g(random_spd(rng, n));
    const Metric eta(random_spd(rng, n));
    RotationlessChart chart(n, Inertia::make_isotropic(1.0, 1.0, eta), {}, g, eta);
    const PhaseState ok = consistent_state(rng, ConstraintKind::SpatialRotationless, g, eta, n);
    const auto c = chart.from_phase(ok);
    EXPECT_LT((chart.pfaff(c.q) * c.qdot).norm(), 1e-11);
    PhaseState bad = ok;
    bad.phidot += g.inverse() * skew(random_matrix(rng, n, n)) * ok.phi;
    const auto cb = chart.from_phase(bad);
    EXPECT_GT((chart.pfaff(cb.q) * cb.qdot).norm(), 1e-3);
  }
}

TEST(Chart, EmbeddedDynamicsMatchesTheMatrixEngine) {
  std::mt19937_64 rng(24);
  for (int n : {2, 3}) {
    const Metric g(random_spd(rng, n, 0.8, 1.3));
    const Metric eta(random_spd(rng, n, 0.8, 1.3));
    Inertia in;
    in.J = random_spd(rng, n);
    for (double k : {0.0, 1.5}) {
      ForceModel force;
      if (k != 0.0) force.potential = quadratic_I1(k, n);
      RotationlessChart chart(n, in, force, g, eta);
      const PhaseState s = consistent_state(rng, ConstraintKind::SpatialRotationless, g, eta, n);
      const auto c = chart.from_phase(s);
      const auto r = dalembert_pfaff_rhs(chart, c.q, c.qdot);
      Mat phiddot = chart.curvature(c.q, c.qdot);
      const auto E = chart.tangents(c.q);
      for (std::size_t i = 0; i < E.size(); ++i) phiddot += r.qddot(static_cast<int>(i)) * E[i];
      const auto acc = dalembert_rhs(s, in, force, ConstraintKind::SpatialRotationless, g, eta, 0.0);
      EXPECT_LT((phiddot - acc.phiddot).norm(), 1e-8 * std::max(1.0, acc.phiddot.norm()))
          << "n=" << n << " k=" << k;
    }
  }
}

TEST(Chart, FreeParticleWithFrozenSecondCoordinate) {
  LagrangianChart particle(
      2, [](const Vec&, const Vec& v, double) { return 0.5 * v.squaredNorm(); },
      [](const Vec&) { return Mat((Mat(1, 2) << 0.0, 1.0).finished()); });
  Vec y(4);
  y << 0.0, 1.0, 2.0, 0.0;
  const Vec end = rk4(
      [&](double t, const Vec& s) {
        Vec d(4);
        d << s.tail(2), dalembert_pfaff_rhs(particle, s.head(2), s.tail(2), t).qddot;
        return d;
      },
      y, 0.0, 0.1, 10);
  EXPECT_NEAR(end(0), 2.0, 1e-6);
  EXPECT_NEAR(end(1), 1.0, 1e-12);
  EXPECT_NEAR(end(2), 2.0, 1e-6);
}

TEST(Chart, InconsistentChartVelocityIsRejected) {
  LagrangianChart particle(
      2, [](const Vec&, const Vec& v, double) { return 0.5 * v.squaredNorm(); },
      [](const Vec&) { return Mat((Mat(1, 2) << 0.0, 1.0).finished()); });
  try {
    dalembert_pfaff_rhs(particle, Vec::Zero(2), Vec::Ones(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InconsistentInitialData);
  }
}

TEST(Vakonomic, MatchesDAlembertOnTheAugmentedLagrangian) {
  // With mu frozen, the vakonomic equations are the d'Alembert equations of
  // L - mu . omega(q) qdot, with mudot in place of the reaction multipliers.
  std::mt19937_64 rng(31);
  const auto I = Metric::identity(2);
  Inertia in;
  in.J = random_spd(rng, 2);
  ForceModel force;
  force.potential = quadratic_I1(1.0, 2.0);
  RotationlessChart chart(2, in, force, I, I);
  const PhaseState s = consistent_state(rng, ConstraintKind::SpatialRotationless, I, I, 2);
  const auto c = chart.from_phase(s);
  const Vec mu = Vec::Constant(1, 0.37);
  LagrangianChart augmented(
      4,
      [&](const Vec& q, const Vec& v, double t) {
        return chart.lagrangian(q, v, t) - mu.dot(chart.pfaff(q) * v);
      },
      [&](const Vec& q) { return chart.pfaff(q); });
  const auto vak = vakonomic_pfaff_rhs(chart, {c.q, c.qdot, mu});
  const auto ref = dalembert_pfaff_rhs(augmented, c.q, c.qdot);
  EXPECT_LT((vak.qddot - ref.qddot).norm(), 1e-4 * std::max(1.0, ref.qddot.norm()));
  EXPECT_LT((vak.lambda - ref.lambda).norm(), 1e-4 * std::max(1.0, ref.lambda.norm()));
}

TEST(Vakonomic, RestStaysAtRest) {
  const auto I = Metric::identity(2);
  RotationlessChart chart(2, Inertia::make_isotropic(1.0, 1.0, I), {}, I, I);
  Vec q(4);
  q << 0.3, 1.2, 0.1, 0.9;
  const auto r = vakonomic_pfaff_rhs(chart, {q, Vec::Zero(4), Vec::Constant(1, 0.5)});
  EXPECT_LT(r.qddot.norm(), 1e-14);
  EXPECT_LT(r.lambda.norm(), 1e-14);
}

TEST(Vakonomic, ExactFormReducesToDAlembert) {
  std::mt19937_64 rng(32);
  Body b = planar_body(rng, 1.0);
  RotationlessChart chart(2, b.inertia, b.force, b.g, b.eta,
                          RotationlessChart::Variant::FrozenRotation);
  PhaseState s{Vec::Zero(2), random_placement(rng, 2), Vec::Zero(2), Mat::Zero(2, 2)};
  auto c = chart.from_phase(s);
  c.qdot.tail(3) = random_matrix(rng, 3, 1);
  c.qdot(0) = 0.0;
  const Vec mu0 = Vec::Zero(1);
  const auto vak = chart_trajectory(chart, c.q, c.qdot, &mu0, 0.01, 100);
  const auto dal = chart_trajectory(chart, c.q, c.qdot, nullptr, 0.01, 100);
  EXPECT_LT((vak.back().head(8) - dal.back().head(8)).norm(), 1e-12);
  EXPECT_NEAR(vak.back()(0), c.q(0), 1e-12);
}

TEST(Vakonomic, ConsistentMultiplierIsTheAngularMomentum) {
  std::mt19937_64 rng(33);
  Body b = planar_body(rng, 0.0);
  RotationlessChart chart(2, b.inertia, b.force, b.g, b.eta);
  const PhaseState s = consistent_state(rng, ConstraintKind::SpatialRotationless, b.g, b.eta, 2);
  const auto c = chart.from_phase(s);
  const Vec p = chart.momentum(c.q, c.qdot, 0.0);
  EXPECT_NEAR(chart.consistent_multipliers(c.q, c.qdot)(0), p(0), 1e-12);
}

TEST(Residuals, NeedFiveSamples) {
  const auto I = Metric::identity(2);
  std::vector<Mat> A(4, Mat::Identity(2, 2));
  try {
    vakonomic_rotationless_residual(A, 0.1, {}, I, Mat::Identity(2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WindowTooShort);
  }
  EXPECT_THROW(dalembert_rotationless_residual(A, A, 0.1, Mat::Identity(2, 2), {}, I, I), Error);
}

TEST(Residuals, VanishAtStaticEquilibrium) {
  std::mt19937_64 rng(41);
  const Metric g(random_spd(rng, 2));
  const Metric eta(random_spd(rng, 2));
  // I1 = tr(A^2) = 2 at A = 1, the minimum of (I1 - 2)^2.
  ForceModel force;
  force.potential = quadratic_I1(1.0, 2.0);
  const Mat J = random_spd(rng, 2);
  const Mat U = g.inverse_sqrt() * testing::rotation2(0.4) * eta.sqrt();
  std::vector<Mat> A(5, Mat::Identity(2, 2)), Us(5, U);
  EXPECT_LT(vakonomic_rotationless_residual(A, 0.1, force.potential, eta, J), 1e-12);
  EXPECT_LT(dalembert_rotationless_residual(A, Us, 0.1, J, force, g, eta), 1e-12);
}

struct PolarWindow {
  std::vector<Mat> A;
  std::vector<Mat> U;
};

PolarWindow polar_window(const std::vector<PhaseState>& states, const Metric& g, const Metric& eta) {
  PolarWindow w;
  for (const auto& s : states) {
    const auto pf = polar_decompose(Placement(s.phi), g, eta);
    w.A.push_back(pf.A);
    w.U.push_back(pf.U);
  }
  return w;
}

std::vector<PhaseState> centered(const std::vector<PhaseState>& traj, int center) {
  return {traj.begin() + center - 2, traj.begin() + center + 3};
}

struct ResidualSetup {
  Body body;
  PhaseState s0;
};

ResidualSetup residual_setup() {
  std::mt19937_64 rng(42);
  ResidualSetup r{planar_body(rng, 1.0), {}};
  PhaseState& s = r.s0;
  s = {Vec::Zero(2), random_placement(rng, 2, 0.8, 1.25), Vec::Zero(2), random_matrix(rng, 2, 2, 0.5)};
  s.phidot = project_velocity(
      admissible_subspace(ConstraintKind::SpatialRotationless, s.phi, r.body.g, r.body.eta), s);
  return r;
}

std::vector<PhaseState> vakonomic_states(const ResidualSetup& r, double h, int steps, bool consistent_mu) {
  RotationlessChart chart(2, r.body.inertia, r.body.force, r.body.g, r.body.eta);
  const auto c = chart.from_phase(r.s0);
  const Vec mu = consistent_mu ? chart.consistent_multipliers(c.q, c.qdot) : Vec::Zero(1);
  std::vector<PhaseState> out;
  for (const Vec& y : chart_trajectory(chart, c.q, c.qdot, &mu, h, steps))
    out.push_back(chart.to_phase(y.head(4), y.segment(4, 4)));
  return out;
}

TEST(Residuals, VakonomicResidualConvergesAtSecondOrder) {
  const auto r = residual_setup();
  std::vector<double> res;
  for (double h : {0.02, 0.01}) {
    const int steps = static_cast<int>(std::lround(0.5 / h)) + 2;
    const auto w = polar_window(centered(vakonomic_states(r, h, steps, true), steps - 2), r.body.g, r.body.eta);
    res.push_back(vakonomic_rotationless_residual(w.A, h, r.body.force.potential, r.body.eta,
                                                  r.body.inertia.J));
  }
  EXPECT_GT(res[0] / res[1], 3.5);
  EXPECT_LT(res[0] / res[1], 4.5);
}

TEST(Residuals, DAlembertResidualConvergesAtSecondOrder) {
  const auto r = residual_setup();
  std::vector<double> res;
  for (double h : {0.02, 0.01}) {
    const int steps = static_cast<int>(std::lround(0.5 / h)) + 2;
    const auto w = polar_window(centered(matrix_trajectory(r.body, r.s0, h, steps), steps - 2), r.body.g, r.body.eta);
    res.push_back(dalembert_rotationless_residual(w.A, w.U, h, r.body.inertia.J, r.body.force,
                                                  r.body.g, r.body.eta));
  }
  EXPECT_GT(res[0] / res[1], 3.5);
  EXPECT_LT(res[0] / res[1], 4.5);
}

TEST(Residuals, EachResidualRejectsTheOtherProcedure) {
  // At fine steps the own-procedure residuals vanish like h^2 while the
  // cross residuals level off at the model difference.
  const auto r = residual_setup();
  std::vector<double> own_vak, own_dal, vak_on_dal, dal_on_vak;
  for (double h : {0.005, 0.0025}) {
    const int steps = static_cast<int>(std::lround(0.5 / h)) + 2;
    const auto wd = polar_window(centered(matrix_trajectory(r.body, r.s0, h, steps), steps - 2), r.body.g, r.body.eta);
    const auto wv = polar_window(centered(vakonomic_states(r, h, steps, true), steps - 2), r.body.g, r.body.eta);
    const auto& V = r.body.force.potential;
    const Mat& J = r.body.inertia.J;
    own_vak.push_back(vakonomic_rotationless_residual(wv.A, h, V, r.body.eta, J));
    vak_on_dal.push_back(vakonomic_rotationless_residual(wd.A, h, V, r.body.eta, J));
    own_dal.push_back(dalembert_rotationless_residual(wd.A, wd.U, h, J, r.body.force, r.body.g, r.body.eta));
    dal_on_vak.push_back(dalembert_rotationless_residual(wv.A, wv.U, h, J, r.body.force, r.body.g, r.body.eta));
  }
  EXPECT_GT(vak_on_dal[1], 10 * own_vak[1]);
  EXPECT_GT(dal_on_vak[1], 10 * own_dal[1]);
  EXPECT_GT(vak_on_dal[1], 0.7 * vak_on_dal[0]);
  EXPECT_GT(dal_on_vak[1], 0.7 * dal_on_vak[0]);
}

TEST(CrossEngine, MatrixAndChartTrajectoriesAgree) {
  const auto r = residual_setup();
  const double h = 1e-3;
  const auto mat = matrix_trajectory(r.body, r.s0, h, 1000);
  RotationlessChart chart(2, r.body.inertia, r.body.force, r.body.g, r.body.eta);
  const auto c = chart.from_phase(r.s0);
  const auto ch = chart_trajectory(chart, c.q, c.qdot, nullptr, h, 1000);
  const PhaseState end = chart.to_phase(ch.back().head(4), ch.back().segment(4, 4));
  EXPECT_LT((end.phi - mat.back().phi).norm(), 1e-8);
  EXPECT_LT((end.phidot - mat.back().phidot).norm(), 1e-8);
}

TEST(CrossEngine, VakonomicWithZeroMultiplierSeparatesFromDAlembert) {
  const auto r = residual_setup();
  const double h = 1e-2;
  const auto dal = polar_window(matrix_trajectory(r.body, r.s0, h, 100), r.body.g, r.body.eta);
  const auto vak = polar_window(vakonomic_states(r, h, 100, false), r.body.g, r.body.eta);
  const double sep = (dal.A.back() - vak.A.back()).norm();
  RecordProperty("separation", std::to_string(sep));
  EXPECT_GT(sep, 1e-3);
}

}  // namespace
}  // namespace affinebody
