#include "affinebody/integrate.hpp"

#include <Eigen/LU>
#include <cmath>

#include "affinebody/chart.hpp"

namespace affinebody {

const char* to_string(Method method) { return method == Method::RK4 ? "rk4" : "euler"; }

Method method_from_string(const std::string& name) {
  if (name == "rk4") return Method::RK4;
  if (name == "euler") return Method::Euler;
  throw Error(ErrorCode::InvalidArgument, "unknown integration method '" + name + "'");
}

void IntegratorSpec::validate() const {
  if (!(h > 0) || !std::isfinite(h)) throw Error(ErrorCode::InvalidArgument, "step h must be positive");
  if (!(t_end >= h) || !std::isfinite(t_end))
    throw Error(ErrorCode::InvalidArgument, "t_end must be at least one step");
  if (monitor_every < 0) throw Error(ErrorCode::InvalidArgument, "monitor_every must be >= 0");
  if (!(projection_bound > 0)) throw Error(ErrorCode::InvalidArgument, "projection bound must be positive");
}

int IntegratorSpec::step_count() const {
  return static_cast<int>(std::ceil(t_end / h - 1e-9));
}

int IntegratorSpec::cadence(int n) const {
  if (monitor_every > 0) return monitor_every;
  return n == 2 ? 1 : 10;
}

namespace {

using Rhs = std::function<Vec(double, const Vec&)>;

Vec advance(Method method, const Rhs& f, double t, const Vec& y, double h) {
  if (method == Method::Euler) return y + h * f(t, y);
  const Vec k1 = f(t, y);
  const Vec k2 = f(t + h / 2, y + h / 2 * k1);
  const Vec k3 = f(t + h / 2, y + h / 2 * k2);
  const Vec k4 = f(t + h, y + h * k3);
  return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

// Time of node k when the last step may be shorter.
double node_time(const IntegratorSpec& spec, double t0, int k) {
  const int N = spec.step_count();
  return k == N ? t0 + spec.t_end : t0 + k * spec.h;
}

void put(Vec& y, int offset, const Mat& M) {
  const int r = static_cast<int>(M.rows()), c = static_cast<int>(M.cols());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) y(offset + i * c + j) = M(i, j);
}

Mat get(const Vec& y, int offset, int r, int c) {
  Mat M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = y(offset + i * c + j);
  return M;
}

// Direct layout: x, phi, xdot, phidot.
Vec pack(const PhaseState& s) {
  const int n = s.dim();
  Vec y(2 * n + 2 * n * n);
  y.segment(0, n) = s.x;
  put(y, n, s.phi);
  y.segment(n + n * n, n) = s.xdot;
  put(y, 2 * n + n * n, s.phidot);
  return y;
}

PhaseState unpack(const Vec& y, int n) {
  return {y.segment(0, n), get(y, n, n, n), y.segment(n + n * n, n), get(y, 2 * n + n * n, n, n)};
}

bool finite(const Monitors& m) {
  return std::isfinite(m.energy) && std::isfinite(m.det_phi) && m.S.allFinite() &&
         std::isfinite(m.constraint_residual) && m.mu.allFinite();
}

// Fixed rotation used to probe frame independence of reduced forces.
Mat probe_rotation(int n) {
  Mat Q = Mat::Identity(n, n);
  for (int k = 0; k + 1 < n; ++k) {
    Mat G = Mat::Identity(n, n);
    const double a = 0.7 + 0.3 * k;
    G(k, k) = std::cos(a);
    G(k, k + 1) = -std::sin(a);
    G(k + 1, k) = std::sin(a);
    G(k + 1, k + 1) = std::cos(a);
    Q = Q * G;
  }
  return Q;
}

void require_frame_independent(const Mat& a, const Mat& b, const char* what) {
  if ((a - b).norm() > 1e-9 * std::max(1.0, a.norm()))
    throw Error(ErrorCode::IsotropyViolation,
                std::string(what) + " torque depends on the frame; the reduced scheme does not apply");
}

// Cubic Hermite value at the midpoint of [x0, x1].
Mat hermite_mid(const Mat& x0, const Mat& d0, const Mat& x1, const Mat& d1, double h) {
  return 0.5 * (x0 + x1) + h / 8 * (d0 - d1);
}

// Integrates F' = F W(t) over the nodes with W and W' known at each node.
std::vector<Mat> integrate_frame(Method method, const Mat& F0, const std::vector<Mat>& W,
                                 const std::vector<Mat>& Wdot, const std::vector<double>& t) {
  std::vector<Mat> F{F0};
  for (std::size_t k = 0; k + 1 < W.size(); ++k) {
    const double h = t[k + 1] - t[k];
    const Mat& Fk = F.back();
    if (method == Method::Euler) {
      F.push_back(Fk + h * Fk * W[k]);
      continue;
    }
    const Mat Wm = hermite_mid(W[k], Wdot[k], W[k + 1], Wdot[k + 1], h);
    const Mat k1 = Fk * W[k];
    const Mat k2 = (Fk + h / 2 * k1) * Wm;
    const Mat k3 = (Fk + h / 2 * k2) * Wm;
    const Mat k4 = (Fk + h * k3) * W[k + 1];
    F.push_back(Fk + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4));
  }
  return F;
}

}  // namespace

Monitors compute_monitors(const PhaseState& state, const Vec& mu, const SimulationSetup& setup,
                          const PhaseState& reference, double) {
  Monitors m;
  m.T = kinetic_energy(state, setup.inertia, setup.g, setup.eta);
  m.V = potential_energy(state.phi, setup.force.potential, setup.g, setup.eta);
  m.energy = m.T + m.V;
  const Momenta mo = legendre(state, setup.inertia.m, setup.inertia.J, setup.g);
  m.S = mo.S;
  m.vorticity = adjoint(mo.SigmaHat, setup.eta) - mo.SigmaHat;
  m.det_phi = state.phi.determinant();
  m.I = deformation_invariants(deformation_tensors(Placement(state.phi), setup.g, setup.eta)).I;
  if (setup.frozen_rotation) {
    const Mat U = polar_decompose(Placement(state.phi), setup.g, setup.eta).U;
    const Mat U0 = polar_decompose(Placement(reference.phi), setup.g, setup.eta).U;
    m.constraint_residual = (U - U0).norm();
  } else {
    m.constraint_residual = constraint_residual(setup.kind, state, reference, setup.g, setup.eta);
  }
  m.mu = mu;
  return m;
}

PhaseState manifold_projection(const PhaseState& state, ConstraintKind kind,
                               const PhaseState& reference, const Metric& g, const Metric& eta,
                               double bound) {
  if (kind == ConstraintKind::Free) return state;
  const int n = state.dim();
  PhaseState out = state;
  const Mat Omega = state.phidot * state.phi.inverse();
  const Mat OmegaHat = state.phi.inverse() * state.phidot;
  if (kind == ConstraintKind::Rigid || kind == ConstraintKind::ShapePreserving) {
    const Mat A0 = polar_decompose(Placement(reference.phi), g, eta).A;
    const Mat psi = state.phi * A0.inverse();
    const PolarFactors pf = polar_decompose(Placement(psi), g, eta);
    const double c = kind == ConstraintKind::Rigid ? 1.0 : pf.A.trace() / n;
    out.phi = c * pf.U * A0;
  } else if (kind == ConstraintKind::Incompressible) {
    const double ratio = reference.phi.determinant() / state.phi.determinant();
    if (!(ratio > 0))
      throw Error(ErrorCode::ProjectionFailed, "determinant changed sign");
    out.phi = state.phi * std::pow(ratio, 1.0 / n);
  }
  const double dphi = (out.phi - state.phi).norm();
  if (dphi > bound * state.phi.norm())
    throw Error(ErrorCode::ProjectionFailed,
                "configuration is " + std::to_string(dphi) + " away from the constraint set");

  const VelocitySubspace S = admissible_subspace(kind, out.phi, g, eta);
  out.phidot = S.material ? Mat(out.phi * OmegaHat) : Mat(Omega * out.phi);
  out.phidot = project_velocity(S, out);
  const double dv = (out.phidot - state.phidot).norm();
  if (dv > bound * state.phidot.norm() + 1e-14)
    throw Error(ErrorCode::ProjectionFailed,
                "velocity is " + std::to_string(dv) + " away from the admissible subspace");
  return out;
}

namespace {

Trajectory run(const std::function<void(double, Vec&)>& project,
               const std::function<std::pair<PhaseState, Vec>(const Vec&)>& view, const Rhs& f,
               Vec y, const SimulationSetup& setup, const IntegratorSpec& spec,
               const PhaseState& reference, double t0) {
  Trajectory traj;
  const int N = spec.step_count();
  const int every = spec.cadence(reference.dim());
  auto record = [&](double t) {
    const auto [state, mu] = view(y);
    TrajectorySample s{t, state, compute_monitors(state, mu, setup, reference, t)};
    if (!finite(s.monitors) || !state.phi.allFinite() || !state.phidot.allFinite())
      throw Error(ErrorCode::StepRejected, "non-finite state at t = " + std::to_string(t));
    traj.samples.push_back(std::move(s));
  };
  record(t0);
  try {
    for (int k = 1; k <= N; ++k) {
      const double ta = node_time(spec, t0, k - 1);
      const double tb = node_time(spec, t0, k);
      y = advance(spec.method, f, ta, y, tb - ta);
      if (!y.allFinite())
        throw Error(ErrorCode::StepRejected, "non-finite state at t = " + std::to_string(tb));
      if (spec.projection) project(tb, y);
      if (k % every == 0 || k == N) record(tb);
    }
  } catch (const Error& e) {
    traj.completed = false;
    traj.status = e.code();
    traj.message = e.what();
  }
  return traj;
}

}  // namespace

Trajectory simulate(const PhaseState& initial, const Vec& mu0, const SimulationSetup& setup,
                    const IntegratorSpec& spec) {
  spec.validate();
  const int n = initial.dim();
  if (setup.g.dim() != n || setup.eta.dim() != n)
    throw Error(ErrorCode::InvalidArgument, "metric dimension does not match the state");
  setup.inertia.validate(setup.eta);
  require_invertible(initial.phi);
  if (!is_supported(setup.kind, setup.procedure))
    throw Error(ErrorCode::InvalidArgument,
                std::string("unsupported combination ") + to_string(setup.kind) + " / " +
                    to_string(setup.procedure));
  if ((setup.frozen_rotation || setup.chart_engine) &&
      setup.kind != ConstraintKind::SpatialRotationless)
    throw Error(ErrorCode::InvalidArgument, "chart runs need the spatial_rotationless kind");
  const double t0 = 0.0;

  const bool chart_route =
      setup.frozen_rotation || setup.chart_engine ||
      (setup.procedure == Procedure::Vakonomic && setup.kind == ConstraintKind::SpatialRotationless);
  if (!chart_route) {
    if (setup.kind != ConstraintKind::Free)
      dalembert_rhs(initial, setup.inertia, setup.force, setup.kind, setup.g, setup.eta, t0);
    const Rhs f = [&](double t, const Vec& y) {
      const PhaseState s = unpack(y, n);
      Accelerations acc;
      if (setup.kind == ConstraintKind::Free) {
        acc = free_rhs(s, setup.inertia, setup.force, setup.g, setup.eta, t);
      } else {
        const auto c = dalembert_rhs(s, setup.inertia, setup.force, setup.kind, setup.g, setup.eta,
                                     t, {false});
        acc = {c.xddot, c.phiddot};
      }
      PhaseState d{s.xdot, s.phidot, acc.xddot, acc.phiddot};
      return pack(d);
    };
    auto project = [&](double, Vec& y) {
      y = pack(manifold_projection(unpack(y, n), setup.kind, initial, setup.g, setup.eta,
                                   spec.projection_bound));
    };
    auto view = [&](const Vec& y) { return std::make_pair(unpack(y, n), Vec()); };
    return run(project, view, f, pack(initial), setup, spec, initial, t0);
  }

  // Motion on the rotation-less chart; layout x, xdot, q, qdot, mu (mu only
  // for the vakonomic procedure).
  const RotationlessChart chart(n, setup.inertia, setup.force, setup.g, setup.eta,
                                setup.frozen_rotation ? RotationlessChart::Variant::FrozenRotation
                                                      : RotationlessChart::Variant::Rotationless);
  const bool vakonomic = setup.procedure == Procedure::Vakonomic;
  const int d = chart.dim();
  const int m = vakonomic ? chart.constraint_count() : 0;
  const auto c0 = chart.from_phase(initial);
  const Vec mu = mu0.size() ? mu0 : Vec::Zero(m);
  if (mu.size() != m)
    throw Error(ErrorCode::InvalidArgument,
                "expected " + std::to_string(m) + " multipliers, got " + std::to_string(mu.size()));
  if (vakonomic)
    vakonomic_pfaff_rhs(chart, {c0.q, c0.qdot, mu}, t0);
  else
    dalembert_pfaff_rhs(chart, c0.q, c0.qdot, t0);
  auto view = [&](const Vec& y) {
    PhaseState s = chart.to_phase(y.segment(2 * n, d), y.segment(2 * n + d, d));
    s.x = y.segment(0, n);
    s.xdot = y.segment(n, n);
    return std::make_pair(s, Vec(y.tail(m)));
  };
  const Rhs f = [&](double t, const Vec& y) {
    const Vec q = y.segment(2 * n, d), qd = y.segment(2 * n + d, d);
    const auto r = vakonomic ? vakonomic_pfaff_rhs(chart, {q, qd, y.tail(m)}, t, false)
                             : dalembert_pfaff_rhs(chart, q, qd, t, false);
    Vec dy(y.size());
    dy.segment(0, n) = y.segment(n, n);
    dy.segment(n, n) =
        setup.g.inverse() * translational_force(view(y).first, setup.force, t) / setup.inertia.m;
    dy.segment(2 * n, d) = qd;
    dy.segment(2 * n + d, d) = r.qddot;
    if (vakonomic) dy.tail(m) = r.lambda;
    return dy;
  };
  auto project = [&](double, Vec& y) {
    const Vec q = y.segment(2 * n, d);
    const Vec qd = y.segment(2 * n + d, d);
    const Mat w = chart.pfaff(q);
    const Vec fixed = qd - w.transpose() * (w * w.transpose()).ldlt().solve(w * qd);
    if ((fixed - qd).norm() > spec.projection_bound * qd.norm() + 1e-14)
      throw Error(ErrorCode::ProjectionFailed, "chart velocity left the constraint distribution");
    y.segment(2 * n + d, d) = fixed;
  };
  Vec y(2 * n + 2 * d + m);
  y << initial.x, initial.xdot, c0.q, c0.qdot, mu;
  return run(project, view, f, y, setup, spec, initial, t0);
}

std::vector<PolarSample> polar_reduced_simulate(const PhaseState& initial, const Inertia& inertia,
                                                const ForceModel& force, const Metric& g,
                                                const Metric& eta, const IntegratorSpec& spec) {
  spec.validate();
  inertia.validate(eta);
  const int n = initial.dim();
  const int nn = n * n;
  const PolarRates pr0 = polar_rates(initial.phi, initial.phidot, g, eta);
  const Mat U_ref = pr0.factors.U;
  const Mat U_alt = U_ref * eta.inverse_sqrt() * probe_rotation(n) * eta.sqrt();
  const Mat& e = eta.matrix();
  const Mat& J = inertia.J;

  auto polar_torque = [&](const Mat& U, const Mat& A, const Mat& Ad, const Mat& w, double t) {
    PhaseState s{Vec::Zero(n), U * A, Vec::Zero(n), U * (w * A + Ad)};
    const Mat N = torque(s, force, g, eta, t);
    const Mat U_inv = eta.inverse() * U.transpose() * g.matrix();
    return Mat(U_inv * N * U_inv.transpose());
  };

  // Internal equations: A J eta (Addot - 2 Adot w - A wdot + A w^2) eta^-1 = Nbar.
  const Rhs internal = [&](double t, const Vec& z) {
    const Mat A = get(z, 0, n, n), Ad = get(z, nn, n, n), w = get(z, 2 * nn, n, n);
    const Mat Nbar = polar_torque(U_ref, A, Ad, w, t);
    require_frame_independent(Nbar, polar_torque(U_alt, A, Ad, w, t), "polar-frame");
    const Mat Y = (A * J * e).partialPivLu().solve(Nbar * e) + 2 * Ad * w - A * w * w;
    // Split Y = Addot - A wdot with eta Addot symmetric and eta wdot skew:
    // A^T W + W A = -(Z - Z^T) for W = eta wdot, Z = eta Y.
    const Mat Z = e * Y;
    const Mat At = A.transpose();
    const Mat C = -(Z - Z.transpose());
    Mat K = Mat::Zero(nn, nn);
    Vec c(nn);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        c(i * n + j) = C(i, j);
        for (int k = 0; k < n; ++k) {
          K(i * n + j, k * n + j) += At(i, k);
          K(i * n + j, i * n + k) += A(k, j);
        }
      }
    const Mat W = get(K.partialPivLu().solve(c), 0, n, n);
    const Mat S = Z + At * W;
    Vec dz(3 * nn);
    put(dz, 0, Ad);
    put(dz, nn, eta.inverse() * S);
    put(dz, 2 * nn, eta.inverse() * W);
    return dz;
  };

  const int N = spec.step_count();
  std::vector<double> t(N + 1);
  std::vector<Vec> z(N + 1);
  std::vector<Mat> w(N + 1), wd(N + 1);
  z[0].resize(3 * nn);
  put(z[0], 0, pr0.factors.A);
  put(z[0], nn, pr0.Adot);
  put(z[0], 2 * nn, pr0.omegaHat);
  for (int k = 0; k <= N; ++k) {
    t[k] = node_time(spec, 0.0, k);
    if (k > 0) z[k] = advance(spec.method, internal, t[k - 1], z[k - 1], t[k] - t[k - 1]);
    w[k] = get(z[k], 2 * nn, n, n);
    wd[k] = get(internal(t[k], z[k]), 2 * nn, n, n);
  }
  const std::vector<Mat> U = integrate_frame(spec.method, U_ref, w, wd, t);

  std::vector<PolarSample> out;
  const int every = spec.cadence(n);
  for (int k = 0; k <= N; ++k) {
    if (k % every != 0 && k != N) continue;
    PolarSample s;
    s.t = t[k];
    s.A = get(z[k], 0, n, n);
    s.Adot = get(z[k], nn, n, n);
    s.omegaHat = w[k];
    s.U = U[k];
    s.phi = s.U * s.A;
    s.phidot = s.U * (s.omegaHat * s.A + s.Adot);
    out.push_back(std::move(s));
  }
  return out;
}

TwoPolarState twopolar_state(const PhaseState& state, const Metric& g, const Metric& eta) {
  const TwoPolarFactors f = two_polar_decompose(Placement(state.phi), g, eta);
  const TwoPolarRates r = twopolar_rates(f, state.phidot, g, eta);
  const GyroVelocities v = twopolar_velocities(f, r, g, eta);
  TwoPolarState s;
  s.D = f.D.diagonal();
  s.Ddot = r.Ddot.diagonal();
  s.chiHat = v.chiHat;
  s.thetaHat = v.thetaHat;
  s.L = f.L;
  s.R = f.R;
  return s;
}

TwoPolarTrajectory twopolar_reduced_simulate(const TwoPolarState& initial, const Inertia& inertia,
                                             const ForceModel& force, const Metric& g,
                                             const Metric& eta, const IntegratorSpec& spec) {
  spec.validate();
  inertia.validate(eta);
  if (!inertia.isotropic)
    throw Error(ErrorCode::ReprPreconditionViolated, "two-polar scheme needs isotropic inertia");
  const double I = *inertia.isotropic;
  const int n = static_cast<int>(initial.D.size());
  const int nn = n * n;
  const Mat Q = probe_rotation(n);
  const Mat L_ref = g.inverse_sqrt();
  const Mat L_alt = L_ref * Q;
  const Mat R_ref = eta.inverse_sqrt();
  const Mat R_alt = R_ref * Q.transpose();

  auto tilde_torque = [&](const Mat& L, const Mat& R, const Mat& D, const Mat& M, double t) {
    const Mat R_inv = R.transpose() * eta.matrix();
    const Mat L_inv = L.transpose() * g.matrix();
    PhaseState s{Vec::Zero(n), L * D * R_inv, Vec::Zero(n), L * M * R_inv};
    return Mat(L_inv * torque(s, force, g, eta, t) * g.matrix() * L);
  };

  // Layout: D, Ddot, chiHat, thetaHat.
  const Rhs internal = [&](double t, const Vec& z) {
    const Vec d = z.segment(0, n);
    const Mat D = d.asDiagonal();
    const Mat Dd = Vec(z.segment(n, n)).asDiagonal();
    const Mat chi = get(z, 2 * n, n, n), th = get(z, 2 * n + nn, n, n);
    const double scale = d.cwiseAbs().maxCoeff();
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (std::abs(d(a) - d(b)) < 1e-9 * scale)
          throw Error(ErrorCode::DegenerateSpectrum,
                      "stretches " + std::to_string(a) + " and " + std::to_string(b) +
                          " coincide at t = " + std::to_string(t));
    const Mat M = chi * D + Dd - D * th;
    const Mat Nt = tilde_torque(L_ref, R_ref, D, M, t);
    require_frame_independent(Nt, tilde_torque(L_alt, R_alt, D, M, t), "two-polar-frame");
    const Mat Y = Nt / I - (-2 * D * Dd * chi + 2 * D * th * Dd + D * D * chi * chi -
                            2 * D * th * D * chi + D * th * th * D);
    Vec dz(2 * n + 2 * nn);
    dz.segment(0, n) = z.segment(n, n);
    Mat chid = Mat::Zero(n, n), thd = Mat::Zero(n, n);
    for (int a = 0; a < n; ++a) {
      dz(n + a) = Y(a, a) / d(a);
      for (int b = a + 1; b < n; ++b) {
        Eigen::Matrix2d S;
        S << -d(a) * d(a), d(a) * d(b), d(b) * d(b), -d(a) * d(b);
        const Eigen::Vector2d x = S.partialPivLu().solve(Eigen::Vector2d(Y(a, b), Y(b, a)));
        chid(a, b) = x(0);
        chid(b, a) = -x(0);
        thd(a, b) = x(1);
        thd(b, a) = -x(1);
      }
    }
    put(dz, 2 * n, chid);
    put(dz, 2 * n + nn, thd);
    return dz;
  };

  TwoPolarTrajectory out;
  const int N = spec.step_count();
  std::vector<double> t;
  std::vector<Vec> z;
  std::vector<Mat> chi, chid, th, thd;
  Vec z0(2 * n + 2 * nn);
  z0 << initial.D, initial.Ddot, Vec::Zero(2 * nn);
  put(z0, 2 * n, initial.chiHat);
  put(z0, 2 * n + nn, initial.thetaHat);
  try {
    for (int k = 0; k <= N; ++k) {
      const double tk = node_time(spec, initial.t, k);
      Vec zk = k == 0 ? z0 : advance(spec.method, internal, t.back(), z.back(), tk - t.back());
      if (!zk.allFinite()) throw Error(ErrorCode::StepRejected, "non-finite two-polar state");
      const Vec dzk = internal(tk, zk);
      t.push_back(tk);
      z.push_back(zk);
      chi.push_back(get(zk, 2 * n, n, n));
      th.push_back(get(zk, 2 * n + nn, n, n));
      chid.push_back(get(dzk, 2 * n, n, n));
      thd.push_back(get(dzk, 2 * n + nn, n, n));
    }
  } catch (const Error& e) {
    if (z.empty()) throw;
    out.completed = false;
    out.status = e.code();
    out.message = e.what();
  }
  const std::vector<Mat> L = integrate_frame(spec.method, initial.L, chi, chid, t);
  const std::vector<Mat> R = integrate_frame(spec.method, initial.R, th, thd, t);

  auto state_at = [&](std::size_t k) {
    TwoPolarState s;
    s.t = t[k];
    s.D = z[k].segment(0, n);
    s.Ddot = z[k].segment(n, n);
    s.chiHat = chi[k];
    s.thetaHat = th[k];
    s.L = L[k];
    s.R = R[k];
    return s;
  };
  const int every = spec.cadence(n);
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (static_cast<int>(k) % every != 0 && k + 1 != z.size()) continue;
    TwoPolarSample s;
    s.state = state_at(k);
    const Mat D = s.state.D.asDiagonal();
    const Mat R_inv = s.state.R.transpose() * eta.matrix();
    s.phi = s.state.L * D * R_inv;
    s.phidot = s.state.L * (s.state.chiHat * D + Mat(s.state.Ddot.asDiagonal()) - D * s.state.thetaHat) * R_inv;
    out.samples.push_back(std::move(s));
  }
  if (!out.completed) out.checkpoint = state_at(z.size() - 1);
  return out;
}

}  // namespace affinebody
