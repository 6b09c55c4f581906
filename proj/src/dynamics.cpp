#include "affinebody/dynamics.hpp"

#include <cmath>

namespace affinebody {

Inertia Inertia::make_isotropic(double m, double I, const Metric& eta) {
  Inertia in;
  in.m = m;
  in.J = I * eta.inverse();
  in.isotropic = I;
  return in;
}

void Inertia::validate(const Metric& eta) const {
  if (!(m > 0.0) || !std::isfinite(m)) throw Error(ErrorCode::InvalidArgument, "mass must be positive");
  if (J.rows() != eta.dim() || J.cols() != eta.dim()) {
    throw Error(ErrorCode::InvalidArgument, "inertia J has wrong dimension");
  }
  if ((J - J.transpose()).norm() > 1e-12 * std::max(1.0, J.norm())) {
    throw Error(ErrorCode::InvalidArgument, "inertia J is not symmetric");
  }
  if (Eigen::SelfAdjointEigenSolver<Mat>(sym(J)).eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "inertia J is not positive-definite");
  }
  if (isotropic && (J - *isotropic * eta.inverse()).norm() > 1e-12 * std::max(1.0, J.norm())) {
    throw Error(ErrorCode::InvalidArgument, "inertia tagged isotropic but J != I eta^-1");
  }
}

Potential::Potential(std::vector<PotentialTerm> terms) : terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (!std::isfinite(t.coef)) throw Error(ErrorCode::InvalidArgument, "non-finite potential coefficient");
    for (int p : t.powers) {
      if (p < 0) throw Error(ErrorCode::InvalidArgument, "negative power in potential");
    }
  }
}

Potential Potential::from_function(Function f) {
  Potential v;
  v.custom_ = std::move(f);
  return v;
}

namespace {

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

double monomial(const PotentialTerm& t, const std::vector<double>& I) {
  double v = t.coef;
  for (std::size_t k = 0; k < t.powers.size(); ++k) {
    if (t.powers[k] == 0) continue;
    if (k >= I.size()) return 0.0;
    v *= ipow(I[k], t.powers[k]);
  }
  return v;
}

}  // namespace

double Potential::value(const std::vector<double>& I) const {
  if (custom_) return custom_(I);
  double v = 0.0;
  for (const auto& t : terms_) v += monomial(t, I);
  return v;
}

std::vector<double> Potential::gradient(const std::vector<double>& I) const {
  std::vector<double> grad(I.size(), 0.0);
  if (custom_) {
    std::vector<double> x = I;
    for (std::size_t k = 0; k < I.size(); ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(I[k]));
      x[k] = I[k] + h;
      const double fp = custom_(x);
      x[k] = I[k] - h;
      const double fm = custom_(x);
      x[k] = I[k];
      grad[k] = (fp - fm) / (2.0 * h);
    }
    return grad;
  }
  for (const auto& t : terms_) {
    for (std::size_t k = 0; k < I.size() && k < t.powers.size(); ++k) {
      const int p = t.powers[k];
      if (p == 0) continue;
      PotentialTerm d = t;
      d.coef *= p;
      d.powers[k] = p - 1;
      grad[k] += monomial(d, I);
    }
  }
  return grad;
}

double kinetic_energy(const PhaseState& s, const Inertia& inertia, const Metric& g,
                      const Metric& eta, KineticRepr repr) {
  const double T_tr = 0.5 * inertia.m * s.xdot.dot(g.matrix() * s.xdot);
  const Mat& J = inertia.J;
  switch (repr) {
    case KineticRepr::Direct:
      return T_tr + 0.5 * (s.phidot.transpose() * g.matrix() * s.phidot * J).trace();

    case KineticRepr::Polar: {
      const auto pr = polar_rates(s.phi, s.phidot, g, eta);
      const Mat& A = pr.factors.A;
      const Mat& Ad = pr.Adot;
      const Mat wA = pr.omegaHat * A;
      const Mat& e = eta.matrix();
      const double deform = 0.5 * (Ad.transpose() * e * Ad * J).trace();
      const double coriolis = (wA.transpose() * e * Ad * J).trace();
      const double centrifugal = 0.5 * (wA.transpose() * e * wA * J).trace();
      return T_tr + deform + coriolis + centrifugal;
    }

    case KineticRepr::TwoPolar:
    case KineticRepr::TwoPolarIsotropic: {
      if (repr == KineticRepr::TwoPolarIsotropic && !inertia.isotropic) {
        throw Error(ErrorCode::ReprPreconditionViolated, "isotropic representation needs J = I eta^-1");
      }
      const auto f = two_polar_decompose(Placement(s.phi), g, eta);
      const auto r = twopolar_rates(f, s.phidot, g, eta);
      const Mat chi = f.L_inverse(g) * r.Ldot;
      const Mat th = f.R_inverse(eta) * r.Rdot;
      const Mat& D = f.D;
      const Mat& Dd = r.Ddot;
      if (repr == KineticRepr::TwoPolarIsotropic) {
        const double I = *inertia.isotropic;
        return T_tr + 0.5 * I * (Dd * Dd).trace() + I * (D * chi * D * th).trace() -
               0.5 * I * (D * D * chi * chi).trace() - 0.5 * I * (D * D * th * th).trace();
      }
      const Mat R_inv = f.R_inverse(eta);
      const Mat Jt = R_inv * J * R_inv.transpose();
      auto tr = [&](const Mat& X) { return 0.5 * (X * Jt).trace(); };
      return T_tr + tr(Dd * Dd) + tr(Dd * chi * D) - tr(D * chi * Dd) + tr(th * D * Dd) -
             tr(Dd * D * th) - tr(D * chi * chi * D) - tr(th * D * D * th) + tr(th * D * chi * D) +
             tr(D * chi * D * th);
    }
  }
  return 0.0;
}

double kinetic_energy_canonical(const Vec& p, const Mat& P, const Inertia& inertia, const Metric& g) {
  const double T_tr = 0.5 * p.dot(g.inverse() * p) / inertia.m;
  return T_tr + 0.5 * (P.transpose() * inertia.J.ldlt().solve(P) * g.inverse()).trace();
}

TwoPolarMomenta twopolar_momenta(const TwoPolarFactors& f, const Mat& P, const Metric& g,
                                 const Metric& eta) {
  const Mat Pt = f.R_inverse(eta) * P * f.L;
  const Mat& D = f.D;
  TwoPolarMomenta m;
  m.P_a = Pt.diagonal();
  m.rho = D * Pt - Pt.transpose() * D;
  m.tau = D * Pt.transpose() - Pt * D;
  m.shear_sum = -m.rho - m.tau;
  m.shear_diff = m.rho - m.tau;
  (void)g;
  return m;
}

double kinetic_energy_twopolar_canonical(const Mat& phi, const Mat& P, const Inertia& inertia,
                                         const Metric& g, const Metric& eta) {
  if (!inertia.isotropic) {
    throw Error(ErrorCode::ReprPreconditionViolated, "two-polar Hamiltonian form needs J = I eta^-1");
  }
  const double I = *inertia.isotropic;
  const auto f = two_polar_decompose(Placement(phi), g, eta);
  const Vec Q = f.Q();
  const int n = static_cast<int>(Q.size());
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (std::abs(Q(a) - Q(b)) < kDegenerateSpectrumTol * Q.maxCoeff()) {
        throw Error(ErrorCode::DegenerateSpectrum, "coincident stretches make the shear term singular");
      }
  const auto m = twopolar_momenta(f, P, g, eta);
  double T = m.P_a.squaredNorm() / (2.0 * I);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const double dm = Q(a) - Q(b);
      const double dp = Q(a) + Q(b);
      T += m.shear_sum(a, b) * m.shear_sum(a, b) / (8.0 * I * dm * dm);
      T += m.shear_diff(a, b) * m.shear_diff(a, b) / (8.0 * I * dp * dp);
    }
  return T;
}

double potential_energy(const Mat& phi, const Potential& V, const Metric& g, const Metric& eta) {
  if (V.empty()) return 0.0;
  const auto t = deformation_tensors(Placement(phi), g, eta);
  return V.value(trace_powers(t.Ghat, static_cast<int>(phi.rows())));
}

std::vector<double> hyperelastic_coefficients(const Mat& phi, const Potential& V, const Metric& g,
                                              const Metric& eta) {
  const int n = static_cast<int>(phi.rows());
  const Mat Ghat = eta.inverse() * phi.transpose() * g.matrix() * phi;
  const auto dV = V.gradient(trace_powers(Ghat, n));
  std::vector<double> B(n);
  for (int a = 1; a <= n; ++a) B[a - 1] = -2.0 * a * dV[a - 1];
  return B;
}

Mat force_hyperelastic(const Mat& phi, const Potential& V, const Metric& g, const Metric& eta) {
  const int n = static_cast<int>(phi.rows());
  if (V.empty()) return Mat::Zero(n, n);
  require_invertible(phi);
  const Mat Ghat = eta.inverse() * phi.transpose() * g.matrix() * phi;
  const auto B = hyperelastic_coefficients(phi, V, g, eta);
  Mat mixed = Mat::Zero(n, n);
  Mat power = Mat::Identity(n, n);
  for (int a = 0; a < n; ++a) {
    mixed += B[a] * power;
    power = power * Ghat;
  }
  const Mat Nhat = mixed * eta.inverse();
  return sym(phi * Nhat * phi.transpose());
}

Mat force_viscous(const Mat& phi, const Mat& Omega, double nu, double zeta, double V0,
                  const Metric& g, const Metric& eta) {
  const int n = static_cast<int>(phi.rows());
  const double det = phi.determinant();
  if (!(det > 0.0)) throw Error(ErrorCode::NegativeDeterminant, "viscous torque needs det phi > 0");
  const Mat Oup = Omega * g.inverse();
  const double scale = V0 * std::sqrt(g.determinant() / eta.determinant()) * det;
  return -scale * (nu * (Oup + Oup.transpose()) +
                   (zeta - 2.0 * nu / n) * Omega.trace() * g.inverse());
}

Mat torque(const PhaseState& state, const ForceModel& force, const Metric& g, const Metric& eta,
           double t) {
  Mat N = force_hyperelastic(state.phi, force.potential, g, eta);
  if (force.has_viscosity()) {
    const Mat Omega = state.phidot * state.phi.inverse();
    N += force_viscous(state.phi, Omega, force.nu, force.zeta, force.V0, g, eta);
  }
  if (force.external) N += force.external(state, t);
  return N;
}

Vec translational_force(const PhaseState& state, const ForceModel& force, double t) {
  if (force.translational) return force.translational(state, t);
  return Vec::Zero(state.x.size());
}

namespace {

void require_frame(const Mat& reconstructed, const Mat& phi) {
  if ((reconstructed - phi).norm() > 1e-9 * std::max(1.0, phi.norm())) {
    throw Error(ErrorCode::FrameMismatch, "frame factors do not reconstruct the placement");
  }
}

}  // namespace

Torque frame_transform_torque(const Mat& N, const Mat& phi, const PolarFactors& frame,
                              const Metric& g, const Metric& eta) {
  require_frame(frame.U * frame.A, phi);
  Torque out;
  out.N = N;
  const Mat phi_inv = phi.inverse();
  out.Nhat = phi_inv * N * phi_inv.transpose();
  out.Nbar = frame.A * out.Nhat * frame.A.transpose();
  (void)g;
  (void)eta;
  return out;
}

Torque frame_transform_torque(const Mat& N, const Mat& phi, const TwoPolarFactors& frame,
                              const Metric& g, const Metric& eta) {
  require_frame(frame.L * frame.D * frame.R_inverse(eta), phi);
  Torque out;
  out.N = N;
  const Mat phi_inv = phi.inverse();
  out.Nhat = phi_inv * N * phi_inv.transpose();
  out.Ntilde = frame.L_inverse(g) * N * g.matrix() * frame.L;
  return out;
}

Mat generalized_force(const Mat& phi, const Mat& N, const Metric& g) {
  return g.matrix() * N.transpose() * phi.inverse().transpose();
}

Mat solve_affine_balance(const Mat& phi, const Mat& J, const Mat& N) {
  const int n = static_cast<int>(phi.rows());
  const Mat PJ = phi * J;
  // Unknown vec(phiddot) in row-major order: entry (j, B) at index j*n + B.
  // Row (i, k) of the system: sum_B (phi J)(i, B) phiddot(k, B) = N(i, k).
  Mat M = Mat::Zero(n * n, n * n);
  Vec rhs(n * n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      rhs(i * n + k) = N(i, k);
      for (int B = 0; B < n; ++B) M(i * n + k, k * n + B) = PJ(i, B);
    }
  const Vec x = M.partialPivLu().solve(rhs);
  Mat phiddot(n, n);
  for (int j = 0; j < n; ++j)
    for (int B = 0; B < n; ++B) phiddot(j, B) = x(j * n + B);
  return phiddot;
}

Accelerations free_rhs(const PhaseState& state, const Inertia& inertia, const ForceModel& force,
                       const Metric& g, const Metric& eta, double t) {
  require_invertible(state.phi);
  const Mat N = torque(state, force, g, eta, t);
  Accelerations acc;
  acc.phiddot = solve_affine_balance(state.phi, inertia.J, N);
  acc.xddot = g.inverse() * translational_force(state, force, t) / inertia.m;
  return acc;
}

}  // namespace affinebody
