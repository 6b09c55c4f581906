#include "affinebody/kinematics.hpp"

#include <cmath>

namespace affinebody {

namespace {

double skew_defect(const Mat& X) { return (X + X.transpose()).norm(); }

}  // namespace

AffineVelocities affine_velocities(const PhaseState& state) {
  require_invertible(state.phi);
  const Eigen::PartialPivLU<Mat> lu(state.phi);
  AffineVelocities v;
  v.OmegaHat = lu.solve(state.phidot);
  v.Omega = state.phi * v.OmegaHat * lu.inverse();
  v.vhat = lu.solve(state.xdot);
  return v;
}

Mat omega_from_polar(const Mat& A, const Mat& Adot, const Metric& eta) {
  const Mat eA = eta.matrix() * A;
  const Mat eAd = eta.matrix() * Adot;
  const double scale = std::max(1.0, eA.norm());
  if ((eA - eA.transpose()).norm() > 1e-10 * scale ||
      (eAd - eAd.transpose()).norm() > 1e-10 * std::max(scale, eAd.norm())) {
    throw Error(ErrorCode::AsymmetricInput, "A and Adot must be eta-symmetric");
  }
  const Mat A_inv = A.inverse();
  return 0.5 * (A_inv * Adot - Adot * A_inv);
}

PolarRates polar_rates(const Mat& phi, const Mat& phidot, const Metric& g, const Metric& eta) {
  const GreenSpectrum spec = green_spectrum(phi, g, eta);
  const int n = static_cast<int>(phi.rows());
  const Mat& R = spec.R;
  const Mat R_inv = R.transpose() * eta.matrix();
  const Vec Q = spec.lambda.cwiseSqrt();

  PolarRates out;
  out.factors.A = R * Q.asDiagonal() * R_inv;
  const Mat A_inv = R * Q.cwiseInverse().asDiagonal() * R_inv;
  out.factors.U = phi * A_inv;
  const Mat U_inv = eta.inverse() * out.factors.U.transpose() * g.matrix();
  out.factors.B = phi * U_inv;

  // A^2 = eta^-1 G; in the eigenbasis the Sylvester equation is diagonal.
  const Mat Gdot = phidot.transpose() * g.matrix() * phi + phi.transpose() * g.matrix() * phidot;
  const Mat H = R_inv * eta.inverse() * Gdot * R;
  Mat X(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) X(a, b) = H(a, b) / (Q(a) + Q(b));
  out.Adot = R * X * R_inv;
  out.omegaHat = U_inv * phidot * A_inv - out.Adot * A_inv;
  return out;
}

TwoPolarRates twopolar_rates(const TwoPolarFactors& f, const Mat& phidot, const Metric& g,
                             const Metric& eta) {
  const int n = static_cast<int>(f.D.rows());
  const Mat R_inv = f.R_inverse(eta);
  const Mat L_inv = f.L_inverse(g);
  const Mat phi = f.L * f.D * R_inv;
  const Vec lambda = f.Q().cwiseAbs2();
  const Mat Gdot = phidot.transpose() * g.matrix() * phi + phi.transpose() * g.matrix() * phidot;
  const Mat H = R_inv * eta.inverse() * Gdot * f.R;

  Mat theta = Mat::Zero(n, n);
  Mat Ddot = Mat::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    Ddot(a, a) = H(a, a) / (2.0 * f.D(a, a));
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const double gap = lambda(b) - lambda(a);
      if (std::abs(gap) < kDegenerateSpectrumTol * lambda.maxCoeff()) {
        throw Error(ErrorCode::DegenerateSpectrum, "coincident stretches; frame rates undefined");
      }
      theta(a, b) = H(a, b) / gap;
    }
  }
  theta = skew(theta);
  const Mat D_inv = f.D.diagonal().cwiseInverse().asDiagonal();
  const Mat Omega = phidot * phi.inverse();
  const Mat chi = skew(L_inv * Omega * f.L - Ddot * D_inv + f.D * theta * D_inv);

  TwoPolarRates r;
  r.Ldot = f.L * chi;
  r.Ddot = Ddot;
  r.Rdot = f.R * theta;
  return r;
}

Mat twopolar_phidot(const TwoPolarFactors& f, const TwoPolarRates& r, const Metric& eta) {
  const Mat R_inv = f.R_inverse(eta);
  return r.Ldot * f.D * R_inv + f.L * r.Ddot * R_inv - f.L * f.D * R_inv * r.Rdot * R_inv;
}

GyroVelocities twopolar_velocities(const TwoPolarFactors& f, const TwoPolarRates& r,
                                   const Metric& g, const Metric& eta) {
  const Mat R_inv = f.R_inverse(eta);
  const Mat L_inv = f.L_inverse(g);
  GyroVelocities v;
  v.chiHat = L_inv * r.Ldot;
  v.thetaHat = R_inv * r.Rdot;
  const double scale = std::max(1.0, std::max(v.chiHat.norm(), v.thetaHat.norm()));
  if (skew_defect(v.chiHat) > 1e-9 * scale || skew_defect(v.thetaHat) > 1e-9 * scale) {
    throw Error(ErrorCode::TangencyViolation, "frame rates are not tangent to the orthonormal frames");
  }
  const Mat& D = f.D;
  const Mat D_inv = D.diagonal().cwiseInverse().asDiagonal();
  v.OmegaTilde = v.chiHat + r.Ddot * D_inv - D * v.thetaHat * D_inv;
  v.OmegaUnder = D_inv * v.chiHat * D + D_inv * r.Ddot - v.thetaHat;
  v.Omega = f.L * v.OmegaTilde * L_inv;
  v.OmegaHat = f.R * v.OmegaUnder * R_inv;
  v.omegaHat = f.R * (v.chiHat - v.thetaHat) * R_inv;
  return v;
}

Momenta legendre(const PhaseState& state, double m, const Mat& J, const Metric& g) {
  require_invertible(state.phi);
  Momenta mo;
  mo.k = m * state.xdot;
  mo.p = g.matrix() * mo.k;
  mo.P = J * state.phidot.transpose() * g.matrix();
  mo.K = state.phi * J * state.phidot.transpose();
  mo.Sigma = state.phi * mo.P;
  mo.SigmaHat = mo.P * state.phi;
  const Mat phi_inv = state.phi.inverse();
  mo.Khat = phi_inv * mo.K * phi_inv.transpose();
  mo.S = mo.Sigma - g.inverse() * mo.Sigma.transpose() * g.matrix();
  return mo;
}

PhaseState legendre_inverse(const Vec& x, const Mat& phi, const Vec& p, const Mat& P, double m,
                            const Mat& J, const Metric& g) {
  PhaseState s;
  s.x = x;
  s.phi = phi;
  s.xdot = g.inverse() * p / m;
  s.phidot = (J.ldlt().solve(P) * g.inverse()).transpose();
  return s;
}

TwoPolarSpins twopolar_spins(const TwoPolarFactors& f, const TwoPolarRates& r, double I,
                             const Metric& g, const Metric& eta) {
  const Mat R_inv = f.R_inverse(eta);
  const Mat L_inv = f.L_inverse(g);
  const Mat chi = L_inv * r.Ldot;
  const Mat theta = R_inv * r.Rdot;
  const Mat& D = f.D;
  const Mat& Dd = r.Ddot;
  const Mat D2 = D * D;
  const Mat D_inv = D.diagonal().cwiseInverse().asDiagonal();

  TwoPolarSpins s;
  s.SigmaTP = I * f.L * (D * theta * D + D * Dd - D2 * chi) * L_inv;
  s.SigmaHatTP = I * f.R * (theta * D2 + Dd * D - D * chi * D) * R_inv;
  s.KhatTP = I * f.R * (theta + Dd * D_inv - D * chi * D_inv) * f.R.transpose();
  s.S = I * f.L * (2.0 * D * theta * D - D2 * chi - chi * D2) * L_inv;
  s.V = I * f.R * (2.0 * D * chi * D - D2 * theta - theta * D2) * R_inv;
  s.Shat = I * f.R * (-D * chi * D_inv - D_inv * chi * D + 2.0 * theta) * f.R.transpose();
  return s;
}

namespace {

// Flat coordinate layout: q = (x, phi(i, A) row-major), p = (p, P(A, i)).
double& q_at(CanonicalPoint& c, int n, int k) {
  if (k < n) return c.x(k);
  k -= n;
  return c.phi(k / n, k % n);
}

double& p_at(CanonicalPoint& c, int n, int k) {
  if (k < n) return c.p(k);
  k -= n;
  return c.P(k % n, k / n);
}

template <typename Access>
Vec gradient(const PhaseFunction& F, const CanonicalPoint& at, int n, Access access) {
  const int size = n + n * n;
  Vec grad(size);
  CanonicalPoint c = at;
  for (int k = 0; k < size; ++k) {
    double& coord = access(c, n, k);
    const double base = coord;
    const double h = 1e-6 * std::max(1.0, std::abs(base));
    coord = base + h;
    const double fp = F(c);
    coord = base - h;
    const double fm = F(c);
    coord = base;
    grad(k) = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace

double poisson_bracket(const PhaseFunction& F, const PhaseFunction& G, const CanonicalPoint& at) {
  const int n = static_cast<int>(at.phi.rows());
  const Vec Fq = gradient(F, at, n, q_at);
  const Vec Fp = gradient(F, at, n, p_at);
  const Vec Gq = gradient(G, at, n, q_at);
  const Vec Gp = gradient(G, at, n, p_at);
  return Fq.dot(Gp) - Fp.dot(Gq);
}

}  // namespace affinebody
