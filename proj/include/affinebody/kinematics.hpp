#pragma once

// Velocity- and momentum-level quantities of an affine body.

#include <functional>

#include "affinebody/tensor_core.hpp"

namespace affinebody {

/// Translation x, placement phi and their time derivatives.
struct PhaseState {
  Vec x;
  Mat phi;
  Vec xdot;
  Mat phidot;

  int dim() const { return static_cast<int>(phi.rows()); }
};

struct AffineVelocities {
  Mat Omega;     // phidot phi^-1, spatial
  Mat OmegaHat;  // phi^-1 phidot, material
  Vec vhat;      // phi^-1 xdot
};

AffineVelocities affine_velocities(const PhaseState& state);

/// Half commutator (A^-1 Adot - Adot A^-1) / 2; the angular velocity of the
/// U factor along spatially rotation-less motion.  Throws AsymmetricInput
/// unless eta A and eta Adot are symmetric.
Mat omega_from_polar(const Mat& A, const Mat& Adot, const Metric& eta);

/// Time derivatives of the polar factors along (phi, phidot).
struct PolarRates {
  PolarFactors factors;
  Mat Adot;
  Mat omegaHat;  // U^-1 dU/dt, eta-skew
};

PolarRates polar_rates(const Mat& phi, const Mat& phidot, const Metric& g, const Metric& eta);

/// Time derivatives of the two-polar factors.
struct TwoPolarRates {
  Mat Ldot;
  Mat Ddot;  // diagonal
  Mat Rdot;
};

/// Rates induced by (phi, phidot).  Throws DegenerateSpectrum when two
/// stretches coincide, since the frames are then not differentiable.
TwoPolarRates twopolar_rates(const TwoPolarFactors& f, const Mat& phidot, const Metric& g,
                             const Metric& eta);

/// phidot reconstructed from two-polar factors and their rates.
Mat twopolar_phidot(const TwoPolarFactors& f, const TwoPolarRates& r, const Metric& eta);

struct GyroVelocities {
  Mat chiHat;      // L^-1 dL/dt, skew
  Mat thetaHat;    // R^-1 dR/dt, skew
  Mat omegaHat;    // R (chiHat - thetaHat) R^-1, eta-skew
  Mat Omega;       // spatial affine velocity
  Mat OmegaHat;    // material affine velocity
  Mat OmegaTilde;  // components of Omega in the L frame
  Mat OmegaUnder;  // components of OmegaHat in the R frame
};

/// Throws TangencyViolation if chiHat or thetaHat fail to be skew.
GyroVelocities twopolar_velocities(const TwoPolarFactors& f, const TwoPolarRates& r,
                                   const Metric& g, const Metric& eta);

struct Momenta {
  Vec p;        // m g xdot
  Mat P;        // P(A, i) = J phidot^T g
  Vec k;        // m xdot
  Mat K;        // phi J phidot^T
  Mat Sigma;    // phi P = K g
  Mat SigmaHat; // P phi
  Mat Khat;     // phi^-1 K phi^-T
  Mat S;        // Sigma - g^-1 Sigma^T g
};

Momenta legendre(const PhaseState& state, double m, const Mat& J, const Metric& g);

/// Inverse Legendre map: velocities from canonical momenta.
PhaseState legendre_inverse(const Vec& x, const Mat& phi, const Vec& p, const Mat& P, double m,
                            const Mat& J, const Metric& g);

/// Doubled skew parts from two-polar variables, valid for J = I eta^-1.
struct TwoPolarSpins {
  Mat S;
  Mat V;
  Mat Shat;
  Mat SigmaTP;
  Mat SigmaHatTP;
  Mat KhatTP;
};

TwoPolarSpins twopolar_spins(const TwoPolarFactors& f, const TwoPolarRates& r, double I,
                             const Metric& g, const Metric& eta);

/// Point of the canonical phase space; P(A, i) is conjugate to phi(i, A).
struct CanonicalPoint {
  Vec x;
  Mat phi;
  Vec p;
  Mat P;
};

using PhaseFunction = std::function<double(const CanonicalPoint&)>;

/// Canonical bracket sum_q (dF/dq dG/dp - dF/dp dG/dq) by central differences
/// with relative step 1e-6 per coordinate.
double poisson_bracket(const PhaseFunction& F, const PhaseFunction& G, const CanonicalPoint& at);

}  // namespace affinebody
