#pragma once

// Kinetic energy, force models and the unconstrained equations of motion.

#include <functional>
#include <optional>
#include <vector>

#include "affinebody/kinematics.hpp"

namespace affinebody {

/// Mass m and contravariant second moment J^{AB}.  An isotropic body has
/// J = I eta^-1 and records I.
struct Inertia {
  double m = 1.0;
  Mat J;
  std::optional<double> isotropic;

  static Inertia make_isotropic(double m, double I, const Metric& eta);
  /// Throws InvalidArgument unless m > 0, J is SPD and the isotropic tag is
  /// consistent with J.
  void validate(const Metric& eta) const;
};

/// One monomial coef * prod_k I_k^powers[k].
struct PotentialTerm {
  double coef = 0.0;
  std::vector<int> powers;
};

/// Potential V(I_1, ..., I_n) on the deformation invariants.  Polynomial
/// potentials have analytic derivatives; a user callable is differentiated
/// by central differences (relative accuracy about 1e-8).
class Potential {
 public:
  using Function = std::function<double(const std::vector<double>&)>;

  Potential() = default;
  explicit Potential(std::vector<PotentialTerm> terms);
  static Potential from_function(Function f);

  double value(const std::vector<double>& I) const;
  /// dV/dI_k for k = 1..I.size().
  std::vector<double> gradient(const std::vector<double>& I) const;

  const std::vector<PotentialTerm>& terms() const { return terms_; }
  bool is_polynomial() const { return !custom_; }
  bool empty() const { return terms_.empty() && !custom_; }

 private:
  std::vector<PotentialTerm> terms_;
  Function custom_;
};

using TorqueHook = std::function<Mat(const PhaseState&, double t)>;
using ForceHook = std::function<Vec(const PhaseState&, double t)>;

struct ForceModel {
  Potential potential;
  double nu = 0.0;
  double zeta = 0.0;
  double V0 = 1.0;
  TorqueHook external;       // extra contravariant torque N^{ij}
  ForceHook translational;   // covariant force on x; zero when unset

  bool has_viscosity() const { return nu != 0.0 || zeta != 0.0; }
};

/// Torque in its spatial, co-moving, polar-frame and two-polar-frame forms.
struct Torque {
  Mat N;       // N^{ij}
  Mat Nhat;    // phi^-1 N phi^-T
  Mat Nbar;    // A Nhat A^T = U^-1 N U^-T
  Mat Ntilde;  // L^-1 N g L, mixed
};

enum class KineticRepr { Direct, Polar, TwoPolar, TwoPolarIsotropic };

double kinetic_energy(const PhaseState& state, const Inertia& inertia, const Metric& g,
                      const Metric& eta, KineticRepr repr = KineticRepr::Direct);

/// Kinetic energy in canonical momenta, p^T g^-1 p / 2m + Tr(P^T J^-1 P g^-1) / 2.
double kinetic_energy_canonical(const Vec& p, const Mat& P, const Inertia& inertia, const Metric& g);

/// Internal kinetic energy of an isotropic body from the momenta conjugate
/// to the two-polar variables.  Throws DegenerateSpectrum when two stretches
/// coincide and ReprPreconditionViolated without isotropy.
double kinetic_energy_twopolar_canonical(const Mat& phi, const Mat& P, const Inertia& inertia,
                                         const Metric& g, const Metric& eta);

/// Momenta conjugate to the two-polar variables.
struct TwoPolarMomenta {
  Vec P_a;   // conjugate to the stretches Q^a
  Mat rho;   // spin of the L frame
  Mat tau;   // spin of the R frame
  Mat shear_sum;   // -rho - tau
  Mat shear_diff;  // rho - tau
};

TwoPolarMomenta twopolar_momenta(const TwoPolarFactors& f, const Mat& P, const Metric& g,
                                 const Metric& eta);

double potential_energy(const Mat& phi, const Potential& V, const Metric& g, const Metric& eta);

/// Coefficients B_a = -2a dV/dI_a.
std::vector<double> hyperelastic_coefficients(const Mat& phi, const Potential& V, const Metric& g,
                                              const Metric& eta);

/// Contravariant torque N^{ij} = phi Nhat phi^T with Nhat = sum_a B_a Ghat^(a-1) eta^-1.
Mat force_hyperelastic(const Mat& phi, const Potential& V, const Metric& g, const Metric& eta);

/// Linear viscous torque.  Throws NegativeDeterminant if det phi <= 0.
Mat force_viscous(const Mat& phi, const Mat& Omega, double nu, double zeta, double V0,
                  const Metric& g, const Metric& eta);

/// Total contravariant torque of the model at (state, t).
Mat torque(const PhaseState& state, const ForceModel& force, const Metric& g, const Metric& eta,
           double t);

/// Translational force (covariant), zero unless a hook is set.
Vec translational_force(const PhaseState& state, const ForceModel& force, double t);

/// Torque representations relative to the given frame.  Throws FrameMismatch
/// if the frame does not decompose phi.
Torque frame_transform_torque(const Mat& N, const Mat& phi, const PolarFactors& frame,
                              const Metric& g, const Metric& eta);
Torque frame_transform_torque(const Mat& N, const Mat& phi, const TwoPolarFactors& frame,
                              const Metric& g, const Metric& eta);

/// Covariant generalized force on phi equivalent to the torque N:
/// Tr(Q^T dphi) = Tr(N g dphi phi^-1).
Mat generalized_force(const Mat& phi, const Mat& N, const Metric& g);

struct Accelerations {
  Vec xddot;
  Mat phiddot;
};

/// Solves phi J phiddot^T = N as a dense n^2 x n^2 system.
Mat solve_affine_balance(const Mat& phi, const Mat& J, const Mat& N);

/// Unconstrained equations of motion.
Accelerations free_rhs(const PhaseState& state, const Inertia& inertia, const ForceModel& force,
                       const Metric& g, const Metric& eta, double t);

}  // namespace affinebody
