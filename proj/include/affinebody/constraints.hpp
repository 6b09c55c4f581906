#pragma once

// Velocity-level constraints on the affine velocity and the d'Alembert
// equations of motion they induce.

#include <string>
#include <vector>

#include "affinebody/dynamics.hpp"

namespace affinebody {

enum class ConstraintKind {
  Free,
  Rigid,
  ShapePreserving,
  Incompressible,
  SpatialRotationless,
  MaterialRotationless,
};

enum class Procedure { DAlembert, Vakonomic };

const char* to_string(ConstraintKind kind);
const char* to_string(Procedure procedure);
ConstraintKind constraint_kind_from_string(const std::string& name);
Procedure procedure_from_string(const std::string& name);

/// Whether the procedure is available for the kind.  Vakonomic dynamics is
/// implemented for the spatially rotation-less constraint only.
bool is_supported(ConstraintKind kind, Procedure procedure);

/// Admissible affine velocities at a configuration.
///
/// Each kind restricts either Omega (spatial kinds) or OmegaHat (material
/// kinds) to a fixed linear subspace.  `forms` holds Frobenius-orthonormal
/// matrices Z with Tr(Z Xi) = 0 describing the constraint on Xi; `basis`
/// spans the admissible Omega and `annihilator_basis` spans the reaction
/// torques N_R, which do no work on admissible motion: Tr(N_R g Omega) = 0.
struct VelocitySubspace {
  bool material = false;
  std::vector<Mat> basis;
  std::vector<Mat> forms;
  std::vector<Mat> annihilator_basis;
};

VelocitySubspace admissible_subspace(ConstraintKind kind, const Mat& phi, const Metric& g,
                                     const Metric& eta);

/// Largest |Tr(Z Xi)| over the constraint forms.
double velocity_violation(const VelocitySubspace& S, const PhaseState& state);

/// Orthogonal projection of the velocity onto the admissible subspace.
Mat project_velocity(const VelocitySubspace& S, const PhaseState& state);

struct ConstrainedAcceleration {
  Vec xddot;
  Mat phiddot;
  Mat reaction;  // N_R
  Vec lambda;    // coefficients of N_R in the reaction basis
};

struct DAlembertOptions {
  /// Reject states whose velocity violates the constraint by more than
  /// 1e-8 * ||Omega||.  Disabled inside integrator stages.
  bool check_consistency = true;
};

/// Solves phi J phiddot^T = N + N_R together with the differentiated
/// constraint as one saddle-point system.  Throws InconsistentInitialData
/// or SingularSaddle.
ConstrainedAcceleration dalembert_rhs(const PhaseState& state, const Inertia& inertia,
                                      const ForceModel& force, ConstraintKind kind,
                                      const Metric& g, const Metric& eta, double t,
                                      const DAlembertOptions& options = {});

/// Residual of the reaction-free form of the balance law for each kind,
/// with X = phi J phiddot^T.  Zero on the output of dalembert_rhs.
double reaction_free_residual(ConstraintKind kind, const Mat& phi, const Mat& phiddot,
                              const Mat& N, const Mat& J, const Metric& g, const Metric& eta);

/// Distance of the state from the constraint set through `reference`:
/// ||G - G0|| for Rigid, |det phi - det phi0| for Incompressible, the
/// conformal defect of G against G0 for ShapePreserving, and the velocity
/// violation for the rotation-less kinds.  Zero for Free.
double constraint_residual(ConstraintKind kind, const PhaseState& state,
                           const PhaseState& reference, const Metric& g, const Metric& eta);

}  // namespace affinebody
