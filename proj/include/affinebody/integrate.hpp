#pragma once

// Time stepping with manifold stabilization and invariant monitoring, and the
// polar and two-polar reduced integration schemes.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "affinebody/constraints.hpp"

namespace affinebody {

enum class Method { RK4, Euler };

const char* to_string(Method method);
Method method_from_string(const std::string& name);

struct IntegratorSpec {
  Method method = Method::RK4;
  double h = 1e-3;
  double t_end = 1.0;
  bool projection = true;
  /// Sample every k steps; 0 selects 1 for n = 2 and 10 otherwise.
  int monitor_every = 0;
  /// Largest relative correction manifold_projection may apply.
  double projection_bound = 1e-2;

  /// Throws InvalidArgument unless h > 0, t_end >= h and monitor_every >= 0.
  void validate() const;
  int step_count() const;
  int cadence(int n) const;
};

/// Quantities recomputed from a sampled state.
struct Monitors {
  double energy = 0.0;
  double T = 0.0;
  double V = 0.0;
  Mat S;          // spin
  Mat vorticity;  // eta-adjoint(SigmaHat) - SigmaHat
  double det_phi = 0.0;
  std::vector<double> I;
  double constraint_residual = 0.0;
  Vec mu;
};

struct TrajectorySample {
  double t = 0.0;
  PhaseState state;
  Monitors monitors;
};

struct SimulationSetup {
  Inertia inertia;
  ForceModel force;
  ConstraintKind kind = ConstraintKind::Free;
  Procedure procedure = Procedure::DAlembert;
  Metric g = Metric::identity(2);
  Metric eta = Metric::identity(2);
  /// Holonomic variant of the rotation-less chart (rotation angles held
  /// fixed); requires kind SpatialRotationless and runs either procedure on
  /// the chart.
  bool frozen_rotation = false;
  /// Run SpatialRotationless d'Alembert motion on the chart instead of the
  /// matrix engine.
  bool chart_engine = false;
};

/// Samples of a run.  A run that stops early keeps its samples and records
/// the error that stopped it.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  bool completed = true;
  std::optional<ErrorCode> status;
  std::string message;
};

Monitors compute_monitors(const PhaseState& state, const Vec& mu, const SimulationSetup& setup,
                          const PhaseState& reference, double t);

/// Integrates the equations of motion selected by the setup.  The vakonomic
/// procedure runs on the rotation-less chart (n = 2, 3); `mu0` defaults to
/// zero.  Throws on invalid or inconsistent initial data; errors during
/// stepping end the run early (see Trajectory).
Trajectory simulate(const PhaseState& initial, const Vec& mu0, const SimulationSetup& setup,
                    const IntegratorSpec& spec);

/// Returns the state moved back onto the constraint set through `reference`.
/// Rigid and ShapePreserving restore G to G0 (up to scale for the latter),
/// Incompressible restores det phi; the velocity is then projected onto the
/// admissible subspace at the new configuration.  Throws ProjectionFailed if
/// the relative correction exceeds `bound`.
PhaseState manifold_projection(const PhaseState& state, ConstraintKind kind,
                               const PhaseState& reference, const Metric& g, const Metric& eta,
                               double bound = 1e-2);

// Reduced schemes.

struct PolarSample {
  double t = 0.0;
  Mat A;
  Mat Adot;
  Mat omegaHat;
  Mat U;
  Mat phi;
  Mat phidot;
};

/// Three-step polar scheme for spatially isotropic forces: integrates the
/// internal equations for (A, omegaHat), then U' = U omegaHat(t), then
/// assembles phi = U A.  Throws IsotropyViolation if the polar-frame torque
/// depends on U.
std::vector<PolarSample> polar_reduced_simulate(const PhaseState& initial, const Inertia& inertia,
                                                const ForceModel& force, const Metric& g,
                                                const Metric& eta, const IntegratorSpec& spec);

/// State of the two-polar scheme; also serves as a resumable checkpoint.
struct TwoPolarState {
  double t = 0.0;
  Vec D;
  Vec Ddot;
  Mat chiHat;
  Mat thetaHat;
  Mat L;
  Mat R;
};

TwoPolarState twopolar_state(const PhaseState& state, const Metric& g, const Metric& eta);

struct TwoPolarSample {
  TwoPolarState state;
  Mat phi;
  Mat phidot;
};

struct TwoPolarTrajectory {
  std::vector<TwoPolarSample> samples;
  bool completed = true;
  std::optional<ErrorCode> status;
  std::string message;
  /// Last state before an aborted step; pass it back to resume.
  std::optional<TwoPolarState> checkpoint;
};

/// Three-step two-polar scheme for isotropic inertia and doubly isotropic
/// forces.  Integrates (D, chiHat, thetaHat), then L' = L chiHat and
/// R' = R thetaHat, then phi = L D R^-1.  A stretch crossing ends the run
/// with DegenerateSpectrum and a checkpoint.  Throws IsotropyViolation and
/// ReprPreconditionViolated.
TwoPolarTrajectory twopolar_reduced_simulate(const TwoPolarState& initial, const Inertia& inertia,
                                             const ForceModel& force, const Metric& g,
                                             const Metric& eta, const IntegratorSpec& spec);

}  // namespace affinebody
