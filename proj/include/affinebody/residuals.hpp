#pragma once

// Residuals of the rotation-less equations of motion written in the polar
// symmetric factor, evaluated on sampled trajectories.

#include <vector>

#include "affinebody/dynamics.hpp"

namespace affinebody {

/// Variational residual of the vakonomic rotation-less model with the
/// constraint substituted into the Lagrangian:
///   T(A, Adot) = Tr(W^T A^-T eta A^-1 W J) / 8,  W = A Adot + Adot A,
/// against the hyperelastic forces of V.  `A` holds the eta-symmetric polar
/// factor at uniform spacing dt; time derivatives are central differences.
/// Returns the largest Frobenius norm over the interior samples.  Throws
/// WindowTooShort for fewer than five samples.
double vakonomic_rotationless_residual(const std::vector<Mat>& A, double dt, const Potential& V,
                                       const Metric& eta, const Mat& J);

/// Residual of the symmetric part of the polar balance law
///   A J eta (Addot - 2 Adot w - A wdot + A w^2) eta^-1 = Nbar,
/// with w = [A^-1, Adot] / 2, against the forces of the model.  `U` holds the
/// isometric polar factor at the same samples; sample k is at t0 + k dt.
double dalembert_rotationless_residual(const std::vector<Mat>& A, const std::vector<Mat>& U,
                                       double dt, const Mat& J, const ForceModel& force,
                                       const Metric& g, const Metric& eta, double t0 = 0.0);

}  // namespace affinebody
