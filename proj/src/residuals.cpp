#include "affinebody/residuals.hpp"

#include <Eigen/LU>

namespace affinebody {

namespace {

void require_window(std::size_t samples, double dt) {
  if (samples < 5)
    throw Error(ErrorCode::WindowTooShort,
                "residual needs at least 5 samples, got " + std::to_string(samples));
  if (!(dt > 0)) throw Error(ErrorCode::InvalidArgument, "sample spacing must be positive");
}

Mat central(const std::vector<Mat>& X, std::size_t k, double dt) {
  return (X[k + 1] - X[k - 1]) / (2 * dt);
}

struct KineticGradients {
  Mat dA;     // dT/dA
  Mat dAdot;  // dT/dAdot
};

KineticGradients kinetic_gradients(const Mat& A, const Mat& Adot, const Metric& eta, const Mat& J) {
  const Mat Ainv = A.inverse();
  const Mat W = A * Adot + Adot * A;
  const Mat M = Ainv.transpose() * eta.matrix() * Ainv;
  const Mat GW = 0.25 * M * W * J;
  const Mat P = W * J * W.transpose();
  KineticGradients out;
  out.dAdot = A.transpose() * GW + GW * A.transpose();
  out.dA = GW * Adot.transpose() + Adot.transpose() * GW - 0.25 * M * P * Ainv.transpose();
  return out;
}

}  // namespace

double vakonomic_rotationless_residual(const std::vector<Mat>& A, double dt, const Potential& V,
                                       const Metric& eta, const Mat& J) {
  require_window(A.size(), dt);
  const Mat& eta_inv = eta.inverse();
  double worst = 0.0;
  for (std::size_t k = 2; k + 2 < A.size(); ++k) {
    const KineticGradients now = kinetic_gradients(A[k], central(A, k, dt), eta, J);
    const KineticGradients next = kinetic_gradients(A[k + 1], central(A, k + 1, dt), eta, J);
    const KineticGradients prev = kinetic_gradients(A[k - 1], central(A, k - 1, dt), eta, J);
    const Mat ddt = (next.dAdot - prev.dAdot) / (2 * dt);
    // Forces of V: with phi = A and g = eta the invariants are those of A^2.
    const Mat N = force_hyperelastic(A[k], V, eta, eta);
    const Mat Ainv = A[k].inverse();
    const Mat Nhat = Ainv * N * Ainv.transpose();
    const Mat R = sym(eta_inv * now.dA) - sym(eta_inv * ddt) + sym(A[k] * Nhat);
    worst = std::max(worst, R.norm());
  }
  return worst;
}

double dalembert_rotationless_residual(const std::vector<Mat>& A, const std::vector<Mat>& U,
                                       double dt, const Mat& J, const ForceModel& force,
                                       const Metric& g, const Metric& eta, double t0) {
  require_window(A.size(), dt);
  if (U.size() != A.size())
    throw Error(ErrorCode::InvalidArgument, "A and U windows differ in length");
  const Mat& e = eta.matrix();
  const Mat& e_inv = eta.inverse();
  auto omega_hat = [&](std::size_t k) {
    const Mat Ainv = A[k].inverse();
    const Mat Ad = central(A, k, dt);
    return Mat(0.5 * (Ainv * Ad - Ad * Ainv));
  };
  double worst = 0.0;
  for (std::size_t k = 2; k + 2 < A.size(); ++k) {
    const Mat& a = A[k];
    const Mat Ad = central(A, k, dt);
    const Mat Add = (A[k + 1] - 2 * A[k] + A[k - 1]) / (dt * dt);
    const Mat w = omega_hat(k);
    const Mat wd = (omega_hat(k + 1) - omega_hat(k - 1)) / (2 * dt);
    const Mat lhs = a * J * e * (Add - 2 * Ad * w - a * wd + a * w * w) * e_inv;

    PhaseState s;
    s.phi = U[k] * a;
    s.phidot = U[k] * (w * a + Ad);
    s.x = Vec::Zero(a.rows());
    s.xdot = Vec::Zero(a.rows());
    const Mat N = torque(s, force, g, eta, t0 + static_cast<double>(k) * dt);
    const PolarFactors frame{U[k], a, Mat(s.phi * U[k].inverse())};
    const Mat Nbar = frame_transform_torque(N, s.phi, frame, g, eta).Nbar;
    worst = std::max(worst, sym(e * (lhs - Nbar) * e).norm());
  }
  return worst;
}

}  // namespace affinebody
