#include "affinebody/tensor_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace affinebody {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularPlacement: return "SingularPlacement";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::AsymmetricInput: return "AsymmetricInput";
    case ErrorCode::TangencyViolation: return "TangencyViolation";
    case ErrorCode::ReprPreconditionViolated: return "ReprPreconditionViolated";
    case ErrorCode::NegativeDeterminant: return "NegativeDeterminant";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::InconsistentInitialData: return "InconsistentInitialData";
    case ErrorCode::SingularSaddle: return "SingularSaddle";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::IsotropyViolation: return "IsotropyViolation";
    case ErrorCode::StepRejected: return "StepRejected";
    case ErrorCode::ProjectionFailed: return "ProjectionFailed";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Metric::Metric(Mat matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() < 1 || matrix_.rows() != matrix_.cols()) {
    throw Error(ErrorCode::InvalidArgument, "metric must be a non-empty square matrix");
  }
  const double scale = std::max(1.0, matrix_.cwiseAbs().maxCoeff());
  if ((matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::InvalidArgument, "metric is not symmetric");
  }
  matrix_ = sym(matrix_);
  Eigen::SelfAdjointEigenSolver<Mat> es(matrix_);
  const Vec& ev = es.eigenvalues();
  if (ev.minCoeff() <= 1e-12 * ev.maxCoeff() || ev.minCoeff() <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "metric is not positive-definite");
  }
  const Mat& V = es.eigenvectors();
  inverse_ = V * ev.cwiseInverse().asDiagonal() * V.transpose();
  sqrt_ = V * ev.cwiseSqrt().asDiagonal() * V.transpose();
  inverse_sqrt_ = V * ev.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
  det_ = ev.prod();
}

bool Metric::is_identity(double tol) const {
  return (matrix_ - Mat::Identity(dim(), dim())).cwiseAbs().maxCoeff() <= tol;
}

void require_invertible(const Mat& phi) {
  if (phi.rows() != phi.cols() || phi.rows() < 1) {
    throw Error(ErrorCode::InvalidArgument, "placement must be square");
  }
  if (!phi.allFinite()) {
    throw Error(ErrorCode::SingularPlacement, "placement has non-finite entries");
  }
  const double norm = phi.norm();
  const double det = phi.determinant();
  if (std::abs(det) < 1e-12 * std::pow(norm, static_cast<double>(phi.rows())) ||
      det == 0.0) {
    throw Error(ErrorCode::SingularPlacement,
                "|det phi| = " + std::to_string(std::abs(det)) + " below tolerance");
  }
}

Placement::Placement(Mat phi) : phi_(std::move(phi)) { require_invertible(phi_); }

namespace {

void check_dims(const Mat& phi, const Metric& g, const Metric& eta) {
  if (g.dim() != phi.rows() || eta.dim() != phi.cols()) {
    throw Error(ErrorCode::InvalidArgument, "metric dimensions do not match placement");
  }
}

// Positive sign on the first entry that is significant relative to the column.
void fix_sign(Eigen::Ref<Vec> v) {
  const double scale = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-10 * scale) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace

GreenSpectrum green_spectrum(const Mat& phi, const Metric& g, const Metric& eta) {
  check_dims(phi, g, eta);
  require_invertible(phi);
  const int n = static_cast<int>(phi.rows());
  const Mat G = sym(phi.transpose() * g.matrix() * phi);

  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(G, eta.matrix());
  const Vec& ev = es.eigenvalues();
  const Mat& V = es.eigenvectors();

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ev(a) > ev(b); });

  GreenSpectrum out;
  out.lambda.resize(n);
  out.R.resize(n, n);
  for (int k = 0; k < n; ++k) {
    out.lambda(k) = ev(order[k]);
    out.R.col(k) = V.col(order[k]);
  }

  // Within a cluster of coincident eigenvalues the eigenvectors are pure
  // gauge.  Replace them by the eta-Gram-Schmidt image of the coordinate
  // basis projected onto the eigenspace so the output is reproducible.
  const double lmax = out.lambda(0);
  int start = 0;
  while (start < n) {
    int end = start + 1;
    while (end < n && out.lambda(end - 1) - out.lambda(end) < kDegenerateSpectrumTol * lmax) {
      ++end;
    }
    if (end - start > 1) {
      out.degenerate = true;
      const Mat Vc = out.R.middleCols(start, end - start);
      const Mat P = Vc * Vc.transpose() * eta.matrix();
      Mat basis(n, end - start);
      int found = 0;
      for (int e = 0; e < n && found < end - start; ++e) {
        Vec v = P.col(e);
        for (int j = 0; j < found; ++j) {
          v -= (basis.col(j).dot(eta.matrix() * v)) * basis.col(j);
        }
        const double nrm = std::sqrt(std::max(0.0, v.dot(eta.matrix() * v)));
        if (nrm > 1e-6) basis.col(found++) = v / nrm;
      }
      out.R.middleCols(start, end - start) = basis;
    }
    start = end;
  }

  for (int k = 0; k < n; ++k) fix_sign(out.R.col(k));
  return out;
}

DeformationTensors deformation_tensors(const Placement& placement, const Metric& g,
                                       const Metric& eta) {
  const Mat& phi = placement.matrix();
  check_dims(phi, g, eta);
  const Mat phi_inv = phi.inverse();
  DeformationTensors t;
  t.G = sym(phi.transpose() * g.matrix() * phi);
  t.C = sym(phi_inv.transpose() * eta.matrix() * phi_inv);
  t.Ghat = eta.inverse() * t.G;
  t.Chat = g.inverse() * t.C;
  t.Ginv = sym(phi_inv * g.inverse() * phi_inv.transpose());
  t.Cinv = sym(phi * eta.inverse() * phi.transpose());
  return t;
}

std::vector<double> trace_powers(const Mat& M, int count) {
  std::vector<double> out;
  out.reserve(count);
  Mat power = M;
  for (int k = 1; k <= count; ++k) {
    out.push_back(power.trace());
    if (k < count) power = power * M;
  }
  return out;
}

InvariantSet deformation_invariants(const DeformationTensors& tensors) {
  const int n = static_cast<int>(tensors.G.rows());
  InvariantSet inv;
  inv.I = trace_powers(tensors.Ghat, n);

  // eta is recovered as G Ghat^-1 so the symmetric generalized solver applies.
  const Mat eta = tensors.G * tensors.Ghat.inverse();
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(tensors.G, sym(eta),
                                                   Eigen::EigenvaluesOnly);
  Vec ev = es.eigenvalues();
  std::sort(ev.data(), ev.data() + n, std::greater<>());
  inv.lambda = ev;
  inv.Q = ev.cwiseSqrt();
  inv.q = inv.Q.array().log().matrix();
  return inv;
}

PolarFactors polar_decompose(const Placement& placement, const Metric& g, const Metric& eta) {
  const Mat& phi = placement.matrix();
  check_dims(phi, g, eta);
  require_invertible(phi);
  // A = eta^-1/2 sqrt(eta^-1/2 G eta^-1/2) eta^1/2, independent of any
  // eigenvector gauge inside clusters.
  const Mat S = sym(eta.inverse_sqrt() * phi.transpose() * g.matrix() * phi * eta.inverse_sqrt());
  const Eigen::SelfAdjointEigenSolver<Mat> es(S);
  const Vec& lambda = es.eigenvalues();
  if (lambda.minCoeff() <= 1e-12 * lambda.maxCoeff()) {
    throw Error(ErrorCode::SingularPlacement, "Green tensor is not positive-definite");
  }
  const Mat& V = es.eigenvectors();
  const Vec Q = lambda.cwiseSqrt();

  PolarFactors f;
  f.A = eta.inverse_sqrt() * V * Q.asDiagonal() * V.transpose() * eta.sqrt();
  const Mat A_inv = eta.inverse_sqrt() * V * Q.cwiseInverse().asDiagonal() * V.transpose() * eta.sqrt();
  f.U = phi * A_inv;
  const Mat U_inv = eta.inverse() * f.U.transpose() * g.matrix();
  f.B = phi * U_inv;
  return f;
}

TwoPolarFactors two_polar_decompose(const Placement& placement, const Metric& g,
                                    const Metric& eta) {
  const Mat& phi = placement.matrix();
  const GreenSpectrum spec = green_spectrum(phi, g, eta);
  TwoPolarFactors f;
  const Vec Q = spec.lambda.cwiseSqrt();
  f.R = spec.R;
  f.D = Q.asDiagonal();
  f.L = phi * f.R * Q.cwiseInverse().asDiagonal();
  f.degenerate = spec.degenerate;
  return f;
}

Mat project_isometry(const Placement& phi, const Metric& g, const Metric& eta) {
  return polar_decompose(phi, g, eta).U;
}

}  // namespace affinebody
