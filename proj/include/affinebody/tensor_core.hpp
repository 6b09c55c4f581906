#pragma once

// Metric-aware tensor algebra for affine placements.
//
// Index layout: a placement phi is stored with the spatial index as the row
// and the material index as the column (phi(i, A)).  Spatial indices are
// paired with the metric g, material ones with eta.  Covariant and
// contravariant inverses are stored as separate fields; nothing in the
// library shifts an index implicitly.

#include <Eigen/Dense>

#include <vector>

#include "affinebody/errors.hpp"

namespace affinebody {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Relative gap below which two eigenvalues of the Green operator are treated
/// as coincident.
inline constexpr double kDegenerateSpectrumTol = 1e-9;

/// Symmetric positive-definite metric (g on the physical space, eta on the
/// material space).  Validated on construction; caches its inverse.
class Metric {
 public:
  explicit Metric(Mat matrix);

  static Metric identity(int n) { return Metric(Mat::Identity(n, n)); }

  int dim() const { return static_cast<int>(matrix_.rows()); }
  const Mat& matrix() const { return matrix_; }
  const Mat& inverse() const { return inverse_; }
  /// Symmetric square root; maps the metric onto the identity.
  const Mat& sqrt() const { return sqrt_; }
  const Mat& inverse_sqrt() const { return inverse_sqrt_; }
  double determinant() const { return det_; }
  bool is_identity(double tol = 0.0) const;

 private:
  Mat matrix_;
  Mat inverse_;
  Mat sqrt_;
  Mat inverse_sqrt_;
  double det_ = 1.0;
};

/// Invertible linear part of an affine configuration.
class Placement {
 public:
  explicit Placement(Mat phi);

  int dim() const { return static_cast<int>(phi_.rows()); }
  const Mat& matrix() const { return phi_; }
  operator const Mat&() const { return phi_; }

 private:
  Mat phi_;
};

/// Throws SingularPlacement when |det phi| < 1e-12 * ||phi||^n.
void require_invertible(const Mat& phi);

struct DeformationTensors {
  Mat G;     // Green, covariant: phi^T g phi
  Mat C;     // Cauchy, covariant: phi^-T eta phi^-1
  Mat Ghat;  // eta^-1 G
  Mat Chat;  // g^-1 C
  Mat Ginv;  // contravariant inverse of G
  Mat Cinv;  // contravariant inverse of C, equal to phi eta^-1 phi^T
};

struct InvariantSet {
  std::vector<double> I;  // I[k-1] = Tr(Ghat^k), k = 1..n
  Vec lambda;             // eigenvalues of Ghat, descending
  Vec Q;                  // sqrt(lambda)
  Vec q;                  // log(Q)
};

struct PolarFactors {
  Mat U;  // (eta, g)-isometry
  Mat A;  // eta-symmetric positive factor, phi = U A
  Mat B;  // g-symmetric positive factor, phi = B U
};

struct TwoPolarFactors {
  Mat L;  // g-orthonormal columns, eigenvectors of Chat
  Mat D;  // diagonal, descending
  Mat R;  // eta-orthonormal columns, eigenvectors of Ghat
  bool degenerate = false;

  Vec Q() const { return D.diagonal(); }
  /// R^-1 = R^T eta.
  Mat R_inverse(const Metric& eta) const { return R.transpose() * eta.matrix(); }
  /// L^-1 = L^T g.
  Mat L_inverse(const Metric& g) const { return L.transpose() * g.matrix(); }
};

/// Eigen-decomposition of Ghat with the library's gauge: eigenvalues sorted
/// descending, each eigenvector eta-normalized with its first significant
/// entry positive.
struct GreenSpectrum {
  Vec lambda;
  Mat R;
  bool degenerate = false;
};

GreenSpectrum green_spectrum(const Mat& phi, const Metric& g, const Metric& eta);

DeformationTensors deformation_tensors(const Placement& phi, const Metric& g,
                                       const Metric& eta);

InvariantSet deformation_invariants(const DeformationTensors& tensors);

PolarFactors polar_decompose(const Placement& phi, const Metric& g, const Metric& eta);

TwoPolarFactors two_polar_decompose(const Placement& phi, const Metric& g,
                                    const Metric& eta);

/// Nearest isometry (the U factor of the polar splitting).
Mat project_isometry(const Placement& phi, const Metric& g, const Metric& eta);

/// Power sums Tr(M^k) for k = 1..count.
std::vector<double> trace_powers(const Mat& M, int count);

// Small matrix helpers shared across modules.
inline Mat sym(const Mat& X) { return 0.5 * (X + X.transpose()); }
inline Mat skew(const Mat& X) { return 0.5 * (X - X.transpose()); }
/// eta-adjoint of an operator on the material space: eta^-1 X^T eta.
inline Mat adjoint(const Mat& X, const Metric& metric) {
  return metric.inverse() * X.transpose() * metric.matrix();
}

}  // namespace affinebody
