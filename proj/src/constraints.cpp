#include "affinebody/constraints.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>

namespace affinebody {

const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::Free: return "free";
    case ConstraintKind::Rigid: return "rigid";
    case ConstraintKind::ShapePreserving: return "shape_preserving";
    case ConstraintKind::Incompressible: return "incompressible";
    case ConstraintKind::SpatialRotationless: return "spatial_rotationless";
    case ConstraintKind::MaterialRotationless: return "material_rotationless";
  }
  return "unknown";
}

const char* to_string(Procedure procedure) {
  return procedure == Procedure::DAlembert ? "dalembert" : "vakonomic";
}

ConstraintKind constraint_kind_from_string(const std::string& name) {
  for (auto k : {ConstraintKind::Free, ConstraintKind::Rigid, ConstraintKind::ShapePreserving,
                 ConstraintKind::Incompressible, ConstraintKind::SpatialRotationless,
                 ConstraintKind::MaterialRotationless})
    if (name == to_string(k)) return k;
  throw Error(ErrorCode::InvalidArgument, "unknown constraint kind '" + name + "'");
}

Procedure procedure_from_string(const std::string& name) {
  if (name == "dalembert") return Procedure::DAlembert;
  if (name == "vakonomic") return Procedure::Vakonomic;
  throw Error(ErrorCode::InvalidArgument, "unknown procedure '" + name + "'");
}

bool is_supported(ConstraintKind kind, Procedure procedure) {
  if (procedure == Procedure::DAlembert) return true;
  return kind == ConstraintKind::Free || kind == ConstraintKind::SpatialRotationless;
}

namespace {

Mat unit(int n, int i, int j) {
  Mat E = Mat::Zero(n, n);
  E(i, j) = 1.0;
  return E;
}

// Basis of the constrained quantity Xi (Omega or OmegaHat).
std::vector<Mat> xi_basis(ConstraintKind kind, int n, const Metric& g, const Metric& eta) {
  std::vector<Mat> B;
  switch (kind) {
    case ConstraintKind::Free:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B.push_back(unit(n, i, j));
      break;
    case ConstraintKind::Rigid:
    case ConstraintKind::ShapePreserving:
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) B.push_back(g.inverse() * (unit(n, j, i) - unit(n, i, j)));
      if (kind == ConstraintKind::ShapePreserving) B.push_back(Mat::Identity(n, n));
      break;
    case ConstraintKind::Incompressible:
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j) B.push_back(unit(n, i, j));
      for (int i = 0; i + 1 < n; ++i) B.push_back(unit(n, i, i) - unit(n, n - 1, n - 1));
      break;
    case ConstraintKind::SpatialRotationless:
    case ConstraintKind::MaterialRotationless: {
      const Mat& inv = kind == ConstraintKind::SpatialRotationless ? g.inverse() : eta.inverse();
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) B.push_back(inv * (unit(n, i, j) + unit(n, j, i)));
      break;
    }
  }
  return B;
}

// Orthonormal Z with Tr(Z B) = 0 for all B in the span.
std::vector<Mat> annihilating_forms(const std::vector<Mat>& B, int n) {
  const int nn = n * n;
  Mat rows = Mat::Zero(std::max<int>(1, static_cast<int>(B.size())), nn);
  for (std::size_t k = 0; k < B.size(); ++k) {
    const Mat Bt = B[k].transpose();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) rows(static_cast<int>(k), i * n + j) = Bt(i, j);
  }
  Eigen::JacobiSVD<Mat> svd(rows, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  const double tol = 1e-12 * std::max(1.0, s.size() ? s(0) : 0.0);
  int rank = 0;
  if (!B.empty())
    for (int k = 0; k < s.size(); ++k)
      if (s(k) > tol) ++rank;
  std::vector<Mat> Z;
  for (int k = rank; k < nn; ++k) {
    Mat z(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) z(i, j) = svd.matrixV()(i * n + j, k);
    Z.push_back(z);
  }
  return Z;
}

Mat xi_of(const VelocitySubspace& S, const PhaseState& state) {
  const AffineVelocities v = affine_velocities(state);
  return S.material ? v.OmegaHat : v.Omega;
}

}  // namespace

VelocitySubspace admissible_subspace(ConstraintKind kind, const Mat& phi, const Metric& g,
                                     const Metric& eta) {
  require_invertible(phi);
  const int n = static_cast<int>(phi.rows());
  VelocitySubspace S;
  S.material = kind == ConstraintKind::MaterialRotationless;
  const std::vector<Mat> B = xi_basis(kind, n, g, eta);
  S.forms = annihilating_forms(B, n);
  const Eigen::PartialPivLU<Mat> lu(phi);
  const Mat phi_inv = lu.inverse();
  for (const Mat& b : B) S.basis.push_back(S.material ? Mat(phi * b * phi_inv) : b);
  for (const Mat& z : S.forms)
    S.annihilator_basis.push_back(S.material ? Mat(phi * z * phi_inv * g.inverse())
                                             : Mat(z * g.inverse()));
  return S;
}

double velocity_violation(const VelocitySubspace& S, const PhaseState& state) {
  const Mat xi = xi_of(S, state);
  double worst = 0.0;
  for (const Mat& z : S.forms) worst = std::max(worst, std::abs((z * xi).trace()));
  return worst;
}

Mat project_velocity(const VelocitySubspace& S, const PhaseState& state) {
  Mat xi = xi_of(S, state);
  for (const Mat& z : S.forms) xi -= (z * xi).trace() * z.transpose();
  return S.material ? Mat(state.phi * xi) : Mat(xi * state.phi);
}

ConstrainedAcceleration dalembert_rhs(const PhaseState& state, const Inertia& inertia,
                                      const ForceModel& force, ConstraintKind kind,
                                      const Metric& g, const Metric& eta, double t,
                                      const DAlembertOptions& options) {
  const int n = state.dim();
  const VelocitySubspace S = admissible_subspace(kind, state.phi, g, eta);
  const AffineVelocities v = affine_velocities(state);
  const Mat& xi = S.material ? v.OmegaHat : v.Omega;
  if (options.check_consistency) {
    const double viol = velocity_violation(S, state);
    if (viol > 1e-8 * xi.norm())
      throw Error(ErrorCode::InconsistentInitialData,
                  std::string("velocity violates the ") + to_string(kind) +
                      " constraint by " + std::to_string(viol));
  }

  const Mat N = torque(state, force, g, eta, t);
  const int nn = n * n;
  const int m = static_cast<int>(S.forms.size());
  const Mat PJ = state.phi * inertia.J;
  const Mat phi_inv = state.phi.inverse();
  Mat K = Mat::Zero(nn + m, nn + m);
  Vec rhs = Vec::Zero(nn + m);
  // Unknowns: phiddot(j, B) at j*n + B, then the multipliers.
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const int row = i * n + k;
      rhs(row) = N(i, k);
      for (int B = 0; B < n; ++B) K(row, k * n + B) = PJ(i, B);
      for (int l = 0; l < m; ++l) K(row, nn + l) = -S.annihilator_basis[l](i, k);
    }
  const Mat xi2 = xi * xi;
  for (int l = 0; l < m; ++l) {
    const Mat& Z = S.forms[l];
    // Tr(Z phiddot phi^-1) or Tr(Z phi^-1 phiddot) as a linear form in phiddot.
    const Mat coef = S.material ? Mat(Z * phi_inv) : Mat(phi_inv * Z);
    for (int j = 0; j < n; ++j)
      for (int B = 0; B < n; ++B) K(nn + l, j * n + B) = coef(B, j);
    rhs(nn + l) = (Z * xi2).trace();
  }
  const Eigen::FullPivLU<Mat> lu(K);
  if (lu.rank() < K.rows())
    throw Error(ErrorCode::SingularSaddle, "constrained balance system is rank deficient");
  const Vec sol = lu.solve(rhs);

  ConstrainedAcceleration out;
  out.phiddot.resize(n, n);
  for (int j = 0; j < n; ++j)
    for (int B = 0; B < n; ++B) out.phiddot(j, B) = sol(j * n + B);
  out.lambda = sol.tail(m);
  out.reaction = Mat::Zero(n, n);
  for (int l = 0; l < m; ++l) out.reaction += out.lambda(l) * S.annihilator_basis[l];
  out.xddot = g.inverse() * translational_force(state, force, t) / inertia.m;
  return out;
}

double reaction_free_residual(ConstraintKind kind, const Mat& phi, const Mat& phiddot,
                              const Mat& N, const Mat& J, const Metric& g, const Metric& eta) {
  const int n = static_cast<int>(phi.rows());
  const Mat D = phi * J * phiddot.transpose() - N;
  const double scale = std::max({1.0, N.norm(), (phi * J * phiddot.transpose()).norm()});
  double r = 0.0;
  switch (kind) {
    case ConstraintKind::Free: r = D.norm(); break;
    case ConstraintKind::Rigid: r = (D - D.transpose()).norm(); break;
    case ConstraintKind::ShapePreserving:
      r = (D - D.transpose()).norm() + std::abs((g.matrix() * D).trace());
      break;
    case ConstraintKind::Incompressible:
      r = (D - (g.matrix() * D).trace() / n * g.inverse()).norm();
      break;
    case ConstraintKind::SpatialRotationless: r = (D + D.transpose()).norm(); break;
    case ConstraintKind::MaterialRotationless: {
      const Mat Cinv = phi * eta.inverse() * phi.transpose();
      const Mat X = D * g.matrix() * Cinv;
      r = (X + X.transpose()).norm();
      break;
    }
  }
  return r / scale;
}

double constraint_residual(ConstraintKind kind, const PhaseState& state,
                           const PhaseState& reference, const Metric& g, const Metric& eta) {
  const int n = state.dim();
  const Mat G = state.phi.transpose() * g.matrix() * state.phi;
  const Mat G0 = reference.phi.transpose() * g.matrix() * reference.phi;
  switch (kind) {
    case ConstraintKind::Free: return 0.0;
    case ConstraintKind::Rigid: return (G - G0).norm();
    case ConstraintKind::ShapePreserving: {
      const double c2 = (G0.inverse() * G).trace() / n;
      return (G - c2 * G0).norm();
    }
    case ConstraintKind::Incompressible:
      return std::abs(state.phi.determinant() - reference.phi.determinant());
    case ConstraintKind::SpatialRotationless:
    case ConstraintKind::MaterialRotationless:
      return velocity_violation(admissible_subspace(kind, state.phi, g, eta), state);
  }
  return 0.0;
}

}  // namespace affinebody
