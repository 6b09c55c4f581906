#include "affinebody/chart.hpp"

#include <Eigen/LU>
#include <cmath>

namespace affinebody {

namespace {

double fd_step(double x, double base) { return base * std::max(1.0, std::abs(x)); }

Vec bias(const std::vector<Mat>& dw, const Vec& qdot, int m) {
  // b_a = sum_ij d_j omega_ai qdot^i qdot^j
  Vec b = Vec::Zero(m);
  for (std::size_t j = 0; j < dw.size(); ++j) b += qdot(static_cast<int>(j)) * (dw[j] * qdot);
  return b;
}

void check_tangency(const Mat& w, const Vec& qdot) {
  const double viol = (w * qdot).norm();
  if (viol > 1e-8 * qdot.norm())
    throw Error(ErrorCode::InconsistentInitialData,
                "chart velocity violates the Pfaff constraint by " + std::to_string(viol));
}

PfaffAcceleration solve_saddle(const Mat& M, const Mat& w, const Vec& top, const Vec& bottom) {
  const int d = static_cast<int>(M.rows());
  const int m = static_cast<int>(w.rows());
  Mat K = Mat::Zero(d + m, d + m);
  K.topLeftCorner(d, d) = M;
  K.topRightCorner(d, m) = -w.transpose();
  K.bottomLeftCorner(m, d) = w;
  Vec rhs(d + m);
  rhs << top, bottom;
  const Eigen::FullPivLU<Mat> lu(K);
  if (lu.rank() < d + m)
    throw Error(ErrorCode::SingularSaddle, "chart saddle system is rank deficient");
  const Vec sol = lu.solve(rhs);
  return {sol.head(d), sol.tail(m)};
}

}  // namespace

std::vector<Mat> ChartSystem::pfaff_derivative(const Vec& q) const {
  std::vector<Mat> out;
  for (int j = 0; j < q.size(); ++j) {
    const double h = fd_step(q(j), 1e-6);
    Vec qp = q, qm = q;
    qp(j) += h;
    qm(j) -= h;
    out.push_back((pfaff(qp) - pfaff(qm)) / (2 * h));
  }
  return out;
}

Vec ChartSystem::momentum(const Vec& q, const Vec& qdot, double t) const {
  Vec p(qdot.size());
  for (int i = 0; i < qdot.size(); ++i) {
    const double h = fd_step(qdot(i), 1e-6);
    Vec vp = qdot, vm = qdot;
    vp(i) += h;
    vm(i) -= h;
    p(i) = (lagrangian(q, vp, t) - lagrangian(q, vm, t)) / (2 * h);
  }
  return p;
}

double ChartSystem::energy(const Vec& q, const Vec& qdot, double t) const {
  return qdot.dot(momentum(q, qdot, t)) - lagrangian(q, qdot, t);
}

PfaffAcceleration dalembert_pfaff_rhs(const ChartSystem& sys, const Vec& q, const Vec& qdot,
                                      double t, bool check) {
  const Mat w = sys.pfaff(q);
  if (check) check_tangency(w, qdot);
  const ChartDynamics dyn = sys.dynamics(q, qdot, t);
  const Vec b = bias(sys.pfaff_derivative(q), qdot, static_cast<int>(w.rows()));
  return solve_saddle(dyn.M, w, dyn.f, -b);
}

PfaffAcceleration vakonomic_pfaff_rhs(const ChartSystem& sys, const VakonomicState& s, double t,
                                      bool check) {
  const Mat w = sys.pfaff(s.q);
  const int m = static_cast<int>(w.rows());
  if (s.mu.size() != m)
    throw Error(ErrorCode::InvalidArgument, "multiplier count does not match the Pfaff rows");
  if (check) check_tangency(w, s.qdot);
  const ChartDynamics dyn = sys.dynamics(s.q, s.qdot, t);
  const std::vector<Mat> dw = sys.pfaff_derivative(s.q);
  // curl_i = sum_a mu_a sum_j (d_j omega_ai - d_i omega_aj) qdot^j
  Vec curl = Vec::Zero(sys.dim());
  const Vec muT = s.mu;
  for (int j = 0; j < sys.dim(); ++j) curl += s.qdot(j) * (dw[j].transpose() * muT);
  for (int i = 0; i < sys.dim(); ++i) curl(i) -= muT.dot(dw[i] * s.qdot);
  return solve_saddle(dyn.M, w, dyn.f + curl, -bias(dw, s.qdot, m));
}

LagrangianChart::LagrangianChart(int dim, Lagrangian L, Pfaff pfaff, PfaffDerivative dpfaff)
    : dim_(dim), L_(std::move(L)), pfaff_(std::move(pfaff)), dpfaff_(std::move(dpfaff)) {
  if (dim <= 0 || !L_ || !pfaff_)
    throw Error(ErrorCode::InvalidArgument, "chart needs a positive dimension, L and omega");
}

int LagrangianChart::constraint_count() const {
  return static_cast<int>(pfaff_(Vec::Zero(dim_)).rows());
}

std::vector<Mat> LagrangianChart::pfaff_derivative(const Vec& q) const {
  return dpfaff_ ? dpfaff_(q) : ChartSystem::pfaff_derivative(q);
}

ChartDynamics LagrangianChart::dynamics(const Vec& q, const Vec& qdot, double t) const {
  const int d = dim_;
  const double h = 1e-4;
  ChartDynamics out;
  out.M.resize(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      auto L = [&](double si, double sj) {
        Vec v = qdot;
        v(i) += si * h;
        v(j) += sj * h;
        return L_(q, v, t);
      };
      out.M(i, j) = (L(1, 1) - L(1, -1) - L(-1, 1) + L(-1, -1)) / (4 * h * h);
    }
  // f = dL/dq - (d/dq dL/dqdot) qdot - d/dt dL/dqdot
  out.f.resize(d);
  const double eps = 1e-5;
  const Vec pq_plus = momentum(q + eps * qdot, qdot, t);
  const Vec pq_minus = momentum(q - eps * qdot, qdot, t);
  const Vec pt_plus = momentum(q, qdot, t + eps);
  const Vec pt_minus = momentum(q, qdot, t - eps);
  for (int i = 0; i < d; ++i) {
    const double hq = fd_step(q(i), 1e-6);
    Vec qp = q, qm = q;
    qp(i) += hq;
    qm(i) -= hq;
    out.f(i) = (L_(qp, qdot, t) - L_(qm, qdot, t)) / (2 * hq);
  }
  out.f -= (pq_plus - pq_minus) / (2 * eps) + (pt_plus - pt_minus) / (2 * eps);
  return out;
}

EmbeddedChart::EmbeddedChart(Inertia inertia, ForceModel force, Metric g, Metric eta)
    : inertia_(std::move(inertia)), force_(std::move(force)), g_(std::move(g)), eta_(std::move(eta)) {
  inertia_.validate(eta_);
}

PhaseState EmbeddedChart::to_phase(const Vec& q, const Vec& qdot) const {
  const std::vector<Mat> E = tangents(q);
  PhaseState s;
  s.phi = embed(q);
  const int n = static_cast<int>(s.phi.rows());
  s.phidot = Mat::Zero(n, n);
  for (std::size_t i = 0; i < E.size(); ++i) s.phidot += qdot(static_cast<int>(i)) * E[i];
  s.x = Vec::Zero(n);
  s.xdot = Vec::Zero(n);
  return s;
}

ChartDynamics EmbeddedChart::dynamics(const Vec& q, const Vec& qdot, double t) const {
  const std::vector<Mat> E = tangents(q);
  const int d = static_cast<int>(E.size());
  const Mat& g = g_.matrix();
  const Mat& J = inertia_.J;
  auto pair = [&](const Mat& X, const Mat& Y) { return (X.transpose() * g * Y * J).trace(); };
  const PhaseState s = to_phase(q, qdot);
  const Mat N = torque(s, force_, g_, eta_, t);
  const Mat NgPhiInv = s.phi.inverse() * N * g;
  const Mat H = curvature(q, qdot);
  ChartDynamics out;
  out.M.resize(d, d);
  out.f.resize(d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) out.M(i, j) = pair(E[i], E[j]);
    out.f(i) = -pair(E[i], H) + (NgPhiInv * E[i]).trace();
  }
  return out;
}

double EmbeddedChart::lagrangian(const Vec& q, const Vec& qdot, double) const {
  const PhaseState s = to_phase(q, qdot);
  const double T = 0.5 * (s.phidot.transpose() * g_.matrix() * s.phidot * inertia_.J).trace();
  return T - potential_energy(s.phi, force_.potential, g_, eta_);
}

Vec EmbeddedChart::momentum(const Vec& q, const Vec& qdot, double t) const {
  return dynamics(q, qdot, t).M * qdot;
}

namespace {

Mat generator(int n, int i, int j) {
  Mat K = Mat::Zero(n, n);
  K(i, j) = 1.0;
  K(j, i) = -1.0;
  return K;
}

// Rotation generators in factor order: R = exp(q0 K0) exp(q1 K1) ...
std::vector<Mat> generators(int n) {
  if (n == 2) return {generator(2, 1, 0)};
  return {generator(3, 1, 0), generator(3, 0, 2), generator(3, 2, 1)};
}

Mat unit_rotation(const Mat& K, double theta) {
  const int n = static_cast<int>(K.rows());
  return Mat::Identity(n, n) + std::sin(theta) * K + (1 - std::cos(theta)) * K * K;
}

struct RotationJet {
  Mat R;
  std::vector<Mat> dR;
  std::vector<std::vector<Mat>> ddR;
};

RotationJet rotation_jet(int n, const Vec& q) {
  const std::vector<Mat> K = generators(n);
  const int na = static_cast<int>(K.size());
  std::vector<Mat> F(na);
  for (int k = 0; k < na; ++k) F[k] = unit_rotation(K[k], q(k));
  // Product with factor k replaced by F_k K_k^(mult_k).
  auto product = [&](const std::vector<int>& mult) {
    Mat P = Mat::Identity(n, n);
    for (int k = 0; k < na; ++k) {
      P = P * F[k];
      for (int r = 0; r < mult[k]; ++r) P = P * K[k];
    }
    return P;
  };
  RotationJet jet;
  jet.R = product(std::vector<int>(na, 0));
  jet.ddR.assign(na, std::vector<Mat>(na));
  for (int k = 0; k < na; ++k) {
    std::vector<int> mk(na, 0);
    mk[k] = 1;
    jet.dR.push_back(product(mk));
    for (int l = 0; l < na; ++l) {
      std::vector<int> ml = mk;
      ml[l] += 1;
      jet.ddR[k][l] = product(ml);
    }
  }
  return jet;
}

std::vector<std::pair<int, int>> sym_slots(int n) {
  std::vector<std::pair<int, int>> s;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) s.emplace_back(i, j);
  return s;
}

Mat sym_unit(int n, std::pair<int, int> ij) {
  Mat E = Mat::Zero(n, n);
  E(ij.first, ij.second) = 1.0;
  E(ij.second, ij.first) = 1.0;
  return E;
}

Vec axial(const Mat& S) {
  if (S.rows() == 2) return Vec::Constant(1, S(1, 0));
  Vec a(3);
  a << S(2, 1), S(0, 2), S(1, 0);
  return a;
}

}  // namespace

RotationlessChart::RotationlessChart(int n, Inertia inertia, ForceModel force, Metric g,
                                     Metric eta, Variant variant)
    : EmbeddedChart(std::move(inertia), std::move(force), std::move(g), std::move(eta)),
      n_(n),
      variant_(variant) {
  if (n != 2 && n != 3)
    throw Error(ErrorCode::InvalidArgument, "rotation-less chart supports n = 2 and n = 3");
  if (g_.dim() != n || eta_.dim() != n)
    throw Error(ErrorCode::InvalidArgument, "metric dimension does not match the chart");
}

int RotationlessChart::angle_count() const { return n_ == 2 ? 1 : 3; }
int RotationlessChart::dim() const { return n_ * n_; }
int RotationlessChart::constraint_count() const { return angle_count(); }

Mat RotationlessChart::rotation(const Vec& q) const { return rotation_jet(n_, q).R; }

Mat RotationlessChart::stretch(const Vec& q) const {
  const auto slots = sym_slots(n_);
  Mat A = Mat::Zero(n_, n_);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    A(slots[s].first, slots[s].second) = q(angle_count() + static_cast<int>(s));
    A(slots[s].second, slots[s].first) = q(angle_count() + static_cast<int>(s));
  }
  return A;
}

Mat RotationlessChart::embed(const Vec& q) const {
  return g_.inverse_sqrt() * rotation(q) * stretch(q) * eta_.sqrt();
}

std::vector<Mat> RotationlessChart::tangents(const Vec& q) const {
  const RotationJet jet = rotation_jet(n_, q);
  const Mat A = stretch(q);
  std::vector<Mat> E;
  for (const Mat& dR : jet.dR) E.push_back(g_.inverse_sqrt() * dR * A * eta_.sqrt());
  for (const auto& slot : sym_slots(n_))
    E.push_back(g_.inverse_sqrt() * jet.R * sym_unit(n_, slot) * eta_.sqrt());
  return E;
}

Mat RotationlessChart::curvature(const Vec& q, const Vec& qdot) const {
  const RotationJet jet = rotation_jet(n_, q);
  const int na = angle_count();
  const Mat Adot = stretch(qdot);
  Mat Rdd = Mat::Zero(n_, n_);
  Mat Rd = Mat::Zero(n_, n_);
  for (int k = 0; k < na; ++k) {
    Rd += qdot(k) * jet.dR[k];
    for (int l = 0; l < na; ++l) Rdd += qdot(k) * qdot(l) * jet.ddR[k][l];
  }
  return g_.inverse_sqrt() * (Rdd * stretch(q) + 2 * Rd * Adot) * eta_.sqrt();
}

Mat RotationlessChart::pfaff(const Vec& q) const {
  const int na = angle_count();
  Mat w = Mat::Zero(na, dim());
  if (variant_ == Variant::FrozenRotation) {
    w.leftCols(na).setIdentity();
    return w;
  }
  const RotationJet jet = rotation_jet(n_, q);
  const Mat Ainv = stretch(q).inverse();
  for (int k = 0; k < na; ++k) w.col(k) = axial(jet.R.transpose() * jet.dR[k]);
  const auto slots = sym_slots(n_);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const Mat Es = sym_unit(n_, slots[s]);
    w.col(na + static_cast<int>(s)) = axial(0.5 * (Es * Ainv - Ainv * Es));
  }
  return w;
}

std::vector<Mat> RotationlessChart::pfaff_derivative(const Vec& q) const {
  const int na = angle_count();
  std::vector<Mat> dw(dim(), Mat::Zero(na, dim()));
  if (variant_ == Variant::FrozenRotation) return dw;
  const RotationJet jet = rotation_jet(n_, q);
  const Mat Ainv = stretch(q).inverse();
  const auto slots = sym_slots(n_);
  for (int l = 0; l < na; ++l)
    for (int k = 0; k < na; ++k)
      dw[l].col(k) = axial(jet.dR[l].transpose() * jet.dR[k] + jet.R.transpose() * jet.ddR[k][l]);
  for (std::size_t t = 0; t < slots.size(); ++t) {
    const Mat Et = sym_unit(n_, slots[t]);
    const Mat dAinv = -Ainv * Et * Ainv;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const Mat Es = sym_unit(n_, slots[s]);
      dw[na + t].col(na + static_cast<int>(s)) = axial(0.5 * (Es * dAinv - dAinv * Es));
    }
  }
  return dw;
}

RotationlessChart::Coordinates RotationlessChart::from_phase(const PhaseState& state) const {
  const Mat phi1 = g_.sqrt() * state.phi * eta_.inverse_sqrt();
  const Metric id = Metric::identity(n_);
  const PolarFactors pf = polar_decompose(Placement(phi1), id, id);
  if (pf.U.determinant() <= 0)
    throw Error(ErrorCode::NegativeDeterminant, "rotation-less chart needs det phi > 0");
  Coordinates c;
  c.q.resize(dim());
  const Mat& R = pf.U;
  if (n_ == 2) {
    c.q(0) = std::atan2(R(1, 0), R(0, 0));
  } else {
    const double cb = std::hypot(R(0, 0), R(1, 0));
    if (cb < 1e-8) throw Error(ErrorCode::SingularPlacement, "Euler chart at gimbal lock");
    c.q(0) = std::atan2(R(1, 0), R(0, 0));
    c.q(1) = std::atan2(-R(2, 0), cb);
    c.q(2) = std::atan2(R(2, 1), R(2, 2));
  }
  const auto slots = sym_slots(n_);
  for (std::size_t s = 0; s < slots.size(); ++s)
    c.q(angle_count() + static_cast<int>(s)) = pf.A(slots[s].first, slots[s].second);

  const std::vector<Mat> E = tangents(c.q);
  Mat T(dim(), dim());
  Vec v(dim());
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      v(i * n_ + j) = state.phidot(i, j);
      for (int k = 0; k < dim(); ++k) T(i * n_ + j, k) = E[k](i, j);
    }
  c.qdot = T.partialPivLu().solve(v);
  return c;
}

Vec RotationlessChart::consistent_multipliers(const Vec& q, const Vec& qdot) const {
  const int na = angle_count();
  const Vec p = momentum(q, qdot, 0.0);
  const Mat wa = pfaff(q).leftCols(na);
  return wa.transpose().partialPivLu().solve(p.head(na));
}

}  // namespace affinebody
