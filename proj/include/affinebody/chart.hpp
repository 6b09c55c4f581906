#pragma once

// Generic Pfaffian constraint engines on a coordinate chart q, and the
// rotation-less chart of an affine body.

#include <functional>
#include <memory>
#include <vector>

#include "affinebody/dynamics.hpp"

namespace affinebody {

/// Euler-Lagrange operator of a chart Lagrangian: EL(q) = M qddot - f.
struct ChartDynamics {
  Mat M;
  Vec f;
};

/// Mechanical system on a chart with Pfaff constraints omega(q) qdot = 0.
class ChartSystem {
 public:
  virtual ~ChartSystem() = default;

  virtual int dim() const = 0;
  virtual int constraint_count() const = 0;
  virtual ChartDynamics dynamics(const Vec& q, const Vec& qdot, double t) const = 0;
  virtual double lagrangian(const Vec& q, const Vec& qdot, double t) const = 0;
  /// m x dim matrix omega_{a i}.
  virtual Mat pfaff(const Vec& q) const = 0;
  /// Entry j is d omega / d q^j.  Central differences unless overridden.
  virtual std::vector<Mat> pfaff_derivative(const Vec& q) const;

  /// qdot . dL/dqdot - L.
  double energy(const Vec& q, const Vec& qdot, double t) const;
  /// dL/dqdot, by central differences unless overridden.
  virtual Vec momentum(const Vec& q, const Vec& qdot, double t) const;
};

struct VakonomicState {
  Vec q;
  Vec qdot;
  Vec mu;
};

struct PfaffAcceleration {
  Vec qddot;
  Vec lambda;  // reaction multipliers, or mudot for the vakonomic engine
};

/// d'Alembert: M qddot - f = omega^T lambda, omega qddot = -(d omega . qdot) qdot.
/// `check` enables the InconsistentInitialData test on omega qdot.
PfaffAcceleration dalembert_pfaff_rhs(const ChartSystem& sys, const Vec& q, const Vec& qdot,
                                      double t = 0.0, bool check = true);

/// Vakonomic: M qddot - f = omega^T mudot + mu_a (d_j omega_ai - d_i omega_aj) qdot^j,
/// with the same differentiated constraint.  `lambda` of the result is mudot.
PfaffAcceleration vakonomic_pfaff_rhs(const ChartSystem& sys, const VakonomicState& s,
                                      double t = 0.0, bool check = true);

/// Chart system from a Lagrangian callable, differentiated numerically.
class LagrangianChart : public ChartSystem {
 public:
  using Lagrangian = std::function<double(const Vec& q, const Vec& qdot, double t)>;
  using Pfaff = std::function<Mat(const Vec& q)>;
  using PfaffDerivative = std::function<std::vector<Mat>(const Vec& q)>;

  LagrangianChart(int dim, Lagrangian L, Pfaff pfaff, PfaffDerivative dpfaff = nullptr);

  int dim() const override { return dim_; }
  int constraint_count() const override;
  ChartDynamics dynamics(const Vec& q, const Vec& qdot, double t) const override;
  double lagrangian(const Vec& q, const Vec& qdot, double t) const override { return L_(q, qdot, t); }
  Mat pfaff(const Vec& q) const override { return pfaff_(q); }
  std::vector<Mat> pfaff_derivative(const Vec& q) const override;

 private:
  int dim_;
  Lagrangian L_;
  Pfaff pfaff_;
  PfaffDerivative dpfaff_;
};

/// Chart given by an embedding q -> phi(q) of the configuration space of an
/// affine body (translation excluded), with the body's kinetic energy and
/// force model.
class EmbeddedChart : public ChartSystem {
 public:
  EmbeddedChart(Inertia inertia, ForceModel force, Metric g, Metric eta);

  virtual Mat embed(const Vec& q) const = 0;
  /// d phi / d q^i.
  virtual std::vector<Mat> tangents(const Vec& q) const = 0;
  /// sum_jk d^2 phi / dq^j dq^k qdot^j qdot^k.
  virtual Mat curvature(const Vec& q, const Vec& qdot) const = 0;

  ChartDynamics dynamics(const Vec& q, const Vec& qdot, double t) const override;
  double lagrangian(const Vec& q, const Vec& qdot, double t) const override;
  Vec momentum(const Vec& q, const Vec& qdot, double t) const override;

  /// Phase state (x = xdot = 0) of chart coordinates.
  PhaseState to_phase(const Vec& q, const Vec& qdot) const;

  const Inertia& inertia() const { return inertia_; }
  const ForceModel& force() const { return force_; }
  const Metric& g() const { return g_; }
  const Metric& eta() const { return eta_; }

 protected:
  Inertia inertia_;
  ForceModel force_;
  Metric g_;
  Metric eta_;
};

/// Chart phi = g^-1/2 R(angles) A eta^1/2 with A symmetric positive definite
/// and R a proper rotation: one angle for n = 2, Z-Y-X Euler angles for n = 3.
/// q holds the angles followed by the upper triangle of A in row order.
///
/// The Pfaff form is the axial part of R^T Rdot + (Adot A^-1 - A^-1 Adot)/2,
/// which vanishes exactly when g Omega is symmetric.  The FrozenRotation
/// variant constrains the angle rates to zero instead (an exact form).
class RotationlessChart : public EmbeddedChart {
 public:
  enum class Variant { Rotationless, FrozenRotation };

  RotationlessChart(int n, Inertia inertia, ForceModel force, Metric g, Metric eta,
                    Variant variant = Variant::Rotationless);

  int dim() const override;
  int constraint_count() const override;
  Mat pfaff(const Vec& q) const override;
  std::vector<Mat> pfaff_derivative(const Vec& q) const override;

  Mat embed(const Vec& q) const override;
  std::vector<Mat> tangents(const Vec& q) const override;
  Mat curvature(const Vec& q, const Vec& qdot) const override;

  int angle_count() const;
  Mat rotation(const Vec& q) const;
  /// Symmetric factor A in the orthonormalized frames.
  Mat stretch(const Vec& q) const;

  struct Coordinates {
    Vec q;
    Vec qdot;
  };
  /// Chart coordinates of a phase state (det phi > 0).  Throws
  /// SingularPlacement at gimbal lock for n = 3.
  Coordinates from_phase(const PhaseState& state) const;

  /// Multipliers for which the vakonomic equations coincide with the
  /// Euler-Lagrange equations of the Lagrangian restricted by the constraint:
  /// omega_angle^T mu = p_angle.  For n = 2 this is mu = p_theta.
  Vec consistent_multipliers(const Vec& q, const Vec& qdot) const;

 private:
  int n_;
  Variant variant_;
};

}  // namespace affinebody
