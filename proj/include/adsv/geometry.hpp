/* geometry.hpp
 *
 * Double-null kinematics for spherically symmetric spacetimes with
 * Lambda < 0.  Metric convention:
 *
 *   g = -Omega^2(u,v) du dv + r^2(u,v) dS^2
 *
 * with area-radius r, Hawking mass m = (r/2)(1 + 4 Omega^-2 r_u r_v),
 * renormalised mass mt = m - Lambda r^3 / 6, compactified radius
 * rho = arctan(sqrt(-Lambda/3) r) and conformal infinity at
 * v - u = v_I = pi sqrt(-3/Lambda).
 *
 * Default normalisation Lambda = -3, so sqrt(-Lambda/3) = 1, v_I = pi.
 */
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace adsv {

inline constexpr double kPi = 3.14159265358979323846;

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

enum class HierarchyMode { exact, softened };

inline std::string to_string(HierarchyMode m) {
  return m == HierarchyMode::exact ? "exact-hierarchy" : "softened-hierarchy";
}

/// Cosmological constant plus derived boundary width v_I = pi sqrt(-3/Lambda).
struct Cosmology {
  double lambda = -3.0;
  double v_infinity = kPi;
  HierarchyMode mode = HierarchyMode::softened;

  // k = sqrt(-Lambda/3); the AdS curvature scale.  1 - Lambda r^2/3 = 1 + k^2 r^2.
  double k() const { return std::sqrt(-lambda / 3.0); }
  double sqrt_neg_lambda() const { return std::sqrt(-lambda); }

  static Cosmology make(double lambda, HierarchyMode mode = HierarchyMode::softened) {
    if (!(lambda < 0.0) || !std::isfinite(lambda))
      throw ConfigError("Cosmology: lambda must be a finite negative number");
    Cosmology c;
    c.lambda = lambda;
    c.v_infinity = kPi * std::sqrt(-3.0 / lambda);
    c.mode = mode;
    return c;
  }

  void validate() const {
    if (!(lambda < 0.0)) throw ConfigError("Cosmology: lambda must be negative");
    double expect = kPi * std::sqrt(-3.0 / lambda);
    if (std::abs(v_infinity - expect) > 1e-12 * expect)
      throw ConfigError("Cosmology: v_infinity inconsistent with lambda");
  }
};

/// Metric data at a single (u,v) point.
struct PointState {
  double r = 0.0;
  double omega2 = 1.0;
  double du_r = -0.5;
  double dv_r = 0.5;
  double m = 0.0;       // Hawking mass
  double mtilde = 0.0;  // m - Lambda r^3 / 6
};

inline double hawking_mass(double r, double du_r, double dv_r, double omega2) {
  if (!std::isfinite(r) || !std::isfinite(du_r) || !std::isfinite(dv_r) ||
      !std::isfinite(omega2))
    throw DomainError("hawking_mass: non-finite input");
  if (r < 0.0) throw DomainError("hawking_mass: r must be >= 0");
  if (!(omega2 > 0.0)) throw DomainError("hawking_mass: omega2 must be > 0");
  return 0.5 * r * (1.0 + 4.0 * du_r * dv_r / omega2);
}

inline double renormalised_mass(double m, double r, double lambda) {
  return m - lambda * r * r * r / 6.0;
}

inline PointState make_point_state(double r, double du_r, double dv_r, double omega2,
                                   double lambda) {
  PointState p;
  p.r = r;
  p.omega2 = omega2;
  p.du_r = du_r;
  p.dv_r = dv_r;
  p.m = hawking_mass(r, du_r, dv_r, omega2);
  p.mtilde = renormalised_mass(p.m, r, lambda);
  return p;
}

/// Exact AdS solution in the standard double-null chart:
///   r = sqrt(-3/Lambda) tan( (1/2) sqrt(-Lambda/3) (v-u) ),
///   Omega^2 = 1 - Lambda r^2 / 3,  dv_r = -du_r = Omega^2 / 2.
inline PointState ads_reference(double u, double v, double lambda) {
  double k = std::sqrt(-lambda / 3.0);
  double x = v - u;
  double v_inf = kPi / k;
  if (x < 0.0 || x >= v_inf)
    throw DomainError("ads_reference: v - u outside [0, v_infinity)");
  double r = std::tan(0.5 * k * x) / k;
  double omega2 = 1.0 + k * k * r * r;
  PointState p;
  p.r = r;
  p.omega2 = omega2;
  p.dv_r = 0.5 * omega2;
  p.du_r = -0.5 * omega2;
  p.m = lambda * r * r * r / 6.0;  // mtilde = 0 in vacuum AdS
  p.mtilde = 0.0;
  return p;
}

/// Compactified radius rho = arctan(sqrt(-Lambda/3) r) in [0, pi/2).
inline double compactify(double r, double lambda) {
  if (!(r >= 0.0)) throw DomainError("compactify: r must be >= 0");
  return std::atan(std::sqrt(-lambda / 3.0) * r);
}

inline double uncompactify(double rho, double lambda) {
  if (rho < 0.0 || rho >= 0.5 * kPi)
    throw DomainError("uncompactify: rho must lie in [0, pi/2)");
  return std::tan(rho) / std::sqrt(-lambda / 3.0);
}

/// Renormalised conformal factor Omega~^2 = Omega^2 / (1 - Lambda r^2/3).
inline double omega_tilde_sq(double omega2, double r, double lambda) {
  return omega2 / (1.0 - lambda * r * r / 3.0);
}

/// Trapped-sphere predicate 2m/r > 1 (strict); false on the axis r = 0
/// where smoothness forces m = O(r^3).
inline bool is_trapped(const PointState& p) {
  if (p.r == 0.0) return false;
  return 2.0 * p.m / p.r > 1.0;
}

/// Uniform double-null grid with spacing h = v_I / K, so that the axis
/// {u = v} and conformal infinity {v = u + v_I} are grid diagonals.
struct NullGrid {
  double h = 0.0;
  int K = 0;  // points per v_I interval
  double v_infinity = kPi;

  static NullGrid make(const Cosmology& cosmo, int K) {
    if (K < 4) throw ConfigError("NullGrid: need K >= 4 points per v_I");
    NullGrid g;
    g.K = K;
    g.v_infinity = cosmo.v_infinity;
    g.h = cosmo.v_infinity / K;
    return g;
  }

  double u_of(int n) const { return n * h; }
  double v_of(int j) const { return j * h; }
  /// Domain triangle {u < v < u + v_I}.
  bool contains(double u, double v) const {
    return v > u && v - u < v_infinity;
  }
};

}  // namespace adsv
