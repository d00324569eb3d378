/* geodesic.hpp
 *
 * Future-directed null geodesics in a spherically symmetric background.
 * With A = Omega^2 p^u, B = Omega^2 p^v and tau = u + v as the curve
 * parameter, the reduced flow is regular on the whole domain including
 * conformal infinity:
 *
 *   du/dtau = A/(A+B),   dv/dtau = B/(A+B),
 *   dA/dtau = (d_v log Omega^2 - 2 d_v r / r) * AB/(A+B),
 *   dB/dtau = (d_u log Omega^2 - 2 d_u r / r) * AB/(A+B),
 *
 * using the null shell A B = Omega^2 l^2 / r^2 (re-imposed by projection
 * after every step).  Angular momentum l and the statistical weight are
 * never mutated.  Reflection off v - u = v_I swaps (A, B) (the swap of
 * (Omega~^2 p^u, Omega~^2 p^v) in the conformal frame); radial rays pass
 * through the axis by the same swap at v - u = 0.
 */
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "adsv/background.hpp"
#include "adsv/geometry.hpp"

namespace adsv {

struct Particle {
  double u = 0.0, v = 0.0;
  double omega2_pu = 0.0;  // A = Omega^2 p^u
  double omega2_pv = 0.0;  // B = Omega^2 p^v
  double l = 0.0;
  double weight = 0.0;     // conserved sample count
  double fbar = 0.0;       // Vlasov value carried along the trajectory
  int generation = 0;      // reflection count
  int beam_id = -1;

  double energy() const { return 0.5 * (omega2_pu + omega2_pv); }
  double pu(double omega2) const { return omega2_pu / omega2; }
  double pv(double omega2) const { return omega2_pv / omega2; }
};

/// Build an on-shell particle from coordinate momenta (p^u, p^v) at (u,v).
Particle make_particle(double u, double v, double pu, double pv, double l,
                       double weight, const Background& bg);

struct StepControl {
  double ds_max = 0.02;        // max tau step, in units of v_I
  double safety = 0.2;         // fraction of the local relative-change scale
  double axis_guard = 1e-6;    // in units of v_I; rejects l>0 steps below it
  double shell_tol = 1e-12;
  double land_tol = 1e-12;     // event landing tolerance, relative
  long max_substeps = 4000000;
};

enum class TargetKind { u_equals, v_equals, tau_equals };
struct AdvanceTarget {
  TargetKind kind = TargetKind::u_equals;
  double value = 0.0;
};

enum class EventType { reflection, axis_crossing };
struct GeodesicEvent {
  EventType type;
  double s, u, v, energy;
  int generation;
};

struct TrajPoint {
  double s = 0.0, u = 0.0, v = 0.0;
  double omega2_pu = 0.0, omega2_pv = 0.0;
  double r = 0.0, energy = 0.0, mtilde = 0.0;
  int generation = 0;
};

struct Trajectory {
  std::vector<TrajPoint> pts;
  std::vector<GeodesicEvent> events;
  int stride = 1;  // record every stride-th accepted step
};

struct AdvanceDiag {
  long steps = 0;
  int reflections = 0;
  double max_shell_residual = 0.0;  // relative to (A+B)^2, after projection
  double min_r = INFINITY;
};

enum class AdvanceStatus { reached_target, max_steps };

/// Integrate until the target coordinate is hit (events handled en route).
/// direction=-1 integrates past-directed (used by the reversibility checks).
AdvanceStatus advance(Particle& p, const Background& bg, const AdvanceTarget& target,
                      const StepControl& ctl, Trajectory* traj = nullptr,
                      AdvanceDiag* diag = nullptr, int direction = +1);

/// Single RK4 step of size dtau (signed); exposed for fine-step oracles.
void step_geodesic(Particle& p, const Background& bg, double dtau);

/// Reflection off conformal infinity: requires v-u = v_I within tolerance.
void reflect_at_infinity(Particle& p, double v_inf, double tol = 1e-6);

/// Both sides of the log-energy identity
///   log(Omega^2 p^u)(s) - log(Omega^2 p^u)(0)
///     = int int ( (1/2)(6 mt/r - 1)/r^2 Omega^2 - 24 pi T_uv ) du dv
///       + int (d_v log Omega^2 - 2 d_v r / r)(u1(v), v) dv
/// over the region between the crooked line u1(v) = max(u0, v - v_I) and the
/// trajectory.  Returns |LHS - RHS|.
double audit_log_energy_identity(const Trajectory& traj, const Background& bg,
                                 const std::function<double(double, double)>& T_uv,
                                 int quad_n = 256);

struct CorridorParams {
  double c_min = 0.5;
  double kappa = 4.0;
  double delta0 = 0.02;            // smallness hypothesis on 2 mt / r
  double energy_ratio_bound = 1.5; // between consecutive reflections
};

struct CorridorReport {
  bool hypothesis_ok = true;
  bool min_r_ok = true;
  bool corridor_ok = true;
  bool energy_ok = true;
  double min_r = INFINITY;
  double min_r_bound = 0.0;
  double corridor_halfwidth = 0.0;
  std::vector<std::string> violations;
  bool all_ok() const { return hypothesis_ok && min_r_ok && corridor_ok && energy_ok; }
};

/// Containment/energy audit for a trajectory launched ingoing near v = v0.
CorridorReport corridor_check(const Trajectory& traj, double l, double v0,
                              const CorridorParams& prm, double v_inf);

}  // namespace adsv
