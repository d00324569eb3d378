/* vlasov.hpp
 *
 * Characteristic evolution of the coupled Einstein--massless Vlasov system,
 * marching u-slice by u-slice at unit CFL (du = dv = h).  Slice variables
 * are chosen regular on the whole triangle including conformal infinity:
 *
 *   rho  = arctan(k r),            k = sqrt(-Lambda/3)
 *   w    = log Omega~^2,           Omega~^2 = Omega^2 / (1 + k^2 r^2)
 *   phi  = Omega^-2 d_v r
 *   psit = -d_u r / (1 + k^2 r^2)
 *   mt   = renormalised Hawking mass
 *
 * Per step: (1) particles are pushed through the strip against the frozen
 * slice background (linear Taylor in u), reflecting off v - u = v_I;
 * (2) moments tau_ab = r^2 T_ab are deposited with a cloud-in-cell kernel
 * from conserved per-particle counts; (3) w is advanced by the trapezoidal
 * u-integral of d_u w, itself obtained each slice by integrating
 * d_v(d_u w) = RHS of the renormalised Omega~ wave equation outward from
 * the axis with the Neumann anchor d_u w = d_v w there; (4) the v-ODEs
 *
 *   d_v rho  = k Omega~^2 phi
 *   d_v phi  = -4 pi tau_vv / (r Omega~^2 S),          S = 1 + k^2 r^2
 *   d_v psit = Omega~^2 mt (1/(2 r^2) + k^2/S) - 4 pi tau_uv / (r S)
 *   d_v mt   = 8 pi ( psit tau_vv / Omega~^2 + phi tau_uv )
 *
 * are integrated outward from the axis (rho = mt = 0, phi = e^{-w/2}/2,
 * psit = e^{w/2}/2).  The trapped indicator is 2m/r = 1 - 4 S phi psit;
 * the u-constraint is monitored, never enforced.
 */
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adsv/background.hpp"
#include "adsv/geodesic.hpp"
#include "adsv/initial_data.hpp"

namespace adsv {

struct FieldSlice {
  double u = 0.0;
  int n = 0;         // global slice index (axis at global v-index n)
  double h = 0.0;
  double v_inf = kPi;
  double k = 1.0;

  // primary arrays, local index j = 0..K, v = u + j h
  std::vector<double> rho, w, phi, psit, mtilde;
  // deposited moments tau_ab = r^2 T_ab and currents nbar_a = r^2 N_a
  std::vector<double> tau_uu, tau_uv, tau_vv, n_u, n_v;
  // per-slice derivative arrays
  std::vector<double> dv_w, du_w, du_mtilde;

  int K() const { return static_cast<int>(rho.size()) - 1; }
  double v_of(int j) const { return u + j * h; }

  double r(int j) const { return std::tan(std::min(rho[j], 0.5 * kPi * (1 - 1e-13))) / k; }
  double S(int j) const { double rr = r(j); return 1.0 + k * k * rr * rr; }
  double omega_tilde2(int j) const { return std::exp(w[j]); }
  double omega2(int j) const { return omega_tilde2(j) * S(j); }
  double dv_r(int j) const { return S(j) * omega_tilde2(j) * phi[j]; }
  double du_r(int j) const { return -S(j) * psit[j]; }
  double mass_ratio(int j) const { return 1.0 - 4.0 * S(j) * phi[j] * psit[j]; }  // 2m/r
  double T_uu(int j) const { double rr = r(j); return rr > 0 ? tau_uu[j] / (rr * rr) : 0.0; }
  double T_uv(int j) const { double rr = r(j); return rr > 0 ? tau_uv[j] / (rr * rr) : 0.0; }
  double T_vv(int j) const { double rr = r(j); return rr > 0 ? tau_vv[j] / (rr * rr) : 0.0; }
  double mass_at_infinity() const { return mtilde.back(); }
  /// mt recomputed from the algebraic Hawking-mass formula (consistency route)
  double mtilde_algebraic(int j) const {
    double rr = r(j);
    return 0.5 * rr * mass_ratio(j) + 0.5 * k * k * rr * rr * rr;
  }
};

struct TrappedEvent {
  double u = 0.0, v = 0.0;
};

struct MonitorBreach {
  std::string kind;
  double u = 0.0, value = 0.0, threshold = 0.0;
};

struct EvolutionMonitor {
  double eta0 = 0.1;
  double cap_u_norm = INFINITY;  // flux-norm cap (sigma_eps^-1 analog)
  double cap_t_norm = INFINITY;  // wide-domain cap (delta_eps^-1 analog)
  double noise_tol = 1e-6;

  double max_mass_ratio = -INFINITY;
  double max_flux_norm = 0.0;
  double boundary_mass_ref = 0.0;
  double boundary_mass_drift = 0.0;   // max |mt_I - ref| over the run
  double boundary_rho_drift = 0.0;    // max |rho(v_I) - pi/2| before clamping
  double u_constraint_residual = 0.0; // max normalized residual seen
  double mass_monotonicity_dip = 0.0; // most negative d_v mt excursion seen
  std::vector<MonitorBreach> breaches;
};

/// Deposit tau_ab = r^2 T_ab and r^2 N_a from particles sitting on the
/// slice u = grid u.  Cloud-in-cell kernel of width 2 cells, folded at the
/// axis and boundary so the kernel mass is conserved.  Particles outside
/// the grid are skipped and counted.
struct DepositResult {
  int skipped = 0;
};
DepositResult deposit_moments(const std::vector<Particle>& parts, FieldSlice& slice,
                              int threads = 1);

enum class TrappedPolicy { stop, excise };

struct EvolutionConfig {
  int K = 256;
  int field_iters = 2;   // 1 = predictor only
  bool repush = false;   // re-push particles against the corrected strip
  int threads = 1;
  TrappedPolicy trapped_policy = TrappedPolicy::stop;
  StepControl step;
  double eta0 = 0.1;
  double noise_tol = 1e-6;
  double cap_u_norm = INFINITY;
  double cap_t_norm = INFINITY;
  bool record_history = true;
  int history_stride = 1;
};

/// Frozen-slice sampler: fields linearised in u around the slice.
class FrozenSliceBackground final : public Background {
 public:
  explicit FrozenSliceBackground(const FieldSlice& s) : s_(&s) {}
  BackgroundPoint eval(double u, double v) const override;
  double v_infinity() const override { return s_->v_inf; }

 private:
  const FieldSlice* s_;
};

class SliceHistory {
 public:
  std::vector<FieldSlice> slices;

  const FieldSlice* slice_at_u(double u) const;  // nearest recorded slice
  /// mt at a corner point, snapped to the nearest grid lines.
  double mtilde_at(double u, double v) const;
  double min_r_in_rect(double u0, double u1, double v0, double v1) const;
  bool covers(double u) const;
};

/// Background view of a recorded history (bilinear in u between slices);
/// used by the trajectory audits.
class HistoryBackground final : public Background {
 public:
  explicit HistoryBackground(const SliceHistory& h) : h_(&h) {}
  BackgroundPoint eval(double u, double v) const override;
  double v_infinity() const override { return h_->slices.front().v_inf; }
  double u_max() const override { return h_->slices.back().u; }
  double T_uv_at(double u, double v) const;

 private:
  const SliceHistory* h_;
};

enum class StepOutcome { ok, trapped, breakdown };

class Evolution {
 public:
  Evolution(const InitialDataSlice& data, const SamplingConfig& sampling,
            const EvolutionConfig& cfg);
  /// Start from explicit slice + particles (tests, checkpoint restart).
  Evolution(FieldSlice slice0, std::vector<Particle> parts, const EvolutionConfig& cfg);

  StepOutcome step();
  /// march until u >= u_max (or a trapped event / breakdown)
  StepOutcome run_until(double u_max);

  const FieldSlice& slice() const { return cur_; }
  const std::vector<Particle>& particles() const { return parts_; }
  const SliceHistory& history() const { return hist_; }
  EvolutionMonitor& monitor() { return mon_; }
  const std::vector<TrappedEvent>& trapped_events() const { return trapped_; }
  double total_weight() const;
  double sampling_mass_error() const { return sampling_mass_error_; }

  /// Public (re)integration of the slice v-ODEs from deposited moments and
  /// a given w profile; exposed for tests.
  static void integrate_slice_odes(FieldSlice& s, EvolutionMonitor* mon);
  static void compute_derivative_arrays(FieldSlice& s);

 private:
  void init_from_slice();
  StepOutcome advance_once();

  EvolutionConfig cfg_;
  FieldSlice cur_;
  std::vector<Particle> parts_;
  SliceHistory hist_;
  EvolutionMonitor mon_;
  std::vector<TrappedEvent> trapped_;
  double sampling_mass_error_ = 0.0;
  double excise_v = INFINITY;  // causal-future mask after a trapped event
  bool stopped_ = false;
};

std::vector<TrappedEvent> detect_trapped(const FieldSlice& s);

struct ConservationReport {
  double max_resid = 0.0;
  double l1_resid = 0.0;
  int cells = 0;
};
/// Finite-difference audit of d_u(r^2 T_vv) = -d_v(r^2 T_uv) + c_v r^2 T_uv
/// inside beam supports, normalized by the dominant term.
ConservationReport audit_vlasov_conservation(const SliceHistory& hist);

void write_checkpoint(const std::string& path, const FieldSlice& s,
                      const std::vector<Particle>& parts);
void read_checkpoint(const std::string& path, FieldSlice& s,
                     std::vector<Particle>& parts);

}  // namespace adsv
