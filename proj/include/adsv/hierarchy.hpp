/* hierarchy.hpp
 *
 * The multi-scale beam parameter ladder and the seed phase-space profiles.
 *
 * Exact mode keeps the nested-exponential ladder
 *   eps = exp(-exp(rho^-10)),  rho = exp(-exp^4(delta^-10)),
 *   delta = exp(-exp^2(sigma^-10)),   eps^(i+1) = exp(-exp((eps^(i))^-2))
 * in log-log representation (BigReal), since every quantity below sigma
 * underflows a double.  Softened mode replaces the ladder by monotone
 * power maps and a geometric eps^(i) decay, producing ordinary doubles a
 * PDE solver can run on, while preserving all ordering invariants.
 *
 * Seed profile for beam i (smooth bump chi, chi=1 on [-1,1], supp in (-2,2)):
 *   F_i(v; q, l) = eps_i^-2 chi(sqrt(-L)(v - c_i)/eps_i) chi(q - 3)
 *                  chi(sqrt(-L) l / eps_i - 4)
 * with beam centers c_0 = v_I/2, c_i = c_0 + rho^-1 sum_{j<i} eps_j/sqrt(-L).
 */
#pragma once

#include <optional>
#include <vector>

#include "adsv/geometry.hpp"
#include "adsv/logtower.hpp"

namespace adsv {

/// Smooth cutoff: 1 on [-1,1], 0 outside (-2,2), C-infinity transition
/// built from exp(-1/x).
double chi_bump(double x);

/// x^-a from the log-log representation LL = loglog(1/x):
/// x^-a = exp(a exp(LL)).
inline BigReal inv_pow_from_ll(const BigReal& ll, double a) {
  return BigReal::exp(BigReal::exp(ll) * BigReal::from(a));
}

struct LadderConfig {
  // softened monotone maps: sigma = eps^sigma_pow etc.
  double sigma_pow = 0.25;
  double delta_pow = 0.5;
  double rho_pow = 1.0;
  double eps_decay = 2.0;  // eps^(i) = eps * eps_decay^-i
  int n_beams = 3;
  // slab width / margin factors in units of eps^(i)/sqrt(-Lambda)
  double h_factor = 3.0;
  double htilde_factor = 4.0;
  double beta_factor = 0.5;
  double beta_tilde_factor = 0.25;
  // exact mode: ladder driven from sigma downward (the ladder cannot be
  // inverted upward from any eps representable as a double)
  std::optional<double> exact_sigma;
  int exact_levels = 4;  // how many eps^(i) representations to materialise
};

struct HierarchyParams {
  Cosmology cosmo;
  HierarchyMode mode = HierarchyMode::softened;
  double eps = 0.0;

  // ladder scalars (softened mode; in exact mode only sigma is a double)
  double sigma = 0.0, delta = 0.0, rho = 0.0;
  int n_beams = 0;
  int n_plus = 0;  // ceil(sigma^-3/2)

  std::vector<double> eps_i;            // 0..n_beams
  std::vector<double> centers;          // v_{eps,i}
  std::vector<double> width_h;          // h_i
  std::vector<double> width_htilde;     // h~_i
  std::vector<double> margin_beta;      // beta_i
  std::vector<double> margin_beta_tilde;

  struct ExactReps {
    bool active = false;
    bool from_sigma = false;
    double sigma = 0.0;
    // loglog(1/x) for the sub-sigma ladder entries; undefined entries are
    // flagged (inverting upward from a double eps only reaches rho).
    bool rho_defined = false, delta_defined = false, sigma_defined = false;
    BigReal ll_eps, ll_rho, ll_delta;
    BigReal log_n_beams;                 // log N = exp(ll_rho) + exp(delta^-15)
    std::vector<BigReal> ll_eps_i;       // loglog(1/eps^(i))
  } exact;

  LadderConfig ladder;

  double v0() const { return 0.5 * cosmo.v_infinity; }
  /// center of beam i after n reflections: v_i + n v_I
  double center_shifted(int i, int n) const {
    return centers.at(i) + n * cosmo.v_infinity;
  }
  void validate() const;
};

/// Build the ladder.  eps in (0,1].  In exact mode, when cfg.exact_sigma is
/// set the whole ladder is derived downward from sigma; otherwise the chain
/// is inverted upward from eps as far as double precision reaches.
HierarchyParams build_hierarchy(double eps, HierarchyMode mode, const LadderConfig& cfg,
                                const Cosmology& cosmo);

/// Seed profile of beam i (softened mode).  Callable on (v, p, l).
struct SeedProfile {
  double center = 0.0;
  double eps_i = 0.0;
  double sqnl = 1.0;  // sqrt(-Lambda)

  double operator()(double v, double p, double l) const {
    double xv = sqnl * (v - center) / eps_i;
    double xl = sqnl * l / eps_i - 4.0;
    return (1.0 / (eps_i * eps_i)) * chi_bump(xv) * chi_bump(p - 3.0) * chi_bump(xl);
  }
};

SeedProfile seed_profile(int i, const HierarchyParams& h);

/// Per-beam initial amplitudes a_i.  a_i = 0 turns a beam off (vacuum runs);
/// active beams must stay below sigma with sum a_i <= sigma/rho.
struct BeamWeights {
  std::vector<double> a;
  void validate(const HierarchyParams& h) const;
};

/// Reference integrals of the bump, used to collapse the (q,l) fiber
/// integrals of the seed profiles to closed 1-d factors:
///   Cq2 = int q chi(q-3) dq,   Cq0 = int chi(q-3)/q dq,
///   D0  = int chi(s) ds,       D2  = int s^2 chi(s) ds.
struct SeedMoments {
  double Cq2, Cq0, D0, D2;
};
const SeedMoments& seed_moments();

/// Fiber moments of the total seed sum_i a_i F_i at fixed v:
///   G(v) = int int q F dq l dl        (drives T_vv)
///   H(v) = int int l^3 F dq/q dl      (drives r^4 T_uv / Omega^2 scaling)
struct SeedFiberMoments {
  double G = 0.0;
  double H = 0.0;
};
SeedFiberMoments seed_fiber_moments(double v, const HierarchyParams& h,
                                    const std::vector<double>& amplitudes);

}  // namespace adsv
