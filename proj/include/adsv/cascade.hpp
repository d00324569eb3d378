/* cascade.hpp
 *
 * Discrete model of the beam interactions over reflection cycles.  With
 * mu_i[n] the energy-to-separation ratio 2 E_i[n] / R_{i+1}[n], one cycle
 * maps, solved in increasing i so the right side is known:
 *
 *   mu_i[n+1] = mu_i[n] exp( 2 sum_{j<i} mu_j[n+1] ),        0 <= i <= N-1
 *   E_i[n+1]  = E_i[n]  exp(   sum_{j<i} mu_j[n+1] ),        0 <= i <= N
 *   R_i[n+1]  = R_i[n]  exp( - sum_{j<=i-2} mu_j[n+1] ),     1 <= i <= N
 *
 * extended to the top beam by mu_N[n] := 2 rho E_N[n] sqrt(-Lambda)/eps^(N).
 * Fine-tuning inverts the recursion: prescribing the concentration profile
 * mu_j[n_+] = (C/N) exp(-2 j C / N) at cycle n_+ determines mu_i[0] (and the
 * initial beam amplitudes, through the measured proportionality
 * mu_i[0] = c_i rho a_i).  One more cycle flattens the profile to C/N for
 * every beam and amplifies the top-beam energy by exactly e^C.
 */
#pragma once

#include <vector>

#include "adsv/hierarchy.hpp"
#include "adsv/logtower.hpp"

namespace adsv {

struct CascadeState {
  int n_beams = 0;   // N: beams are 0..N
  int n_max = 0;     // filled cycles 0..n_max
  // mu[n][i], i in [0, N-1]; energy[n][i], i in [0, N]; sep[n][i], i in [1, N]
  std::vector<std::vector<double>> mu, energy, sep;
  double mu_top_coeff = 0.0;  // 2 rho sqrt(-Lambda)/eps^(N); 0 if no hierarchy

  double mu_at(int n, int i) const {
    if (i < n_beams) return mu.at(n).at(i);
    return mu_top_coeff * energy.at(n).at(n_beams);
  }
  /// max over all filled entries of |2 E_i[n]/R_{i+1}[n] - mu_i[n]| / mu_i[n]
  double quotient_residual() const;
};

/// Forward fill of the recursion.  mu0 has N entries (i <= N-1), E0 has N+1,
/// R0 has N+1 with R0[0] ignored.  Consistency 2 E0_i / R0_{i+1} = mu0_i is
/// required at 1e-10 relative.  Throws SolverError on float overflow with a
/// hint to use the exact log-space mode.
CascadeState cascade_forward(const std::vector<double>& mu0,
                             const std::vector<double>& E0,
                             const std::vector<double>& R0, int n_steps,
                             double mu_top_coeff = 0.0);

struct TargetProfile {
  double C = 1.0;  // concentration parameter (delta^-3/4 in the exact ladder)
  int n_plus = 10;
  std::vector<double> mu_target;  // (C/N) exp(-2 j C/N), j = 0..N-1
  double E_top_target = 0.0;

  static TargetProfile make(double C, int n_beams, int n_plus, double E_top_target);
};

struct FineTuneResult {
  std::vector<double> mu0;      // i = 0..N-1
  double mu_top0 = 0.0;         // extension value at i = N (0 if no hierarchy)
  double E_top0 = 0.0;          // E_N[0]
  BeamWeights weights;          // a_i = mu_i[0]/(c_i rho)
  bool calibrated = false;
  bool weights_feasible = true; // a_i in (0, sigma), sum a_i <= sigma/rho
  double mu0_sum = 0.0;
  double mu0_sum_bound = 0.0;   // C1 sigma
  std::vector<std::vector<double>> mu_table;  // mu[n][i] on [0, n_plus]
};

/// Backward solve of the recursion from the target profile at n_plus.
/// calibration holds the measured constants c_i of mu_i[0] = c_i rho a_i
/// (empty: uncalibrated, c_i = 1).  C1_sigma is the smallness constant in
/// sum mu_i[0] <= C1 sigma.
FineTuneResult fine_tune(const TargetProfile& profile, const HierarchyParams& h,
                         const std::vector<double>& calibration = {},
                         double C1 = 10.0);

enum class CrossingKind { near_axis, near_infinity };  // i > j vs i < j

/// Leading-order energy exchange at one beam crossing.
struct ExchangeResult {
  double E_in_after, E_out_after;
};
ExchangeResult exchange_factors(double E_in, double E_out, double r_cross,
                                CrossingKind kind);

enum class SeparationCase { ingoing_past_outgoing, adjacent, passive };
double separation_exchange(double dr, double E_out, double r_cross, SeparationCase c);

struct FinalStepResult {
  std::vector<double> mu_next;     // mu_j[n_+ + 1], flat C/N
  double flat_value = 0.0;         // C/N
  double flat_max_rel_dev = 0.0;
  double E_top_final = 0.0;        // E_N[n_+] e^C
  double amplification = 0.0;      // E_top_final / E_N[n_+]
  double r_min = 0.0;              // delta^-1/4 eps^(N)/sqrt(-Lambda)
  double trapped_estimate = 0.0;   // 2 E_top_final / r_min
  bool trapped = false;
};

/// One more cycle past n_plus: flat-profile identity, top-beam amplification
/// and the trapped-sphere estimate.  Requires the state to match the profile
/// at n_plus (ContractViolation naming the max deviation otherwise).
FinalStepResult final_step(const CascadeState& state, const TargetProfile& profile,
                           const HierarchyParams& h, double trapped_threshold = 1.0);

struct ExactVerdict {
  bool trapped = false;
  BigReal log_estimate;       // log(2 E_top_final / r_min), tower-represented
  std::string rendering;
};

/// Symbolic trapped-sphere verdict with the nested-exponential ladder:
///   log(2 E_top / r_min) = log 2 + delta^-3/4 - exp(4 sigma^-9) - (1/4) log(1/delta).
ExactVerdict exact_trapped_verdict(const HierarchyParams& h);

}  // namespace adsv
