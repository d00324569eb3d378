#include "adsv/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace adsv {

double CascadeState::quotient_residual() const {
  double worst = 0.0;
  for (int n = 0; n <= n_max; ++n)
    for (int i = 0; i < n_beams; ++i) {
      double q = 2.0 * energy[n][i] / sep[n][i + 1];
      worst = std::max(worst, std::abs(q - mu[n][i]) / mu[n][i]);
    }
  return worst;
}

CascadeState cascade_forward(const std::vector<double>& mu0,
                             const std::vector<double>& E0,
                             const std::vector<double>& R0, int n_steps,
                             double mu_top_coeff) {
  int N = static_cast<int>(mu0.size());
  if (static_cast<int>(E0.size()) != N + 1 || static_cast<int>(R0.size()) != N + 1)
    throw ConfigError("cascade_forward: E0 needs N+1 entries, R0 needs N+1 (R0[0] unused)");
  for (int i = 0; i < N; ++i) {
    if (!(mu0[i] > 0.0) || !(E0[i] > 0.0) || !(R0[i + 1] > 0.0))
      throw ConfigError("cascade_forward: initial data must be positive");
    double q = 2.0 * E0[i] / R0[i + 1];
    if (std::abs(q - mu0[i]) > 1e-10 * mu0[i])
      throw ConfigError("cascade_forward: 2 E0_i / R0_{i+1} != mu0_i at i = " +
                        std::to_string(i));
  }
  if (!(E0[N] > 0.0)) throw ConfigError("cascade_forward: E0[N] must be positive");

  CascadeState st;
  st.n_beams = N;
  st.n_max = n_steps;
  st.mu_top_coeff = mu_top_coeff;
  st.mu.assign(n_steps + 1, std::vector<double>(N));
  st.energy.assign(n_steps + 1, std::vector<double>(N + 1));
  st.sep.assign(n_steps + 1, std::vector<double>(N + 1, 0.0));
  st.mu[0] = mu0;
  st.energy[0] = E0;
  st.sep[0] = R0;

  for (int n = 0; n < n_steps; ++n) {
    double sum = 0.0;  // sum_{j<i} mu_j[n+1], grown as i advances
    for (int i = 0; i <= N; ++i) {
      if (i < N) st.mu[n + 1][i] = st.mu[n][i] * std::exp(2.0 * sum);
      st.energy[n + 1][i] = st.energy[n][i] * std::exp(sum);
      if (i >= 1) {
        // R_i factor uses j <= i-2, i.e. the sum one index behind
        double sm2 = 0.0;
        for (int j = 0; j + 2 <= i; ++j) sm2 += st.mu[n + 1][j];
        st.sep[n + 1][i] = st.sep[n][i] * std::exp(-sm2);
      }
      if (i < N) sum += st.mu[n + 1][i];
      if (i < N && !std::isfinite(st.mu[n + 1][i]))
        throw SolverError(
            "cascade_forward: overflow in softened-float mode at (n=" +
            std::to_string(n + 1) + ", i=" + std::to_string(i) +
            "); switch to the exact log-space mode");
      if (!std::isfinite(st.energy[n + 1][i]))
        throw SolverError("cascade_forward: energy overflow; use exact log-space mode");
    }
  }
  return st;
}

TargetProfile TargetProfile::make(double C, int n_beams, int n_plus,
                                  double E_top_target) {
  if (!(C > 0.0)) throw ConfigError("TargetProfile: C must be positive");
  if (n_beams < 1 || n_plus < 1)
    throw ConfigError("TargetProfile: need n_beams >= 1 and n_plus >= 1");
  TargetProfile p;
  p.C = C;
  p.n_plus = n_plus;
  p.E_top_target = E_top_target;
  p.mu_target.resize(n_beams);
  double sum = 0.0;
  for (int j = 0; j < n_beams; ++j) {
    p.mu_target[j] = (C / n_beams) * std::exp(-2.0 * j * C / n_beams);
    sum += p.mu_target[j];
  }
  if (C >= std::log(2.0) && (sum < 0.25 || sum > 1.0))
    throw ConfigError("TargetProfile: sum of mu_j[n_+] = " + std::to_string(sum) +
                      " outside [1/4, 1]");
  return p;
}

FineTuneResult fine_tune(const TargetProfile& profile, const HierarchyParams& h,
                         const std::vector<double>& calibration, double C1) {
  int N = static_cast<int>(profile.mu_target.size());
  int np = profile.n_plus;
  for (int j = 0; j < N; ++j)
    if (!(profile.mu_target[j] > 0.0))
      throw ConfigError("fine_tune: profile infeasible (non-positive target) at index " +
                        std::to_string(j));

  // mu[n][i] on n in [0, n_plus], solved backwards in n, inductively in i
  std::vector<std::vector<double>> mu(np + 1, std::vector<double>(N, 0.0));
  for (int n = 0; n <= np; ++n) mu[n][0] = profile.mu_target[0];
  for (int i = 1; i < N; ++i) {
    mu[np][i] = profile.mu_target[i];
    for (int n = np - 1; n >= 0; --n) {
      double s = 0.0;
      for (int j = 0; j < i; ++j) s += mu[n + 1][j];
      mu[n][i] = mu[n + 1][i] * std::exp(-2.0 * s);
      if (!(mu[n][i] > 0.0))
        throw ConfigError("fine_tune: profile infeasible (underflow) at index " +
                          std::to_string(i));
    }
  }

  FineTuneResult out;
  out.mu_table = mu;
  out.mu0 = mu[0];
  // top-beam energy transported backwards through exp(sum_j<N mu_j[n+1])
  double Etop = profile.E_top_target;
  if (Etop > 0.0) {
    for (int n = np - 1; n >= 0; --n) {
      double s = 0.0;
      for (int j = 0; j < N; ++j) s += mu[n + 1][j];
      Etop *= std::exp(-s);
    }
  }
  out.E_top0 = Etop;

  bool softened = (h.mode == HierarchyMode::softened);
  if (softened && N != h.n_beams)
    throw ConfigError("fine_tune: profile size must match the hierarchy beam count");
  if (softened && Etop > 0.0)
    out.mu_top0 = 2.0 * h.rho * Etop * h.cosmo.sqrt_neg_lambda() / h.eps_i[N];

  out.calibrated = !calibration.empty();
  std::vector<double> c(N + 1, 1.0);
  if (out.calibrated) {
    if (static_cast<int>(calibration.size()) != N + 1)
      throw ConfigError("fine_tune: calibration needs N+1 constants");
    c = calibration;
  }
  out.weights.a.resize(N + 1);
  double rho = softened ? h.rho : 1.0;
  for (int i = 0; i < N; ++i) out.weights.a[i] = out.mu0[i] / (c[i] * rho);
  out.weights.a[N] = (out.mu_top0 > 0.0) ? out.mu_top0 / (c[N] * rho)
                                         : out.weights.a[N - 1];

  for (double m : out.mu0) out.mu0_sum += m;
  out.mu0_sum += out.mu_top0;
  out.mu0_sum_bound = C1 * h.sigma;
  out.weights_feasible = out.mu0_sum <= out.mu0_sum_bound;
  if (softened) {
    double asum = 0.0;
    for (double ai : out.weights.a) {
      if (!(ai > 0.0 && ai < h.sigma)) out.weights_feasible = false;
      asum += ai;
    }
    if (asum > h.sigma / h.rho) out.weights_feasible = false;
  }
  return out;
}

ExchangeResult exchange_factors(double E_in, double E_out, double r_cross,
                                CrossingKind kind) {
  if (!(r_cross > 0.0)) throw ConfigError("exchange_factors: r_cross must be positive");
  if (E_in < 0.0 || E_out < 0.0)
    throw ConfigError("exchange_factors: energies must be nonnegative");
  if (kind == CrossingKind::near_infinity) return {E_in, E_out};
  return {E_in * std::exp(2.0 * E_out / r_cross), E_out};
}

double separation_exchange(double dr, double E_out, double r_cross, SeparationCase c) {
  if (c != SeparationCase::ingoing_past_outgoing) return dr;
  return dr * std::exp(-2.0 * E_out / r_cross);
}

FinalStepResult final_step(const CascadeState& state, const TargetProfile& profile,
                           const HierarchyParams& h, double trapped_threshold) {
  int N = state.n_beams;
  if (static_cast<int>(profile.mu_target.size()) != N)
    throw ConfigError("final_step: profile size mismatch");
  int np = state.n_max;
  double dev = 0.0;
  for (int j = 0; j < N; ++j)
    dev = std::max(dev,
                   std::abs(state.mu[np][j] - profile.mu_target[j]) / profile.mu_target[j]);
  if (dev > 1e-8)
    throw ContractViolation("final_step: state does not match the target profile at "
                            "n_plus; max relative deviation " + std::to_string(dev));

  FinalStepResult out;
  out.flat_value = profile.C / N;
  out.mu_next.resize(N);
  double sum = 0.0;
  for (int j = 0; j < N; ++j) {
    out.mu_next[j] = state.mu[np][j] * std::exp(2.0 * sum);
    sum += out.mu_next[j];
    out.flat_max_rel_dev = std::max(
        out.flat_max_rel_dev, std::abs(out.mu_next[j] - out.flat_value) / out.flat_value);
  }
  out.E_top_final = state.energy[np][N] * std::exp(sum);
  out.amplification = std::exp(sum);

  if (h.mode == HierarchyMode::softened) {
    out.r_min = std::pow(h.delta, -0.25) * h.eps_i[N] / h.cosmo.sqrt_neg_lambda();
    out.trapped_estimate = 2.0 * out.E_top_final / out.r_min;
    out.trapped = out.trapped_estimate > trapped_threshold;
  }
  return out;
}

ExactVerdict exact_trapped_verdict(const HierarchyParams& h) {
  if (h.mode != HierarchyMode::exact || !h.exact.from_sigma)
    throw ConfigError("exact_trapped_verdict: needs a sigma-driven exact hierarchy");
  const auto& e = h.exact;
  // log(2 E_top / r_min) = log 2 + delta^-3/4 - exp(4 sigma^-9) - (1/4) log(1/delta)
  BigReal t1 = inv_pow_from_ll(e.ll_delta, 0.75);
  BigReal t2 = BigReal::exp(BigReal::from(4.0 * std::pow(e.sigma, -9.0)));
  BigReal t3 = BigReal::exp(e.ll_delta) * BigReal::from(0.25);
  BigReal total = t1 - t2 - t3 + BigReal::from(std::log(2.0));
  ExactVerdict v;
  v.log_estimate = total;
  v.trapped = total > BigReal::zero();
  v.rendering = "log(2E/r_min) = " + t1.str() + " - " + t2.str() + " - " + t3.str() +
                " + log 2 = " + total.str();
  return v;
}

}  // namespace adsv
