#include "adsv/hierarchy.hpp"

#include <algorithm>
#include <cmath>

namespace adsv {

double chi_bump(double x) {
  // smooth step s(t): 0 for t<=0, 1 for t>=1
  auto psi = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  double t = 2.0 - std::abs(x);
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  double a = psi(t), b = psi(1.0 - t);
  return a / (a + b);
}

namespace {

void build_exact(HierarchyParams& h, const LadderConfig& cfg) {
  auto& e = h.exact;
  e.active = true;
  if (cfg.exact_sigma) {
    double sigma = *cfg.exact_sigma;
    if (!(sigma > 0.0 && sigma < 1.0))
      throw ConfigError("exact hierarchy: sigma must lie in (0,1)");
    e.from_sigma = true;
    e.sigma = sigma;
    e.sigma_defined = true;
    h.sigma = sigma;
    // delta = exp(-exp(exp(sigma^-10)))  =>  loglog(1/delta) = exp(sigma^-10)
    e.ll_delta = BigReal::exp(BigReal::from(std::pow(sigma, -10.0)));
    e.delta_defined = true;
    // rho = exp(-exp^5(delta^-10))      =>  loglog(1/rho) = exp^3(delta^-10)
    BigReal dm10 = inv_pow_from_ll(e.ll_delta, 10.0);
    e.ll_rho = BigReal::exp(BigReal::exp(dm10));
    e.rho_defined = true;
    // eps = exp(-exp(rho^-10))          =>  loglog(1/eps) = rho^-10
    e.ll_eps = inv_pow_from_ll(e.ll_rho, 10.0);
    // N = ceil(rho^-1 exp(exp(delta^-15)))
    BigReal dm15 = inv_pow_from_ll(e.ll_delta, 15.0);
    e.log_n_beams = BigReal::exp(e.ll_rho) + BigReal::exp(dm15);
    h.n_plus = static_cast<int>(std::ceil(std::pow(sigma, -1.5)));
  } else {
    // invert upward from eps as far as doubles allow; levels that would need
    // a positive iterated log that is not there stay undefined
    if (!(h.eps > 0.0 && h.eps < 1.0))
      throw ConfigError("exact hierarchy from eps: eps must lie in (0,1)");
    double log1e = std::log(1.0 / h.eps);
    e.ll_eps = BigReal::from(std::log(log1e));
    auto poslog = [](double x) { return x > 0.0 ? std::log(x) : -1.0; };
    double ll = poslog(log1e);  // = rho^-10 when positive
    if (ll > 0.0) {
      h.rho = std::pow(ll, -0.1);
      e.rho_defined = true;
      if (h.rho < 1.0) {
        double l1r = std::log(1.0 / h.rho);
        double llr = poslog(l1r);
        if (llr > 0.0) {
          e.ll_rho = BigReal::from(llr);  // = exp^3(delta^-10)
          double t = poslog(poslog(poslog(llr)));
          if (t > 0.0) {
            h.delta = std::pow(t, -0.1);
            e.delta_defined = true;
            double lld = poslog(std::log(1.0 / h.delta));
            if (lld > 0.0) {
              e.ll_delta = BigReal::from(lld);  // = exp(sigma^-10)
              double ts = poslog(lld);
              if (ts > 0.0) {
                h.sigma = std::pow(ts, -0.1);
                e.sigma = h.sigma;
                e.sigma_defined = true;
                h.n_plus = static_cast<int>(std::ceil(std::pow(h.sigma, -1.5)));
              }
            }
          }
        }
      }
    }
  }
  // eps^(i) ladder: loglog(1/eps^(i+1)) = (eps^(i))^-2
  e.ll_eps_i.clear();
  e.ll_eps_i.push_back(e.ll_eps);
  for (int i = 0; i < cfg.exact_levels; ++i)
    e.ll_eps_i.push_back(inv_pow_from_ll(e.ll_eps_i.back(), 2.0));
  // ordering sanity: eps < rho < delta < sigma via log(1/x) comparisons
  if (e.from_sigma) {
    BigReal le = BigReal::exp(e.ll_eps), lr = BigReal::exp(e.ll_rho),
            ld = BigReal::exp(e.ll_delta);
    BigReal ls = BigReal::from(std::log(1.0 / e.sigma));
    if (!(le > lr && lr > ld && ld > ls))
      throw ConfigError("exact hierarchy: ladder ordering eps<rho<delta<sigma failed");
    for (size_t i = 0; i + 1 < e.ll_eps_i.size(); ++i)
      if (!(e.ll_eps_i[i + 1] > e.ll_eps_i[i]))
        throw ConfigError("exact hierarchy: eps^(i) not strictly decreasing");
  }
  h.n_beams = -1;  // not enumerable in exact mode
}

void build_softened(HierarchyParams& h, const LadderConfig& cfg) {
  h.sigma = std::pow(h.eps, cfg.sigma_pow);
  h.delta = std::pow(h.eps, cfg.delta_pow);
  h.rho = std::pow(h.eps, cfg.rho_pow);
  if (!(h.eps <= h.rho && h.rho <= h.delta && h.delta <= h.sigma && h.sigma < 1.0))
    throw ConfigError("softened hierarchy: need eps <= rho <= delta <= sigma < 1");
  if (!(cfg.eps_decay > 1.0))
    throw ConfigError("softened hierarchy: eps_decay must exceed 1");
  if (cfg.n_beams < 1) throw ConfigError("softened hierarchy: n_beams >= 1 required");
  if (!(cfg.beta_tilde_factor < cfg.beta_factor && cfg.beta_factor < cfg.h_factor &&
        cfg.h_factor < cfg.htilde_factor))
    throw ConfigError("softened hierarchy: need beta~ < beta < h < h~ factors");

  h.n_beams = cfg.n_beams;
  h.n_plus = static_cast<int>(std::ceil(std::pow(h.sigma, -1.5)));
  int N = h.n_beams;
  double sq = h.cosmo.sqrt_neg_lambda();
  h.eps_i.resize(N + 1);
  for (int i = 0; i <= N; ++i) h.eps_i[i] = h.eps * std::pow(cfg.eps_decay, -i);

  h.centers.resize(N + 1);
  h.centers[0] = h.v0();
  for (int i = 1; i <= N; ++i)
    h.centers[i] = h.centers[i - 1] + h.eps_i[i - 1] / (h.rho * sq);

  h.width_h.resize(N + 1);
  h.width_htilde.resize(N + 1);
  h.margin_beta.resize(N + 1);
  h.margin_beta_tilde.resize(N + 1);
  for (int i = 0; i <= N; ++i) {
    double unit = h.eps_i[i] / sq;
    h.width_h[i] = cfg.h_factor * unit;
    h.width_htilde[i] = cfg.htilde_factor * unit;
    h.margin_beta[i] = cfg.beta_factor * unit;
    h.margin_beta_tilde[i] = cfg.beta_tilde_factor * unit;
  }
  h.validate();
}

}  // namespace

HierarchyParams build_hierarchy(double eps, HierarchyMode mode, const LadderConfig& cfg,
                                const Cosmology& cosmo) {
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("build_hierarchy: eps must be in (0,1]");
  HierarchyParams h;
  h.cosmo = cosmo;
  h.mode = mode;
  h.eps = eps;
  h.ladder = cfg;
  if (mode == HierarchyMode::exact)
    build_exact(h, cfg);
  else
    build_softened(h, cfg);
  return h;
}

void HierarchyParams::validate() const {
  if (mode == HierarchyMode::exact) return;  // checked at construction
  int N = n_beams;
  for (int i = 0; i < N; ++i)
    if (!(eps_i[i + 1] < eps_i[i]))
      throw ConfigError("hierarchy: eps^(i) must decrease strictly");
  if (std::abs(centers[0] - v0()) > 1e-12 * v0())
    throw ConfigError("hierarchy: c_0 must equal v_I/2");
  for (int i = 0; i < N; ++i)
    if (!(centers[i + 1] > centers[i]))
      throw ConfigError("hierarchy: centers must increase strictly");
  for (int i = 0; i <= N; ++i)
    if (!(margin_beta[i] < width_h[i] && width_h[i] < width_htilde[i]))
      throw ConfigError("hierarchy: need beta_i < h_i < h~_i");
  for (int i = 0; i < N; ++i)
    if (!(centers[i] + width_htilde[i] < centers[i + 1] - width_htilde[i + 1]))
      throw ConfigError("hierarchy: wide beam slabs must stay disjoint");
  // seed supports (full width 2 eps_i / sqrt(-Lambda)) must fit inside (0, v_I)
  double sq = cosmo.sqrt_neg_lambda();
  double lead = std::max(width_htilde[0], 2.0 * eps_i[0] / sq);
  double trail = std::max(width_htilde[N], 2.0 * eps_i[N] / sq);
  if (!(centers[0] - lead > 0.0 && centers[N] + trail < cosmo.v_infinity))
    throw ConfigError("hierarchy: beam slabs must stay inside (0, v_I)");
}

void BeamWeights::validate(const HierarchyParams& h) const {
  if (static_cast<int>(a.size()) != h.n_beams + 1)
    throw ConfigError("BeamWeights: need one amplitude per beam (N+1 entries)");
  double sum = 0.0;
  for (double ai : a) {
    // a_i = 0 turns a beam off (vacuum runs); active beams must stay below sigma
    if (!(ai >= 0.0)) throw ConfigError("BeamWeights: amplitudes must be nonnegative");
    if (!(ai < h.sigma)) throw ConfigError("BeamWeights: amplitudes must stay below sigma");
    sum += ai;
  }
  if (sum > h.sigma / h.rho)
    throw ConfigError("BeamWeights: sum of amplitudes exceeds sigma/rho");
}

SeedProfile seed_profile(int i, const HierarchyParams& h) {
  if (h.mode != HierarchyMode::softened)
    throw ConfigError("seed_profile: pointwise seeds exist only in softened mode");
  if (i < 0 || i > h.n_beams) throw ConfigError("seed_profile: beam index out of range");
  SeedProfile s;
  s.center = h.centers[i];
  s.eps_i = h.eps_i[i];
  s.sqnl = h.cosmo.sqrt_neg_lambda();
  return s;
}

const SeedMoments& seed_moments() {
  static const SeedMoments m = [] {
    // Simpson quadrature of the bump reference integrals
    auto simpson = [](auto f, double a, double b, int n) {
      double s = f(a) + f(b);
      double dx = (b - a) / n;
      for (int i = 1; i < n; ++i) s += f(a + i * dx) * (i % 2 ? 4.0 : 2.0);
      return s * dx / 3.0;
    };
    SeedMoments sm;
    sm.Cq2 = simpson([](double q) { return q * chi_bump(q - 3.0); }, 1.0, 5.0, 4096);
    sm.Cq0 = simpson([](double q) { return chi_bump(q - 3.0) / q; }, 1.0, 5.0, 4096);
    sm.D0 = simpson([](double s) { return chi_bump(s); }, -2.0, 2.0, 4096);
    sm.D2 = simpson([](double s) { return s * s * chi_bump(s); }, -2.0, 2.0, 4096);
    return sm;
  }();
  return m;
}

SeedFiberMoments seed_fiber_moments(double v, const HierarchyParams& h,
                                    const std::vector<double>& amplitudes) {
  const SeedMoments& sm = seed_moments();
  double sq = h.cosmo.sqrt_neg_lambda();
  SeedFiberMoments out;
  for (int i = 0; i <= h.n_beams; ++i) {
    double a = amplitudes.at(i);
    if (a == 0.0) continue;
    double ei = h.eps_i[i];
    double xv = sq * (v - h.centers[i]) / ei;
    if (std::abs(xv) >= 2.0) continue;
    double cv = chi_bump(xv);
    double lhat = ei / sq;
    // int l chi(.) dl = lhat^2 (4 D0);  int l^3 chi(.) dl = lhat^4 (64 D0 + 12 D2)
    out.G += a / (ei * ei) * cv * sm.Cq2 * lhat * lhat * 4.0 * sm.D0;
    out.H += a / (ei * ei) * cv * sm.Cq0 * std::pow(lhat, 4) * (64.0 * sm.D0 + 12.0 * sm.D2);
  }
  return out;
}

}  // namespace adsv
