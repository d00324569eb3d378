#include "adsv/initial_data.hpp"

#include <algorithm>
#include <cmath>

namespace adsv {

namespace {

// composite grid: uniform nodes plus refine-fold subdivision inside the
// seed supports |v - c_i| <= 2 eps_i / sqrt(-Lambda)
std::pair<std::vector<double>, std::vector<int>> make_grid(const HierarchyParams& h,
                                                           int K, int refine) {
  double vI = h.cosmo.v_infinity;
  double hstep = vI / K;
  double sq = h.cosmo.sqrt_neg_lambda();
  std::vector<double> grid;
  std::vector<int> uni;
  grid.reserve(K + 1 + 64 * refine);
  for (int j = 0; j < K; ++j) {
    double a = j * hstep;
    grid.push_back(a);
    uni.push_back(static_cast<int>(grid.size()) - 1);
    bool in_beam = false;
    for (int i = 0; i <= h.n_beams && !in_beam; ++i) {
      double half = 2.0 * h.eps_i[i] / sq + hstep;
      if (std::abs(a + 0.5 * hstep - h.centers[i]) < half) in_beam = true;
    }
    if (in_beam && refine > 1)
      for (int m = 1; m < refine; ++m) grid.push_back(a + hstep * m / refine);
  }
  grid.push_back(vI);
  uni.push_back(static_cast<int>(grid.size()) - 1);
  return {grid, uni};
}

}  // namespace

double InitialDataSlice::interp(const std::vector<double>& f, double vq) const {
  if (vq <= v.front()) return f.front();
  if (vq >= v.back()) return f.back();
  size_t lo = std::upper_bound(v.begin(), v.end(), vq) - v.begin() - 1;
  double t = (vq - v[lo]) / (v[lo + 1] - v[lo]);
  return f[lo] + t * (f[lo + 1] - f[lo]);
}

double InitialDataSlice::fbar(double vq, double p, double l) const {
  double q = dv_r_at(vq) * p;
  double total = 0.0;
  for (int i = 0; i <= hierarchy.n_beams; ++i) {
    if (amplitudes[i] == 0.0) continue;
    total += amplitudes[i] * seed_profile(i, hierarchy)(vq, q, l);
  }
  return total;
}

double seed_flux_integral(const HierarchyParams& h, const std::vector<double>& amps,
                          int quad_K) {
  // M[F] = int (pi/2) G(v) / (r_AdS d_v r_AdS) dv
  double vI = h.cosmo.v_infinity;
  double k = h.cosmo.k();
  double sum = 0.0, prev = 0.0, vprev = 0.0;
  bool first = true;
  for (int j = 0; j <= quad_K; ++j) {
    double v = vI * j / quad_K;
    double G = seed_fiber_moments(v, h, amps).G;
    double val = 0.0;
    if (G != 0.0) {
      double r = std::tan(0.5 * k * v) / k;
      double dvr = 0.5 * (1.0 + k * k * r * r);
      val = 0.5 * kPi * G / (r * dvr);
    }
    if (!first) sum += 0.5 * (val + prev) * (v - vprev);
    prev = val;
    vprev = v;
    first = false;
  }
  return sum;
}

InitialDataSlice solve_normalized_gauge(const HierarchyParams& h, const BeamWeights& w,
                                        const GaugeSolveOpts& opts) {
  if (h.mode != HierarchyMode::softened)
    throw ConfigError("solve_normalized_gauge: requires a softened hierarchy");
  w.validate(h);
  double sq = h.cosmo.sqrt_neg_lambda();
  {
    // quadrature must resolve the narrowest beam: >= 16 points across its support
    double hstep = h.cosmo.v_infinity / opts.K;
    double support = 2.0 * h.eps_i[h.n_beams] / sq;
    if (support / (hstep / opts.refine) < 16.0)
      throw ConfigError("solve_normalized_gauge: grid too coarse for the narrowest beam");
  }

  InitialDataSlice s;
  s.hierarchy = h;
  s.amplitudes = w.a;
  s.cosmo = h.cosmo;
  auto [grid, uni] = make_grid(h, opts.K, opts.refine);
  s.v = grid;
  s.uniform_idx = uni;
  const size_t n = grid.size();
  const double k = h.cosmo.k();

  // seed fiber moment G on the grid (independent of the iteration)
  std::vector<double> G(n);
  for (size_t j = 0; j < n; ++j) G[j] = seed_fiber_moments(grid[j], h, w.a).G;

  std::vector<double> kap(n, 0.5), rr(n, 0.0), rho(n, 0.0);
  std::vector<double> I(n, 0.0), E(n, 1.0);
  double a = 1.0;

  auto geometry_from_kappa = [&]() {
    rho[0] = 0.0;
    for (size_t j = 1; j < n; ++j)
      rho[j] = rho[j - 1] + 0.5 * k * (kap[j] + kap[j - 1]) * (grid[j] - grid[j - 1]);
    for (size_t j = 0; j < n; ++j) {
      double rj = std::min(rho[j], 0.5 * kPi * (1.0 - 1e-14));
      rr[j] = std::tan(rj) / k;
    }
  };

  double residual = INFINITY;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    geometry_from_kappa();
    // I(v) = int 32 pi^2 kappa G / (r (1 + k^2 r^2)) dv
    I[0] = 0.0;
    auto igr = [&](size_t j) {
      if (G[j] == 0.0) return 0.0;
      double S = 1.0 + k * k * rr[j] * rr[j];
      return 32.0 * kPi * kPi * kap[j] * G[j] / (rr[j] * S);
    };
    double prev = igr(0);
    for (size_t j = 1; j < n; ++j) {
      double cur = igr(j);
      I[j] = I[j - 1] + 0.5 * (prev + cur) * (grid[j] - grid[j - 1]);
      prev = cur;
    }
    for (size_t j = 0; j < n; ++j) E[j] = std::exp(I[j]);
    double qa = 0.0;
    for (size_t j = 1; j < n; ++j)
      qa += 0.5 * (E[j] + E[j - 1]) * (grid[j] - grid[j - 1]);
    a = (k / kPi) * qa;
    double res = 0.0;
    for (size_t j = 0; j < n; ++j) {
      double knew = E[j] / (2.0 * a);
      res = std::max(res, std::abs(knew - kap[j]));
      kap[j] = kap[j] + opts.damping * (knew - kap[j]);
    }
    residual = res;
    s.fp_history.push_back(res);
    if (res < opts.fp_tol) break;
  }
  if (residual >= opts.fp_tol)
    throw SolverError("solve_normalized_gauge: no convergence, residual " +
                      std::to_string(residual));
  s.fp_residual = residual;
  s.fp_iters = it + 1;
  geometry_from_kappa();

  s.kappa = kap;
  s.rho = rho;
  s.r = rr;
  s.a_gauge = a;
  s.dv_r.resize(n);
  s.omega2.resize(n);
  for (size_t j = 0; j < n; ++j) {
    double S = 1.0 + k * k * rr[j] * rr[j];
    s.dv_r[j] = kap[j] * S;
    s.omega2[j] = 4.0 * kap[j] * kap[j] * S;
  }

  s.MF = seed_flux_integral(h, w.a);
  s.MF_small = s.MF < opts.c0;

  s.mtilde = initial_mass_profile(s);
  s.du_r.resize(n);
  for (size_t j = 0; j < n; ++j) {
    double S = 1.0 + k * k * rr[j] * rr[j];
    double one_minus = S - (rr[j] > 0.0 ? 2.0 * s.mtilde[j] / rr[j] : 0.0);
    s.du_r[j] = -kap[j] * one_minus;
  }
  return s;
}

std::vector<double> initial_mass_profile(const InitialDataSlice& s) {
  const size_t n = s.v.size();
  const double k = s.cosmo.k();
  std::vector<double> mt(n, 0.0);
  // dmt/dv = alpha(v) - beta(v) mt with
  //   alpha = 16 pi^2 kap G + 4 pi^2 kap (1+k^2 r^2) H / r^2
  //   beta  = 32 pi^2 kap G / ((1+k^2 r^2) r)
  auto coeffs = [&](size_t j, double& alpha, double& beta) {
    SeedFiberMoments fm = seed_fiber_moments(s.v[j], s.hierarchy, s.amplitudes);
    alpha = 0.0;
    beta = 0.0;
    double r = s.r[j];
    if (fm.G == 0.0 && fm.H == 0.0) return;
    double S = 1.0 + k * k * r * r;
    alpha = 16.0 * kPi * kPi * s.kappa[j] * fm.G;
    if (fm.H != 0.0 && r > 0.0) alpha += 4.0 * kPi * kPi * s.kappa[j] * S * fm.H / (r * r);
    if (fm.G != 0.0 && r > 0.0) beta = 32.0 * kPi * kPi * s.kappa[j] * fm.G / (S * r);
  };
  double a0, b0, a1, b1;
  coeffs(0, a0, b0);
  for (size_t j = 1; j < n; ++j) {
    coeffs(j, a1, b1);
    double dv = s.v[j] - s.v[j - 1];
    // trapezoidal step, implicit side solved exactly (rhs linear in mt)
    double rhs0 = a0 - b0 * mt[j - 1];
    mt[j] = (mt[j - 1] + 0.5 * dv * (rhs0 + a1)) / (1.0 + 0.5 * dv * b1);
    if (mt[j] < mt[j - 1]) mt[j] = mt[j - 1];  // integrand is nonnegative
    double r = s.r[j];
    if (r > 0.0) {
      double ratio = 2.0 * mt[j] / r - k * k * r * r;  // 2m/r
      if (ratio >= 1.0)
        throw SolverError("initial_mass_profile: data already trapped at v = " +
                          std::to_string(s.v[j]));
    }
    a0 = a1;
    b0 = b1;
  }
  return mt;
}

std::vector<Particle> sample_particles(const InitialDataSlice& s,
                                       const SamplingConfig& cfg) {
  std::vector<Particle> out;
  const HierarchyParams& h = s.hierarchy;
  double sq = h.cosmo.sqrt_neg_lambda();
  double k = h.cosmo.k();
  for (int i = 0; i <= h.n_beams; ++i) {
    double ai = s.amplitudes[i];
    if (ai == 0.0) continue;
    SeedProfile F = seed_profile(i, h);
    double ehat = h.eps_i[i] / sq;
    double vlo = h.centers[i] - 2.0 * ehat, vhi = h.centers[i] + 2.0 * ehat;
    double qlo = 1.0, qhi = 5.0;
    double llo = 2.0 * ehat, lhi = 6.0 * ehat;
    double dv = (vhi - vlo) / cfg.nv, dq = (qhi - qlo) / cfg.np, dl = (lhi - llo) / cfg.nl;
    for (int jv = 0; jv < cfg.nv; ++jv) {
      double vc = vlo + (jv + 0.5) * dv;
      double kapc = s.interp(s.kappa, vc);
      double rc = s.interp(s.r, vc);
      double S = 1.0 + k * k * rc * rc;
      double omega2 = 4.0 * kapc * kapc * S;
      for (int jq = 0; jq < cfg.np; ++jq) {
        double qc = qlo + (jq + 0.5) * dq;
        for (int jl = 0; jl < cfg.nl; ++jl) {
          double lc = llo + (jl + 0.5) * dl;
          double fb = ai * F(vc, qc, lc);
          if (fb <= 0.0) continue;
          Particle p;
          p.u = 0.0;
          p.v = vc;
          // A = Omega^2 p^u = (Omega^2/d_v r) q = 4 kappa q
          p.omega2_pu = 4.0 * kapc * qc;
          p.omega2_pv = omega2 * lc * lc / (rc * rc * p.omega2_pu);
          p.l = lc;
          p.fbar = fb;
          // conserved crossing count: nu = 4 pi^2 fbar dA l dl dv
          p.weight = 4.0 * kPi * kPi * fb * (4.0 * kapc * dq) * lc * dl * dv;
          p.generation = 0;
          p.beam_id = i;
          out.push_back(p);
        }
      }
    }
  }
  return out;
}

double data_norm(const InitialDataSlice& slice, const DataNormOpts& opts) {
  std::vector<Particle> parts = sample_particles(slice, opts.sampling);
  double mass_term = slice.cosmo.sqrt_neg_lambda() * slice.mass_at_infinity();
  if (parts.empty()) return mass_term;

  AdsBackground ads(slice.cosmo);
  double vI = slice.cosmo.v_infinity;
  double k = slice.cosmo.k();
  double span = 2.0 * vI;

  // record each sample's trajectory over one AdS period in u
  std::vector<Trajectory> trajs(parts.size());
  for (size_t ip = 0; ip < parts.size(); ++ip) {
    Particle p = parts[ip];
    trajs[ip].stride = 1;
    AdvanceTarget tgt{TargetKind::u_equals, span * (1.0 + 1e-9)};
    advance(p, ads, tgt, opts.step, &trajs[ip]);
  }

  auto flux_kernel = [&](const TrajPoint& a, const TrajPoint& b, double f) {
    // linear state interpolation at crossing fraction f in [0,1]
    double u = a.u + f * (b.u - a.u), v = a.v + f * (b.v - a.v);
    double A = a.omega2_pu + f * (b.omega2_pu - a.omega2_pu);
    double B = a.omega2_pv + f * (b.omega2_pv - a.omega2_pv);
    double x = std::clamp(v - u, 0.0, vI * (1.0 - 1e-14));
    double r = std::tan(0.5 * k * x) / k;
    double dvr = 0.5 * (1.0 + k * k * r * r);
    if (!(r > 0.0)) return 0.0;
    return (A / dvr + B / dvr) / (8.0 * kPi * r);
  };

  double sup_u = 0.0;
  for (int m = 0; m < opts.n_lines; ++m) {
    double U = span * m / opts.n_lines;
    double tot = 0.0;
    for (size_t ip = 0; ip < parts.size(); ++ip) {
      const auto& pts = trajs[ip].pts;
      for (size_t j = 0; j + 1 < pts.size(); ++j) {
        if (pts[j].u <= U && pts[j + 1].u > U && pts[j + 1].u > pts[j].u) {
          double f = (U - pts[j].u) / (pts[j + 1].u - pts[j].u);
          tot += parts[ip].weight * flux_kernel(pts[j], pts[j + 1], f);
        }
      }
    }
    sup_u = std::max(sup_u, tot);
  }

  double sup_v = 0.0;
  int nvlines = (3 * opts.n_lines) / 2;
  for (int m = 1; m <= nvlines; ++m) {
    double V = 3.0 * vI * m / nvlines;
    double tot = 0.0;
    for (size_t ip = 0; ip < parts.size(); ++ip) {
      const auto& pts = trajs[ip].pts;
      for (size_t j = 0; j + 1 < pts.size(); ++j) {
        if (pts[j].v <= V && pts[j + 1].v > V && pts[j + 1].v > pts[j].v) {
          double f = (V - pts[j].v) / (pts[j + 1].v - pts[j].v);
          tot += parts[ip].weight * flux_kernel(pts[j], pts[j + 1], f);
        }
      }
    }
    sup_v = std::max(sup_v, tot);
  }

  return sup_u + sup_v + mass_term;
}

}  // namespace adsv
