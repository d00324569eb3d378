#include "adsv/vlasov.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

namespace adsv {

namespace {

constexpr double kRhoClamp = 0.5 * kPi * (1.0 - 1e-13);

void resize_slice(FieldSlice& s, int K) {
  for (auto* a : {&s.rho, &s.w, &s.phi, &s.psit, &s.mtilde, &s.tau_uu, &s.tau_uv,
                  &s.tau_vv, &s.n_u, &s.n_v, &s.dv_w, &s.du_w, &s.du_mtilde})
    a->assign(K + 1, 0.0);
}

// linear extrapolation to the axis node from the two nearest interior nodes
double axis_extrapolate(double q1, double q2) { return 2.0 * q1 - q2; }

// RHS of d_v (d_u log Omega~^2), regular on [axis, infinity]
double w_equation_rhs(const FieldSlice& s, int j) {
  double k = s.k;
  double Ot2 = s.omega_tilde2(j);
  double r = s.r(j);
  double term = 0.0;
  if (j == 0) {
    // removable m~/r^3 and tau_uv/r^2 singularities: one-sided extrapolation
    auto q = [&](int jj) {
      double rr = s.r(jj);
      return (s.mtilde[jj] != 0.0 && rr > 0.0) ? s.mtilde[jj] / (rr * rr * rr) : 0.0;
    };
    auto t = [&](int jj) {
      double rr = s.r(jj);
      return (s.tau_uv[jj] != 0.0 && rr > 0.0) ? s.tau_uv[jj] / (rr * rr) : 0.0;
    };
    term = axis_extrapolate(q(1), q(2)) * Ot2 - 16.0 * kPi * axis_extrapolate(t(1), t(2));
    return term;
  }
  double S = 1.0 + k * k * r * r;
  if (s.mtilde[j] != 0.0) {
    term += s.mtilde[j] / (r * r * r) * Ot2;
    term += (s.mtilde[j] / r) * k * k * (1.0 + 3.0 * k * k * r * r) / S * Ot2;
  }
  if (s.tau_uv[j] != 0.0)
    term -= 16.0 * kPi * (1.0 + 1.5 * k * k * r * r) / S * s.tau_uv[j] / (r * r);
  return term;
}

struct OdeState {
  double rho, phi, psit, mt;
};

OdeState ode_rhs(const FieldSlice& s, int j, const OdeState& y) {
  double k = s.k;
  double Ot2 = s.omega_tilde2(j);
  double rr = std::tan(std::min(y.rho, kRhoClamp)) / k;
  double S = 1.0 + k * k * rr * rr;
  OdeState d;
  d.rho = k * Ot2 * y.phi;
  d.phi = (s.tau_vv[j] != 0.0 && rr > 0.0) ? -4.0 * kPi * s.tau_vv[j] / (rr * Ot2 * S) : 0.0;
  d.psit = 0.0;
  if (y.mt != 0.0 && rr > 0.0) d.psit += Ot2 * y.mt * (0.5 / (rr * rr) + k * k / S);
  if (s.tau_uv[j] != 0.0 && rr > 0.0) d.psit -= 4.0 * kPi * s.tau_uv[j] / (rr * S);
  d.mt = 8.0 * kPi * (y.psit * s.tau_vv[j] / Ot2 + y.phi * s.tau_uv[j]);
  return d;
}

// deterministic chunked parallel-for; chunk results merged in index order
template <typename Fn>
void run_chunks(size_t n, int threads, Fn&& fn) {
  int nt = std::max(1, threads);
  if (nt == 1 || n < 64) {
    fn(0, n, 0);
    return;
  }
  size_t per = (n + nt - 1) / nt;
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t) {
    size_t b = t * per, e = std::min(n, b + per);
    if (b >= e) break;
    pool.emplace_back([&, b, e, t] { fn(b, e, t); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

DepositResult deposit_moments(const std::vector<Particle>& parts, FieldSlice& slice,
                              int threads) {
  const int K = slice.K();
  const double h = slice.h;
  const double u = slice.u;
  int nt = std::max(1, threads);
  struct Buf {
    std::vector<double> tuu, tuv, tvv, nu, nv;
    int skipped = 0;
  };
  std::vector<Buf> bufs(nt);
  for (auto& b : bufs) {
    b.tuu.assign(K + 1, 0.0);
    b.tuv.assign(K + 1, 0.0);
    b.tvv.assign(K + 1, 0.0);
    b.nu.assign(K + 1, 0.0);
    b.nv.assign(K + 1, 0.0);
  }
  run_chunks(parts.size(), nt, [&](size_t b, size_t e, int t) {
    Buf& o = bufs[t];
    for (size_t ip = b; ip < e; ++ip) {
      const Particle& p = parts[ip];
      double x = (p.v - u) / h;
      if (x < -1.0 || x > K + 1.0 || std::abs(p.u - u) > 1e-6 * h) {
        o.skipped++;
        continue;
      }
      int j0 = static_cast<int>(std::floor(x));
      double f = x - j0;
      // cloud-in-cell, folded at the axis and at infinity
      int ja = std::clamp(j0, 0, K), jb = std::clamp(j0 + 1, 0, K);
      double A = p.omega2_pu, B = p.omega2_pv, nu = p.weight;
      double c = nu / (8.0 * kPi * h);
      double wts[2] = {1.0 - f, f};
      int idx[2] = {ja, jb};
      for (int m = 0; m < 2; ++m) {
        double wt = wts[m];
        if (wt == 0.0) continue;
        int j = idx[m];
        o.tvv[j] += c * A * wt;
        o.tuv[j] += c * B * wt;
        o.tuu[j] += c * (B * B / A) * wt;
        o.nv[j] += nu * wt / (4.0 * kPi * h);
        o.nu[j] += nu * (B / A) * wt / (4.0 * kPi * h);
      }
    }
  });
  DepositResult res;
  for (const Buf& b : bufs) {
    res.skipped += b.skipped;
    for (int j = 0; j <= K; ++j) {
      slice.tau_uu[j] += b.tuu[j];
      slice.tau_uv[j] += b.tuv[j];
      slice.tau_vv[j] += b.tvv[j];
      slice.n_u[j] += b.nu[j];
      slice.n_v[j] += b.nv[j];
    }
  }
  return res;
}

void Evolution::compute_derivative_arrays(FieldSlice& s) {
  const int K = s.K();
  const double h = s.h;
  // d_v w: centered interior, one-sided second order at the ends
  s.dv_w[0] = (-3.0 * s.w[0] + 4.0 * s.w[1] - s.w[2]) / (2.0 * h);
  s.dv_w[K] = (3.0 * s.w[K] - 4.0 * s.w[K - 1] + s.w[K - 2]) / (2.0 * h);
  for (int j = 1; j < K; ++j) s.dv_w[j] = (s.w[j + 1] - s.w[j - 1]) / (2.0 * h);
  // d_u w from the wave equation, anchored by the axis Neumann condition
  s.du_w[0] = s.dv_w[0];
  double prev = w_equation_rhs(s, 0);
  for (int j = 1; j <= K; ++j) {
    double cur = w_equation_rhs(s, j);
    s.du_w[j] = s.du_w[j - 1] + 0.5 * h * (prev + cur);
    prev = cur;
  }
  // d_u mt = -8 pi (phi tau_uu + psit tau_uv / Omega~^2)
  for (int j = 0; j <= K; ++j)
    s.du_mtilde[j] =
        -8.0 * kPi * (s.phi[j] * s.tau_uu[j] + s.psit[j] * s.tau_uv[j] / s.omega_tilde2(j));
}

void Evolution::integrate_slice_odes(FieldSlice& s, EvolutionMonitor* mon) {
  const int K = s.K();
  const double h = s.h;
  double Oax = std::exp(0.5 * s.w[0]);
  OdeState y{0.0, 0.5 / Oax, 0.5 * Oax, 0.0};
  s.rho[0] = 0.0;
  s.phi[0] = y.phi;
  s.psit[0] = y.psit;
  s.mtilde[0] = 0.0;
  for (int j = 0; j < K; ++j) {
    OdeState f0 = ode_rhs(s, j, y);
    OdeState yp{y.rho + h * f0.rho, y.phi + h * f0.phi, y.psit + h * f0.psit,
                y.mt + h * f0.mt};
    for (int c = 0; c < 2; ++c) {
      OdeState f1 = ode_rhs(s, j + 1, yp);
      yp = {y.rho + 0.5 * h * (f0.rho + f1.rho), y.phi + 0.5 * h * (f0.phi + f1.phi),
            y.psit + 0.5 * h * (f0.psit + f1.psit), y.mt + 0.5 * h * (f0.mt + f1.mt)};
    }
    y = yp;
    s.rho[j + 1] = y.rho;
    s.phi[j + 1] = y.phi;
    s.psit[j + 1] = y.psit;
    s.mtilde[j + 1] = y.mt;
  }
  // conformal infinity sits on the last grid diagonal: rho must land on pi/2
  double drift = std::abs(s.rho[K] - 0.5 * kPi);
  if (mon) mon->boundary_rho_drift = std::max(mon->boundary_rho_drift, drift);
  s.rho[K] = kRhoClamp;
}

BackgroundPoint FrozenSliceBackground::eval(double u, double v) const {
  const FieldSlice& s = *s_;
  const int K = s.K();
  const double h = s.h;
  double du = u - s.u;
  double rho, w, phi, psit, mt, du_w, dv_w, du_mt;
  if (v <= s.u + s.v_inf) {
    double x = std::clamp((v - s.u) / h, 0.0, static_cast<double>(K));
    int j = std::min(static_cast<int>(x), K - 1);
    double t = x - j;
    auto L = [&](const std::vector<double>& a) { return a[j] + t * (a[j + 1] - a[j]); };
    rho = L(s.rho);
    w = L(s.w);
    phi = L(s.phi);
    psit = L(s.psit);
    mt = L(s.mtilde);
    du_w = L(s.du_w);
    dv_w = L(s.dv_w);
    du_mt = L(s.du_mtilde);
    rho += du * (-s.k * psit);
    w += du * du_w;
    mt += du * du_mt;
  } else {
    // beyond the slice's boundary corner: transport along infinity first
    double ub = v - s.v_inf;
    double dI = ub - s.u;
    double dv_mt = (3.0 * s.mtilde[K] - 4.0 * s.mtilde[K - 1] + s.mtilde[K - 2]) / (2.0 * h);
    rho = s.rho[K];
    w = s.w[K] + dI * (s.du_w[K] + s.dv_w[K]) + (u - ub) * s.du_w[K];
    phi = s.phi[K];
    psit = s.psit[K];
    mt = s.mtilde[K] + dI * (s.du_mtilde[K] + dv_mt) + (u - ub) * s.du_mtilde[K];
    du_w = s.du_w[K];
    dv_w = s.dv_w[K];
  }
  BackgroundPoint p;
  double k = s.k;
  double r = std::tan(std::min(rho, kRhoClamp)) / k;
  double S = 1.0 + k * k * r * r;
  double Ot2 = std::exp(w);
  p.r = r;
  p.omega2 = Ot2 * S;
  p.dv_r = S * Ot2 * phi;
  p.du_r = -S * psit;
  p.cv = r > 0.0 ? dv_w - 2.0 * Ot2 * phi / r : 0.0;
  p.cu = r > 0.0 ? du_w + 2.0 * psit / r : 0.0;
  p.mtilde = mt;
  return p;
}

const FieldSlice* SliceHistory::slice_at_u(double u) const {
  if (slices.empty()) return nullptr;
  double h = slices.front().h;
  double u0 = slices.front().u;
  int idx = static_cast<int>(std::lround((u - u0) / h));
  idx = std::clamp(idx, 0, static_cast<int>(slices.size()) - 1);
  return &slices[idx];
}

double SliceHistory::mtilde_at(double u, double v) const {
  const FieldSlice* s = slice_at_u(u);
  if (!s) throw SolverError("SliceHistory: empty history");
  int j = static_cast<int>(std::lround((v - s->u) / s->h));
  j = std::clamp(j, 0, s->K());
  return s->mtilde[j];
}

double SliceHistory::min_r_in_rect(double u0, double u1, double v0, double v1) const {
  double best = INFINITY;
  for (const FieldSlice& s : slices) {
    if (s.u < u0 - 0.5 * s.h || s.u > u1 + 0.5 * s.h) continue;
    int jlo = std::max(0, static_cast<int>(std::floor((v0 - s.u) / s.h)));
    int jhi = std::min(s.K(), static_cast<int>(std::ceil((v1 - s.u) / s.h)));
    for (int j = jlo; j <= jhi; ++j) best = std::min(best, s.r(j));
  }
  return best;
}

bool SliceHistory::covers(double u) const {
  return !slices.empty() && u >= slices.front().u - 1e-12 &&
         u <= slices.back().u + 1e-12;
}

BackgroundPoint HistoryBackground::eval(double u, double v) const {
  const auto& sl = h_->slices;
  double h = sl.front().h;
  double u0 = sl.front().u;
  double x = (u - u0) / h;
  int i = std::clamp(static_cast<int>(std::floor(x)), 0,
                     static_cast<int>(sl.size()) - 2);
  double f = std::clamp(x - i, 0.0, 1.0);
  BackgroundPoint a = FrozenSliceBackground(sl[i]).eval(u, v);
  BackgroundPoint b = FrozenSliceBackground(sl[i + 1]).eval(u, v);
  BackgroundPoint p;
  auto mix = [&](double pa, double pb) { return (1.0 - f) * pa + f * pb; };
  p.r = mix(a.r, b.r);
  p.omega2 = mix(a.omega2, b.omega2);
  p.du_r = mix(a.du_r, b.du_r);
  p.dv_r = mix(a.dv_r, b.dv_r);
  p.cv = mix(a.cv, b.cv);
  p.cu = mix(a.cu, b.cu);
  p.mtilde = mix(a.mtilde, b.mtilde);
  return p;
}

double HistoryBackground::T_uv_at(double u, double v) const {
  const auto& sl = h_->slices;
  double h = sl.front().h;
  double x = (u - sl.front().u) / h;
  int i = std::clamp(static_cast<int>(std::floor(x)), 0,
                     static_cast<int>(sl.size()) - 2);
  double f = std::clamp(x - i, 0.0, 1.0);
  auto at = [&](const FieldSlice& s) {
    double xx = std::clamp((v - s.u) / s.h, 0.0, static_cast<double>(s.K()));
    int j = std::min(static_cast<int>(xx), s.K() - 1);
    double t = xx - j;
    double tau = s.tau_uv[j] + t * (s.tau_uv[j + 1] - s.tau_uv[j]);
    double r = s.r(j) + t * (s.r(j + 1) - s.r(j));
    return r > 0.0 ? tau / (r * r) : 0.0;
  };
  return (1.0 - f) * at(sl[i]) + f * at(sl[i + 1]);
}

Evolution::Evolution(const InitialDataSlice& data, const SamplingConfig& sampling,
                     const EvolutionConfig& cfg)
    : cfg_(cfg) {
  const int K = cfg.K;
  const Cosmology& cosmo = data.cosmo;
  FieldSlice s;
  s.u = 0.0;
  s.n = 0;
  s.h = cosmo.v_infinity / K;
  s.v_inf = cosmo.v_infinity;
  s.k = cosmo.k();
  resize_slice(s, K);
  for (int j = 0; j <= K; ++j) {
    double vq = j * s.h;
    double kap = data.interp(data.kappa, vq);
    s.w[j] = std::log(4.0 * kap * kap);
  }
  cur_ = std::move(s);
  parts_ = sample_particles(data, sampling);
  init_from_slice();
  double mref = data.mass_at_infinity();
  if (mref > 0.0)
    sampling_mass_error_ = std::abs(cur_.mass_at_infinity() - mref) / mref;
}

Evolution::Evolution(FieldSlice slice0, std::vector<Particle> parts,
                     const EvolutionConfig& cfg)
    : cfg_(cfg), cur_(std::move(slice0)), parts_(std::move(parts)) {
  init_from_slice();
}

void Evolution::init_from_slice() {
  mon_.eta0 = cfg_.eta0;
  mon_.noise_tol = cfg_.noise_tol;
  mon_.cap_u_norm = cfg_.cap_u_norm;
  mon_.cap_t_norm = cfg_.cap_t_norm;
  // make slice 0 self-consistent with the deposited moments
  std::fill(cur_.tau_uu.begin(), cur_.tau_uu.end(), 0.0);
  std::fill(cur_.tau_uv.begin(), cur_.tau_uv.end(), 0.0);
  std::fill(cur_.tau_vv.begin(), cur_.tau_vv.end(), 0.0);
  std::fill(cur_.n_u.begin(), cur_.n_u.end(), 0.0);
  std::fill(cur_.n_v.begin(), cur_.n_v.end(), 0.0);
  deposit_moments(parts_, cur_, cfg_.threads);
  integrate_slice_odes(cur_, &mon_);
  compute_derivative_arrays(cur_);
  mon_.boundary_mass_ref = cur_.mass_at_infinity();
  if (cfg_.record_history) hist_.slices.push_back(cur_);
}

double Evolution::total_weight() const {
  double s = 0.0;
  for (const Particle& p : parts_) s += p.weight;
  return s;
}

namespace {

class MidpointBackground final : public Background {
 public:
  MidpointBackground(const Background& a, const Background& b) : a_(&a), b_(&b) {}
  BackgroundPoint eval(double u, double v) const override {
    BackgroundPoint pa = a_->eval(u, v), pb = b_->eval(u, v), p;
    p.r = 0.5 * (pa.r + pb.r);
    p.omega2 = 0.5 * (pa.omega2 + pb.omega2);
    p.du_r = 0.5 * (pa.du_r + pb.du_r);
    p.dv_r = 0.5 * (pa.dv_r + pb.dv_r);
    p.cv = 0.5 * (pa.cv + pb.cv);
    p.cu = 0.5 * (pa.cu + pb.cu);
    p.mtilde = 0.5 * (pa.mtilde + pb.mtilde);
    return p;
  }
  double v_infinity() const override { return a_->v_infinity(); }

 private:
  const Background* a_;
  const Background* b_;
};

}  // namespace

StepOutcome Evolution::advance_once() {
  const FieldSlice& prev = cur_;
  const double h = prev.h;
  const int K = prev.K();
  const double u_next = prev.u + h;

  auto push = [&](const Background& bg, std::vector<Particle>& out) {
    out = parts_;
    run_chunks(out.size(), cfg_.threads, [&](size_t b, size_t e, int) {
      AdvanceTarget tgt{TargetKind::u_equals, u_next};
      for (size_t i = b; i < e; ++i) {
        if (advance(out[i], bg, tgt, cfg_.step) != AdvanceStatus::reached_target)
          throw SolverError("particle push exceeded the substep budget");
      }
    });
  };

  FrozenSliceBackground bg_prev(prev);
  std::vector<Particle> pushed;
  push(bg_prev, pushed);

  FieldSlice next;
  next.u = u_next;
  next.n = prev.n + 1;
  next.h = h;
  next.v_inf = prev.v_inf;
  next.k = prev.k;
  resize_slice(next, K);
  deposit_moments(pushed, next, cfg_.threads);

  // predictor for w, then (field_iters - 1) trapezoidal correctors
  for (int j = 0; j < K; ++j) next.w[j] = prev.w[j + 1] + h * prev.du_w[j + 1];
  next.w[K] = prev.w[K] + h * (prev.du_w[K] + prev.dv_w[K]);
  integrate_slice_odes(next, &mon_);
  for (int it = 1; it < cfg_.field_iters; ++it) {
    compute_derivative_arrays(next);
    if (cfg_.repush) {
      FrozenSliceBackground bg_next(next);
      MidpointBackground mid(bg_prev, bg_next);
      push(mid, pushed);
      std::fill(next.tau_uu.begin(), next.tau_uu.end(), 0.0);
      std::fill(next.tau_uv.begin(), next.tau_uv.end(), 0.0);
      std::fill(next.tau_vv.begin(), next.tau_vv.end(), 0.0);
      std::fill(next.n_u.begin(), next.n_u.end(), 0.0);
      std::fill(next.n_v.begin(), next.n_v.end(), 0.0);
      deposit_moments(pushed, next, cfg_.threads);
    }
    for (int j = 0; j < K; ++j)
      next.w[j] = prev.w[j + 1] + 0.5 * h * (prev.du_w[j + 1] + next.du_w[j]);
    next.w[K] = prev.w[K] + 0.5 * h * ((prev.du_w[K] + prev.dv_w[K]) +
                                       (next.du_w[K] + next.dv_w[K]));
    integrate_slice_odes(next, &mon_);
  }
  compute_derivative_arrays(next);

  // --- monitors and event scans -------------------------------------------
  StepOutcome outcome = StepOutcome::ok;
  int j_mask = K + 1;
  if (excise_v < INFINITY)
    j_mask = std::max(0, static_cast<int>(std::floor((excise_v - next.u) / h)));

  for (int j = 0; j <= std::min(K, j_mask); ++j) {
    double ratio = next.mass_ratio(j);
    double rr = next.r(j);
    double rt = rr > 0.0 ? 2.0 * next.mtilde[j] / rr : 0.0;
    mon_.max_mass_ratio = std::max(mon_.max_mass_ratio, ratio);
    if (rt > mon_.eta0 && mon_.breaches.size() < 10000)
      mon_.breaches.push_back({"eta0", next.u, rt, mon_.eta0});
    if (ratio > 1.0) {
      trapped_.push_back({next.u, next.v_of(j)});
      if (cfg_.trapped_policy == TrappedPolicy::stop) {
        outcome = StepOutcome::trapped;
      } else {
        excise_v = std::min(excise_v, next.v_of(j));
      }
    } else if (next.phi[j] <= 0.0 && j < K) {
      mon_.breaches.push_back({"dv_r_nonpositive_untrapped", next.u, next.phi[j], 0.0});
      outcome = StepOutcome::breakdown;
    }
  }

  // flux norm along the slice
  double fl = 0.0;
  for (int j = 1; j <= K; ++j) {
    auto g = [&](int jj) {
      double rr = next.r(jj);
      if (rr <= 0.0) return 0.0;
      double val = 0.0;
      if (next.tau_vv[jj] != 0.0 && next.dv_r(jj) > 0.0)
        val += next.tau_vv[jj] / next.dv_r(jj);
      double psi = -next.du_r(jj);
      if (next.tau_uv[jj] != 0.0 && psi > 0.0) val += next.tau_uv[jj] / psi;
      return val / rr;
    };
    fl += 0.5 * (g(j - 1) + g(j)) * h;
  }
  mon_.max_flux_norm = std::max(mon_.max_flux_norm, fl);
  if (fl > mon_.cap_u_norm && mon_.breaches.size() < 10000)
    mon_.breaches.push_back({"flux_norm_cap", next.u, fl, mon_.cap_u_norm});

  // boundary mass conservation and slice monotonicity
  if (excise_v == INFINITY) {
    double drift = std::abs(next.mass_at_infinity() - mon_.boundary_mass_ref);
    mon_.boundary_mass_drift = std::max(mon_.boundary_mass_drift, drift);
  }
  double scale = std::max(std::abs(next.mass_at_infinity()), 1e-300);
  for (int j = 0; j < std::min(K, j_mask); ++j) {
    double d = next.mtilde[j + 1] - next.mtilde[j];
    if (d < mon_.mass_monotonicity_dip) mon_.mass_monotonicity_dip = d;
    if (d < -mon_.noise_tol * scale && mon_.breaches.size() < 10000)
      mon_.breaches.push_back({"mass_monotonicity", next.u, d, -mon_.noise_tol * scale});
  }

  // u-constraint residual (monitored, never enforced)
  double worst = 0.0;
  double taumax = 0.0;
  for (int j = 0; j <= K; ++j) taumax = std::max(taumax, next.tau_uu[j]);
  if (taumax > 0.0) {
    for (int jg = next.n + 1; jg <= prev.n + K - 1; ++jg) {
      int j0 = jg - prev.n, j1 = jg - next.n;
      if (j1 < 1 || j1 > K || j0 < 1 || j0 > K) continue;
      double tm = 0.5 * (prev.tau_uu[j0] + next.tau_uu[j1]);
      if (tm < 1e-3 * taumax) continue;
      auto q = [&](const FieldSlice& s, int j) { return -s.psit[j] / s.omega_tilde2(j); };
      double dq = (q(next, j1) - q(prev, j0)) / h;
      auto rhsq = [&](const FieldSlice& s, int j) {
        double rr = s.r(j);
        return rr > 0.0 ? 4.0 * kPi * s.tau_uu[j] / (rr * s.omega2(j)) : 0.0;
      };
      double rhs = 0.5 * (rhsq(next, j1) + rhsq(prev, j0));
      double sc = std::max({std::abs(dq), std::abs(rhs), 1e-300});
      worst = std::max(worst, std::abs(dq + rhs) / sc);
    }
    mon_.u_constraint_residual = std::max(mon_.u_constraint_residual, worst);
  }

  parts_ = std::move(pushed);
  cur_ = std::move(next);
  if (cfg_.record_history && (cur_.n % cfg_.history_stride == 0))
    hist_.slices.push_back(cur_);
  return outcome;
}

StepOutcome Evolution::step() {
  if (stopped_) throw SolverError("Evolution: stepping after a terminal event");
  StepOutcome out = advance_once();
  if (out == StepOutcome::trapped && cfg_.trapped_policy == TrappedPolicy::stop)
    stopped_ = true;
  if (out == StepOutcome::breakdown) stopped_ = true;
  return out;
}

StepOutcome Evolution::run_until(double u_max) {
  while (cur_.u + 0.5 * cur_.h < u_max) {
    StepOutcome out = step();
    if (out != StepOutcome::ok) return out;
    if (excise_v < INFINITY && cur_.u >= excise_v) break;  // axis reached the mask
  }
  return StepOutcome::ok;
}

std::vector<TrappedEvent> detect_trapped(const FieldSlice& s) {
  std::vector<TrappedEvent> out;
  for (int j = 0; j <= s.K(); ++j)
    if (s.mass_ratio(j) > 1.0) out.push_back({s.u, s.v_of(j)});
  return out;
}

ConservationReport audit_vlasov_conservation(const SliceHistory& hist) {
  ConservationReport rep;
  const auto& sl = hist.slices;
  if (sl.size() < 2) return rep;
  double l1 = 0.0;
  for (size_t i = 0; i + 1 < sl.size(); ++i) {
    const FieldSlice& a = sl[i];
    const FieldSlice& b = sl[i + 1];
    if (std::abs(b.u - a.u - a.h) > 1e-9 * a.h) continue;  // need adjacent slices
    double h = a.h;
    double taumax = 0.0;
    for (int j = 0; j <= a.K(); ++j) taumax = std::max(taumax, a.tau_vv[j]);
    if (taumax <= 0.0) continue;
    for (int jg = b.n + 1; jg <= a.n + a.K() - 1; ++jg) {
      int ja = jg - a.n, jb = jg - b.n;
      if (ja < 1 || ja > a.K() - 1 || jb < 1 || jb > b.K() - 1) continue;
      double tm = 0.5 * (a.tau_vv[ja] + b.tau_vv[jb]);
      if (tm < 1e-2 * taumax) continue;
      double du_tau = (b.tau_vv[jb] - a.tau_vv[ja]) / h;
      double dv_tau = 0.5 * ((a.tau_uv[ja + 1] - a.tau_uv[ja - 1]) +
                             (b.tau_uv[jb + 1] - b.tau_uv[jb - 1])) / (2.0 * h);
      auto cv = [&](const FieldSlice& s, int j) {
        double rr = s.r(j);
        return rr > 0.0 ? s.dv_w[j] - 2.0 * s.omega_tilde2(j) * s.phi[j] / rr : 0.0;
      };
      double cvm = 0.5 * (cv(a, ja) + cv(b, jb));
      double tuv = 0.5 * (a.tau_uv[ja] + b.tau_uv[jb]);
      double resid = du_tau + dv_tau - cvm * tuv;
      double sc = std::max({std::abs(du_tau), std::abs(dv_tau), std::abs(cvm * tuv),
                            1e-300});
      rep.max_resid = std::max(rep.max_resid, std::abs(resid) / sc);
      l1 += std::abs(resid) / sc;
      rep.cells++;
    }
  }
  if (rep.cells > 0) rep.l1_resid = l1 / rep.cells;
  return rep;
}

namespace {
constexpr char kMagic[8] = {'A', 'D', 'V', 'L', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::ofstream& os, const T& x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(T));
}
template <typename T>
void get(std::ifstream& is, T& x) {
  is.read(reinterpret_cast<char*>(&x), sizeof(T));
}
void put_vec(std::ofstream& os, const std::vector<double>& v) {
  std::uint64_t n = v.size();
  put(os, n);
  os.write(reinterpret_cast<const char*>(v.data()), n * sizeof(double));
}
void get_vec(std::ifstream& is, std::vector<double>& v) {
  std::uint64_t n = 0;
  get(is, n);
  v.resize(n);
  is.read(reinterpret_cast<char*>(v.data()), n * sizeof(double));
}
}  // namespace

void write_checkpoint(const std::string& path, const FieldSlice& s,
                      const std::vector<Particle>& parts) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw SolverError("checkpoint: cannot open " + path);
  os.write(kMagic, 8);
  std::uint32_t version = 1;
  put(os, version);
  put(os, s.u);
  std::int32_t n = s.n;
  put(os, n);
  put(os, s.h);
  put(os, s.v_inf);
  put(os, s.k);
  for (const auto* a : {&s.rho, &s.w, &s.phi, &s.psit, &s.mtilde, &s.tau_uu, &s.tau_uv,
                        &s.tau_vv, &s.n_u, &s.n_v})
    put_vec(os, *a);
  std::uint64_t np = parts.size();
  put(os, np);
  for (const Particle& p : parts) {
    put(os, p.u); put(os, p.v); put(os, p.omega2_pu); put(os, p.omega2_pv);
    put(os, p.l); put(os, p.weight); put(os, p.fbar);
    std::int32_t g = p.generation, bid = p.beam_id;
    put(os, g); put(os, bid);
  }
}

void read_checkpoint(const std::string& path, FieldSlice& s,
                     std::vector<Particle>& parts) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SolverError("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw SolverError("checkpoint: bad magic in " + path);
  std::uint32_t version = 0;
  get(is, version);
  if (version != 1) throw SolverError("checkpoint: unsupported version");
  get(is, s.u);
  std::int32_t n = 0;
  get(is, n);
  s.n = n;
  get(is, s.h);
  get(is, s.v_inf);
  get(is, s.k);
  for (auto* a : {&s.rho, &s.w, &s.phi, &s.psit, &s.mtilde, &s.tau_uu, &s.tau_uv,
                  &s.tau_vv, &s.n_u, &s.n_v})
    get_vec(is, *a);
  int K = static_cast<int>(s.rho.size()) - 1;
  s.dv_w.assign(K + 1, 0.0);
  s.du_w.assign(K + 1, 0.0);
  s.du_mtilde.assign(K + 1, 0.0);
  std::uint64_t np = 0;
  get(is, np);
  parts.resize(np);
  for (auto& p : parts) {
    get(is, p.u); get(is, p.v); get(is, p.omega2_pu); get(is, p.omega2_pv);
    get(is, p.l); get(is, p.weight); get(is, p.fbar);
    std::int32_t g = 0, bid = 0;
    get(is, g); get(is, bid);
    p.generation = g;
    p.beam_id = bid;
  }
  if (!is) throw SolverError("checkpoint: truncated file " + path);
}

}  // namespace adsv
