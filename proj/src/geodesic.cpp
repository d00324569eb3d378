#include "adsv/geodesic.hpp"

#include <algorithm>
#include <cmath>

namespace adsv {

namespace {

struct State {
  double u, v, A, B;
};

struct Deriv {
  double du, dv, dA, dB;
};

Deriv rhs(const State& s, double l, const Background& bg, int dir) {
  Deriv d{0, 0, 0, 0};
  double sum = s.A + s.B;
  if (!(sum > 0.0)) throw SolverError("geodesic: degenerate momentum state");
  d.du = dir * s.A / sum;
  d.dv = dir * s.B / sum;
  if (l > 0.0) {
    BackgroundPoint p = bg.eval(s.u, s.v);
    double pi = s.A * s.B / sum;
    d.dA = dir * p.cv * pi;
    d.dB = dir * p.cu * pi;
  }
  return d;
}

State rk4(const State& s, double dtau, double l, const Background& bg, int dir) {
  auto adv = [&](const State& base, const Deriv& k, double f) {
    return State{base.u + f * k.du, base.v + f * k.dv, base.A + f * k.dA,
                 base.B + f * k.dB};
  };
  Deriv k1 = rhs(s, l, bg, dir);
  Deriv k2 = rhs(adv(s, k1, 0.5 * dtau), l, bg, dir);
  Deriv k3 = rhs(adv(s, k2, 0.5 * dtau), l, bg, dir);
  Deriv k4 = rhs(adv(s, k3, dtau), l, bg, dir);
  State out;
  out.u = s.u + dtau / 6.0 * (k1.du + 2 * k2.du + 2 * k3.du + k4.du);
  out.v = s.v + dtau / 6.0 * (k1.dv + 2 * k2.dv + 2 * k3.dv + k4.dv);
  out.A = s.A + dtau / 6.0 * (k1.dA + 2 * k2.dA + 2 * k3.dA + k4.dA);
  out.B = s.B + dtau / 6.0 * (k1.dB + 2 * k2.dB + 2 * k3.dB + k4.dB);
  return out;
}

// rescale (A,B) by a common factor to restore A B = Omega^2 l^2 / r^2
double project_shell(State& s, double l, const Background& bg) {
  if (l <= 0.0) return 0.0;
  BackgroundPoint p = bg.eval(s.u, s.v);
  double target = p.omega2 * l * l / (p.r * p.r);
  double prod = s.A * s.B;
  if (!(prod > 0.0) || !(target > 0.0))
    throw SolverError("geodesic: lost the null shell (A B <= 0)");
  double c = std::sqrt(target / prod);
  s.A *= c;
  s.B *= c;
  double sum = s.A + s.B;
  return std::abs(s.A * s.B - target) / (sum * sum);
}

}  // namespace

Particle make_particle(double u, double v, double pu, double pv, double l,
                       double weight, const Background& bg) {
  BackgroundPoint p = bg.eval(u, v);
  Particle q;
  q.u = u;
  q.v = v;
  q.omega2_pu = p.omega2 * pu;
  q.omega2_pv = p.omega2 * pv;
  q.l = l;
  q.weight = weight;
  if (l > 0.0) {
    State s{u, v, q.omega2_pu, q.omega2_pv};
    project_shell(s, l, bg);
    q.omega2_pu = s.A;
    q.omega2_pv = s.B;
  }
  return q;
}

void step_geodesic(Particle& p, const Background& bg, double dtau) {
  State s{p.u, p.v, p.omega2_pu, p.omega2_pv};
  s = rk4(s, dtau, p.l, bg, +1);
  project_shell(s, p.l, bg);
  p.u = s.u;
  p.v = s.v;
  p.omega2_pu = s.A;
  p.omega2_pv = s.B;
}

void reflect_at_infinity(Particle& p, double v_inf, double tol) {
  if (std::abs(p.v - p.u - v_inf) > tol * v_inf)
    throw ContractViolation("reflect_at_infinity called away from v - u = v_I");
  std::swap(p.omega2_pu, p.omega2_pv);
  p.generation += 1;
}

AdvanceStatus advance(Particle& p, const Background& bg, const AdvanceTarget& target,
                      const StepControl& ctl, Trajectory* traj, AdvanceDiag* diag,
                      int direction) {
  const double v_inf = bg.v_infinity();
  const int dir = direction >= 0 ? +1 : -1;
  State s{p.u, p.v, p.omega2_pu, p.omega2_pv};
  double stot = 0.0;
  long steps = 0;
  long recorded = 0;

  auto coord = [&](const State& st) {
    switch (target.kind) {
      case TargetKind::u_equals: return st.u;
      case TargetKind::v_equals: return st.v;
      default: return st.u + st.v;
    }
  };
  auto past_target = [&](const State& st) {
    return dir * (coord(st) - target.value) >= 0.0;
  };

  auto record = [&](const State& st, bool force) {
    if (diag) {
      BackgroundPoint bp = bg.eval(st.u, st.v);
      diag->min_r = std::min(diag->min_r, bp.r);
    }
    if (!traj) return;
    if (!force && (recorded++ % traj->stride)) return;
    BackgroundPoint bp = bg.eval(st.u, st.v);
    TrajPoint t;
    t.s = stot;
    t.u = st.u;
    t.v = st.v;
    t.omega2_pu = st.A;
    t.omega2_pv = st.B;
    t.r = bp.r;
    t.energy = 0.5 * (st.A + st.B);
    t.mtilde = bp.mtilde;
    t.generation = p.generation;
    traj->pts.push_back(t);
  };

  if (past_target(s)) {
    record(s, true);
    return AdvanceStatus::reached_target;
  }
  record(s, true);

  double dtau_cap = ctl.ds_max * v_inf;
  while (steps < ctl.max_substeps) {
    Deriv d0 = rhs(s, p.l, bg, dir);
    double rate = 0.0;
    if (s.A > 0.0) rate += std::abs(d0.dA) / s.A;
    if (s.B > 0.0) rate += std::abs(d0.dB) / s.B;
    double dtau = std::min(dtau_cap, rate > 0.0 ? ctl.safety / rate : dtau_cap);
    // do not overshoot the target coordinate by a large factor
    double cr = dir * (target.value - coord(s));
    double crate = std::abs(target.kind == TargetKind::u_equals
                                ? d0.du
                                : (target.kind == TargetKind::v_equals ? d0.dv
                                                                       : d0.du + d0.dv));
    if (crate > 1e-14 && cr / crate < dtau * 4.0) dtau = std::min(dtau, 2.0 * cr / crate);
    dtau = std::max(dtau, 1e-14 * v_inf);

    bool accepted = false;
    for (int tries = 0; tries < 60 && !accepted; ++tries, dtau *= 0.5) {
      State cand = rk4(s, dir * dtau, p.l, bg, +1);
      // axis guard: l > 0 geodesics cannot reach r = 0
      if (p.l > 0.0) {
        double xi = cand.v - cand.u;
        if (xi < ctl.axis_guard * v_inf && xi < s.v - s.u) continue;  // reject, halve
      }

      // event scan: pick the earliest of {boundary, axis (radial), target}
      double lam = 2.0;  // >1 means no event inside the step
      int ev = 0;        // 1 boundary, 2 axis, 3 target
      auto frac = [&](double f0, double f1) {
        // linear estimate of the crossing fraction between step endpoints
        return f0 / (f0 - f1);
      };
      double xi0 = s.v - s.u, xi1 = cand.v - cand.u;
      if (xi1 > v_inf && xi1 > xi0) {
        double f = frac(xi0 - v_inf, xi1 - v_inf);
        if (f < lam) { lam = f; ev = 1; }
      }
      if (xi1 < 0.0 && xi1 < xi0) {
        double f = frac(xi0, xi1);
        if (f < lam) { lam = f; ev = 2; }
      }
      if (past_target(cand)) {
        double f = frac(coord(s) - target.value, coord(cand) - target.value);
        if (f <= lam) { lam = f; ev = 3; }
      }

      if (ev != 0) {
        // refine the landing with a few secant iterations on the step size
        double target_val = ev == 1 ? v_inf : (ev == 2 ? 0.0 : target.value);
        auto g = [&](double f) {
          State c = rk4(s, dir * dtau * f, p.l, bg, +1);
          double val = (ev == 3) ? coord(c) : (c.v - c.u);
          return val - target_val;
        };
        double a = 0.0, b = std::min(lam * 1.05, 1.0);
        double ga = g(a), gb = g(b);
        for (int it = 0; it < 50 && std::abs(b - a) > ctl.land_tol; ++it) {
          double m = (std::abs(gb - ga) > 0.0) ? b - gb * (b - a) / (gb - ga)
                                               : 0.5 * (a + b);
          if (!(m > 0.0) || !(m < 1.0)) m = 0.5 * (a + b);
          double gm = g(m);
          if ((ga < 0.0) == (gm < 0.0)) { a = m; ga = gm; } else { b = m; gb = gm; }
        }
        double f = 0.5 * (a + b);
        cand = rk4(s, dir * dtau * f, p.l, bg, +1);
        double res = project_shell(cand, p.l, bg);
        if (diag) diag->max_shell_residual = std::max(diag->max_shell_residual, res);
        BackgroundPoint bp = bg.eval(cand.u, cand.v);
        stot += dir * dtau * f * bp.omega2 / (cand.A + cand.B);
        s = cand;
        steps++;
        if (ev == 3) {
          record(s, true);
          p.u = s.u; p.v = s.v; p.omega2_pu = s.A; p.omega2_pv = s.B;
          return AdvanceStatus::reached_target;
        }
        record(s, true);  // pre-swap state, so interpolation stays one-sided
        // reflection off infinity or radial axis passage: swap (A,B)
        std::swap(s.A, s.B);
        if (ev == 1 && dir > 0) p.generation += 1;
        if (ev == 1 && dir < 0) p.generation -= 1;
        if (traj)
          traj->events.push_back({ev == 1 ? EventType::reflection : EventType::axis_crossing,
                                  stot, s.u, s.v, 0.5 * (s.A + s.B), p.generation});
        record(s, true);
        accepted = true;
        break;
      }

      double res = project_shell(cand, p.l, bg);
      if (diag) diag->max_shell_residual = std::max(diag->max_shell_residual, res);
      BackgroundPoint bp = bg.eval(cand.u, cand.v);
      stot += dir * dtau * bp.omega2 / (cand.A + cand.B);
      s = cand;
      steps++;
      record(s, false);
      accepted = true;
    }
    if (!accepted)
      throw SolverError("geodesic: step rejection did not converge (axis guard)");
    if (diag) diag->steps = steps;
  }
  p.u = s.u; p.v = s.v; p.omega2_pu = s.A; p.omega2_pv = s.B;
  return AdvanceStatus::max_steps;
}

double audit_log_energy_identity(const Trajectory& traj, const Background& bg,
                                 const std::function<double(double, double)>& T_uv,
                                 int quad_n) {
  if (traj.pts.size() < 2) return 0.0;
  const double v_inf = bg.v_infinity();
  const TrajPoint& p0 = traj.pts.front();
  const TrajPoint& p1 = traj.pts.back();
  double lhs = std::log(p1.omega2_pu) - std::log(p0.omega2_pu);

  double u0 = p0.u, v0 = p0.v, v1 = p1.v;
  if (v1 <= v0) return std::abs(lhs);  // radial ingoing: degenerate region
  auto u1_of_v = [&](double v) { return std::max(u0, v - v_inf); };
  // u along the trajectory as a function of v (v is nondecreasing)
  auto u_traj = [&](double v) {
    size_t lo = 0, hi = traj.pts.size() - 1;
    while (hi - lo > 1) {
      size_t mid = (lo + hi) / 2;
      if (traj.pts[mid].v <= v) lo = mid; else hi = mid;
    }
    const TrajPoint &a = traj.pts[lo], &b = traj.pts[hi];
    if (b.v <= a.v) return a.u;
    double f = (v - a.v) / (b.v - a.v);
    return a.u + f * (b.u - a.u);
  };

  auto integrand = [&](double u, double v) {
    BackgroundPoint p = bg.eval(u, v);
    double val = 0.5 * (6.0 * p.mtilde / p.r - 1.0) / (p.r * p.r) * p.omega2;
    return val - 24.0 * kPi * T_uv(u, v);
  };

  int nv = quad_n, nu = quad_n;
  double area = 0.0;
  double dv = (v1 - v0) / nv;
  for (int j = 0; j <= nv; ++j) {
    double v = v0 + j * dv;
    double ua = u1_of_v(v), ub = u_traj(v);
    double col = 0.0;
    if (ub > ua) {
      double du = (ub - ua) / nu;
      for (int i = 0; i <= nu; ++i) {
        double w = (i == 0 || i == nu) ? 0.5 : 1.0;
        col += w * integrand(ua + i * du, v);
      }
      col *= du;
    }
    double wv = (j == 0 || j == nv) ? 0.5 : 1.0;
    area += wv * col;
  }
  area *= dv;

  double line = 0.0;
  for (int j = 0; j <= nv; ++j) {
    double v = v0 + j * dv;
    double u = u1_of_v(v);
    BackgroundPoint p = bg.eval(u, v);
    double wv = (j == 0 || j == nv) ? 0.5 : 1.0;
    line += wv * p.cv;
  }
  line *= dv;

  return std::abs(lhs - (area + line));
}

CorridorReport corridor_check(const Trajectory& traj, double l, double v0,
                              const CorridorParams& prm, double v_inf) {
  CorridorReport rep;
  if (traj.pts.empty()) return rep;
  double E0 = traj.pts.front().energy;
  rep.min_r_bound = prm.c_min * l / E0;
  rep.corridor_halfwidth = prm.kappa * l / E0;
  double tol = rep.corridor_halfwidth + 1e-9 * v_inf;  // exact lines when l = 0

  for (const TrajPoint& p : traj.pts) {
    if (p.r > 0.0 && 2.0 * p.mtilde / p.r > prm.delta0) {
      rep.hypothesis_ok = false;
      rep.violations.push_back("smallness hypothesis 2 mt / r <= delta0 failed");
      break;
    }
  }
  if (!rep.hypothesis_ok) return rep;  // no containment claims out of regime

  for (const TrajPoint& p : traj.pts) {
    rep.min_r = std::min(rep.min_r, p.r);
    double anchor = v0 + p.generation * v_inf;
    bool ingoing_leg = std::abs(p.v - anchor) <= tol;
    bool outgoing_leg = std::abs(p.u - anchor) <= tol;
    if (!ingoing_leg && !outgoing_leg) {
      rep.corridor_ok = false;
      rep.violations.push_back("point (u=" + std::to_string(p.u) + ", v=" +
                               std::to_string(p.v) + ") outside corridors");
    }
  }
  if (l > 0.0 && rep.min_r < rep.min_r_bound) {
    rep.min_r_ok = false;
    rep.violations.push_back("min r below c_min l / E0");
  }
  double eprev = -1.0;
  for (const GeodesicEvent& e : traj.events) {
    if (e.type != EventType::reflection) continue;
    if (eprev > 0.0) {
      double ratio = e.energy / eprev;
      if (ratio > prm.energy_ratio_bound || ratio < 1.0 / prm.energy_ratio_bound) {
        rep.energy_ok = false;
        rep.violations.push_back("energy ratio " + std::to_string(ratio) +
                                 " outside bounds between reflections");
      }
    }
    eprev = e.energy;
  }
  return rep;
}

}  // namespace adsv
