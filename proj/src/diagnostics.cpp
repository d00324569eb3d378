#include "adsv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace adsv {

namespace {

double grid_h(const SliceHistory& hist) { return hist.slices.front().h; }

double snap_out_low(double x, double h) { return std::floor(x / h + 1e-9) * h; }
double snap_out_high(double x, double h) { return std::ceil(x / h - 1e-9) * h; }

void require_resolved(const SliceHistory& hist, const HierarchyParams& h, int i) {
  double cells = 2.0 * h.width_h[i] / grid_h(hist);
  if (cells < 8.0)
    throw DiagnosticError("beam " + std::to_string(i) + " slab spans only " +
                          std::to_string(cells) +
                          " cells; need >= 8 (raise grid K or widen the beam)");
}

const FieldSlice& slice_on(const SliceHistory& hist, double u) {
  const FieldSlice* s = hist.slice_at_u(u);
  if (!s) throw DiagnosticError("history is empty");
  if (std::abs(s->u - u) > 0.51 * s->h)
    throw DiagnosticError("history does not cover the measurement line u=" +
                          std::to_string(u));
  return *s;
}

// integral of Omega~^2/(4 psit) dv between global grid values on one slice
double gap_integral_v(const FieldSlice& s, double vlo, double vhi, bool& singular) {
  int jlo = std::max(0, static_cast<int>(std::lround((vlo - s.u) / s.h)));
  int jhi = std::min(s.K(), static_cast<int>(std::lround((vhi - s.u) / s.h)));
  if (jhi <= jlo) return 0.0;
  auto f = [&](int j) {
    if (s.psit[j] <= 1e-12) {
      singular = true;
      return 0.0;
    }
    return s.omega_tilde2(j) / (4.0 * s.psit[j]);
  };
  double sum = 0.0;
  for (int j = jlo; j < jhi; ++j) sum += 0.5 * (f(j) + f(j + 1)) * s.h;
  return sum;
}

}  // namespace

std::array<double, 4> crossing_rect(const HierarchyParams& h, int n, int i, int j) {
  double vI = h.cosmo.v_infinity;
  int ni = (i > j) ? n : n + 1;
  double u_lo = h.centers[j] + n * vI - h.width_h[j];
  double u_hi = h.centers[j] + n * vI + h.width_h[j];
  double v_lo = h.centers[i] + ni * vI - h.width_h[i];
  double v_hi = h.centers[i] + ni * vI + h.width_h[i];
  return {u_lo, u_hi, v_lo, v_hi};
}

BeamEnergies measure_beam_energy(const SliceHistory& hist, const HierarchyParams& h,
                                 int n, int i, int j) {
  if (i == j) throw DiagnosticError("measure_beam_energy: use the axis/infinity forms");
  require_resolved(hist, h, i);
  require_resolved(hist, h, j);
  double hg = grid_h(hist);
  auto rect = crossing_rect(h, n, i, j);
  double u_lo = snap_out_low(rect[0], hg), u_hi = snap_out_high(rect[1], hg);
  double v_lo = snap_out_low(rect[2], hg), v_hi = snap_out_high(rect[3], hg);
  BeamEnergies e;
  e.in_before = hist.mtilde_at(u_lo, v_hi) - hist.mtilde_at(u_lo, v_lo);
  e.in_after = hist.mtilde_at(u_hi, v_hi) - hist.mtilde_at(u_hi, v_lo);
  e.out_before = hist.mtilde_at(u_lo, v_lo) - hist.mtilde_at(u_hi, v_lo);
  e.out_after = hist.mtilde_at(u_lo, v_hi) - hist.mtilde_at(u_hi, v_hi);
  return e;
}

double measure_energy_axis(const SliceHistory& hist, const HierarchyParams& h, int n,
                           int i) {
  double hg = grid_h(hist);
  double vI = h.cosmo.v_infinity;
  double c = h.centers[i] + n * vI;
  return hist.mtilde_at(snap_out_low(c - h.width_h[i], hg),
                        snap_out_high(c + h.width_h[i], hg));
}

double measure_energy_infinity(const SliceHistory& hist, const HierarchyParams& h, int n,
                               int i) {
  double hg = grid_h(hist);
  double vI = h.cosmo.v_infinity;
  double c = h.centers[i] + n * vI;
  double u = snap_out_high(c + h.width_h[i], hg);
  const FieldSlice& s = slice_on(hist, u);
  double corner = hist.mtilde_at(u, snap_out_low(c + vI - h.width_h[i], hg));
  return s.mass_at_infinity() - corner;
}

SeparationValues measure_separation(const SliceHistory& hist, const HierarchyParams& h,
                                    int n, int i, int j) {
  SeparationValues out;
  double hg = grid_h(hist);
  double vI = h.cosmo.v_infinity;
  double off = std::pow(h.rho, -7.0 / 8.0) + 1.0;

  if (i >= 1) {
    // Dr between ingoing beams i-1 and i on the u = v_j^(n) -/+ h_j lines
    int ni = (i > j) ? n : n + 1;
    double ci1 = h.centers[i - 1] + ni * vI, ci = h.centers[i] + ni * vI;
    double lo = ci1 + off * h.width_h[i - 1];
    double hi = ci - off * h.width_h[i - 1];
    double gap_lo = ci1 + h.width_h[i - 1], gap_hi = ci - h.width_h[i];
    if (lo < gap_lo || hi > gap_hi || hi <= lo) {
      out.clamped = true;
      lo = gap_lo;
      hi = gap_hi;
    }
    lo = snap_out_high(lo, hg);
    hi = snap_out_low(hi, hg);
    if (hi > lo) {
      double ub = h.centers[j] + n * vI - h.width_h[j];
      double ua = h.centers[j] + n * vI + h.width_h[j];
      bool sing = false;
      out.in_before = gap_integral_v(slice_on(hist, snap_out_low(ub, hg)), lo, hi, sing);
      out.in_after = gap_integral_v(slice_on(hist, snap_out_high(ua, hg)), lo, hi, sing);
      out.singular = out.singular || sing;
      out.in_valid = !sing;
    }
  }

  if (j >= 1) {
    // Dr between outgoing beams j-1 and j on the v = v_i^(n or n+1) -/+ h_i lines
    int ni = (i >= j) ? n : n + 1;
    double cj1 = h.centers[j - 1] + n * vI, cj = h.centers[j] + n * vI;
    double lo = cj1 + off * h.width_h[j - 1];
    double hi = cj - off * h.width_h[j - 1];
    double gap_lo = cj1 + h.width_h[j - 1], gap_hi = cj - h.width_h[j];
    if (lo < gap_lo || hi > gap_hi || hi <= lo) {
      out.clamped = true;
      lo = gap_lo;
      hi = gap_hi;
    }
    lo = snap_out_high(lo, hg);
    hi = snap_out_low(hi, hg);
    if (hi > lo) {
      double vb = h.centers[i] + ni * vI - h.width_h[i];
      double va = h.centers[i] + ni * vI + h.width_h[i];
      bool sing = false;
      auto u_integral = [&](double vline) {
        // integral of 1/(4 phi) du across slices at fixed v = vline
        double sum = 0.0;
        int n_lo = static_cast<int>(std::lround(lo / hg));
        int n_hi = static_cast<int>(std::lround(hi / hg));
        auto f = [&](int ns) {
          const FieldSlice* s = hist.slice_at_u(ns * hg);
          if (!s || std::abs(s->u - ns * hg) > 0.51 * hg)
            throw DiagnosticError("history gap at the separation line");
          int jj = static_cast<int>(std::lround((vline - s->u) / s->h));
          jj = std::clamp(jj, 0, s->K());
          if (s->phi[jj] <= 1e-12) {
            sing = true;
            return 0.0;
          }
          return 1.0 / (4.0 * s->phi[jj]);
        };
        for (int ns = n_lo; ns < n_hi; ++ns) sum += 0.5 * (f(ns) + f(ns + 1)) * hg;
        return sum;
      };
      out.out_before = u_integral(snap_out_low(vb, hg));
      out.out_after = u_integral(snap_out_high(va, hg));
      out.singular = out.singular || sing;
      out.out_valid = !sing;
    }
  }
  return out;
}

IntersectionLedger build_ledger(const SliceHistory& hist, const HierarchyParams& h,
                                int n_cycles) {
  IntersectionLedger led;
  for (int n = 0; n < n_cycles; ++n)
    for (int i = 0; i <= h.n_beams; ++i)
      for (int j = 0; j <= h.n_beams; ++j) {
        if (i == j) continue;
        auto rect = crossing_rect(h, n, i, j);
        if (!hist.covers(rect[1])) continue;
        LedgerEntry e;
        e.n = n;
        e.i = i;
        e.j = j;
        e.u_lo = rect[0];
        e.u_hi = rect[1];
        e.v_lo = rect[2];
        e.v_hi = rect[3];
        e.energy = measure_beam_energy(hist, h, n, i, j);
        e.sep = measure_separation(hist, h, n, i, j);
        e.r_cross = hist.min_r_in_rect(rect[0], rect[1], rect[2], rect[3]);
        led.entries[{n, i, j}] = e;
      }
  return led;
}

MeasuredCascadeInit measure_cascade_on_slice(const FieldSlice& s,
                                             const HierarchyParams& h, int n_shift) {
  double hg = s.h;
  double vI = h.cosmo.v_infinity;
  double shift = n_shift * vI;
  int N = h.n_beams;
  MeasuredCascadeInit out;
  out.E0.resize(N + 1);
  out.R0.assign(N + 1, 0.0);
  out.mu0.resize(N);
  auto mt_at = [&](double vq) {
    int j = std::clamp(static_cast<int>(std::lround((vq - s.u) / hg)), 0, s.K());
    return s.mtilde[j];
  };
  for (int i = 0; i <= N; ++i) {
    double c = h.centers[i] + shift;
    out.E0[i] = mt_at(snap_out_high(c + h.width_h[i], hg)) -
                mt_at(snap_out_low(c - h.width_h[i], hg));
  }
  double off = std::pow(h.rho, -7.0 / 8.0) + 1.0;
  for (int i = 1; i <= N; ++i) {
    double ci1 = h.centers[i - 1] + shift, ci = h.centers[i] + shift;
    double lo = ci1 + off * h.width_h[i - 1];
    double hi = ci - off * h.width_h[i - 1];
    if (lo < ci1 + h.width_h[i - 1] || hi > ci - h.width_h[i] || hi <= lo) {
      lo = ci1 + h.width_h[i - 1];
      hi = ci - h.width_h[i];
    }
    bool sing = false;
    out.R0[i] = gap_integral_v(s, snap_out_high(lo, hg), snap_out_low(hi, hg), sing);
    if (sing) throw DiagnosticError("initial separation integrand singular");
  }
  for (int i = 0; i < N; ++i) out.mu0[i] = 2.0 * out.E0[i] / out.R0[i + 1];
  return out;
}

MeasuredCascadeInit measure_initial_cascade(const SliceHistory& hist,
                                            const HierarchyParams& h) {
  double hg = grid_h(hist);
  for (int i = 0; i <= h.n_beams; ++i) require_resolved(hist, h, i);
  double uline = snap_out_low(h.centers[0] - h.width_h[0], hg);
  return measure_cascade_on_slice(slice_on(hist, uline), h, 0);
}

std::string DiscrepancyReport::csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "n,i,E_measured,E_model,rel_err,R_measured,R_model,rel_err_R,out_of_regime\n";
  for (const auto& r : rows)
    os << r.n << "," << r.i << "," << r.E_measured << "," << r.E_model << ","
       << r.E_rel_err << "," << r.R_measured << "," << r.R_model << "," << r.R_rel_err
       << "," << (r.out_of_regime ? 1 : 0) << "\n";
  return os.str();
}

DiscrepancyReport compare_with_cascade(const SliceHistory& hist,
                                       const HierarchyParams& h,
                                       const CascadeState& model, int n_cycles,
                                       std::optional<double> first_breach_u) {
  DiscrepancyReport rep;
  double hg = grid_h(hist);
  double vI = h.cosmo.v_infinity;
  int N = h.n_beams;
  double total = 0.0;
  int count = 0;
  for (int n = 0; n <= std::min(n_cycles, model.n_max); ++n) {
    double uline = snap_out_low(h.centers[0] + n * vI - h.width_h[0], hg);
    if (!hist.covers(uline)) break;
    const FieldSlice& s = slice_on(hist, uline);
    for (int i = 0; i <= N; ++i) {
      DiscrepancyRow row;
      row.n = n;
      row.i = i;
      double lo = snap_out_low(h.centers[i] + n * vI - h.width_h[i], hg);
      double hi = snap_out_high(h.centers[i] + n * vI + h.width_h[i], hg);
      row.E_measured = hist.mtilde_at(uline, hi) - hist.mtilde_at(uline, lo);
      row.E_model = model.energy[n][i];
      row.E_rel_err = std::abs(row.E_measured - row.E_model) /
                      std::max(std::abs(row.E_model), 1e-300);
      if (i >= 1) {
        double off = std::pow(h.rho, -7.0 / 8.0) + 1.0;
        double glo = h.centers[i - 1] + n * vI + off * h.width_h[i - 1];
        double ghi = h.centers[i] + n * vI - off * h.width_h[i - 1];
        if (glo < h.centers[i - 1] + n * vI + h.width_h[i - 1] ||
            ghi > h.centers[i] + n * vI - h.width_h[i] || ghi <= glo) {
          glo = h.centers[i - 1] + n * vI + h.width_h[i - 1];
          ghi = h.centers[i] + n * vI - h.width_h[i];
        }
        bool sing = false;
        row.R_measured =
            gap_integral_v(s, snap_out_high(glo, hg), snap_out_low(ghi, hg), sing);
        row.R_model = model.sep[n][i];
        row.R_rel_err = std::abs(row.R_measured - row.R_model) /
                        std::max(std::abs(row.R_model), 1e-300);
      }
      row.out_of_regime = first_breach_u && uline > *first_breach_u;
      if (!row.out_of_regime) {
        total += row.E_rel_err + row.R_rel_err;
        count += (i >= 1) ? 2 : 1;
        rep.max_rel = std::max({rep.max_rel, row.E_rel_err, row.R_rel_err});
      }
      rep.rows.push_back(row);
    }
  }
  if (count > 0) rep.mean_rel = total / count;
  return rep;
}

}  // namespace adsv
