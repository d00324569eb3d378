/* diagnostics.hpp
 *
 * Measured beam bookkeeping: energy contents as renormalised-mass
 * differences across beam slabs at the corner lines of each crossing
 * rectangle, geometric separations as line integrals of
 * d_v r / (1 - 2m/r) = Omega~^2/(4 psit)  (v-lines)  and
 * -d_u r / (1 - 2m/r) = 1/(4 phi)         (u-lines),
 * and the comparison of both against the discrete cascade model.
 * Measurement lines snap to the nearest grid line outside each slab.
 */
#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "adsv/cascade.hpp"
#include "adsv/vlasov.hpp"

namespace adsv {

struct DiagnosticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BeamEnergies {
  double in_before = 0.0, in_after = 0.0;   // ingoing beam i across the region
  double out_before = 0.0, out_after = 0.0; // outgoing beam j across the region
};

struct SeparationValues {
  double in_before = 0.0, in_after = 0.0;   // Dr between ingoing beams i-1, i
  double out_before = 0.0, out_after = 0.0; // Dr between outgoing beams j-1, j
  bool in_valid = false, out_valid = false;
  bool clamped = false;      // nominal offsets exceeded the vacuum gap
  bool singular = false;     // 2m/r -> 1 on the path; value omitted
};

struct LedgerEntry {
  int n = 0, i = 0, j = 0;
  double u_lo = 0, u_hi = 0, v_lo = 0, v_hi = 0;  // crossing rectangle
  BeamEnergies energy;
  SeparationValues sep;
  double r_cross = 0.0;  // inf of r over the rectangle
};

struct IntersectionLedger {
  std::map<std::tuple<int, int, int>, LedgerEntry> entries;
};

/// Energy content before/after the crossing of ingoing beam i with outgoing
/// beam j in cycle n (i != j).  Requires slabs resolved by >= 8 cells.
BeamEnergies measure_beam_energy(const SliceHistory& hist, const HierarchyParams& h,
                                 int n, int i, int j);
/// Self-intersection conventions at the axis and at infinity.
double measure_energy_axis(const SliceHistory& hist, const HierarchyParams& h, int n,
                           int i);
double measure_energy_infinity(const SliceHistory& hist, const HierarchyParams& h, int n,
                               int i);

SeparationValues measure_separation(const SliceHistory& hist, const HierarchyParams& h,
                                    int n, int i, int j);

/// Crossing rectangle of beams (n; i, j) in (u, v).
std::array<double, 4> crossing_rect(const HierarchyParams& h, int n, int i, int j);

IntersectionLedger build_ledger(const SliceHistory& hist, const HierarchyParams& h,
                                int n_cycles);

/// Initial cascade data measured on the line just before beam 0 first turns:
/// E_i[0] from slab mass differences, R_i[0] from gap integrals, and
/// mu_i[0] = 2 E_i[0] / R_{i+1}[0].
struct MeasuredCascadeInit {
  std::vector<double> mu0;  // i = 0..N-1
  std::vector<double> E0;   // i = 0..N
  std::vector<double> R0;   // i = 1..N (index 0 unused)
};
MeasuredCascadeInit measure_initial_cascade(const SliceHistory& hist,
                                            const HierarchyParams& h);
/// Same measurement on an explicit slice (beam centers shifted by n_shift
/// reflection periods); used for amplitude calibration on the u = 0 data.
MeasuredCascadeInit measure_cascade_on_slice(const FieldSlice& s,
                                             const HierarchyParams& h, int n_shift = 0);

struct DiscrepancyRow {
  int n = 0, i = 0;
  double E_measured = 0.0, E_model = 0.0, E_rel_err = 0.0;
  double R_measured = 0.0, R_model = 0.0, R_rel_err = 0.0;
  bool out_of_regime = false;
};

struct DiscrepancyReport {
  std::vector<DiscrepancyRow> rows;
  double max_rel = 0.0, mean_rel = 0.0;
  std::string csv() const;
};

/// Per-cycle comparison of measured (E_i, R_i) at the u = v_0^(n) - h_0
/// lines against the cascade model.  first_breach_u marks rows beyond the
/// monitored-smallness domain as out-of-regime.
DiscrepancyReport compare_with_cascade(const SliceHistory& hist,
                                       const HierarchyParams& h,
                                       const CascadeState& model, int n_cycles,
                                       std::optional<double> first_breach_u = {});

}  // namespace adsv
