#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adsv/geodesic.hpp"

using namespace adsv;

namespace {

const Cosmology cosmo = Cosmology::make(-3.0);

Particle launch_ingoing(const AdsBackground& ads, double u0, double v0, double E0,
                        double l) {
  BackgroundPoint bp = ads.eval(u0, v0);
  double prod = l > 0.0 ? bp.omega2 * l * l / (bp.r * bp.r) : 0.0;
  Particle p;
  p.u = u0;
  p.v = v0;
  p.omega2_pu = E0 + std::sqrt(std::max(E0 * E0 - prod, 0.0));
  p.omega2_pv = prod > 0.0 ? prod / p.omega2_pu : 0.0;
  p.l = l;
  p.weight = 1.0;
  return p;
}

}  // namespace

TEST_CASE("radial ray: conserved momentum, straight legs, 2 v_I period") {
  AdsBackground ads(cosmo);
  double vI = cosmo.v_infinity;
  // outgoing radial from the axis: (A, B) = (0, 2)
  Particle p;
  p.u = 1.0;
  p.v = 1.0;
  p.omega2_pu = 0.0;
  p.omega2_pv = 2.0;
  p.l = 0.0;
  StepControl ctl;
  Trajectory traj;
  traj.stride = 1;
  AdvanceTarget tgt{TargetKind::tau_equals, 2.0 + 2.0 * vI};
  CHECK(advance(p, ads, tgt, ctl, &traj) == AdvanceStatus::reached_target);
  // momentum components constant along each leg, trajectory on coordinate lines
  for (const TrajPoint& t : traj.pts) {
    CHECK(t.energy == doctest::Approx(1.0).epsilon(1e-14));
    bool on_out = std::abs(t.u - 1.0) < 1e-10;
    bool on_in = std::abs(t.v - (1.0 + vI)) < 1e-10;
    CHECK((on_out || on_in));
  }
  // one reflection, then back at the axis after Delta(u+v) = 2 v_I
  REQUIRE(traj.events.size() >= 1);
  CHECK(traj.events.front().type == EventType::reflection);
  CHECK(p.generation == 1);
  CHECK(std::abs(p.v - p.u) < 1e-9);
  CHECK(p.u + p.v == doctest::Approx(2.0 + 2.0 * vI).epsilon(1e-12));
}

TEST_CASE("reflection swaps the conformal momenta and preserves the energy") {
  AdsBackground ads(cosmo);
  Particle p;
  p.u = 0.0;
  p.v = cosmo.v_infinity;  // on the boundary line
  p.omega2_pu = 0.0;
  p.omega2_pv = 3.0;
  p.l = 0.0;
  double e_before = p.energy();
  reflect_at_infinity(p, cosmo.v_infinity);
  CHECK(p.omega2_pu == 3.0);
  CHECK(p.omega2_pv == 0.0);
  CHECK(p.generation == 1);
  CHECK(p.energy() == e_before);

  Particle q = p;
  q.v = 0.5 * cosmo.v_infinity;
  CHECK_THROWS_AS(reflect_at_infinity(q, cosmo.v_infinity), ContractViolation);
}

TEST_CASE("closest approach matches the AdS turning point for l/E0 = 1e-2") {
  AdsBackground ads(cosmo);
  double vI = cosmo.v_infinity;
  double E0 = 1.0, l = 1e-2;
  Particle p = launch_ingoing(ads, 0.0, 0.5 * vI, E0, l);
  StepControl ctl;
  ctl.ds_max = 0.005;
  Trajectory traj;
  traj.stride = 1;
  AdvanceDiag diag;
  AdvanceTarget tgt{TargetKind::tau_equals, p.u + p.v + 2.0 * vI};
  CHECK(advance(p, ads, tgt, ctl, &traj, &diag) == AdvanceStatus::reached_target);

  double r_analytic = l / std::sqrt(E0 * E0 - l * l);  // k = 1 units
  CHECK(diag.min_r >= 0.5 * l / E0);
  CHECK(diag.min_r <= 2.0 * l / E0);
  CHECK(diag.min_r == doctest::Approx(r_analytic).epsilon(2e-2));
  // null-shell projection keeps the constraint at roundoff
  CHECK(diag.max_shell_residual <= 1e-12);
  // l and weight bitwise constant
  CHECK(p.l == l);
  CHECK(p.weight == 1.0);
  // energy conserved along the vacuum trajectory
  for (const TrajPoint& t : traj.pts)
    CHECK(t.energy == doctest::Approx(E0).epsilon(1e-9));
}

TEST_CASE("energy at the boundary is continuous across reflection") {
  AdsBackground ads(cosmo);
  double vI = cosmo.v_infinity;
  Particle p = launch_ingoing(ads, 0.0, 0.2 * vI, 1.0, 5e-3);
  StepControl ctl;
  Trajectory traj;
  traj.stride = 1;
  AdvanceTarget tgt{TargetKind::tau_equals, p.u + p.v + 2.5 * vI};
  advance(p, ads, tgt, ctl, &traj);
  REQUIRE(!traj.events.empty());
  // the pre-swap and post-swap records share the point; Omega~^2(p^u+p^v)
  // is invariant under the swap
  for (size_t i = 1; i < traj.pts.size(); ++i) {
    if (traj.pts[i].u == traj.pts[i - 1].u && traj.pts[i].v == traj.pts[i - 1].v) {
      double ea = traj.pts[i - 1].energy, eb = traj.pts[i].energy;
      CHECK(std::abs(ea - eb) <= 1e-10 * ea);
    }
  }
}

TEST_CASE("reversibility: forward then backward returns the launch state") {
  AdsBackground ads(cosmo);
  double vI = cosmo.v_infinity;
  Particle p = launch_ingoing(ads, 0.0, 0.5 * vI, 1.0, 0.05);
  Particle p0 = p;
  StepControl ctl;
  AdvanceTarget fwd{TargetKind::tau_equals, p.u + p.v + 2.0 * vI};
  advance(p, ads, fwd, ctl);
  AdvanceTarget bwd{TargetKind::tau_equals, p0.u + p0.v};
  advance(p, ads, bwd, ctl, nullptr, nullptr, -1);
  double scale = p0.energy();
  double err = std::abs(p.u - p0.u) + std::abs(p.v - p0.v) +
               std::abs(p.omega2_pu - p0.omega2_pu) / scale +
               std::abs(p.omega2_pv - p0.omega2_pv) / scale;
  CHECK(err <= 1e-8);
  CHECK(p.generation == 0);
}

TEST_CASE("corridor containment in exact AdS with kappa = 4") {
  AdsBackground ads(cosmo);
  double vI = cosmo.v_infinity;
  double v0 = 0.5 * vI;
  Particle p = launch_ingoing(ads, 0.0, v0, 1.0, 1e-2);
  StepControl ctl;
  Trajectory traj;
  traj.stride = 1;
  AdvanceTarget tgt{TargetKind::tau_equals, p.u + p.v + 4.0 * vI};
  advance(p, ads, tgt, ctl, &traj);
  CorridorParams prm;
  prm.kappa = 4.0;
  CorridorReport rep = corridor_check(traj, 1e-2, v0, prm, vI);
  CHECK(rep.hypothesis_ok);
  CHECK(rep.corridor_ok);
  CHECK(rep.min_r_ok);
  CHECK(rep.energy_ok);
  CHECK(rep.all_ok());
}

TEST_CASE("corridor degenerates to the characteristic lines for l = 0") {
  AdsBackground ads(cosmo);
  double vI = cosmo.v_infinity;
  double v0 = 0.5 * vI;
  Particle p;
  p.u = 0.0;
  p.v = v0;
  p.omega2_pu = 2.0;  // ingoing radial
  p.omega2_pv = 0.0;
  p.l = 0.0;
  StepControl ctl;
  Trajectory traj;
  traj.stride = 1;
  AdvanceTarget tgt{TargetKind::tau_equals, v0 + 2.0 * vI};
  advance(p, ads, tgt, ctl, &traj);
  CorridorParams prm;
  CorridorReport rep = corridor_check(traj, 0.0, v0, prm, vI);
  CHECK(rep.corridor_halfwidth == 0.0);
  CHECK(rep.corridor_ok);
}

namespace {
// AdS geometry with an artificial constant renormalised mass, to exercise
// the monitored-smallness contract of the corridor check
class FakeMassBackground final : public Background {
 public:
  FakeMassBackground(const Cosmology& c, double mt) : ads_(c), mt_(mt), vI_(c.v_infinity) {}
  BackgroundPoint eval(double u, double v) const override {
    BackgroundPoint p = ads_.eval(u, v);
    p.mtilde = mt_;
    return p;
  }
  double v_infinity() const override { return vI_; }

 private:
  AdsBackground ads_;
  double mt_;
  double vI_;
};
}  // namespace

TEST_CASE("corridor check flags a failed smallness hypothesis") {
  FakeMassBackground bg(cosmo, 0.3);
  double vI = cosmo.v_infinity;
  AdsBackground ads(cosmo);
  Particle p = launch_ingoing(ads, 0.0, 0.5 * vI, 1.0, 1e-2);
  StepControl ctl;
  Trajectory traj;
  traj.stride = 1;
  AdvanceTarget tgt{TargetKind::tau_equals, p.u + p.v + 1.0 * vI};
  advance(p, bg, tgt, ctl, &traj);
  CorridorParams prm;
  prm.delta0 = 0.02;
  CorridorReport rep = corridor_check(traj, 1e-2, 0.5 * vI, prm, vI);
  CHECK_FALSE(rep.hypothesis_ok);
  REQUIRE(!rep.violations.empty());
  CHECK(rep.violations.front().find("hypothesis") != std::string::npos);
}

TEST_CASE("log-energy identity audit in vacuum") {
  AdsBackground ads(cosmo);
  double vI = cosmo.v_infinity;
  auto zero_Tuv = [](double, double) { return 0.0; };

  // zero-length trajectory
  Trajectory empty;
  CHECK(audit_log_energy_identity(empty, ads, zero_Tuv) == 0.0);

  // radial ingoing: v = const, degenerate region, identity hence exact
  {
    Particle p;
    p.u = 0.0;
    p.v = 0.6 * vI;
    p.omega2_pu = 2.0;
    p.omega2_pv = 0.0;
    p.l = 0.0;
    StepControl ctl;
    Trajectory traj;
    traj.stride = 1;
    AdvanceTarget tgt{TargetKind::u_equals, 0.5 * vI};
    advance(p, ads, tgt, ctl, &traj);
    CHECK(audit_log_energy_identity(traj, ads, zero_Tuv) <= 1e-12);
  }

  // l > 0: residual is quadrature truncation, shrinking under refinement
  {
    Particle p0 = launch_ingoing(ads, 0.0, 0.5 * vI, 1.0, 0.2);
    StepControl coarse;
    coarse.ds_max = 0.02;
    StepControl fine;
    fine.ds_max = 0.005;
    auto run = [&](const StepControl& ctl, int quad) {
      Particle p = p0;
      Trajectory traj;
      traj.stride = 1;
      AdvanceTarget tgt{TargetKind::tau_equals, p.u + p.v + 0.8 * vI};
      advance(p, ads, tgt, ctl, &traj);
      double lhs = std::log(traj.pts.back().omega2_pu / traj.pts.front().omega2_pu);
      return std::make_pair(audit_log_energy_identity(traj, ads, zero_Tuv, quad),
                            std::abs(lhs));
    };
    auto [res_c, lhs_c] = run(coarse, 128);
    auto [res_f, lhs_f] = run(fine, 512);
    (void)lhs_f;
    CHECK(res_c <= 0.02 * lhs_c);  // identity holds at coarse truncation
    CHECK(res_f <= 0.5 * res_c);   // and converges under refinement
  }
}
