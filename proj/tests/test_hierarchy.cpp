#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adsv/hierarchy.hpp"

using namespace adsv;

namespace {
LadderConfig softened_cfg() {
  LadderConfig cfg;
  cfg.sigma_pow = 0.25;
  cfg.delta_pow = 0.5;
  cfg.rho_pow = 1.0;
  cfg.eps_decay = 10.0;
  cfg.n_beams = 4;
  return cfg;
}
}  // namespace

TEST_CASE("bump cutoff properties") {
  CHECK(chi_bump(0.0) == 1.0);
  CHECK(chi_bump(1.0) == 1.0);
  CHECK(chi_bump(-1.0) == 1.0);
  CHECK(chi_bump(2.0) == 0.0);
  CHECK(chi_bump(-2.5) == 0.0);
  CHECK(chi_bump(1.5) > 0.0);
  CHECK(chi_bump(1.5) < 1.0);
  // monotone transition on [1, 2]
  double prev = 1.0;
  for (int i = 0; i <= 50; ++i) {
    double x = 1.0 + i / 50.0;
    double c = chi_bump(x);
    CHECK(c <= prev + 1e-15);
    prev = c;
  }
}

TEST_CASE("exact ladder inversion from eps") {
  // eps = exp(-e): loglog(1/eps) = 1, so rho = 1
  double eps = std::exp(-std::exp(1.0));
  HierarchyParams h =
      build_hierarchy(eps, HierarchyMode::exact, LadderConfig{}, Cosmology::make(-3.0));
  CHECK(h.exact.rho_defined);
  CHECK(h.rho == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h.exact.ll_eps.to_double() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact eps^(i) recursion representation") {
  // loglog(1/eps^(1)) = eps^-2
  double eps = std::exp(-std::exp(1.0));
  HierarchyParams h =
      build_hierarchy(eps, HierarchyMode::exact, LadderConfig{}, Cosmology::make(-3.0));
  double expect = std::pow(eps, -2.0);
  CHECK(h.exact.ll_eps_i[1].to_double() == doctest::Approx(expect).epsilon(1e-12));
  // strictly decreasing ladder: loglog(1/eps^(i)) increases
  for (size_t i = 0; i + 1 < h.exact.ll_eps_i.size(); ++i)
    CHECK(h.exact.ll_eps_i[i + 1] > h.exact.ll_eps_i[i]);
}

TEST_CASE("exact ladder driven from sigma") {
  LadderConfig cfg;
  cfg.exact_sigma = 0.5;
  HierarchyParams h =
      build_hierarchy(0.5, HierarchyMode::exact, cfg, Cosmology::make(-3.0));
  CHECK(h.exact.from_sigma);
  // loglog(1/delta) = exp(sigma^-10) = exp(1024)
  CHECK(h.exact.ll_delta.level() == 1);
  CHECK(h.exact.ll_delta.mag() == doctest::Approx(1024.0));
  // n_plus = ceil(sigma^-3/2) = ceil(2.83) = 3
  CHECK(h.n_plus == 3);
  // ordering eps << rho << delta << sigma was validated at construction;
  // spot-check one relation: log(1/rho) > log(1/delta)
  CHECK(BigReal::exp(h.exact.ll_rho) > BigReal::exp(h.exact.ll_delta));
}

TEST_CASE("softened ladder satisfies the ordering invariants") {
  HierarchyParams h = build_hierarchy(1e-2, HierarchyMode::softened, softened_cfg(),
                                      Cosmology::make(-3.0));
  CHECK(h.sigma == doctest::Approx(std::pow(1e-2, 0.25)));
  CHECK(h.delta == doctest::Approx(0.1));
  CHECK(h.rho == doctest::Approx(1e-2));
  CHECK(h.n_beams == 4);
  CHECK(h.eps_i.size() == 5);
  for (int i = 0; i < 4; ++i) CHECK(h.eps_i[i + 1] < h.eps_i[i]);
  CHECK(h.centers[0] == doctest::Approx(0.5 * kPi));
  for (int i = 0; i < 4; ++i) CHECK(h.centers[i + 1] > h.centers[i]);
  for (int i = 0; i <= 4; ++i) {
    CHECK(h.margin_beta[i] < h.width_h[i]);
    CHECK(h.width_h[i] < h.width_htilde[i]);
  }
  h.validate();
}

TEST_CASE("softened ladder rejects broken orderings") {
  LadderConfig cfg = softened_cfg();
  cfg.sigma_pow = 0.9;  // sigma below delta
  CHECK_THROWS_AS(
      build_hierarchy(1e-2, HierarchyMode::softened, cfg, Cosmology::make(-3.0)),
      ConfigError);
  LadderConfig cfg2 = softened_cfg();
  cfg2.eps_decay = 0.5;
  CHECK_THROWS_AS(
      build_hierarchy(1e-2, HierarchyMode::softened, cfg2, Cosmology::make(-3.0)),
      ConfigError);
  LadderConfig cfg3 = softened_cfg();
  cfg3.beta_factor = 5.0;  // beta > h
  CHECK_THROWS_AS(
      build_hierarchy(1e-2, HierarchyMode::softened, cfg3, Cosmology::make(-3.0)),
      ConfigError);
}

TEST_CASE("seed profile values") {
  HierarchyParams h = build_hierarchy(1e-2, HierarchyMode::softened, softened_cfg(),
                                      Cosmology::make(-3.0));
  double sq = std::sqrt(3.0);
  for (int i = 0; i <= 2; ++i) {
    SeedProfile F = seed_profile(i, h);
    double ei = h.eps_i[i];
    // peak value eps_i^-2 at the center of the support box
    CHECK(F(h.centers[i], 3.0, 4.0 * ei / sq) ==
          doctest::Approx(1.0 / (ei * ei)).epsilon(1e-12));
    // outside |p - 3| >= 2
    CHECK(F(h.centers[i], 5.0, 4.0 * ei / sq) == 0.0);
    CHECK(F(h.centers[i], 0.9, 4.0 * ei / sq) == 0.0);
    // l support 2 <= sqrt(-L) l / eps_i <= 6
    CHECK(F(h.centers[i], 3.0, 1.0 * ei / sq) == 0.0);
    CHECK(F(h.centers[i], 3.0, 7.0 * ei / sq) == 0.0);
    // v support |v - c_i| <= 2 eps_i / sqrt(-L)
    CHECK(F(h.centers[i] + 2.5 * ei / sq, 3.0, 4.0 * ei / sq) == 0.0);
  }
}

TEST_CASE("seed integral scaling: doubling eps_i doubles the width, quarters the peak") {
  LadderConfig base = softened_cfg();
  HierarchyParams h1 =
      build_hierarchy(1e-2, HierarchyMode::softened, base, Cosmology::make(-3.0));
  LadderConfig wide = base;
  // doubling eps doubles every eps^(i)
  HierarchyParams h2 =
      build_hierarchy(2e-2, HierarchyMode::softened, wide, Cosmology::make(-3.0));
  SeedProfile F1 = seed_profile(0, h1), F2 = seed_profile(0, h2);
  CHECK(F2(h2.centers[0], 3.0, 4.0 * h2.eps_i[0] / std::sqrt(3.0)) ==
        doctest::Approx(0.25 * F1(h1.centers[0], 3.0, 4.0 * h1.eps_i[0] / std::sqrt(3.0)))
            .epsilon(1e-12));
  // v-support width doubles
  double w1 = 4.0 * h1.eps_i[0] / std::sqrt(3.0);
  double w2 = 4.0 * h2.eps_i[0] / std::sqrt(3.0);
  CHECK(w2 == doctest::Approx(2.0 * w1));
  // the (v,q,l)-integral with measure l dl dq dv scales like eps * width factors:
  // G-moment integrated over v is proportional to eps_i * (eps_i/sq)^2 / eps_i^2
  const SeedMoments& sm = seed_moments();
  auto vint_G = [&](const HierarchyParams& h) {
    double sq = h.cosmo.sqrt_neg_lambda();
    double ei = h.eps_i[0];
    // int chi((v-c) sq/ei) dv = (ei/sq) D0
    return (1.0 / (ei * ei)) * (ei / std::sqrt(3.0)) * sm.D0 * sm.Cq2 *
           (ei / sq) * (ei / sq) * 4.0 * sm.D0;
  };
  CHECK(vint_G(h2) == doctest::Approx(2.0 * vint_G(h1)).epsilon(1e-12));
}

TEST_CASE("fiber moments match the closed-form factorisation") {
  HierarchyParams h = build_hierarchy(1e-2, HierarchyMode::softened, softened_cfg(),
                                      Cosmology::make(-3.0));
  std::vector<double> amps(h.n_beams + 1, 0.0);
  amps[1] = 0.3;
  // brute-force 2-d quadrature of G(v) = int int q F dq l dl at the beam center
  SeedProfile F = seed_profile(1, h);
  double v = h.centers[1];
  double sq = std::sqrt(3.0);
  double ei = h.eps_i[1];
  int nq = 400, nl = 400;
  double qlo = 1.0, qhi = 5.0, llo = 2.0 * ei / sq, lhi = 6.0 * ei / sq;
  double G = 0.0, H = 0.0;
  for (int a = 0; a < nq; ++a)
    for (int b = 0; b < nl; ++b) {
      double q = qlo + (a + 0.5) * (qhi - qlo) / nq;
      double l = llo + (b + 0.5) * (lhi - llo) / nl;
      double f = 0.3 * F(v, q, l);
      G += q * f * l * ((qhi - qlo) / nq) * ((lhi - llo) / nl);
      H += (l * l * l / q) * f * ((qhi - qlo) / nq) * ((lhi - llo) / nl);
    }
  SeedFiberMoments fm = seed_fiber_moments(v, h, amps);
  CHECK(fm.G == doctest::Approx(G).epsilon(1e-4));
  CHECK(fm.H == doctest::Approx(H).epsilon(1e-4));
}
