/* background.hpp
 *
 * Spacetime samplers the geodesic integrator runs against: the exact AdS
 * closed forms, or interpolated numerical field slices (defined in
 * vlasov.hpp).  The momentum-equation coefficients
 *
 *   cv = d_v log Omega^2 - 2 d_v r / r = d_v log(Omega^2/r^2)
 *   cu = d_u log Omega^2 - 2 d_u r / r
 *
 * are provided directly in a cancellation-free form (both stay finite at
 * conformal infinity, where the naive difference of two O(r) terms would
 * lose all precision).
 */
#pragma once

#include "adsv/geometry.hpp"

namespace adsv {

struct BackgroundPoint {
  double r = 0.0;
  double omega2 = 1.0;
  double du_r = -0.5;
  double dv_r = 0.5;
  double cv = 0.0;  // d_v log Omega^2 - 2 d_v r / r   (0 if r = 0, radial use)
  double cu = 0.0;  // d_u log Omega^2 - 2 d_u r / r
  double mtilde = 0.0;
};

class Background {
 public:
  virtual ~Background() = default;
  virtual BackgroundPoint eval(double u, double v) const = 0;
  virtual double v_infinity() const = 0;
  /// largest retarded time covered (infinity for closed-form backgrounds)
  virtual double u_max() const { return INFINITY; }
};

/// Exact AdS in the standard chart (matches ads_reference to roundoff):
/// cv = -1/r, cu = +1/r.
class AdsBackground final : public Background {
 public:
  explicit AdsBackground(const Cosmology& c) : cosmo_(c) {}

  BackgroundPoint eval(double u, double v) const override {
    double k = cosmo_.k();
    double x = v - u;
    double vi = cosmo_.v_infinity;
    if (x < 0.0) x = 0.0;
    if (x > vi * (1.0 - 1e-15)) x = vi * (1.0 - 1e-15);
    double r = std::tan(0.5 * k * x) / k;
    double S = 1.0 + k * k * r * r;
    BackgroundPoint p;
    p.r = r;
    p.omega2 = S;
    p.dv_r = 0.5 * S;
    p.du_r = -0.5 * S;
    p.cv = r > 0.0 ? -1.0 / r : 0.0;
    p.cu = r > 0.0 ? 1.0 / r : 0.0;
    p.mtilde = 0.0;
    return p;
  }

  double v_infinity() const override { return cosmo_.v_infinity; }

 private:
  Cosmology cosmo_;
};

}  // namespace adsv
