/* logtower.hpp
 *
 * Signed iterated-exponential scalars for parameter ladders that overflow
 * ordinary floats.  A BigReal holds sign * exp^(level)(mag): level 0 is a
 * plain double magnitude, level k >= 1 means exp applied k times to mag.
 *
 * Arithmetic keeps full double precision whenever both operands fit at
 * level 0, and degrades gracefully to dominant-term semantics when the
 * operands live at incomparable scales (adding a value that is smaller by
 * a factor below exp(-700) leaves the larger one unchanged).  That is the
 * appropriate contract for nested-exponential ladder bookkeeping, where
 * only orderings, ratios and leading exponents are meaningful.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace adsv {

class BigReal {
 public:
  BigReal() = default;

  static BigReal from(double x) {
    if (!std::isfinite(x)) throw std::domain_error("BigReal: non-finite seed");
    BigReal b;
    if (x == 0.0) return b;
    b.sign_ = x > 0 ? 1 : -1;
    b.level_ = 0;
    b.mag_ = std::abs(x);
    return b;
  }

  /// exp^(level)(mag) with explicit tower level (mag > 0 required for level >= 1).
  static BigReal tower(int level, double mag, int sign = 1) {
    if (level < 0) throw std::domain_error("BigReal: negative level");
    if (level >= 1 && !(mag > 0.0))
      throw std::domain_error("BigReal: tower mag must be > 0 for level >= 1");
    BigReal b;
    b.sign_ = sign >= 0 ? 1 : -1;
    b.level_ = level;
    b.mag_ = std::abs(mag);
    b.canonicalize();
    return b;
  }

  static BigReal zero() { return BigReal(); }
  static BigReal one() { return from(1.0); }

  int sign() const { return sign_; }
  int level() const { return level_; }
  double mag() const { return mag_; }
  bool is_zero() const { return sign_ == 0; }
  bool is_plain() const { return level_ == 0; }

  /// Plain double value; +-inf if the tower exceeds double range.
  double to_double() const {
    if (sign_ == 0) return 0.0;
    if (level_ == 0) return sign_ * mag_;
    return sign_ > 0 ? INFINITY : -INFINITY;
  }

  BigReal operator-() const {
    BigReal b = *this;
    b.sign_ = -b.sign_;
    return b;
  }

  friend BigReal operator+(const BigReal& a, const BigReal& b) { return add(a, b); }
  friend BigReal operator-(const BigReal& a, const BigReal& b) { return add(a, -b); }
  friend BigReal operator*(const BigReal& a, const BigReal& b) { return mul(a, b); }

  friend bool operator==(const BigReal& a, const BigReal& b) { return cmp(a, b) == 0; }
  friend bool operator<(const BigReal& a, const BigReal& b) { return cmp(a, b) < 0; }
  friend bool operator>(const BigReal& a, const BigReal& b) { return cmp(a, b) > 0; }
  friend bool operator<=(const BigReal& a, const BigReal& b) { return cmp(a, b) <= 0; }
  friend bool operator>=(const BigReal& a, const BigReal& b) { return cmp(a, b) >= 0; }

  /// log of the magnitude, signed (negative for magnitudes below 1).
  BigReal log_mag() const {
    if (sign_ == 0) throw std::domain_error("BigReal: log of zero");
    if (level_ == 0) return from(std::log(mag_));
    BigReal b;
    b.sign_ = 1;
    b.level_ = level_ - 1;
    b.mag_ = mag_;
    b.canonicalize();
    return b;
  }

  /// exp of a signed value.  exp of a large negative tower underflows to zero
  /// (dominance semantics).
  static BigReal exp(const BigReal& x) {
    if (x.sign_ == 0) return one();
    if (x.sign_ > 0) {
      if (x.level_ == 0 && x.mag_ <= kLogCap) return from(std::exp(x.mag_));
      BigReal b;
      b.sign_ = 1;
      b.level_ = x.level_ + 1;
      b.mag_ = x.mag_;
      return b;
    }
    if (x.level_ == 0 && x.mag_ <= 700.0) return from(std::exp(-x.mag_));
    return zero();
  }

  static BigReal pow(const BigReal& base, double expo) {
    if (base.sign_ <= 0) throw std::domain_error("BigReal: pow of non-positive base");
    if (expo == 0.0) return one();
    return exp(mul(base.log_mag(), from(expo)));
  }

  std::string str() const {
    std::ostringstream os;
    if (sign_ == 0) return "0";
    if (sign_ < 0) os << "-";
    if (level_ == 0)
      os << mag_;
    else if (level_ == 1)
      os << "exp(" << mag_ << ")";
    else
      os << "exp^" << level_ << "(" << mag_ << ")";
    return os.str();
  }

 private:
  static constexpr double kLogCap = 690.0;  // exp(690) ~ 2.8e299 still fits

  int sign_ = 0;
  int level_ = 0;
  double mag_ = 0.0;

  void canonicalize() {
    if (sign_ == 0) {
      level_ = 0;
      mag_ = 0.0;
      return;
    }
    while (level_ >= 1 && mag_ <= kLogCap) {
      mag_ = std::exp(mag_);
      level_--;
    }
    if (level_ == 0 && mag_ == 0.0) sign_ = 0;
  }

  // magnitude comparison, ignoring sign
  static int cmp_mag(const BigReal& a, const BigReal& b) {
    if (a.sign_ == 0 || b.sign_ == 0)
      return (a.sign_ != 0) - (b.sign_ != 0);
    double ta = a.mag_, tb = b.mag_;
    int la = a.level_, lb = b.level_;
    // lift the lower tower until the levels agree
    while (la < lb) {
      if (ta <= 0.0) return -1;  // log of <=1 at level 0: strictly smaller
      ta = std::log(ta);
      la++;
    }
    while (lb < la) {
      if (tb <= 0.0) return 1;
      tb = std::log(tb);
      lb++;
    }
    if (ta < tb) return -1;
    if (ta > tb) return 1;
    return 0;
  }

  static int cmp(const BigReal& a, const BigReal& b) {
    if (a.sign_ != b.sign_) return a.sign_ < b.sign_ ? -1 : 1;
    if (a.sign_ == 0) return 0;
    int m = cmp_mag(a, b);
    return a.sign_ > 0 ? m : -m;
  }

  // |a| * (1 + corr) with corr in (-1, 1], applied in the log domain
  static BigReal scale_mag(const BigReal& a, double corr) {
    if (a.level_ == 0) {
      BigReal b = a;
      b.mag_ *= (1.0 + corr);
      b.canonicalize();
      if (b.mag_ == 0.0) b.sign_ = 0;
      return b;
    }
    BigReal lg = a.log_mag();
    BigReal sum = add(lg, from(std::log1p(corr)));
    BigReal res = exp(sum);
    res.sign_ = a.sign_;
    return res;
  }

  static BigReal add(const BigReal& a, const BigReal& b) {
    if (a.sign_ == 0) return b;
    if (b.sign_ == 0) return a;
    int m = cmp_mag(a, b);
    const BigReal& big = (m >= 0) ? a : b;
    const BigReal& small = (m >= 0) ? b : a;
    bool same_sign = a.sign_ == b.sign_;
    if (m == 0) {
      if (!same_sign) return zero();
      if (big.level_ == 0) {
        double s = big.mag_ * 2.0;
        if (std::isfinite(s)) {
          BigReal r = from(s);
          r.sign_ = big.sign_;
          r.mag_ = std::abs(s);
          return r;
        }
      }
      return scale_mag(big, 1.0);
    }
    if (big.level_ == 0 && small.level_ == 0) {
      double s = big.sign_ * big.mag_ + small.sign_ * small.mag_;
      if (std::isfinite(s)) return from(s);
    }
    // ratio = |small| / |big| via the log domain
    BigReal dl = add(small.log_mag(), -big.log_mag());  // <= 0
    double ratio = 0.0;
    if (dl.sign_ == 0)
      ratio = 1.0;
    else if (dl.level_ == 0 && dl.mag_ <= 700.0)
      ratio = std::exp(dl.sign_ * dl.mag_);
    if (ratio <= 0.0 || ratio >= 1.0 - 1e-18) {
      if (ratio >= 1.0 - 1e-18 && !same_sign) {
        // nearly equal magnitudes of opposite sign: cancel via log1p
        double c = -ratio;
        if (1.0 + c <= 0.0) return zero();
        return scale_mag(big, c);
      }
      if (ratio <= 0.0) return big;  // dominated
    }
    double corr = same_sign ? ratio : -ratio;
    if (1.0 + corr <= 0.0) return zero();
    return scale_mag(big, corr);
  }

  static BigReal mul(const BigReal& a, const BigReal& b) {
    if (a.sign_ == 0 || b.sign_ == 0) return zero();
    if (a.level_ == 0 && b.level_ == 0) {
      double p = a.mag_ * b.mag_;
      if (std::isfinite(p) && p > 0.0) {
        BigReal r;
        r.sign_ = a.sign_ * b.sign_;
        r.level_ = 0;
        r.mag_ = p;
        return r;
      }
    }
    BigReal lg = add(a.log_mag(), b.log_mag());
    BigReal res = exp(lg);
    if (res.sign_ == 0) return res;
    res.sign_ = a.sign_ * b.sign_;
    return res;
  }
};

}  // namespace adsv
