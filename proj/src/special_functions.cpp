#include "special_functions.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace fd2k::special {

namespace {

constexpr double kMachEp = 1.11022302462515654042e-16;
constexpr double kMaxLog = 7.09782712893383996843e2;
constexpr double kBig = 4.503599627370496e15;
constexpr double kBigInv = 2.22044604925031308085e-16;

// Common factor x^a e^-x / Gamma(a), or 0 on underflow.
double prefactor(double a, double x) {
  const double ax = a * std::log(x) - x - std::lgamma(a);
  if (ax < -kMaxLog) return 0.0;
  return std::exp(ax);
}

}  // namespace

double igam(double a, double x) {
  if (x <= 0.0 || a <= 0.0) return 0.0;
  if (x > 1.0 && x > a) return 1.0 - igamc(a, x);

  // Power series.
  const double ax = prefactor(a, x);
  if (ax == 0.0) return 0.0;
  double r = a;
  double c = 1.0;
  double ans = 1.0;
  do {
    r += 1.0;
    c *= x / r;
    ans += c;
  } while (c / ans > kMachEp);
  return ans * ax / a;
}

double igamc(double a, double x) {
  if (x <= 0.0 || a <= 0.0) return 1.0;
  if (x < 1.0 || x < a) return 1.0 - igam(a, x);

  const double ax = prefactor(a, x);
  if (ax == 0.0) return 0.0;

  // Continued fraction.
  double y = 1.0 - a;
  double z = x + y + 1.0;
  double c = 0.0;
  double pkm2 = 1.0;
  double qkm2 = x;
  double pkm1 = x + 1.0;
  double qkm1 = z * x;
  double ans = pkm1 / qkm1;
  double t = 0.0;
  do {
    c += 1.0;
    y += 1.0;
    z += 2.0;
    const double yc = y * c;
    const double pk = pkm1 * z - pkm2 * yc;
    const double qk = qkm1 * z - qkm2 * yc;
    if (qk != 0.0) {
      const double r = pk / qk;
      t = std::fabs((ans - r) / r);
      ans = r;
    } else {
      t = 1.0;
    }
    pkm2 = pkm1;
    pkm1 = pk;
    qkm2 = qkm1;
    qkm1 = qk;
    if (std::fabs(pk) > kBig) {
      pkm2 *= kBigInv;
      pkm1 *= kBigInv;
      qkm2 *= kBigInv;
      qkm1 *= kBigInv;
    }
  } while (t > kMachEp);
  return ans * ax;
}

double erfc(double x) { return std::erfc(x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace fd2k::special
