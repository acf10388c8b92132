#pragma once

namespace fd2k::special {

// Regularised lower incomplete gamma P(a, x).
double igam(double a, double x);

// Regularised upper incomplete gamma Q(a, x) = 1 - P(a, x).
double igamc(double a, double x);

double erfc(double x);

// Standard normal CDF.
double normal_cdf(double x);

}  // namespace fd2k::special
