#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gefz {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kEulerGamma = std::numbers::egamma;
/// E log|ζ| for a standard complex Gaussian.
inline constexpr double kLogModulusMean = -0.5 * std::numbers::egamma;
/// First intensity of the zero process.
inline constexpr double kZeroIntensity = 1.0 / std::numbers::pi;

/// Raised when a numerical tolerance cannot be met. `achieved` carries the
/// best error estimate that was reached.
class ToleranceError : public std::runtime_error {
 public:
  ToleranceError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Neumaier's variant of Kahan summation. Unlike plain Kahan it stays exact
/// when an addend is larger in magnitude than the running sum, which is the
/// situation in alternating series with large cancelling blocks.
class CompensatedSum {
 public:
  CompensatedSum& operator+=(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Fixed-order pairwise summation; the result depends only on the input
/// order, never on scheduling.
double pairwise_sum(std::span<const double> values);

struct QuadNode {
  double x;
  double w;
};

/// Composite 20-point Gauss–Legendre rule on [a, b] with `panels` equal panels.
std::vector<QuadNode> gauss_legendre_panels(double a, double b, int panels);

/// Composite rule on [a, b] split at `breaks`; panels adjacent to any point in
/// `singular` are graded geometrically toward it so that algebraic or
/// logarithmic endpoint behaviour is resolved.
std::vector<QuadNode> graded_rule(double a, double b, std::span<const double> breaks,
                                  std::span<const double> singular, int panels_per_unit,
                                  int min_panels = 1, int grading_levels = 14);

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Riemann zeta at s > 1 by direct summation with an Euler–Maclaurin tail
/// (error below 1e-14 relative).
double zeta_series(double s);

/// Li_2(x) for x in [0, 1], series plus Euler reflection near 1.
double dilog(double x);

}  // namespace gefz
