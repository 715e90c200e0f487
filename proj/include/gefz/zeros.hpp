#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "gefz/gef.hpp"
#include "gefz/test_function.hpp"

namespace gefz {

/// A zero lies too close to a contour for the requested computation.
/// `suggested_radius` is a nearby radius whose circle keeps clear of it
/// (0 when no suggestion is available).
class GuardBandError : public std::runtime_error {
 public:
  GuardBandError(const std::string& what, double suggested_radius)
      : std::runtime_error(what), suggested_(suggested_radius) {}
  double suggested_radius() const noexcept { return suggested_; }

 private:
  double suggested_;
};

/// Root extraction disagrees with the argument-principle count.
class IncompleteExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Newton refinement failed to bring a root below the residual tolerance.
class NewtonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ZeroSet {
  std::vector<cplx> zeros;
  std::vector<double> residuals;  ///< |F*(a)| at each zero
  cplx disk_center{0.0, 0.0};
  /// Radius actually validated; never below the requested radius (it is
  /// nudged outward when a zero sits on the requested circle).
  double disk_radius = 0.0;
  int validated_count = 0;
};

struct ZeroFinderOptions {
  double residual_tol = 1e-10;
  double separation_floor = 1e-9;
  /// Guard band used for the validating winding count, relative to
  /// max(1, radius). Zeros closer than this to the validation circle move
  /// the circle outward.
  double validation_guard_rel = 1e-6;
};

/// Default guard band of count_zeros_circle: 1e-3 · radius.
inline constexpr double kDefaultGuardBandRel = 1e-3;

/// Winding number of F* along |z - center| = radius by adaptive phase
/// tracking (consecutive phase increments kept below π/3).
/// guard_band < 0 selects the default 1e-3·radius. Throws GuardBandError when
/// refinement would need arcs shorter than the guard band, and RadiusError
/// when the circle leaves the certified radius.
int count_zeros_circle(const GefSample& s, cplx center, double radius, double guard_band = -1.0);

/// All roots of a polynomial Σ c_k w^k (Aberth–Ehrlich simultaneous
/// iteration, Newton-polygon start). Leading and trailing zero coefficients
/// are handled (trailing zeros give roots at 0).
std::vector<cplx> polynomial_roots(std::span<const cplx> coefficients);

/// All zeros of F in |z - center| < radius, Newton-polished in log-domain
/// and validated by the winding number.
ZeroSet find_zeros_disk(const GefSample& s, cplx center, double radius,
                        const ZeroFinderOptions& options = {});

/// n(R, h) = Σ h(a/R). Throws std::invalid_argument when the support of
/// h(·/R) is not contained in the extraction disk.
double linear_statistic(const ZeroSet& zs, const TestFunction& h, double R);

/// (1/2π) ∮ log|F*(center + r e^{iθ})| dθ. Zeros within distance 1 of the
/// circle (taken from `zeros`) are subtracted as log|z - a| and added back
/// through their exact circle averages log max(r, |a - center|); the smooth
/// remainder is integrated with the trapezoid rule, doubling until converged.
struct CircleAverage {
  double value = 0.0;
  double error_estimate = 0.0;
  int nodes = 0;
};
CircleAverage circle_log_average(const GefSample& s, cplx center, double r,
                                 std::span<const cplx> zeros, double tol = 1e-12);

struct JensenResult {
  double radius = 0.0;
  double circle_average_star = 0.0;  ///< (1/2π)∮ log|F*|
  double left = 0.0;                 ///< (1/2π)∮ log|F| − log|F(0)|
  double right = 0.0;                ///< Σ_{|a|<R} log(R/|a|)
  double discrepancy = 0.0;
  int zeros_inside = 0;
};

/// Jensen identity check at radius R around 0. Requires F(0) ≠ 0 and
/// R + 1 ≤ valid_radius (or R < valid_radius, using what is available).
/// Throws GuardBandError when a zero lies within guard_band of the circle
/// (default 1e-3·R).
JensenResult jensen_check(const GefSample& s, double R, double guard_band = -1.0);
/// Same, using zeros already extracted on a disk containing |z| ≤ R + 1
/// (or up to the disk radius).
JensenResult jensen_check(const GefSample& s, const ZeroSet& zeros, double R,
                          double guard_band = -1.0);
/// Retries at the suggested nudged radius on guard-band violations.
JensenResult jensen_check_nudged(const GefSample& s, const ZeroSet& zeros, double R,
                                 int max_nudges = 16);

/// CSV rows (sample_index, re, im, residual); writes the header when asked.
void write_zeros_csv(std::ostream& out, long long sample_index, const ZeroSet& zs,
                     bool header);

}  // namespace gefz
