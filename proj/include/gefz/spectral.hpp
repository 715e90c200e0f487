#pragma once

#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "gefz/test_function.hpp"

namespace gefz {

/// S(x) = Σ_{α≥1} α^{-3} e^{-x/α}: direct sum plus an Euler–Maclaurin tail.
double spectral_series(double x, double tol = 1e-12);

/// M(λ) = π³|λ|⁴ Σ_{α≥1} α^{-3} e^{-π²|λ|²/α}, relative error ≤ tol.
double spectral_density_M(double lambda_mag, double tol = 1e-12);

/// Comparability constants of M against min(|λ|⁴, 1): for every λ,
///   kMLowerRatio · min(|λ|⁴,1) ≤ M(λ) ≤ kMUpperRatio · min(|λ|⁴,1).
/// The infimum is attained at |λ| = 1 (value M(1)); the supremum is the
/// λ → 0 limit π³ζ(3). Both are rounded outward at the 11th digit.
inline constexpr double kMLowerRatio = 0.31798411454;
inline constexpr double kMUpperRatio = 37.2713089249;
/// sup_λ M(λ), attained near |λ| ≈ 0.5935 (rounded up).
inline constexpr double kMSup = 0.33075176759;

/// ζ(3), ζ(3/2) and derived constants, from zeta_series.
double zeta3();
double zeta3_2();

struct VarianceValue {
  double value = 0.0;
  double error_estimate = 0.0;
};

/// V(R,h) = R² ∫ |ĥ(λ)|² M(λ/R) dA(λ). Radial h: 1-D integral in |λ| split
/// at |λ| = R; general h: polar 2-D integral. Beyond |λ| = 4R the multiplier
/// equals 1/π to double precision, and the remainder is closed through
/// Plancherel when ĥ has not yet become negligible.
/// Throws ToleranceError when the error estimate exceeds tol·value.
VarianceValue variance_exact_detailed(const TestFunction& h, double R, double tol = 1e-8);
double variance_exact(const TestFunction& h, double R, double tol = 1e-8);

/// T(R,h) = R^{-2}∫_{|λ|≤R}|ĥ|²|λ|⁴ + R²∫_{|λ|≥R}|ĥ|².
double two_sided_functional(const TestFunction& h, double R);

struct TwoSided {
  double functional = 0.0;  ///< T(R,h)
  double lower = 0.0;       ///< kMLowerRatio · T
  double upper = 0.0;       ///< kMUpperRatio · T
};
TwoSided variance_two_sided(const TestFunction& h, double R);

/// ζ(3)‖Δh‖²/(16πR²). Throws std::invalid_argument when ‖Δh‖ = 0.
double asymptotic_smooth(const TestFunction& h, double R);

/// ζ(3/2)·R·perimeter/(8π^{3/2}).
double asymptotic_indicator(double perimeter, double R);

/// Var(∫ g U dA) = ¼ ∫ |ĝ|² π S(π²|λ|²) dA(λ).
double potential_variance_exact(const TestFunction& g);

/// Explicit bound: Var(∫gU) ≤ (π/4)ζ(3)‖g‖².
double potential_variance_bound_constant();

/// g = (1/2πR²)(Δh)(x/R) as a test function; ĝ(λ) = -2πR²|λ|²ĥ(Rλ).
/// Requires a radial h with a closed-form Laplacian.
TestFunction scaled_laplacian_weight(const TestFunction& h, double R);

/// Lower bound V ≥ c R^{-2}‖Δ(h*χ_R)‖² for the default χ:
/// c = kMLowerRatio/(16π⁴ K), K = sup_μ |χ̂(μ)|² max(1, |μ|⁴).
double smoothed_laplacian_lower_constant();
/// ‖Δ(h*χ_R)‖² = 16π⁴ ∫ |λ|⁴ |ĥ(λ)|² |χ̂(λ/R)|² dA (radial h, default χ).
double smoothed_laplacian_l2_squared(const TestFunction& h, double R);

/// c(h) with σ(R,h) ≥ c(h)/R for R ≥ 1: c(h)² = kMLowerRatio ∫_{|λ|≤1}|ĥ|²|λ|⁴.
double sigma_lower_constant(const TestFunction& h);

struct VarianceReport {
  std::string test_function;
  double R = 0.0;
  double exact = 0.0;
  double exact_error = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  std::optional<double> asymptotic_prediction;
  std::optional<double> mc_estimate;
  std::optional<double> mc_standard_error;
};

/// Exact value, bounds, and (when available) the matching asymptotic law:
/// the smooth law for h with a closed-form Laplacian, the boundary law for
/// the unit-disk indicator.
VarianceReport variance_report(const TestFunction& h, double R);

nlohmann::ordered_json to_json(const VarianceReport& r);
/// CSV columns: name,R,exact,lower,upper,asymptotic,mc,mc_se.
void write_variance_csv_header(std::ostream& out);
void write_variance_csv_row(std::ostream& out, const VarianceReport& r);

}  // namespace gefz
