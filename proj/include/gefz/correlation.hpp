#pragma once

#include <iosfwd>
#include <span>

#include "gefz/test_function.hpp"

namespace gefz {

/// Coefficient c_{2α} of log|ζ| in the Laguerre expansion in |ζ|²:
/// c_0 = -γ/2 and c_{2α} = (-1)^{α+1}/(2α) for α ≥ 1.
double laguerre_coefficient(int alpha);

/// The same coefficient by quadrature of ∫ ½ log t · (-1)^α L_α(t) e^{-t} dt.
/// Throws ToleranceError when the quadrature error estimate exceeds 1e-10.
double laguerre_coefficient_oracle(int alpha);

/// Cov(log|ζ₁|, log|ζ₂|) for standard complex Gaussians with |E ζ₁ conj(ζ₂)| = ρ,
/// i.e. Li₂(ρ²)/4.
double log_modulus_covariance(double rho);

/// Termwise ¼ Σ ρ^{2α}/α² with an explicit geometric tail bound (oracle).
double log_modulus_covariance_series(double rho);

struct PairCorrelation {
  double radius = 0.0;
  double smooth_density = 0.0;  ///< d(r)
  double with_intensity = 0.0;  ///< 1/π² + d(r)
};

/// Off-diagonal density of the two-point covariance measure at separation r.
/// Summed in closed form in q = e^{-r²}; below r = 0.3 the cancelling
/// numerator is replaced by its Taylor series (compensated).
PairCorrelation pair_correlation_smooth(double r, double tol = 1e-12);

/// Termwise (1/16π²) Σ α^{-2}(16α⁴r⁴ − 64α³r² + 32α²)e^{-αr²} with
/// compensated summation, truncated once the tail bound drops below tol·scale.
double pair_correlation_series(double r, double tol = 1e-14);

/// Mass density of the diagonal atom of the two-point covariance measure.
inline constexpr double kDiagonalAtom = 1.0 / std::numbers::pi;

/// V(R,h) = (1/π)∫h(x/R)² dA + ∬ h(x/R) h(y/R) d(|x-y|) dA dA.
double variance_from_pair_measure(const TestFunction& h, double R);

/// (h ⋆ h)(t) = ∫ h(x) h(x + t) dA(x) for radial h.
double radial_autocorrelation(const TestFunction& h, double t);

/// Var of (1/2π)∮ log|F*(Re^{iθ})| dθ: ¼ Σ α^{-2} e^{-x} I₀(x), x = 2αR².
double circle_term_variance(double R);

/// e^{-x} I₀(x), x ≥ 0, without overflow.
double scaled_bessel_i0(double x);

/// CSV rows r,d,with_intensity (RFC 4180, CRLF).
void write_pair_correlation_csv(std::ostream& out, std::span<const double> radii);

}  // namespace gefz
