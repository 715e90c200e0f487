#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <vector>

#include "gefz/numeric.hpp"

namespace gefz {

/// Evaluation point lies outside the certified radius.
class RadiusError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Default tail tolerance: the truncated F* differs from the full series by a
/// complex Gaussian of standard deviation at most 1e-12 anywhere in the disk.
inline constexpr double kDefaultTailTolerance = 1e-12;

/// Least N ≥ ⌈R²⌉ such that the normalized tail variance at radius R,
/// e^{-R²} Σ_{k>N} R^{2k}/k!, is at most tail_tol². Evaluated in log-domain.
int truncation_degree(double radius, double tail_tol);

/// log( e^{-R²} Σ_{k>N} R^{2k}/k! ), the log of the certified tail variance.
double log_tail_variance(double radius, int degree);

/// One truncated realization F(z) = Σ_{k≤N} ζ_k z^k/√k!.
///
/// Immutable after construction; safe to share across threads.
class GefSample {
 public:
  /// Draws ζ_0..ζ_N from the Philox substream (seed, stream).
  /// Throws std::invalid_argument when N is below the certified degree.
  static GefSample draw(std::uint64_t seed, std::uint64_t stream, int degree,
                        double valid_radius, double tail_tol = kDefaultTailTolerance);

  /// Certified degree for (valid_radius, tail_tol), then draw().
  static GefSample draw_for_radius(std::uint64_t seed, std::uint64_t stream,
                                   double valid_radius,
                                   double tail_tol = kDefaultTailTolerance);

  /// Deterministic ζ_k (F(z) = Σ ζ_k z^k/√k!; [-1, 1] gives F(z) = -1 + z).
  /// The series is exactly this polynomial, so there is no truncation tail.
  static GefSample from_coefficients(std::vector<cplx> coefficients, double valid_radius);

  const std::vector<cplx>& coefficients() const noexcept { return coeffs_; }
  int truncation_degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  double valid_radius() const noexcept { return valid_radius_; }
  double tail_tolerance() const noexcept { return tail_tol_; }
  bool injected() const noexcept { return injected_; }

  /// 1/√k for k = 0..N+1 (entry 0 unused).
  const std::vector<double>& inv_sqrt() const noexcept { return inv_sqrt_; }

 private:
  GefSample(std::vector<cplx> coeffs, std::uint64_t seed, std::uint64_t stream,
            double valid_radius, double tail_tol, bool injected);

  std::vector<cplx> coeffs_;
  std::vector<double> inv_sqrt_;
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  double valid_radius_ = 0.0;
  double tail_tol_ = 0.0;
  bool injected_ = false;
};

/// U = log|F*| at a point, its centred version Ū = U − b with b = −γ/2, and
/// the phase of F*. A zero of F* is reported as log_modulus_star = −∞ with
/// `is_zero` set, never as an exception.
struct PotentialValue {
  double log_modulus_star = 0.0;
  double centered = 0.0;
  double phase = 0.0;
  bool is_zero = false;
};

struct StarValue {
  cplx value;  ///< F*(z) = e^{-|z|²/2} F(z)
  PotentialValue potential;
};

/// F*(z) with per-term log-domain scaling; throws RadiusError for
/// |z| > valid_radius.
StarValue evaluate_star(const GefSample& s, cplx z);

/// F*(z) and e^{-|z|²/2} F'(z), sharing one pass over the series.
struct StarWithDerivative {
  cplx value;
  cplx derivative;
};
StarWithDerivative evaluate_star_with_derivative(const GefSample& s, cplx z);

/// Plain (unscaled) summation of e^{-|z|²/2} Σ ζ_k z^k/√k!. Overflows for
/// |z| ≳ 26; exposed as an independent cross-check of evaluate_star.
cplx evaluate_star_direct(const GefSample& s, cplx z);

/// E{F(z) conj F(w)} = e^{z·conj(w)}, held as its logarithm.
struct CovarianceValue {
  cplx log_value;
  cplx value() const { return std::exp(log_value); }
};
CovarianceValue covariance_kernel(cplx z, cplx w);

/// ρ(z, w) = e^{-|z-w|²/2}, the modulus of the correlation of F*(z), F*(w).
double normalized_correlation(cplx z, cplx w);

/// Evaluator for the projective translate (T_κ F)(z) = F(κ+z) e^{-z·conj κ - |κ|²/2}.
class ProjectiveTranslate {
 public:
  /// Requires |κ| + working_radius ≤ valid_radius.
  ProjectiveTranslate(std::shared_ptr<const GefSample> sample, cplx kappa,
                      double working_radius);

  /// (T_κ F)*(z) = F*(κ+z) e^{-i Im(z·conj κ)}.
  cplx star(cplx z) const;
  /// (T_κ F)(z) = (T_κ F)*(z) e^{|z|²/2}.
  cplx value(cplx z) const;

  cplx kappa() const noexcept { return kappa_; }

 private:
  std::shared_ptr<const GefSample> sample_;
  cplx kappa_;
  double working_radius_;
};

nlohmann::json to_json(const GefSample& s);
GefSample gef_sample_from_json(const nlohmann::json& j);

}  // namespace gefz
