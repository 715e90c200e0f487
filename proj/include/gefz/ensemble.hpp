#pragma once

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gefz/gef.hpp"
#include "gefz/test_function.hpp"
#include "gefz/zeros.hpp"

namespace gefz {

/// Too many samples of an ensemble failed zero extraction.
class EnsembleAbortError : public std::runtime_error {
 public:
  EnsembleAbortError(const std::string& what, std::vector<long long> indices)
      : std::runtime_error(what), indices_(std::move(indices)) {}
  const std::vector<long long>& aborted_indices() const noexcept { return indices_; }

 private:
  std::vector<long long> indices_;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  ///< unbiased (n − 1)
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  long long n = 0;
};

/// One-pass central moments (Terriberry update) in index order.
Moments compute_moments(std::span<const double> x);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};

/// Kolmogorov distribution tail Q(λ) = 2Σ(−1)^{k−1}e^{−2k²λ²}.
double kolmogorov_q(double lambda);

/// One-sample KS against N(0,1). Asymptotic p-value with Stephens'
/// (√n + 0.12 + 0.11/√n) correction. Throws std::invalid_argument for n < 100.
KsResult ks_normality(std::span<const double> standardized);

/// Two-sample KS distance sup|F_a − F_b|.
double ks_two_sample_distance(std::vector<double> a, std::vector<double> b);

/// Bootstrap standard error of the sample variance (seeded resampling).
double bootstrap_variance_se(std::span<const double> x, std::uint64_t seed, int resamples = 1000);

struct EnsembleOptions {
  int threads = 0;
  double disk_margin = 0.5;
  double abort_fraction = 1e-3;
  bool keep_values = true;
};

struct EnsembleSummary {
  std::string statistic_name;
  double R = 0.0;
  long long n_samples = 0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  std::vector<double> values;
  /// (value − mean)/sd with the ensemble's own mean and sd.
  std::vector<double> standardized_samples;
  double ks_statistic = 0.0;
  double ks_p_value = 0.0;
  std::uint64_t master_seed = 0;
  std::vector<long long> aborted_indices;
};

/// Result of one sample in a generic map over GEF draws.
using SampleFn = std::function<std::vector<double>(const GefSample&, const ZeroSet&)>;

struct SampleTable {
  std::vector<std::vector<double>> rows;  ///< rows of successful samples, index order
  std::vector<long long> indices;         ///< sample index of each row
  std::vector<long long> aborted;
};

/// Draws samples 0..n−1 (substream = index), extracts zeros on the disk of
/// `disk_radius` around 0 and applies fn. Samples whose extraction fails are
/// dropped and logged; more than abort_fraction of them throws.
SampleTable map_samples(long long n, std::uint64_t seed, double disk_radius, const SampleFn& fn,
                        const EnsembleOptions& options = {});

/// Ensemble of n(R,h). Extraction disk R·support + margin.
EnsembleSummary run_ensemble(const TestFunction& h, double R, long long n_samples,
                             std::uint64_t master_seed, const EnsembleOptions& options = {});

/// Summary from raw values.
EnsembleSummary summarize(std::string name, double R, std::vector<double> values,
                          std::uint64_t seed);

struct CltRow {
  double R = 0.0;
  long long n = 0;
  double mean = 0.0;
  double mean_theory = 0.0;
  double mean_se = 0.0;
  double variance = 0.0;
  double variance_exact = 0.0;
  double variance_se = 0.0;  ///< bootstrap
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double ks_statistic = 0.0;  ///< standardized with the exact mean and σ
  double ks_p_value = 0.0;
  std::optional<double> holder_diagnostic;  ///< R^α σ(R,h)
  std::vector<double> standardized;         ///< exact standardization, index order
};

/// Row from an existing ensemble of n(R,h) (values kept).
CltRow clt_row(const TestFunction& h, const EnsembleSummary& s, std::uint64_t seed);

std::vector<CltRow> clt_probe(const TestFunction& h, std::span<const double> R_list,
                              long long n_samples, std::uint64_t seed,
                              const EnsembleOptions& options = {});

/// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

struct AbnormalRow {
  double R = 0.0;
  long long n = 0;
  double sigma_mc = 0.0;
  double scaled_sigma = 0.0;  ///< R^α σ_MC
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double mean = 0.0;
  double mean_theory = 0.0;
  double variance_exact = 0.0;
  double ks_statistic = 0.0;  ///< standardized with the exact mean and σ
  double ks_p_value = 0.0;
  double ks_statistic_empirical = 0.0;  ///< standardized with the sample mean and sd
  double ks_p_value_empirical = 0.0;
  std::vector<double> standardized;  ///< exact standardization, index order
};

AbnormalRow abnormal_row(const TestFunction& h, double alpha, const EnsembleSummary& s);

/// Throws std::invalid_argument unless 0 < α < 1.
std::vector<AbnormalRow> abnormal_probe(double alpha, std::span<const double> R_list,
                                        long long n_samples, std::uint64_t seed,
                                        const EnsembleOptions& options = {});

/// Same pipeline as abnormal_probe applied to an arbitrary h with exponent
/// `alpha` in the scaled column (the control experiment).
std::vector<AbnormalRow> abnormal_probe_for(const TestFunction& h, double alpha,
                                            std::span<const double> R_list, long long n_samples,
                                            std::uint64_t seed, const EnsembleOptions& options = {});

struct LogMinusRow {
  double R = 0.0;
  long long n = 0;
  double mean = 0.0;  ///< of n(R, log⁻)
  double mean_theory = 0.0;
  double mean_se = 0.0;
  double circle_term_variance_mc = 0.0;
  double circle_term_variance_exact = 0.0;
  double identity_max_error = 0.0;  ///< max |n̄ − (circle term − ℓ(F*(0)))|
  double ks_distance_reference = 0.0;
};

/// Per sample: n(R, log⁻) from zeros, the circle term (1/2π)∮ℓ(F*) and
/// ℓ(F*(0)); compares n̄ against a directly sampled −(log|ζ| − b).
std::vector<LogMinusRow> log_minus_probe(std::span<const double> R_list, long long n_samples,
                                         std::uint64_t seed, const EnsembleOptions& options = {});

struct ProbeEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  double reference = 0.0;
};

/// Empirical Cov(log|ζ₁|, log|ζ₂|) with |E ζ₁conj(ζ₂)| = ρ.
ProbeEstimate correlated_gaussian_covariance_probe(double rho, long long n_samples,
                                                   std::uint64_t seed);

/// Empirical E|ζ|^t against Γ(t/2 + 1), 0 ≤ t ≤ 6.
ProbeEstimate gamma_moment_probe(double t, long long n_samples, std::uint64_t seed);

/// ∫_{|x|<ρ} log|F*(x)| dA, with the logarithmic singularities of zeros in
/// |x| < ρ + 1 integrated in closed form.
double potential_disk_integral(const GefSample& s, const ZeroSet& zeros, double rho);

struct PotentialProbe {
  double variance_mc = 0.0;
  double variance_se = 0.0;
  double variance_exact = 0.0;
  double mean_mc = 0.0;
  double mean_theory = 0.0;
};
/// Var ∫ g U dA for g = indicator of the unit disk.
PotentialProbe potential_variance_probe(long long n_samples, std::uint64_t seed,
                                        const EnsembleOptions& options = {});

struct PairHistogramBin {
  double r_lo = 0.0, r_hi = 0.0;
  double estimate = 0.0;  ///< empirical two-point intensity
  double standard_error = 0.0;
  double theory = 0.0;  ///< bin average of 1/π² + d(r)
};

/// Two-point intensity from pair distances of zeros in the disk of radius
/// `disk` around 0, normalized by the pair geometry of that disk.
std::vector<PairHistogramBin> pair_correlation_histogram(long long n_samples, double disk,
                                                         double r_min, double r_max, int bins,
                                                         std::uint64_t seed,
                                                         const EnsembleOptions& options = {});

nlohmann::ordered_json to_json(const EnsembleSummary& s, bool include_samples = false);

}  // namespace gefz
