#include "gefz/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gefz/correlation.hpp"
#include "gefz/numeric.hpp"
#include "gefz/parallel.hpp"
#include "gefz/rng.hpp"
#include "gefz/spectral.hpp"

namespace gefz {

Moments compute_moments(std::span<const double> x) {
  Moments m;
  double mean = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
  long long n = 0;
  for (double v : x) {
    const long long n1 = n;
    ++n;
    const double delta = v - mean;
    const double dn = delta / static_cast<double>(n);
    const double dn2 = dn * dn;
    const double term1 = delta * dn * static_cast<double>(n1);
    mean += dn;
    m4 += term1 * dn2 * (static_cast<double>(n) * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2 -
          4.0 * dn * m3;
    m3 += term1 * dn * (n - 2.0) - 3.0 * dn * m2;
    m2 += term1;
  }
  m.n = n;
  m.mean = mean;
  if (n > 1) m.variance = m2 / static_cast<double>(n - 1);
  if (n > 0 && m2 > 0.0) {
    const double nd = static_cast<double>(n);
    m.skewness = std::sqrt(nd) * m3 / std::pow(m2, 1.5);
    m.excess_kurtosis = nd * m4 / (m2 * m2) - 3.0;
  }
  return m;
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Q = 1 − (√(2π)/λ) Σ exp(−(2k−1)²π²/(8λ²)), fast for small λ.
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double t = (2.0 * k - 1.0) * kPi / lambda;
      s += std::exp(-t * t / 8.0);
    }
    return std::clamp(1.0 - std::sqrt(2.0 * kPi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double t = 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
    s += k % 2 == 1 ? t : -t;
    if (t < 1e-17) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_normality(std::span<const double> standardized) {
  const std::size_t n = standardized.size();
  if (n < 100) throw std::invalid_argument("ks_normality: at least 100 samples required");
  std::vector<double> x(standardized.begin(), standardized.end());
  std::sort(x.begin(), x.end());
  double d = 0.0;
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = normal_cdf(x[i]);
    d = std::max({d, (i + 1.0) / nd - f, f - i / nd});
  }
  const double sn = std::sqrt(nd);
  return {d, kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)};
}

double ks_two_sample_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

double bootstrap_variance_se(std::span<const double> x, std::uint64_t seed, int resamples) {
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("bootstrap_variance_se: need at least 2 values");
  std::vector<double> vars(static_cast<std::size_t>(resamples));
  std::vector<double> draw(n);
  for (int b = 0; b < resamples; ++b) {
    Philox rng = make_stream(seed, StreamTag::kBootstrap, static_cast<std::uint64_t>(b));
    for (std::size_t i = 0; i < n; ++i) draw[i] = x[rng.next_u64() % n];
    vars[static_cast<std::size_t>(b)] = compute_moments(draw).variance;
  }
  return std::sqrt(compute_moments(vars).variance);
}

SampleTable map_samples(long long n, std::uint64_t seed, double disk_radius, const SampleFn& fn,
                        const EnsembleOptions& options) {
  if (n <= 0) throw std::invalid_argument("map_samples: n must be positive");
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(n));
  std::vector<char> ok(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t i) {
    const GefSample s = GefSample::draw_for_radius(seed, i, disk_radius + 1.0);
    try {
      const ZeroSet zs = find_zeros_disk(s, 0.0, disk_radius);
      rows[i] = fn(s, zs);
      ok[i] = 1;
    } catch (const IncompleteExtractionError&) {
    } catch (const GuardBandError&) {
    } catch (const NewtonConvergenceError&) {
    }
  });
  SampleTable t;
  for (long long i = 0; i < n; ++i) {
    if (ok[static_cast<std::size_t>(i)]) {
      t.rows.push_back(std::move(rows[static_cast<std::size_t>(i)]));
      t.indices.push_back(i);
    } else {
      t.aborted.push_back(i);
      std::fprintf(stderr, "gefz: sample %lld aborted (zero extraction)\n", i);
    }
  }
  if (static_cast<double>(t.aborted.size()) > options.abort_fraction * static_cast<double>(n)) {
    throw EnsembleAbortError("map_samples: too many samples failed zero extraction", t.aborted);
  }
  return t;
}

EnsembleSummary summarize(std::string name, double R, std::vector<double> values,
                          std::uint64_t seed) {
  EnsembleSummary s;
  s.statistic_name = std::move(name);
  s.R = R;
  s.master_seed = seed;
  s.n_samples = static_cast<long long>(values.size());
  const Moments m = compute_moments(values);
  s.mean = m.mean;
  s.variance = m.variance;
  s.skewness = m.skewness;
  s.excess_kurtosis = m.excess_kurtosis;
  const double sd = std::sqrt(m.variance);
  s.standardized_samples.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.standardized_samples[i] = sd > 0.0 ? (values[i] - m.mean) / sd : 0.0;
  }
  if (values.size() >= 100) {
    const KsResult ks = ks_normality(s.standardized_samples);
    s.ks_statistic = ks.statistic;
    s.ks_p_value = ks.p_value;
  }
  s.values = std::move(values);
  return s;
}

EnsembleSummary run_ensemble(const TestFunction& h, double R, long long n_samples,
                             std::uint64_t master_seed, const EnsembleOptions& options) {
  if (n_samples < 100) throw std::invalid_argument("run_ensemble: at least 100 samples required");
  if (!(R > 0.0)) throw std::invalid_argument("run_ensemble: R must be positive");
  if (!(h.l1_norm() > 0.0)) throw std::invalid_argument("run_ensemble: h is identically zero");
  const double disk = R * h.support_radius() + options.disk_margin;
  const SampleTable t = map_samples(
      n_samples, master_seed, disk,
      [&](const GefSample&, const ZeroSet& zs) { return std::vector<double>{linear_statistic(zs, h, R)}; },
      options);
  std::vector<double> v;
  v.reserve(t.rows.size());
  for (const auto& r : t.rows) v.push_back(r[0]);
  EnsembleSummary s = summarize("n(R," + h.name() + ")", R, std::move(v), master_seed);
  s.aborted_indices = t.aborted;
  if (!options.keep_values) {
    s.values.clear();
    s.standardized_samples.clear();
  }
  return s;
}

CltRow clt_row(const TestFunction& h, const EnsembleSummary& s, std::uint64_t seed) {
  const double R = s.R;
  CltRow r;
  r.R = R;
  r.n = s.n_samples;
  r.mean = s.mean;
  r.mean_theory = R * R / kPi * h.integral();
  r.mean_se = std::sqrt(s.variance / static_cast<double>(s.n_samples));
  r.variance = s.variance;
  r.variance_exact = variance_exact(h, R);
  r.variance_se = bootstrap_variance_se(s.values, seed);
  r.skewness = s.skewness;
  r.excess_kurtosis = s.excess_kurtosis;
  const double sigma = std::sqrt(r.variance_exact);
  std::vector<double> z(s.values.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (s.values[i] - r.mean_theory) / sigma;
  const KsResult ks = ks_normality(z);
  r.ks_statistic = ks.statistic;
  r.ks_p_value = ks.p_value;
  if (const auto a = h.holder_exponent()) r.holder_diagnostic = std::pow(R, *a) * sigma;
  r.standardized = std::move(z);
  return r;
}

std::vector<CltRow> clt_probe(const TestFunction& h, std::span<const double> R_list,
                              long long n_samples, std::uint64_t seed,
                              const EnsembleOptions& options) {
  EnsembleOptions keep = options;
  keep.keep_values = true;
  std::vector<CltRow> rows;
  for (double R : R_list) rows.push_back(clt_row(h, run_ensemble(h, R, n_samples, seed, keep), seed));
  return rows;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: bad input");
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

AbnormalRow abnormal_row(const TestFunction& h, double alpha, const EnsembleSummary& s) {
  const double R = s.R;
  AbnormalRow r;
  r.R = R;
  r.n = s.n_samples;
  r.sigma_mc = std::sqrt(s.variance);
  r.scaled_sigma = std::pow(R, alpha) * r.sigma_mc;
  r.skewness = s.skewness;
  r.excess_kurtosis = s.excess_kurtosis;
  r.ks_statistic_empirical = s.ks_statistic;
  r.ks_p_value_empirical = s.ks_p_value;
  r.mean = s.mean;
  r.mean_theory = R * R / kPi * h.integral();
  r.variance_exact = variance_exact(h, R);
  const double sigma = std::sqrt(r.variance_exact);
  r.standardized.resize(s.values.size());
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    r.standardized[i] = (s.values[i] - r.mean_theory) / sigma;
  }
  const KsResult ks = ks_normality(r.standardized);
  r.ks_statistic = ks.statistic;
  r.ks_p_value = ks.p_value;
  return r;
}

std::vector<AbnormalRow> abnormal_probe_for(const TestFunction& h, double alpha,
                                            std::span<const double> R_list, long long n_samples,
                                            std::uint64_t seed, const EnsembleOptions& options) {
  EnsembleOptions keep = options;
  keep.keep_values = true;
  std::vector<AbnormalRow> rows;
  for (double R : R_list) rows.push_back(abnormal_row(h, alpha, run_ensemble(h, R, n_samples, seed, keep)));
  return rows;
}

std::vector<AbnormalRow> abnormal_probe(double alpha, std::span<const double> R_list,
                                        long long n_samples, std::uint64_t seed,
                                        const EnsembleOptions& options) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("abnormal_probe: alpha must lie in (0, 1)");
  return abnormal_probe_for(abnormal(alpha), alpha, R_list, n_samples, seed, options);
}

std::vector<LogMinusRow> log_minus_probe(std::span<const double> R_list, long long n_samples,
                                         std::uint64_t seed, const EnsembleOptions& options) {
  const TestFunction h = log_minus();
  std::vector<LogMinusRow> rows;
  for (double R : R_list) {
    const SampleTable t = map_samples(
        n_samples, seed, R + 1.0,
        [&](const GefSample& s, const ZeroSet& zs) {
          const double n = linear_statistic(zs, h, R);
          const CircleAverage ca = circle_log_average(s, 0.0, R, zs.zeros);
          const double circle = ca.value - kLogModulusMean;
          const double ell0 = std::log(std::abs(s.coefficients()[0])) - kLogModulusMean;
          return std::vector<double>{n, circle, ell0};
        },
        options);
    LogMinusRow r;
    r.R = R;
    r.n = static_cast<long long>(t.rows.size());
    std::vector<double> nv, cv, centred;
    double worst = 0.0;
    for (const auto& row : t.rows) {
      nv.push_back(row[0]);
      cv.push_back(row[1]);
      const double nbar = row[0] - 0.5 * R * R;
      centred.push_back(nbar);
      worst = std::max(worst, std::abs(nbar - (row[1] - row[2])));
    }
    const Moments mn = compute_moments(nv);
    r.mean = mn.mean;
    r.mean_theory = 0.5 * R * R;
    r.mean_se = std::sqrt(mn.variance / static_cast<double>(r.n));
    r.circle_term_variance_mc = compute_moments(cv).variance;
    r.circle_term_variance_exact = circle_term_variance(R);
    r.identity_max_error = worst;

    std::vector<double> ref(static_cast<std::size_t>(r.n));
    for (std::size_t i = 0; i < ref.size(); ++i) {
      Philox rng = make_stream(seed, StreamTag::kReference, i);
      ref[i] = -(std::log(std::abs(rng.complex_normal())) - kLogModulusMean);
    }
    auto standardize = [](std::vector<double> v) {
      const Moments m = compute_moments(v);
      const double sd = std::sqrt(m.variance);
      for (double& x : v) x = (x - m.mean) / sd;
      return v;
    };
    r.ks_distance_reference = ks_two_sample_distance(standardize(centred), standardize(ref));
    rows.push_back(r);
  }
  return rows;
}

ProbeEstimate correlated_gaussian_covariance_probe(double rho, long long n_samples,
                                                   std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::domain_error("covariance probe: rho outside [0, 1]");
  if (n_samples < 2) throw std::invalid_argument("covariance probe: need at least 2 samples");
  const double c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  std::vector<double> a(static_cast<std::size_t>(n_samples)), b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    Philox rng = make_stream(seed, StreamTag::kPairs, i);
    const cplx z1 = rng.complex_normal();
    const cplx z2 = rho * z1 + c * rng.complex_normal();
    a[i] = std::log(std::abs(z1));
    b[i] = std::log(std::abs(z2));
  }
  const double ma = pairwise_sum(a) / n_samples, mb = pairwise_sum(b) / n_samples;
  std::vector<double> prod(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) prod[i] = (a[i] - ma) * (b[i] - mb);
  const Moments m = compute_moments(prod);
  ProbeEstimate e;
  e.value = pairwise_sum(prod) / static_cast<double>(n_samples - 1);
  e.standard_error = std::sqrt(m.variance / static_cast<double>(n_samples));
  e.reference = log_modulus_covariance(rho);
  return e;
}

ProbeEstimate gamma_moment_probe(double t, long long n_samples, std::uint64_t seed) {
  if (!(t >= 0.0 && t <= 6.0)) throw std::domain_error("gamma_moment_probe: t outside [0, 6]");
  if (n_samples < 2) throw std::invalid_argument("gamma_moment_probe: need at least 2 samples");
  std::vector<double> v(static_cast<std::size_t>(n_samples));
  for (std::size_t i = 0; i < v.size(); ++i) {
    Philox rng = make_stream(seed, StreamTag::kReference, i);
    v[i] = std::pow(std::abs(rng.complex_normal()), t);
  }
  const Moments m = compute_moments(v);
  return {m.mean, std::sqrt(m.variance / static_cast<double>(n_samples)), std::tgamma(0.5 * t + 1.0)};
}

double potential_disk_integral(const GefSample& s, const ZeroSet& zeros, double rho) {
  std::vector<cplx> near;
  double singular = 0.0;
  const double area = kPi * rho * rho;
  for (cplx a : zeros.zeros) {
    const double m = std::abs(a);
    if (m >= rho + 1.0) continue;
    near.push_back(a);
    // ∫_{|x|<ρ} log|x − a| dA
    singular += m >= rho ? area * std::log(m)
                         : area * std::log(rho) - 0.5 * kPi * (rho * rho - m * m);
  }
  if (zeros.disk_radius < rho + 1.0 - 1e-12) {
    throw std::invalid_argument("potential_disk_integral: zeros must cover |x| < rho + 1");
  }
  const std::vector<QuadNode> rr = gauss_legendre_panels(0.0, rho, 2);
  constexpr int kAngles = 64;
  CompensatedSum smooth;
  for (const auto& n : rr) {
    CompensatedSum ring;
    for (int j = 0; j < kAngles; ++j) {
      const cplx x = std::polar(n.x, 2.0 * kPi * (j + 0.5) / kAngles);
      double v = evaluate_star(s, x).potential.log_modulus_star;
      for (cplx a : near) v -= std::log(std::abs(x - a));
      ring += v;
    }
    smooth += n.w * n.x * ring.value() * (2.0 * kPi / kAngles);
  }
  return singular + smooth.value();
}

PotentialProbe potential_variance_probe(long long n_samples, std::uint64_t seed,
                                        const EnsembleOptions& options) {
  const SampleTable t = map_samples(
      n_samples, seed, 2.0,
      [](const GefSample& s, const ZeroSet& zs) {
        return std::vector<double>{potential_disk_integral(s, zs, 1.0)};
      },
      options);
  std::vector<double> v;
  for (const auto& r : t.rows) v.push_back(r[0]);
  const Moments m = compute_moments(v);
  PotentialProbe p;
  p.variance_mc = m.variance;
  p.variance_se = bootstrap_variance_se(v, seed);
  p.variance_exact = potential_variance_exact(indicator_disk());
  p.mean_mc = m.mean;
  p.mean_theory = kPi * kLogModulusMean;
  return p;
}

namespace {

// Area of D ∩ (D + v) for a disk D of radius a and |v| = r.
double lens_area(double a, double r) {
  if (r >= 2.0 * a) return 0.0;
  return 2.0 * a * a * std::acos(r / (2.0 * a)) - 0.5 * r * std::sqrt(4.0 * a * a - r * r);
}

}  // namespace

std::vector<PairHistogramBin> pair_correlation_histogram(long long n_samples, double disk,
                                                         double r_min, double r_max, int bins,
                                                         std::uint64_t seed,
                                                         const EnsembleOptions& options) {
  if (!(r_max > r_min && r_min >= 0.0 && bins > 0 && r_max < 2.0 * disk)) {
    throw std::invalid_argument("pair_correlation_histogram: bad bin specification");
  }
  const double width = (r_max - r_min) / bins;
  const SampleTable t = map_samples(
      n_samples, seed, disk,
      [&](const GefSample&, const ZeroSet& zs) {
        std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
        std::vector<cplx> pts;
        for (cplx z : zs.zeros)
          if (std::abs(z) < disk) pts.push_back(z);
        for (std::size_t i = 0; i < pts.size(); ++i) {
          for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double d = std::abs(pts[i] - pts[j]);
            if (d < r_min || d >= r_max) continue;
            const auto b = static_cast<std::size_t>((d - r_min) / width);
            if (b < counts.size()) counts[b] += 2.0;  // ordered pairs
          }
        }
        return counts;
      },
      options);
  std::vector<PairHistogramBin> out;
  const double n = static_cast<double>(t.rows.size());
  for (int b = 0; b < bins; ++b) {
    PairHistogramBin bin;
    bin.r_lo = r_min + b * width;
    bin.r_hi = bin.r_lo + width;
    double geometry = 0.0, weighted = 0.0;
    for (const auto& node : gauss_legendre_panels(bin.r_lo, bin.r_hi, 1)) {
      const double g = node.w * 2.0 * kPi * node.x * lens_area(disk, node.x);
      geometry += g;
      weighted += g * pair_correlation_smooth(node.x).with_intensity;
    }
    std::vector<double> c(t.rows.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = t.rows[i][static_cast<std::size_t>(b)];
    const Moments m = compute_moments(c);
    bin.estimate = m.mean / geometry;
    bin.standard_error = std::sqrt(m.variance / n) / geometry;
    bin.theory = weighted / geometry;
    out.push_back(bin);
  }
  return out;
}

nlohmann::ordered_json to_json(const EnsembleSummary& s, bool include_samples) {
  nlohmann::ordered_json j;
  j["statistic_name"] = s.statistic_name;
  j["R"] = s.R;
  j["n_samples"] = s.n_samples;
  j["mean"] = s.mean;
  j["variance"] = s.variance;
  j["skewness"] = s.skewness;
  j["excess_kurtosis"] = s.excess_kurtosis;
  j["ks_statistic"] = s.ks_statistic;
  j["ks_p_value"] = s.ks_p_value;
  j["master_seed"] = s.master_seed;
  j["aborted_indices"] = s.aborted_indices;
  if (include_samples) j["standardized_samples"] = s.standardized_samples;
  return j;
}

}  // namespace gefz
