#include "gefz/gef.hpp"

#include <algorithm>
#include <cmath>

#include "gefz/rng.hpp"

namespace gefz {

namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// log of e^{-λ} λ^k / k!
double log_poisson_term(double lambda, int k) {
  return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
}

// Terms below this many nats under the largest retained term cannot change a
// double-precision sum.
constexpr double kNegligibleNats = 40.0;

void check_radius(const GefSample& s, cplx z) {
  if (std::abs(z) > s.valid_radius() * (1.0 + 1e-12)) {
    throw RadiusError("evaluation point outside the certified radius");
  }
}

struct Accum {
  cplx value{0.0, 0.0};
  cplx derivative{0.0, 0.0};
};

// Sums ζ_k t_k (and optionally ζ_{k+1} √(k+1) t_k) where
// t_k = z^k e^{-|z|²/2}/√k!, starting from the largest term k0 ≈ |z|² whose
// value is computed in log-domain, then walking outward with ratio recurrences.
// Each walk stops once the terms have decayed by kNegligibleNats below the peak.
template <bool kDerivative>
Accum sum_scaled(const GefSample& s, cplx z) {
  const auto& c = s.coefficients();
  const auto& isq = s.inv_sqrt();
  const int n = s.truncation_degree();
  Accum acc;
  const double r = std::abs(z);
  if (r == 0.0) {
    acc.value = c[0];
    if constexpr (kDerivative) acc.derivative = n >= 1 ? c[1] : cplx{};
    return acc;
  }
  const double r2 = r * r;
  const int k0 = std::clamp(static_cast<int>(std::lround(r2)), 0, n);
  const double log_mag = k0 * std::log(r) - 0.5 * std::lgamma(k0 + 1.0) - 0.5 * r2;
  const cplx t0 = std::polar(std::exp(log_mag), k0 * std::arg(z));
  const double cutoff = std::exp(log_mag - kNegligibleNats);

  auto add = [&](int k, cplx t) {
    acc.value += c[k] * t;
    if constexpr (kDerivative) {
      if (k + 1 <= n) acc.derivative += c[k + 1] * (t * (1.0 / isq[k + 1]));
    }
  };

  add(k0, t0);
  cplx t = t0;
  for (int k = k0 + 1; k <= n; ++k) {
    t *= z * isq[k];
    add(k, t);
    if (k > r2 && std::abs(t.real()) + std::abs(t.imag()) < cutoff) break;
  }
  t = t0;
  const cplx inv_z = 1.0 / z;
  for (int k = k0 - 1; k >= 0; --k) {
    t *= inv_z * (1.0 / isq[k + 1]);
    add(k, t);
    if (k < r2 && std::abs(t.real()) + std::abs(t.imag()) < cutoff) break;
  }
  return acc;
}

PotentialValue potential_of(cplx v) {
  PotentialValue p;
  const double m = std::abs(v);
  if (m == 0.0) {
    p.log_modulus_star = -std::numeric_limits<double>::infinity();
    p.centered = p.log_modulus_star;
    p.phase = 0.0;
    p.is_zero = true;
    return p;
  }
  p.log_modulus_star = std::log(m);
  p.centered = p.log_modulus_star - kLogModulusMean;
  p.phase = std::arg(v);
  return p;
}

}  // namespace

double log_tail_variance(double radius, int degree) {
  if (!(radius > 0.0)) throw std::invalid_argument("log_tail_variance: radius must be positive");
  const double lambda = radius * radius;
  // Sum from the far end down so the accumulation never subtracts.
  int k_max = std::max(degree + 1, static_cast<int>(std::ceil(lambda))) + 1;
  while (log_poisson_term(lambda, k_max) > log_poisson_term(lambda, degree + 1) - kNegligibleNats ||
         k_max < lambda) {
    k_max += std::max(8, static_cast<int>(std::sqrt(lambda)));
  }
  double acc = -std::numeric_limits<double>::infinity();
  for (int k = k_max; k > degree; --k) acc = log_add(acc, log_poisson_term(lambda, k));
  return acc;
}

int truncation_degree(double radius, double tail_tol) {
  if (!(radius > 0.0)) throw std::invalid_argument("truncation_degree: radius must be positive");
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) {
    throw std::invalid_argument("truncation_degree: tail_tol must lie in (0, 1)");
  }
  const double target_sq = tail_tol * tail_tol;
  if (!(target_sq >= std::numeric_limits<double>::min())) {
    throw std::invalid_argument("truncation_degree: tail_tol² underflows double precision");
  }
  const double log_target = 2.0 * std::log(tail_tol);
  const double lambda = radius * radius;
  const int start = std::max(1, static_cast<int>(std::ceil(lambda)));

  // Tail sums T_N = Σ_{k>N} p_k computed once from the far end; the answer is
  // the first N ≥ start with T_N ≤ tol².
  int k_max = start + 1;
  while (log_poisson_term(lambda, k_max) > log_target - kNegligibleNats) {
    k_max += std::max(8, static_cast<int>(std::sqrt(lambda)));
  }
  std::vector<double> tail(static_cast<std::size_t>(k_max + 1),
                           -std::numeric_limits<double>::infinity());
  double acc = -std::numeric_limits<double>::infinity();
  for (int k = k_max; k >= start; --k) {
    tail[k] = acc;  // Σ_{j>k}
    acc = log_add(acc, log_poisson_term(lambda, k));
  }
  for (int n = start; n <= k_max; ++n) {
    if (tail[n] <= log_target) return n;
  }
  return k_max;
}

GefSample::GefSample(std::vector<cplx> coeffs, std::uint64_t seed, std::uint64_t stream,
                     double valid_radius, double tail_tol, bool injected)
    : coeffs_(std::move(coeffs)),
      seed_(seed),
      stream_(stream),
      valid_radius_(valid_radius),
      tail_tol_(tail_tol),
      injected_(injected) {
  if (coeffs_.empty()) throw std::invalid_argument("GefSample: empty coefficient vector");
  inv_sqrt_.resize(coeffs_.size() + 1);
  inv_sqrt_[0] = 0.0;
  for (std::size_t k = 1; k < inv_sqrt_.size(); ++k) {
    inv_sqrt_[k] = 1.0 / std::sqrt(static_cast<double>(k));
  }
}

GefSample GefSample::draw(std::uint64_t seed, std::uint64_t stream, int degree,
                          double valid_radius, double tail_tol) {
  const int needed = gefz::truncation_degree(valid_radius, tail_tol);
  if (degree < needed) {
    throw std::invalid_argument("GefSample::draw: degree " + std::to_string(degree) +
                                " below certified degree " + std::to_string(needed));
  }
  Philox rng = make_stream(seed, StreamTag::kGefSample, stream);
  std::vector<cplx> c(static_cast<std::size_t>(degree) + 1);
  for (auto& v : c) v = rng.complex_normal();
  return GefSample(std::move(c), seed, stream, valid_radius, tail_tol, false);
}

GefSample GefSample::draw_for_radius(std::uint64_t seed, std::uint64_t stream,
                                     double valid_radius, double tail_tol) {
  return draw(seed, stream, gefz::truncation_degree(valid_radius, tail_tol), valid_radius,
              tail_tol);
}

GefSample GefSample::from_coefficients(std::vector<cplx> coefficients, double valid_radius) {
  return GefSample(std::move(coefficients), 0, 0, valid_radius, 0.0, true);
}

StarValue evaluate_star(const GefSample& s, cplx z) {
  check_radius(s, z);
  const cplx v = sum_scaled<false>(s, z).value;
  return {v, potential_of(v)};
}

StarWithDerivative evaluate_star_with_derivative(const GefSample& s, cplx z) {
  check_radius(s, z);
  const Accum a = sum_scaled<true>(s, z);
  return {a.value, a.derivative};
}

cplx evaluate_star_direct(const GefSample& s, cplx z) {
  const auto& c = s.coefficients();
  cplx sum{0.0, 0.0};
  cplx zk{1.0, 0.0};
  double fact = 1.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (k > 0) {
      zk *= z;
      fact *= static_cast<double>(k);
    }
    sum += c[k] * zk / std::sqrt(fact);
  }
  return sum * std::exp(-0.5 * std::norm(z));
}

CovarianceValue covariance_kernel(cplx z, cplx w) { return {z * std::conj(w)}; }

double normalized_correlation(cplx z, cplx w) { return std::exp(-0.5 * std::norm(z - w)); }

ProjectiveTranslate::ProjectiveTranslate(std::shared_ptr<const GefSample> sample, cplx kappa,
                                         double working_radius)
    : sample_(std::move(sample)), kappa_(kappa), working_radius_(working_radius) {
  if (std::abs(kappa_) + working_radius_ > sample_->valid_radius() * (1.0 + 1e-12)) {
    throw RadiusError("projective translate: |κ| + working radius exceeds the valid radius");
  }
}

cplx ProjectiveTranslate::star(cplx z) const {
  if (std::abs(z) > working_radius_ * (1.0 + 1e-12)) {
    throw RadiusError("projective translate: point outside the working radius");
  }
  const cplx base = evaluate_star(*sample_, kappa_ + z).value;
  return base * std::polar(1.0, -(z * std::conj(kappa_)).imag());
}

cplx ProjectiveTranslate::value(cplx z) const { return star(z) * std::exp(0.5 * std::norm(z)); }

nlohmann::json to_json(const GefSample& s) {
  nlohmann::json coeffs = nlohmann::json::array();
  for (const auto& c : s.coefficients()) coeffs.push_back({c.real(), c.imag()});
  nlohmann::json j;
  j["seed"] = s.seed();
  j["stream"] = s.stream();
  j["N"] = s.truncation_degree();
  j["valid_radius"] = s.valid_radius();
  j["tail_tolerance"] = s.tail_tolerance();
  j["coefficients"] = std::move(coeffs);
  return j;
}

GefSample gef_sample_from_json(const nlohmann::json& j) {
  const auto seed = j.at("seed").get<std::uint64_t>();
  const auto stream = j.value("stream", std::uint64_t{0});
  const int n = j.at("N").get<int>();
  const double rv = j.at("valid_radius").get<double>();
  const double tol = j.at("tail_tolerance").get<double>();
  const auto& arr = j.at("coefficients");
  if (static_cast<int>(arr.size()) != n + 1) {
    throw std::invalid_argument("GefSample JSON: coefficient count does not match N");
  }
  GefSample s = GefSample::draw(seed, stream, n, rv, tol);
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const cplx stored{arr[k].at(0).get<double>(), arr[k].at(1).get<double>()};
    if (stored != s.coefficients()[k]) {
      throw std::invalid_argument("GefSample JSON: coefficients do not match (seed, stream, N)");
    }
  }
  return s;
}

}  // namespace gefz
