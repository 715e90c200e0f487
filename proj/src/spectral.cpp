#include "gefz/spectral.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>

namespace gefz {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ∫_K^∞ t^{-3} e^{-x/t} dt = ∫_0^{1/K} u e^{-xu} du.
double tail_integral(double x, double K) {
  const double y = x / K;
  if (y < 0.5) {
    // Σ_n (-x)^n K^{-(n+2)} / (n! (n+2))
    double term = 1.0 / (K * K);
    double sum = 0.0;
    for (int n = 0; n < 60; ++n) {
      const double add = term / (n + 2);
      sum += add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
      term *= -y / (n + 1);
    }
    return sum;
  }
  return -std::expm1(-y) / (x * x) - y * std::exp(-y) / (x * x);
}

// Kronrod-21 and embedded Gauss-10 on one panel, for two weights at once.
struct PanelResult {
  double weighted = 0.0;
  double weighted_gauss = 0.0;
  double plain = 0.0;
};

template <class F>
PanelResult gk21_panel(double a, double b, F&& f) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 21>;
  using G = boost::math::quadrature::gauss<double, 10>;
  const auto& x = GK::abscissa();
  const auto& wk = GK::weights();
  const auto& wg = G::weights();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  PanelResult r;
  auto add = [&](std::size_t i, double node) {
    const auto [fw, fp] = f(node);
    r.weighted += wk[i] * fw;
    r.plain += wk[i] * fp;
    if (i % 2 == 1) r.weighted_gauss += wg[i / 2] * fw;
  };
  add(0, mid);
  for (std::size_t i = 1; i < x.size(); ++i) {
    add(i, mid - half * x[i]);
    add(i, mid + half * x[i]);
  }
  r.weighted *= half;
  r.weighted_gauss *= half;
  r.plain *= half;
  return r;
}

// Angular mean of |ĥ|² on the circle of radius ρ (exact for radial h).
double power_on_circle(const TestFunction& h, double rho) {
  if (h.is_radial()) {
    const double v = h.radial_fourier(rho);
    return v * v;
  }
  if (rho == 0.0) return std::norm(h.fourier(0.0));
  auto mean = [&](int n) {
    CompensatedSum s;
    for (int j = 0; j < n; ++j) s += std::norm(h.fourier(std::polar(rho, 2.0 * kPi * j / n)));
    return s.value() / n;
  };
  int n = 32;
  double prev = mean(n);
  while (n < 2048) {
    n *= 2;
    const double next = mean(n);
    if (std::abs(next - prev) <= 1e-13 * std::max(next, 1e-300)) return next;
    prev = next;
  }
  return prev;
}

struct SpectralSpec {
  std::function<double(double)> weight;  // w(ρ)
  std::vector<double> breaks;
  double flat_from = kInf;  // w ≡ flat_value for ρ ≥ flat_from
  double flat_value = 0.0;
  double hard_stop = kInf;      // integrate only up to here
  double fine_width = kInf;     // panel width cap below flat_from
};

struct SpectralIntegral {
  double value = 0.0;
  double error = 0.0;
};

// ∫_0^∞ |ĥ|² w(ρ) 2πρ dρ with Gauss–Kronrod panels. The walk stops when the
// contributions become negligible; otherwise, at the cap, the remainder is
// closed with Plancherel (‖h‖² minus the accumulated ∫|ĥ|²).
SpectralIntegral spectral_integral(const TestFunction& h, const SpectralSpec& spec) {
  const double a_h = h.support_radius();
  const double coarse = 0.5 / a_h;
  // Once the weight is flat the remainder is closed through Plancherel.
  const double cap =
      std::min(spec.hard_stop, std::isfinite(spec.flat_from) ? spec.flat_from : 64.0 / a_h);
  std::vector<double> breaks = spec.breaks;
  if (std::isfinite(spec.flat_from)) breaks.push_back(spec.flat_from);
  if (std::isfinite(spec.hard_stop)) breaks.push_back(spec.hard_stop);
  breaks.push_back(cap);
  std::sort(breaks.begin(), breaks.end());

  CompensatedSum total, plancherel;
  double err = 0.0;
  double rho = 0.0;
  int quiet = 0;
  std::size_t next_break = 0;
  const double min_extent = 8.0 / a_h;
  while (rho < cap) {
    double width = rho < spec.flat_from ? std::min(coarse, spec.fine_width) : coarse;
    while (next_break < breaks.size() && breaks[next_break] <= rho) ++next_break;
    double b = rho + width;
    if (next_break < breaks.size() && breaks[next_break] < b) b = breaks[next_break];
    const PanelResult p = gk21_panel(rho, b, [&](double r) {
      const double pw = power_on_circle(h, r) * 2.0 * kPi * r;
      const double w = r >= spec.flat_from ? spec.flat_value : spec.weight(r);
      return std::pair<double, double>{pw * w, pw};
    });
    total += p.weighted;
    plancherel += p.plain;
    err += std::abs(p.weighted - p.weighted_gauss);
    rho = b;
    if (b >= min_extent && std::abs(p.weighted) <= 1e-17 * std::abs(total.value()) &&
        p.plain <= 1e-17 * plancherel.value()) {
      if (++quiet >= 4) return {total.value(), err};
    } else {
      quiet = 0;
    }
  }
  if (rho >= spec.hard_stop) return {total.value(), err};
  const double l2 = h.l2_norm();
  const double rest = std::max(0.0, l2 * l2 - plancherel.value());
  const double w_tail = rho >= spec.flat_from ? spec.flat_value : spec.weight(rho);
  const double tail = w_tail * rest;
  // Outside the flat regime the tail weight is only an estimate; count it fully.
  if (!(rho >= spec.flat_from)) err += std::abs(tail);
  err += std::abs(w_tail) * 1e-13 * l2 * l2;
  return {total.value() + tail, err};
}

}  // namespace

double spectral_series(double x, double tol) {
  if (x < 0.0) throw std::domain_error("spectral_series: negative argument");
  if (x == 0.0) return zeta3();
  const double scale = std::max(1.0, x);
  const double K = std::ceil(std::max(3.0 * x, 40.0 * std::cbrt(scale) *
                                                   std::pow(1e-12 / std::max(tol, 1e-16), 1.0 / 6.0))) +
                   8.0;
  CompensatedSum s;
  const int kmax = static_cast<int>(K);
  for (int a = kmax; a >= 1; --a) {
    const double inv = 1.0 / a;
    s += inv * inv * inv * std::exp(-x * inv);
  }
  // Σ_{α>K} f(α) = ∫_K^∞ f − f(K)/2 − f'(K)/12 + f'''(K)/720 − …
  const double u = 1.0 / K;
  const double e = std::exp(-x * u);
  const double f0 = u * u * u * e;
  const double f1 = e * (x * std::pow(u, 5) - 3.0 * std::pow(u, 4));
  const double f3 = e * (x * x * x * std::pow(u, 9) - 15.0 * x * x * std::pow(u, 8) +
                         60.0 * x * std::pow(u, 7) - 60.0 * std::pow(u, 6));
  s += tail_integral(x, K) - 0.5 * f0 - f1 / 12.0 + f3 / 720.0;
  return s.value();
}

double spectral_density_M(double lambda_mag, double tol) {
  const double l = std::abs(lambda_mag);
  if (l == 0.0) return 0.0;
  // For |λ| ≥ 4 the relative deviation from 1/π is below e^{-2π^{3/2}|λ|} < 1e-19.
  if (l >= 4.0) return 1.0 / kPi;
  const double x = kPi * kPi * l * l;
  return x * x / kPi * spectral_series(x, tol);
}

double zeta3() {
  static const double z = zeta_series(3.0);
  return z;
}

double zeta3_2() {
  static const double z = zeta_series(1.5);
  return z;
}

VarianceValue variance_exact_detailed(const TestFunction& h, double R, double tol) {
  if (!(R > 0.0)) throw std::invalid_argument("variance_exact: R must be positive");
  SpectralSpec spec;
  spec.weight = [R](double rho) { return R * R * spectral_density_M(rho / R); };
  spec.breaks = {R};
  spec.flat_from = 4.0 * R;
  spec.flat_value = R * R / kPi;
  spec.fine_width = R / 4.0;
  const SpectralIntegral r = spectral_integral(h, spec);
  if (!(r.value > 0.0)) throw std::invalid_argument("variance_exact: h is identically zero");
  if (r.error > tol * r.value) {
    throw ToleranceError("variance_exact: error estimate above tolerance", r.error / r.value);
  }
  return {r.value, r.error};
}

double variance_exact(const TestFunction& h, double R, double tol) {
  return variance_exact_detailed(h, R, tol).value;
}

double two_sided_functional(const TestFunction& h, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("two_sided_functional: R must be positive");
  SpectralSpec spec;
  const double r2 = R * R;
  spec.weight = [r2](double rho) {
    const double q = rho * rho;
    return q * q / r2;
  };
  spec.flat_from = R;
  spec.flat_value = r2;
  spec.fine_width = R / 4.0;
  return spectral_integral(h, spec).value;
}

TwoSided variance_two_sided(const TestFunction& h, double R) {
  const double t = two_sided_functional(h, R);
  return {t, kMLowerRatio * t, kMUpperRatio * t};
}

double asymptotic_smooth(const TestFunction& h, double R) {
  const double lap = laplacian_l2_squared(h);
  if (!(lap > 0.0)) throw std::invalid_argument("asymptotic_smooth: Δh vanishes identically");
  return zeta3() * lap / (16.0 * kPi * R * R);
}

double asymptotic_indicator(double perimeter, double R) {
  return zeta3_2() * R * perimeter / (8.0 * std::pow(kPi, 1.5));
}

double potential_variance_exact(const TestFunction& g) {
  SpectralSpec spec;
  spec.weight = [](double rho) { return 0.25 * kPi * spectral_series(kPi * kPi * rho * rho); };
  return spectral_integral(g, spec).value;
}

double potential_variance_bound_constant() { return 0.25 * kPi * zeta3(); }

TestFunction scaled_laplacian_weight(const TestFunction& h, double R) {
  if (!h.is_radial() || !h.has_laplacian()) {
    throw std::invalid_argument("scaled_laplacian_weight: radial h with a Laplacian required");
  }
  TestFunction::RadialSpec s;
  s.name = "lap_weight(" + h.name() + ")";
  s.support = R * h.support_radius();
  for (double b : h.breaks()) s.breaks.push_back(R * b);
  for (double b : h.singular_points()) s.singular.push_back(R * b);
  const double c = 1.0 / (2.0 * kPi * R * R);
  s.profile = [h, R, c](double r) { return c * h.radial_laplacian(r / R); };
  s.fourier = [h, R](double rho) {
    return -2.0 * kPi * R * R * rho * rho * h.radial_fourier(R * rho);
  };
  return TestFunction::radial(std::move(s));
}

double smoothed_laplacian_lower_constant() {
  static const double c = [] {
    const TestFunction chi = default_cutoff_chi();
    double K = 0.0;
    // χ̂ decays faster than any power; beyond |μ| = 40 the product is negligible.
    for (int i = 0; i <= 8000; ++i) {
      const double mu = i * 0.005;
      const double v = chi.radial_fourier(mu);
      K = std::max(K, v * v * std::max(1.0, mu * mu * mu * mu));
    }
    return kMLowerRatio / (16.0 * std::pow(kPi, 4) * K);
  }();
  return c;
}

double smoothed_laplacian_l2_squared(const TestFunction& h, double R) {
  const TestFunction chi = default_cutoff_chi();
  SpectralSpec spec;
  spec.weight = [chi, R](double rho) {
    const double c = chi.radial_fourier(rho / R);
    const double q = rho * rho;
    return 16.0 * std::pow(kPi, 4) * q * q * c * c;
  };
  spec.fine_width = R / 4.0;
  spec.hard_stop = 60.0 * R;
  return spectral_integral(h, spec).value;
}

double sigma_lower_constant(const TestFunction& h) {
  SpectralSpec spec;
  spec.weight = [](double rho) { return std::pow(rho, 4); };
  spec.hard_stop = 1.0;
  spec.fine_width = 0.25;
  return std::sqrt(kMLowerRatio * spectral_integral(h, spec).value);
}

VarianceReport variance_report(const TestFunction& h, double R) {
  VarianceReport r;
  r.test_function = h.name();
  r.R = R;
  const VarianceValue v = variance_exact_detailed(h, R);
  r.exact = v.value;
  r.exact_error = v.error_estimate;
  const TwoSided b = variance_two_sided(h, R);
  r.lower_bound = b.lower;
  r.upper_bound = b.upper;
  if (h.has_laplacian()) {
    r.asymptotic_prediction = asymptotic_smooth(h, R);
  } else if (h.name() == "indicator") {
    r.asymptotic_prediction = asymptotic_indicator(2.0 * kPi, R);
  }
  return r;
}

nlohmann::ordered_json to_json(const VarianceReport& r) {
  nlohmann::ordered_json j;
  j["test_function"] = r.test_function;
  j["R"] = r.R;
  j["exact"] = r.exact;
  j["exact_error"] = r.exact_error;
  j["lower_bound"] = r.lower_bound;
  j["upper_bound"] = r.upper_bound;
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  j["asymptotic_prediction"] = opt(r.asymptotic_prediction);
  j["mc_estimate"] = opt(r.mc_estimate);
  j["mc_standard_error"] = opt(r.mc_standard_error);
  return j;
}

void write_variance_csv_header(std::ostream& out) {
  out << "name,R,exact,lower,upper,asymptotic,mc,mc_se\r\n";
}

void write_variance_csv_row(std::ostream& out, const VarianceReport& r) {
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", *v);
    return std::string(buf);
  };
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g", r.R, r.exact, r.lower_bound,
                r.upper_bound);
  out << r.test_function << ',' << buf << ',' << opt(r.asymptotic_prediction) << ','
      << opt(r.mc_estimate) << ',' << opt(r.mc_standard_error) << "\r\n";
}

}  // namespace gefz
