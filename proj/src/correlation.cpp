#include "gefz/correlation.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/laguerre.hpp>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "gefz/numeric.hpp"

namespace gefz {

double laguerre_coefficient(int alpha) {
  if (alpha < 0) throw std::invalid_argument("laguerre_coefficient: negative index");
  if (alpha == 0) return kLogModulusMean;
  const double v = 1.0 / (2.0 * alpha);
  return alpha % 2 == 1 ? v : -v;
}

double laguerre_coefficient_oracle(int alpha) {
  if (alpha < 0) throw std::invalid_argument("laguerre_coefficient_oracle: negative index");
  const double sign = alpha % 2 == 0 ? 1.0 : -1.0;
  auto f = [alpha, sign](double t) {
    if (t <= 0.0 || t > 800.0) return 0.0;  // e^{-t} underflows beyond 800
    return 0.5 * std::log(t) * sign * boost::math::laguerre(static_cast<unsigned>(alpha), t) *
           std::exp(-t);
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  boost::math::quadrature::exp_sinh<double> es;
  double e1 = 0.0, e2 = 0.0, l1 = 0.0, l2 = 0.0;
  // Split at 1: the log singularity sits in the finite piece.
  const double a = ts.integrate(f, 0.0, 1.0, 1e-14, &e1, &l1);
  const double b = es.integrate(f, 1.0, std::numeric_limits<double>::infinity(), 1e-14, &e2, &l2);
  const double err = e1 * std::max(1.0, l1) + e2 * std::max(1.0, l2);
  if (!(err < 1e-10)) throw ToleranceError("laguerre_coefficient_oracle: quadrature", err);
  return a + b;
}

double log_modulus_covariance(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::domain_error("log_modulus_covariance: rho outside [0, 1]");
  }
  if (rho == 0.0) return 0.0;
  const double x = rho * rho;
  // Geometric series while it converges fast, reflection formula otherwise.
  if (x <= 0.5) return log_modulus_covariance_series(rho);
  return 0.25 * dilog(x);
}

double log_modulus_covariance_series(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::domain_error("log_modulus_covariance_series: rho outside [0, 1]");
  }
  const double x = rho * rho;
  if (x == 0.0) return 0.0;
  CompensatedSum s;
  double p = 1.0;
  if (x == 1.0) {
    // Σ_{k≤N} 1/k² plus the Euler–Maclaurin tail Σ_{k>N} = 1/N − 1/(2N²) + 1/(6N³) − 1/(30N⁵).
    constexpr int kN = 1000;
    for (int k = kN; k >= 1; --k) s += 1.0 / (static_cast<double>(k) * k);
    const double n = kN;
    s += 1.0 / n - 0.5 / (n * n) + 1.0 / (6.0 * n * n * n) - 1.0 / (30.0 * std::pow(n, 5));
    return 0.25 * s.value();
  }
  for (int a = 1;; ++a) {
    p *= x;
    s += p / (static_cast<double>(a) * a);
    // Σ_{k>a} x^k/k² ≤ x^{a+1}/((a+1)²(1-x))
    if (p * x / ((a + 1.0) * (a + 1.0) * (1.0 - x)) < 1e-17 * s.value()) break;
  }
  return 0.25 * s.value();
}

namespace {

constexpr std::array<double, 16> kNumeratorSeries = {
    0.0,
    0.0,
    0.0,
    -16.0,
    16.0,
    -8.0,
    26.0 / 9.0,
    -38.0 / 45.0,
    19.0 / 90.0,
    -44.0 / 945.0,
    349.0 / 37800.0,
    -1.0 / 600.0,
    47.0 / 170100.0,
    -317.0 / 7484400.0,
    23.0 / 3810240.0,
    -3649.0 / 4540536000.0,
};

}  // namespace

PairCorrelation pair_correlation_smooth(double r, double /*tol*/) {
  if (!(r > 0.0)) throw std::domain_error("pair_correlation_smooth: r must be positive");
  const double s = r * r;
  const double q = std::exp(-s);
  const double E = -std::expm1(-s);  // 1 - q
  // Σα²q^α, Σαq^α, Σq^α in closed form:
  // 16π² d = 16 s² q(1+q)/E³ − 64 s q/E² + 32 q/E = q N(s)/E³.
  double numerator;
  if (r < 0.3) {
    CompensatedSum n;
    double p = 1.0;
    for (double c : kNumeratorSeries) {
      n += c * p;
      p *= s;
    }
    numerator = n.value();
  } else {
    CompensatedSum n;
    n += 16.0 * s * s * (1.0 + q);
    n += -64.0 * s * E;
    n += 32.0 * E * E;
    numerator = n.value();
  }
  const double d = q * numerator / (E * E * E) / (16.0 * kPi * kPi);
  return {r, d, 1.0 / (kPi * kPi) + d};
}

double pair_correlation_series(double r, double tol) {
  if (!(r > 0.0)) throw std::domain_error("pair_correlation_series: r must be positive");
  const double s = r * r;
  CompensatedSum sum;
  double scale = 0.0;
  for (int a = 1; a < 100'000'000; ++a) {
    const double al = a;
    const double e = std::exp(-al * s);
    const double t = (16.0 * al * al * s * s - 64.0 * al * s + 32.0) * e;
    sum += t;
    scale = std::max(scale, std::abs(t));
    // Beyond α > 4/s every term has the sign of its leading part and the
    // magnitudes decay geometrically with ratio ≤ e^{-s}(1+1/α)².
    if (al * s > 8.0) {
      const double ratio = std::exp(-s) * (1.0 + 1.0 / al) * (1.0 + 1.0 / al);
      if (ratio < 1.0 && std::abs(t) * ratio / (1.0 - ratio) < tol * scale) break;
    }
  }
  return sum.value() / (16.0 * kPi * kPi);
}

double radial_autocorrelation(const TestFunction& h, double t) {
  if (!h.is_radial()) throw std::invalid_argument("radial_autocorrelation: radial h required");
  const double a = h.support_radius();
  if (t >= 2.0 * a) return 0.0;
  const std::vector<QuadNode> rr = radial_rule(h, 8);
  CompensatedSum outer;
  for (const auto& n : rr) {
    const double r = n.x;
    const double hr = h.profile(r);
    if (hr == 0.0) continue;
    double inner;
    if (t == 0.0 || r == 0.0) {
      inner = 2.0 * kPi * h.profile(std::hypot(r, t));
    } else {
      // Kinks in φ where |x + t| crosses a break of h.
      std::vector<double> phi_breaks;
      for (double b : h.breaks()) {
        const double c = (b * b - r * r - t * t) / (2.0 * r * t);
        if (c > -1.0 && c < 1.0) phi_breaks.push_back(std::acos(c));
      }
      const std::vector<QuadNode> pr = graded_rule(0.0, kPi, phi_breaks, phi_breaks, 2, 2, 6);
      CompensatedSum s;
      for (const auto& m : pr) {
        const double d2 = std::max(0.0, r * r + t * t + 2.0 * r * t * std::cos(m.x));
        s += m.w * h.profile(std::sqrt(d2));
      }
      inner = 2.0 * s.value();
    }
    outer += n.w * r * hr * inner;
  }
  return outer.value();
}

double variance_from_pair_measure(const TestFunction& h, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("variance_from_pair_measure: R must be positive");
  const double l2 = h.l2_norm();
  const double atom = kDiagonalAtom * R * R * l2 * l2;
  // d(r) is below 1e-18 of its peak once r > 7.
  constexpr double kReach = 7.0;
  auto d_of = [](double r) { return r > 0.0 ? pair_correlation_smooth(r).smooth_density : -1.0 / (kPi * kPi); };

  if (h.is_radial()) {
    const double a = h.support_radius();
    const double tmax = std::min(2.0 * a, kReach / R);
    std::vector<double> breaks;
    for (double b : h.breaks())
      if (2.0 * b < tmax) breaks.push_back(2.0 * b);
    const int ppu = std::max(8, static_cast<int>(std::ceil(4.0 * R)));
    const std::vector<QuadNode> tr = graded_rule(0.0, tmax, breaks, {}, ppu, 4);
    CompensatedSum s;
    for (const auto& n : tr) {
      s += n.w * 2.0 * kPi * n.x * d_of(R * n.x) * radial_autocorrelation(h, n.x);
    }
    return atom + std::pow(R, 4) * s.value();
  }

  // General h: direct double sum over a polar product rule of the support disk.
  const double a = h.support_radius();
  const int nr_panels = std::max(2, static_cast<int>(std::ceil(0.5 * R * a)));
  const std::vector<QuadNode> rr = gauss_legendre_panels(0.0, a, nr_panels);
  // Arc spacing on the outer circle stays below min(1/4, 1/(2R)).
  const int nth = std::max(32, static_cast<int>(std::ceil(2.0 * kPi * a / std::min(0.25, 0.5 / R))));
  struct Pt {
    cplx x;
    double wh;
  };
  std::vector<Pt> pts;
  for (const auto& n : rr) {
    for (int j = 0; j < nth; ++j) {
      const cplx x = std::polar(n.x, 2.0 * kPi * j / nth);
      const double v = h(x);
      if (v != 0.0) pts.push_back({x, v * n.w * n.x * 2.0 * kPi / nth});
    }
  }
  CompensatedSum s;
  for (const auto& p : pts) {
    double row = 0.0;
    for (const auto& q : pts) {
      const double dist = R * std::abs(p.x - q.x);
      if (dist < kReach) row += q.wh * d_of(dist);
    }
    s += p.wh * row;
  }
  return atom + std::pow(R, 4) * s.value();
}

double scaled_bessel_i0(double x) {
  if (x < 0.0) throw std::domain_error("scaled_bessel_i0: negative argument");
  if (x < 40.0) return std::exp(-x) * boost::math::cyl_bessel_i(0, x);
  // Asymptotic series Σ ((2k-1)!!)² / (k! (8x)^k), stopped at the smallest term.
  CompensatedSum s;
  double term = 1.0;
  for (int k = 1; k < 30; ++k) {
    s += term;
    const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (k * 8.0 * x);
    if (std::abs(next) < 1e-17 || std::abs(next) > std::abs(term)) break;
    term = next;
  }
  return s.value() / std::sqrt(2.0 * kPi * x);
}

double circle_term_variance(double R) {
  if (!(R > 0.0)) throw std::invalid_argument("circle_term_variance: R must be positive");
  const double r2 = R * R;
  constexpr int kTerms = 20000;
  CompensatedSum s;
  for (int a = kTerms; a >= 1; --a) {
    s += scaled_bessel_i0(2.0 * a * r2) / (static_cast<double>(a) * a);
  }
  // Tail Σ_{α>N} α^{-2}(4παR²)^{-1/2}(1 + 1/(16αR²)), summed as an integral
  // with the endpoint correction.
  const double n = kTerms;
  const double c = 1.0 / std::sqrt(4.0 * kPi * r2);
  const double integral = c * (2.0 / 3.0 * std::pow(n, -1.5) + std::pow(n, -2.5) / (16.0 * r2 * 2.5));
  const double f_n = c * std::pow(n, -2.5) * (1.0 + 1.0 / (16.0 * n * r2));
  s += integral - 0.5 * f_n;
  return 0.25 * s.value();
}

void write_pair_correlation_csv(std::ostream& out, std::span<const double> radii) {
  out << "r,d,with_intensity\r\n";
  for (double r : radii) {
    const PairCorrelation p = pair_correlation_smooth(r);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\r\n", p.radius, p.smooth_density,
                  p.with_intensity);
    out << buf;
  }
}

}  // namespace gefz
