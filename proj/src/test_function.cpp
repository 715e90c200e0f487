#include "gefz/test_function.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <sstream>

namespace gefz {

struct TestFunction::Impl {
  std::string name;
  bool radial = true;
  double support = 1.0;
  std::optional<double> holder;

  std::function<double(double)> profile;
  std::function<double(double)> radial_fourier;
  std::function<double(double)> radial_laplacian;
  std::vector<double> breaks;
  std::vector<double> singular;

  std::function<double(cplx)> eval2d;
  std::function<cplx(cplx)> fourier2d;

  std::optional<double> l1;
  std::optional<double> l2;

  mutable std::once_flag norms_once;
  mutable double l1_cache = 0.0;
  mutable double l2_cache = 0.0;

  // 2π f(r) r w at the nodes of the radial rule, keyed by panels-per-unit.
  mutable std::mutex table_mutex;
  mutable std::map<int, std::shared_ptr<const std::vector<QuadNode>>> hankel_tables;
};

namespace {

using Impl = TestFunction::Impl;

double bessel_j0(double x) { return ::j0(x); }
double bessel_j1(double x) { return ::j1(x); }

// J1(2πx)/x, with its limit π at 0.
double j1_ratio(double x) {
  if (std::abs(x) < 1e-8) return kPi;
  return bessel_j1(2.0 * kPi * x) / x;
}

std::vector<QuadNode> rule_for(const Impl& im, int panels_per_unit) {
  return graded_rule(0.0, im.support, im.breaks, im.singular, panels_per_unit);
}

std::shared_ptr<const std::vector<QuadNode>> hankel_table(const Impl& im, int ppu) {
  std::lock_guard lock(im.table_mutex);
  auto it = im.hankel_tables.find(ppu);
  if (it != im.hankel_tables.end()) return it->second;
  auto nodes = rule_for(im, ppu);
  for (auto& n : nodes) n.w *= 2.0 * kPi * im.profile(n.x) * n.x;
  auto ptr = std::make_shared<const std::vector<QuadNode>>(std::move(nodes));
  im.hankel_tables.emplace(ppu, ptr);
  return ptr;
}

// At least 128 panels over the support, and enough per unit length that a
// panel never spans more than half a period of J0(2πρr).
int hankel_ppu(const Impl& im, double rho, int refine) {
  const int base = std::max(static_cast<int>(std::ceil(128.0 / im.support)),
                            static_cast<int>(std::ceil(8.0 + 2.0 * rho)));
  return static_cast<int>(std::bit_ceil(static_cast<unsigned>(base))) * refine;
}

double hankel(const Impl& im, double rho, int refine) {
  const auto table = hankel_table(im, hankel_ppu(im, rho, refine));
  CompensatedSum s;
  const double k = 2.0 * kPi * rho;
  for (const auto& n : *table) s += n.w * bessel_j0(k * n.x);
  return s.value();
}

cplx planar_fourier_numeric(const Impl& im, cplx lambda, int refine) {
  const double a = im.support;
  const int panels = refine * std::max(8, static_cast<int>(std::ceil(2.0 * a * (2.0 + 2.0 * std::abs(lambda)))));
  const auto nodes = gauss_legendre_panels(-a, a, panels);
  cplx total{0.0, 0.0};
  for (const auto& ny : nodes) {
    cplx row{0.0, 0.0};
    for (const auto& nx : nodes) {
      const cplx x{nx.x, ny.x};
      const double v = im.eval2d(x);
      if (v == 0.0) continue;
      const double phase = -2.0 * kPi * (lambda.real() * x.real() + lambda.imag() * x.imag());
      row += nx.w * v * std::polar(1.0, phase);
    }
    total += ny.w * row;
  }
  return total;
}

double evaluate_impl(const Impl& im, cplx x) {
  if (im.radial) {
    const double r = std::abs(x);
    return r > im.support ? 0.0 : im.profile(r);
  }
  if (std::abs(x) > im.support) return 0.0;
  return im.eval2d(x);
}

void compute_norms(const Impl& im) {
  if (im.l1 && im.l2) {
    im.l1_cache = *im.l1;
    im.l2_cache = *im.l2;
    return;
  }
  CompensatedSum s1, s2;
  if (im.radial) {
    for (const auto& n : rule_for(im, std::max(32, static_cast<int>(std::ceil(256.0 / im.support))))) {
      const double f = im.profile(n.x);
      s1 += 2.0 * kPi * n.x * n.w * std::abs(f);
      s2 += 2.0 * kPi * n.x * n.w * f * f;
    }
  } else {
    const double a = im.support;
    const auto nodes = gauss_legendre_panels(-a, a, std::max(16, static_cast<int>(std::ceil(16 * a))));
    for (const auto& ny : nodes) {
      for (const auto& nx : nodes) {
        const double f = evaluate_impl(im, {nx.x, ny.x});
        s1 += nx.w * ny.w * std::abs(f);
        s2 += nx.w * ny.w * f * f;
      }
    }
  }
  im.l1_cache = im.l1.value_or(s1.value());
  im.l2_cache = im.l2.value_or(std::sqrt(s2.value()));
}

const Impl& require_radial(const std::shared_ptr<const Impl>& p) {
  if (!p->radial) throw std::logic_error("radial accessor used on a planar test function");
  return *p;
}

// ---- radial convolution -------------------------------------------------

struct RadialKernel {
  std::function<double(double)> k;
  double support;
  std::vector<double> breaks;
  std::vector<double> singular;
};

bool contains(const std::vector<double>& v, double x) {
  return std::any_of(v.begin(), v.end(), [&](double y) { return std::abs(x - y) < 1e-14; });
}

// (h * K)(x) at |x| = ρ for radial h and radial K.
//   ∫_0^κ K(t) t ∫_0^{2π} f(|x - t e^{iφ}|) dφ dt
// The inner integrand has kinks or singularities where the circle of radius t
// crosses a break circle of h; the outer integrand is non-smooth where the two
// circles become tangent (t = |ρ - b| or t = ρ + b).
double radial_convolve(const Impl& h, const RadialKernel& K, double rho) {
  const double a = h.support;
  const double kappa = K.support;
  if (rho >= a + kappa) return 0.0;

  std::vector<double> circles = h.breaks;
  circles.push_back(0.0);
  circles.push_back(a);
  std::sort(circles.begin(), circles.end());
  circles.erase(std::unique(circles.begin(), circles.end()), circles.end());

  std::vector<double> t_breaks = K.breaks;
  std::vector<double> t_sing = K.singular;
  for (double b : circles) {
    for (double t : {std::abs(rho - b), rho + b}) {
      if (t > 0.0 && t < kappa) {
        t_breaks.push_back(t);
        t_sing.push_back(t);
      }
    }
  }
  const int t_ppu = std::max(1, static_cast<int>(std::ceil(4.0 / kappa)));
  const auto t_rule = graded_rule(0.0, kappa, t_breaks, t_sing, t_ppu, 4, 5);

  auto f = [&](double r) { return r > a ? 0.0 : h.profile(r); };
  const bool origin_singular = contains(h.singular, 0.0);

  CompensatedSum total;
  for (const auto& tn : t_rule) {
    const double t = tn.x;
    const double kt = K.k(t);
    if (kt == 0.0) continue;
    double inner = 0.0;
    if (rho == 0.0) {
      inner = 2.0 * kPi * f(t);
    } else {
      std::vector<double> phi_breaks;
      std::vector<double> phi_sing;
      for (double b : circles) {
        const double c = (rho * rho + t * t - b * b) / (2.0 * rho * t);
        if (c > -1.0 && c < 1.0) {
          const double phi = std::acos(c);
          phi_breaks.push_back(phi);
          if (contains(h.singular, b)) phi_sing.push_back(phi);
        }
      }
      if (origin_singular && std::abs(rho - t) < 0.25 * rho) phi_sing.push_back(0.0);
      const auto phi_rule = graded_rule(0.0, kPi, phi_breaks, phi_sing, 2, 6, 8);
      double s = 0.0;
      for (const auto& pn : phi_rule) {
        const double d2 = rho * rho + t * t - 2.0 * rho * t * std::cos(pn.x);
        s += pn.w * f(std::sqrt(std::max(0.0, d2)));
      }
      inner = 2.0 * s;
    }
    total += tn.w * kt * t * inner;
  }
  return total.value();
}

// (h * K)(x) for general h: polar quadrature over the kernel's disk.
double planar_convolve(const TestFunction& h, const RadialKernel& K, cplx x) {
  const auto t_rule = graded_rule(0.0, K.support, K.breaks, K.singular,
                                  std::max(1, static_cast<int>(std::ceil(4.0 / K.support))), 4, 6);
  const auto phi_rule = gauss_legendre_panels(0.0, 2.0 * kPi, 8);
  CompensatedSum total;
  for (const auto& tn : t_rule) {
    const double kt = K.k(tn.x);
    if (kt == 0.0) continue;
    double s = 0.0;
    for (const auto& pn : phi_rule) s += pn.w * h.evaluate(x - std::polar(tn.x, pn.x));
    total += tn.w * kt * tn.x * s;
  }
  return total.value();
}

std::vector<double> shifted_breaks(const Impl& h, double kappa) {
  std::vector<double> out;
  std::vector<double> circles = h.breaks;
  circles.push_back(h.support);
  for (double b : circles) {
    for (double v : {b - kappa, b + kappa}) {
      if (v > 0.0 && v < h.support + kappa) out.push_back(v);
    }
  }
  return out;
}

TestFunction convolve(const TestFunction& h, const std::shared_ptr<const Impl>& hi,
                      const RadialKernel& K, std::function<double(double)> kernel_fourier,
                      std::string name) {
  if (h.is_radial()) {
    TestFunction::RadialSpec spec;
    spec.name = std::move(name);
    spec.support = hi->support + K.support;
    spec.breaks = shifted_breaks(*hi, K.support);
    spec.holder_exponent = hi->holder;
    auto hp = hi;
    auto kernel = K;
    spec.profile = [hp, kernel](double r) { return radial_convolve(*hp, kernel, r); };
    spec.fourier = [h, kernel_fourier](double rho) {
      return h.radial_fourier(rho) * kernel_fourier(rho);
    };
    return TestFunction::radial(std::move(spec));
  }
  TestFunction::PlanarSpec spec;
  spec.name = std::move(name);
  spec.support = hi->support + K.support;
  spec.holder_exponent = hi->holder;
  auto kernel = K;
  spec.evaluate = [h, kernel](cplx x) { return planar_convolve(h, kernel, x); };
  spec.fourier = [h, kernel_fourier](cplx lambda) {
    return h.fourier(lambda) * kernel_fourier(std::abs(lambda));
  };
  return TestFunction::planar(std::move(spec));
}

// Density of φ_ε * φ_ε: the area of the lens of two ε-discs at distance t,
// divided by (πε²)².
RadialKernel double_disc_kernel(double eps) {
  RadialKernel K;
  K.support = 2.0 * eps;
  K.singular = {2.0 * eps};
  K.k = [eps](double t) {
    if (t >= 2.0 * eps) return 0.0;
    const double lens =
        2.0 * eps * eps * std::acos(t / (2.0 * eps)) - 0.5 * t * std::sqrt(4.0 * eps * eps - t * t);
    return lens / (kPi * kPi * eps * eps * eps * eps);
  };
  return K;
}

double smooth_bump_profile(double r) {
  if (r >= 1.0) return 0.0;
  const double s = r * r;
  return std::exp(1.0 - 1.0 / (1.0 - s));
}

double smooth_bump_laplacian(double r) {
  if (r >= 1.0) return 0.0;
  const double s = r * r;
  const double u = 1.0 - s;
  const double g = std::exp(1.0 - 1.0 / u);
  return 4.0 * g * (s / (u * u * u * u) - 2.0 * s / (u * u * u) - 1.0 / (u * u));
}

// S(s) = 35s⁴ - 84s⁵ + 70s⁶ - 20s⁷ and its first two derivatives.
struct Smoothstep {
  double v, d1, d2;
};
Smoothstep smoothstep(double s) {
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s;
  const double u = 1.0 - s;
  return {s4 * (35.0 - 84.0 * s + 70.0 * s2 - 20.0 * s3), 140.0 * s3 * u * u * u,
          420.0 * s2 * u * u * (1.0 - 2.0 * s)};
}

struct PsiDerivs {
  double v, d1, d2;
};
PsiDerivs psi_derivs(double r) {
  if (r <= 1.0) return {1.0, 0.0, 0.0};
  if (r >= 2.0) return {0.0, 0.0, 0.0};
  const double s = (r * r - 1.0) / 3.0;
  const double ds = 2.0 * r / 3.0;
  const Smoothstep S = smoothstep(s);
  return {1.0 - S.v, -S.d1 * ds, -S.d2 * ds * ds - S.d1 * (2.0 / 3.0)};
}

}  // namespace

// ---- TestFunction ---------------------------------------------------------

TestFunction TestFunction::radial(RadialSpec spec) {
  if (!spec.profile) throw std::invalid_argument("radial test function needs a profile");
  if (!(spec.support > 0.0)) throw std::invalid_argument("support radius must be positive");
  auto im = std::make_shared<Impl>();
  im->name = std::move(spec.name);
  im->radial = true;
  im->support = spec.support;
  im->holder = spec.holder_exponent;
  im->profile = std::move(spec.profile);
  im->radial_fourier = std::move(spec.fourier);
  im->radial_laplacian = std::move(spec.laplacian);
  for (double b : spec.breaks)
    if (b >= 0.0 && b <= spec.support) im->breaks.push_back(b);
  im->singular = std::move(spec.singular);
  im->l1 = spec.l1_norm;
  im->l2 = spec.l2_norm;
  return TestFunction(std::move(im));
}

TestFunction TestFunction::planar(PlanarSpec spec) {
  if (!spec.evaluate) throw std::invalid_argument("planar test function needs an evaluator");
  if (!(spec.support > 0.0)) throw std::invalid_argument("support radius must be positive");
  auto im = std::make_shared<Impl>();
  im->name = std::move(spec.name);
  im->radial = false;
  im->support = spec.support;
  im->holder = spec.holder_exponent;
  im->eval2d = std::move(spec.evaluate);
  im->fourier2d = std::move(spec.fourier);
  im->l1 = spec.l1_norm;
  im->l2 = spec.l2_norm;
  return TestFunction(std::move(im));
}

const std::string& TestFunction::name() const { return impl_->name; }
bool TestFunction::is_radial() const { return impl_->radial; }
double TestFunction::support_radius() const { return impl_->support; }
std::optional<double> TestFunction::holder_exponent() const { return impl_->holder; }

double TestFunction::l1_norm() const {
  std::call_once(impl_->norms_once, [this] { compute_norms(*impl_); });
  return impl_->l1_cache;
}

double TestFunction::l2_norm() const {
  std::call_once(impl_->norms_once, [this] { compute_norms(*impl_); });
  return impl_->l2_cache;
}

bool TestFunction::fourier_closed_form() const {
  return impl_->radial ? static_cast<bool>(impl_->radial_fourier)
                       : static_cast<bool>(impl_->fourier2d);
}

bool TestFunction::has_laplacian() const {
  return impl_->radial && static_cast<bool>(impl_->radial_laplacian);
}

double TestFunction::evaluate(cplx x) const { return evaluate_impl(*impl_, x); }

cplx TestFunction::fourier(cplx lambda) const {
  if (impl_->radial) return radial_fourier(std::abs(lambda));
  if (impl_->fourier2d) return impl_->fourier2d(lambda);
  return planar_fourier_numeric(*impl_, lambda, 1);
}

double TestFunction::laplacian(cplx x) const { return radial_laplacian(std::abs(x)); }

double TestFunction::profile(double r) const {
  const Impl& im = require_radial(impl_);
  return r > im.support ? 0.0 : im.profile(r);
}

double TestFunction::radial_fourier(double rho) const {
  const Impl& im = require_radial(impl_);
  rho = std::abs(rho);
  if (im.radial_fourier) return im.radial_fourier(rho);
  return hankel(im, rho, 1);
}

double TestFunction::radial_laplacian(double r) const {
  const Impl& im = require_radial(impl_);
  if (!im.radial_laplacian) throw std::logic_error(im.name + ": no closed-form Laplacian");
  return r > im.support ? 0.0 : im.radial_laplacian(r);
}

std::span<const double> TestFunction::breaks() const { return require_radial(impl_).breaks; }
std::span<const double> TestFunction::singular_points() const {
  return require_radial(impl_).singular;
}

double TestFunction::integral() const {
  const Impl& im = *impl_;
  CompensatedSum s;
  if (im.radial) {
    for (const auto& n : radial_rule(*this, std::max(32, static_cast<int>(std::ceil(256.0 / im.support))))) {
      s += 2.0 * kPi * n.x * n.w * im.profile(n.x);
    }
  } else if (im.fourier2d) {
    return im.fourier2d(cplx{}).real();
  } else {
    const double a = im.support;
    const auto nodes = gauss_legendre_panels(-a, a, std::max(16, static_cast<int>(std::ceil(16 * a))));
    for (const auto& ny : nodes)
      for (const auto& nx : nodes) s += nx.w * ny.w * evaluate_impl(im, {nx.x, ny.x});
  }
  return s.value();
}

std::vector<QuadNode> radial_rule(const TestFunction& h, int panels_per_unit) {
  return graded_rule(0.0, h.support_radius(), h.breaks(), h.singular_points(), panels_per_unit);
}

// ---- catalog ----------------------------------------------------------------

double cutoff_psi(double r) { return psi_derivs(r).v; }

TestFunction indicator_disk() {
  TestFunction::RadialSpec s;
  s.name = "indicator";
  s.profile = [](double r) { return r <= 1.0 ? 1.0 : 0.0; };
  s.support = 1.0;
  s.breaks = {1.0};
  s.fourier = j1_ratio;
  s.l1_norm = kPi;
  s.l2_norm = std::sqrt(kPi);
  return TestFunction::radial(std::move(s));
}

TestFunction gaussian_bump() {
  constexpr double kCut = 5.0;
  TestFunction::RadialSpec s;
  s.name = "gaussian";
  s.profile = [](double r) { return std::exp(-r * r); };
  s.support = kCut;
  s.holder_exponent = 2.0;
  s.fourier = [](double rho) { return kPi * std::exp(-kPi * kPi * rho * rho); };
  s.laplacian = [](double r) { return (4.0 * r * r - 4.0) * std::exp(-r * r); };
  s.l1_norm = kPi * -std::expm1(-kCut * kCut);
  s.l2_norm = std::sqrt(0.5 * kPi * -std::expm1(-2.0 * kCut * kCut));
  return TestFunction::radial(std::move(s));
}

TestFunction cone(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("cone: exponent must be positive");
  TestFunction::RadialSpec s;
  s.name = "cone";
  s.profile = [alpha](double r) { return r >= 1.0 ? 0.0 : std::pow(1.0 - r, alpha); };
  s.support = 1.0;
  s.breaks = {1.0};
  if (alpha != std::floor(alpha)) s.singular = {1.0};
  s.holder_exponent = std::min(alpha, 1.0);
  s.l1_norm = 2.0 * kPi / ((alpha + 1.0) * (alpha + 2.0));
  s.l2_norm = std::sqrt(2.0 * kPi / ((2.0 * alpha + 1.0) * (2.0 * alpha + 2.0)));
  return TestFunction::radial(std::move(s));
}

TestFunction abnormal(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("abnormal: exponent must be positive");
  TestFunction::RadialSpec s;
  s.name = "abnormal";
  s.profile = [alpha](double r) { return r == 0.0 ? 0.0 : std::pow(r, alpha) * cutoff_psi(r); };
  s.support = 2.0;
  s.breaks = {1.0, 2.0};
  s.singular = {0.0};
  s.holder_exponent = alpha;
  s.laplacian = [alpha](double r) {
    if (r == 0.0) return alpha >= 2.0 ? (alpha == 2.0 ? 4.0 : 0.0) : std::numeric_limits<double>::infinity();
    const PsiDerivs p = psi_derivs(r);
    return alpha * alpha * std::pow(r, alpha - 2.0) * p.v +
           (2.0 * alpha + 1.0) * std::pow(r, alpha - 1.0) * p.d1 + std::pow(r, alpha) * p.d2;
  };
  return TestFunction::radial(std::move(s));
}

TestFunction log_minus() {
  TestFunction::RadialSpec s;
  s.name = "log_minus";
  s.profile = [](double r) {
    if (r == 0.0) return std::numeric_limits<double>::infinity();
    return r >= 1.0 ? 0.0 : -std::log(r);
  };
  s.support = 1.0;
  s.breaks = {1.0};
  s.singular = {0.0};
  // 2π ∫_0^1 (-log r) J0(kr) r dr = 2π (1 - J0(k))/k² with k = 2πρ.
  s.fourier = [](double rho) {
    const double k = 2.0 * kPi * rho;
    if (k < 1e-3) return 2.0 * kPi * (0.25 - k * k / 64.0);
    return 2.0 * kPi * (1.0 - bessel_j0(k)) / (k * k);
  };
  s.l1_norm = 0.5 * kPi;
  s.l2_norm = std::sqrt(0.5 * kPi);
  return TestFunction::radial(std::move(s));
}

TestFunction smooth_bump() {
  TestFunction::RadialSpec s;
  s.name = "smooth_bump";
  s.profile = smooth_bump_profile;
  s.support = 1.0;
  s.breaks = {1.0};
  s.holder_exponent = 2.0;
  s.laplacian = smooth_bump_laplacian;
  return TestFunction::radial(std::move(s));
}

TestFunction builtin(const std::string& name, double param) {
  if (name == "indicator") return indicator_disk();
  if (name == "gaussian") return gaussian_bump();
  if (name == "cone") return cone(param);
  if (name == "abnormal") return abnormal(param);
  if (name == "log_minus") return log_minus();
  if (name == "smooth_bump") return smooth_bump();
  throw UnknownTestFunction("unknown test function: " + name);
}

// ---- Fourier ----------------------------------------------------------------

FourierResult fourier_numeric(const TestFunction& h, cplx lambda) {
  const double tol = 1e-8 * (1.0 + h.l1_norm());
  auto at = [&](int refine) -> cplx {
    if (h.is_radial()) {
      const auto& p = h.impl();
      return hankel(*p, std::abs(lambda), refine);
    }
    const auto& p = h.impl();
    return planar_fourier_numeric(*p, lambda, refine);
  };
  cplx prev = at(1);
  double err = 0.0;
  for (int refine = 2; refine <= 8; refine *= 2) {
    const cplx next = at(refine);
    err = std::abs(next - prev);
    prev = next;
    if (err <= tol) return {prev, err};
  }
  throw ToleranceError(h.name() + ": numeric Fourier transform missed its tolerance", err);
}

// ---- smoothing and splitting ---------------------------------------------------

TestFunction mollify(const TestFunction& h, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("mollify: eps must be positive");
  const auto& hi = h.impl();
  auto multiplier = [eps](double rho) {
    const double u = kPi * eps * rho;
    if (u < 1e-6) return 1.0 - 0.25 * u * u;
    const double m = bessel_j1(2.0 * u) / u;
    return m * m;
  };
  std::ostringstream name;
  name << "mollify(" << h.name() << "," << eps << ")";
  return convolve(h, hi, double_disc_kernel(eps), multiplier, name.str());
}

TestFunction default_cutoff_chi() {
  static const double mass = [] {
    CompensatedSum s;
    const std::vector<double> none;
    for (const auto& n : graded_rule(0.0, 1.0, none, none, 256)) {
      s += 2.0 * kPi * n.x * n.w * smooth_bump_profile(n.x);
    }
    return s.value();
  }();
  TestFunction::RadialSpec s;
  s.name = "chi";
  s.profile = [](double r) { return smooth_bump_profile(r) / mass; };
  s.support = 1.0;
  s.breaks = {1.0};
  s.holder_exponent = 2.0;
  s.laplacian = [](double r) { return smooth_bump_laplacian(r) / mass; };
  s.l1_norm = 1.0;
  return TestFunction::radial(std::move(s));
}

double chi_flatness_constant(const TestFunction& chi) {
  if (!chi.is_radial()) throw std::invalid_argument("cut-off χ must be radial");
  const double c0 = chi.radial_fourier(0.0);
  if (std::abs(c0 - 1.0) > 1e-8) {
    throw std::invalid_argument("cut-off χ must have unit mass (χ̂(0) = 1)");
  }
  double ratios[3];
  const double lams[3] = {0.04, 0.02, 0.01};
  for (int i = 0; i < 3; ++i) {
    ratios[i] = std::abs(chi.radial_fourier(lams[i]) - c0) / (lams[i] * lams[i]);
  }
  const double spread = std::abs(ratios[0] - ratios[2]) / std::max(ratios[2], 1e-300);
  if (!(ratios[2] > 0.0) || spread > 0.05 || !std::isfinite(ratios[0])) {
    throw std::invalid_argument("cut-off χ fails the quadratic flatness check at the origin");
  }
  return ratios[2];
}

LowHighSplit low_high_split(const TestFunction& h, double R, const TestFunction& chi) {
  if (!(R > 0.0)) throw std::invalid_argument("low_high_split: R must be positive");
  chi_flatness_constant(chi);
  const auto& hi = h.impl();
  RadialKernel K;
  K.support = chi.support_radius() / R;
  K.k = [chi, R](double t) { return R * R * chi.profile(R * t); };
  auto chi_hat = [chi, R](double rho) { return chi.radial_fourier(rho / R); };
  std::ostringstream nm;
  nm << h.name() << "_L(R=" << R << ")";
  TestFunction low = convolve(h, hi, K, chi_hat, nm.str());

  std::ostringstream nh;
  nh << h.name() << "_H(R=" << R << ")";
  const double support = std::max(h.support_radius(), low.support_radius());
  if (h.is_radial()) {
    TestFunction::RadialSpec s;
    s.name = nh.str();
    s.support = support;
    s.holder_exponent = h.holder_exponent();
    s.breaks.assign(h.breaks().begin(), h.breaks().end());
    const auto lb = low.breaks();
    s.breaks.insert(s.breaks.end(), lb.begin(), lb.end());
    s.singular.assign(h.singular_points().begin(), h.singular_points().end());
    s.profile = [h, low](double r) { return h.profile(r) - low.profile(r); };
    s.fourier = [h, chi_hat](double rho) { return h.radial_fourier(rho) * (1.0 - chi_hat(rho)); };
    return {low, TestFunction::radial(std::move(s))};
  }
  TestFunction::PlanarSpec s;
  s.name = nh.str();
  s.support = support;
  s.holder_exponent = h.holder_exponent();
  s.evaluate = [h, low](cplx x) { return h.evaluate(x) - low.evaluate(x); };
  s.fourier = [h, chi_hat](cplx l) { return h.fourier(l) * (1.0 - chi_hat(std::abs(l))); };
  return {low, TestFunction::planar(std::move(s))};
}

TestFunction low_laplacian(const TestFunction& h, double R, const TestFunction& chi) {
  if (!chi.has_laplacian()) throw std::invalid_argument("cut-off χ needs a closed-form Laplacian");
  const auto& hi = h.impl();
  RadialKernel K;
  K.support = chi.support_radius() / R;
  const double r4 = R * R * R * R;
  K.k = [chi, R, r4](double t) { return r4 * chi.radial_laplacian(R * t); };
  auto mult = [chi, R](double rho) {
    const double l = 2.0 * kPi * rho;
    return -l * l * chi.radial_fourier(rho / R);
  };
  std::ostringstream nm;
  nm << "lap(" << h.name() << "_L(R=" << R << "))";
  return convolve(h, hi, K, mult, nm.str());
}

// ---- rigid motions ------------------------------------------------------------

TestFunction translated(const TestFunction& h, cplx shift) {
  TestFunction::PlanarSpec s;
  std::ostringstream nm;
  nm << h.name() << "+(" << shift.real() << "," << shift.imag() << ")";
  s.name = nm.str();
  s.support = h.support_radius() + std::abs(shift);
  s.holder_exponent = h.holder_exponent();
  s.evaluate = [h, shift](cplx x) { return h.evaluate(x - shift); };
  s.fourier = [h, shift](cplx l) {
    const double dot = l.real() * shift.real() + l.imag() * shift.imag();
    return h.fourier(l) * std::polar(1.0, -2.0 * kPi * dot);
  };
  s.l1_norm = h.l1_norm();
  s.l2_norm = h.l2_norm();
  return TestFunction::planar(std::move(s));
}

TestFunction rotated(const TestFunction& h, double theta) {
  TestFunction::PlanarSpec s;
  std::ostringstream nm;
  nm << h.name() << "@rot(" << theta << ")";
  s.name = nm.str();
  s.support = h.support_radius();
  s.holder_exponent = h.holder_exponent();
  const cplx back = std::polar(1.0, -theta);
  s.evaluate = [h, back](cplx x) { return h.evaluate(back * x); };
  s.fourier = [h, back](cplx l) { return h.fourier(back * l); };
  s.l1_norm = h.l1_norm();
  s.l2_norm = h.l2_norm();
  return TestFunction::planar(std::move(s));
}

// ---- sampled grids --------------------------------------------------------------

namespace {

double hat(double u) { return std::max(0.0, 1.0 - std::abs(u)); }

double sinc2(double u) {
  if (std::abs(u) < 1e-6) return 1.0 - u * u / 3.0;
  const double s = std::sin(u) / u;
  return s * s;
}

}  // namespace

TestFunction grid_function(std::string name, double step, cplx origin, int nx, int ny,
                           std::vector<double> values) {
  if (!(step > 0.0)) throw std::invalid_argument("grid: step must be positive");
  if (nx < 1 || ny < 1) throw std::invalid_argument("grid: size must be positive");
  if (values.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny)) {
    throw std::invalid_argument("grid: value count does not match size");
  }
  auto v = std::make_shared<const std::vector<double>>(std::move(values));
  const double x0 = origin.real() - step, x1 = origin.real() + nx * step;
  const double y0 = origin.imag() - step, y1 = origin.imag() + ny * step;
  double support = 0.0;
  for (double x : {x0, x1})
    for (double y : {y0, y1}) support = std::max(support, std::hypot(x, y));

  // l2 is exact (4-point Gauss per axis integrates the bilinear square);
  // l1 uses the same rule and is exact wherever the sign is constant on a cell.
  double l1 = 0.0, l2 = 0.0;
  {
    const auto& g = boost::math::quadrature::gauss<double, 4>::abscissa();
    const auto& gw = boost::math::quadrature::gauss<double, 4>::weights();
    std::vector<QuadNode> ref;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ref.push_back({0.5 - 0.5 * g[i], 0.5 * gw[i]});
      if (g[i] != 0.0) ref.push_back({0.5 + 0.5 * g[i], 0.5 * gw[i]});
    }
    auto at = [&](int i, int j) {
      if (i < 0 || j < 0 || i >= nx || j >= ny) return 0.0;
      return (*v)[static_cast<std::size_t>(j) * nx + i];
    };
    CompensatedSum s1, s2;
    for (int j = -1; j < ny; ++j) {
      for (int i = -1; i < nx; ++i) {
        const double a = at(i, j), b = at(i + 1, j), c = at(i, j + 1), d = at(i + 1, j + 1);
        if (a == 0.0 && b == 0.0 && c == 0.0 && d == 0.0) continue;
        for (const auto& qy : ref) {
          for (const auto& qx : ref) {
            const double f = a * (1 - qx.x) * (1 - qy.x) + b * qx.x * (1 - qy.x) +
                             c * (1 - qx.x) * qy.x + d * qx.x * qy.x;
            const double w = qx.w * qy.w * step * step;
            s1 += w * std::abs(f);
            s2 += w * f * f;
          }
        }
      }
    }
    l1 = s1.value();
    l2 = std::sqrt(s2.value());
  }

  TestFunction::PlanarSpec s;
  s.name = std::move(name);
  s.support = support;
  s.holder_exponent = 1.0;
  s.l1_norm = l1;
  s.l2_norm = l2;
  s.evaluate = [v, step, origin, nx, ny](cplx x) {
    const double u = (x.real() - origin.real()) / step;
    const double w = (x.imag() - origin.imag()) / step;
    const int i0 = static_cast<int>(std::floor(u));
    const int j0 = static_cast<int>(std::floor(w));
    double sum = 0.0;
    for (int j = j0; j <= j0 + 1; ++j) {
      if (j < 0 || j >= ny) continue;
      for (int i = i0; i <= i0 + 1; ++i) {
        if (i < 0 || i >= nx) continue;
        sum += (*v)[static_cast<std::size_t>(j) * nx + i] * hat(u - i) * hat(w - j);
      }
    }
    return sum;
  };
  s.fourier = [v, step, origin, nx, ny](cplx l) {
    cplx sum{0.0, 0.0};
    const cplx ex = std::polar(1.0, -2.0 * kPi * l.real() * step);
    const cplx ey = std::polar(1.0, -2.0 * kPi * l.imag() * step);
    cplx py = std::polar(1.0, -2.0 * kPi * (l.real() * origin.real() + l.imag() * origin.imag()));
    for (int j = 0; j < ny; ++j) {
      cplx p = py;
      for (int i = 0; i < nx; ++i) {
        sum += (*v)[static_cast<std::size_t>(j) * nx + i] * p;
        p *= ex;
      }
      py *= ey;
    }
    return sum * step * step * sinc2(kPi * l.real() * step) * sinc2(kPi * l.imag() * step);
  };
  return TestFunction::planar(std::move(s));
}

TestFunction load_grid_function(std::istream& in, const std::string& name) {
  std::string text, line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    text += line + '\n';
  }
  std::istringstream ts(text);
  std::string magic, key;
  int version = 0;
  if (!(ts >> magic >> version) || magic != "gefz-grid" || version != 1) {
    throw std::invalid_argument("grid file: expected header 'gefz-grid 1'");
  }
  double step = 0.0, ox = 0.0, oy = 0.0;
  int nx = 0, ny = 0;
  bool have_step = false, have_origin = false, have_size = false;
  while (!(have_step && have_origin && have_size)) {
    if (!(ts >> key)) throw std::invalid_argument("grid file: truncated header");
    if (key == "step" && (ts >> step)) {
      have_step = true;
    } else if (key == "origin" && (ts >> ox >> oy)) {
      have_origin = true;
    } else if (key == "size" && (ts >> nx >> ny)) {
      have_size = true;
    } else {
      throw std::invalid_argument("grid file: bad header field '" + key + "'");
    }
  }
  if (nx < 1 || ny < 1) throw std::invalid_argument("grid file: size must be positive");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(nx) * ny);
  double x;
  while (ts >> x) values.push_back(x);
  if (!ts.eof()) throw std::invalid_argument("grid file: non-numeric value");
  return grid_function(name, step, {ox, oy}, nx, ny, std::move(values));
}

double laplacian_l2_squared(const TestFunction& h) {
  if (h.has_laplacian()) {
    CompensatedSum s;
    for (const auto& n : radial_rule(h, std::max(64, static_cast<int>(std::ceil(512.0 / h.support_radius()))))) {
      const double d = h.radial_laplacian(n.x);
      s += 2.0 * kPi * n.x * n.w * d * d;
    }
    return s.value();
  }
  if (!h.is_radial()) throw std::invalid_argument("laplacian_l2_squared: radial h required");
  // 16π⁴ ∫ ρ⁴ |ĥ|² 2πρ dρ, extended until the integrand is negligible.
  CompensatedSum s;
  double last_panel = 1.0;
  const double scale = h.support_radius();
  for (int p = 0; p < 4000 && (p < 8 || last_panel > 1e-12 * std::abs(s.value())); ++p) {
    const double a = p / scale, b = (p + 1) / scale;
    double panel = 0.0;
    for (const auto& n : gauss_legendre_panels(a, b, 1)) {
      const double f = h.radial_fourier(n.x);
      panel += n.w * 2.0 * kPi * n.x * std::pow(n.x, 4) * f * f;
    }
    s += panel;
    last_panel = std::abs(panel);
  }
  return 16.0 * std::pow(kPi, 4) * s.value();
}

}  // namespace gefz
