#include <doctest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <sstream>

#include "gefz/numeric.hpp"
#include "gefz/test_function.hpp"

using namespace gefz;

namespace {

// ∫_{|x|<1} e^{-2πi⟨x,λ⟩} dA: Gauss rule in r, periodic trapezoid in θ.
cplx disk_transform_2d(cplx lambda) {
  auto inner = [&](double r) {
    cplx acc = 0.0;
    const int n = 128;
    for (int k = 0; k < n; ++k) {
      const cplx x = std::polar(r, 2.0 * kPi * k / n);
      acc += std::exp(cplx(0.0, -2.0 * kPi * (x.real() * lambda.real() + x.imag() * lambda.imag())));
    }
    return acc * (2.0 * kPi / n) * r;
  };
  const double re = boost::math::quadrature::gauss<double, 30>::integrate(
      [&](double r) { return inner(r).real(); }, 0.0, 1.0);
  const double im = boost::math::quadrature::gauss<double, 30>::integrate(
      [&](double r) { return inner(r).imag(); }, 0.0, 1.0);
  return {re, im};
}

// Hölder norm sup|h| + [h]_α of the cone (1-|x|)_+^α is 2.
constexpr double kConeHolderNorm = 2.0;

}  // namespace

TEST_CASE("indicator transform") {
  const TestFunction h = indicator_disk();
  CHECK(h.fourier(0.0).real() == doctest::Approx(kPi).epsilon(1e-14));
  const cplx lam = std::polar(1.0, 0.3);
  CHECK(std::abs(h.fourier(lam) - disk_transform_2d(lam)) < 1e-6);
  CHECK(std::abs(fourier_numeric(h, lam).value - h.fourier(lam)) < 1e-6);
}

TEST_CASE("Gaussian transform") {
  const TestFunction h = gaussian_bump();
  CHECK(h.fourier(1.0).real() == doctest::Approx(kPi * std::exp(-kPi * kPi)).epsilon(1e-12));
  CHECK(std::abs(fourier_numeric(h, cplx(0.6, 0.8)).value - kPi * std::exp(-kPi * kPi)) < 1e-8);
  CHECK(h.fourier(0.0).real() == doctest::Approx(h.integral()).epsilon(1e-10));
}

TEST_CASE("conjugate symmetry and translation phase") {
  const TestFunction h = translated(gaussian_bump(), cplx(0.3, -0.2));
  const cplx lam(0.7, 0.4);
  CHECK(std::abs(h.fourier(-lam) - std::conj(h.fourier(lam))) < 1e-12);
  CHECK(h.fourier(0.0).real() == doctest::Approx(kPi).epsilon(1e-10));
  CHECK(h.evaluate(cplx(0.3, -0.2)) == doctest::Approx(1.0));
}

TEST_CASE("built-in catalogue") {
  const TestFunction a = abnormal(0.5);
  REQUIRE(a.holder_exponent().has_value());
  CHECK(*a.holder_exponent() == 0.5);
  CHECK(a.support_radius() == 2.0);
  CHECK(a.evaluate(cplx(2.5, 0.0)) == 0.0);
  CHECK(a.evaluate(cplx(0.25, 0.0)) == doctest::Approx(0.5));
  CHECK(cutoff_psi(0.5) == 1.0);
  CHECK(cutoff_psi(2.0) == 0.0);
  CHECK(cutoff_psi(1.5) > 0.0);
  CHECK(cutoff_psi(1.5) < 1.0);
  CHECK(log_minus().evaluate(cplx(0.5, 0.0)) == doctest::Approx(std::log(2.0)));
  CHECK(log_minus().evaluate(cplx(1.5, 0.0)) == 0.0);
  CHECK(smooth_bump().evaluate(0.0) == doctest::Approx(1.0));
  CHECK(cone(0.6).evaluate(cplx(0.0, 0.5)) == doctest::Approx(std::pow(0.5, 0.6)));
  CHECK_THROWS_AS(builtin("nope"), UnknownTestFunction);
  for (const char* name : {"indicator", "gaussian", "cone", "abnormal", "log_minus", "smooth_bump"}) {
    const TestFunction h = builtin(name, 0.6);
    CHECK(h.fourier(0.0).real() == doctest::Approx(h.integral()).epsilon(1e-8));
  }
}

TEST_CASE("mollification") {
  const TestFunction h = indicator_disk();
  const TestFunction m = mollify(h, 0.05);
  CHECK(m.support_radius() == doctest::Approx(1.1));
  // Plateau: points at distance ≥ 2ε inside the disk are untouched.
  CHECK(m.evaluate(cplx(0.5, 0.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.integral() == doctest::Approx(h.integral()).epsilon(1e-8));

  // Frozen regression constant: the fitted value on this grid is about 0.175.
  constexpr double kMollifyConstant = 0.2;
  const TestFunction c = cone(0.5);
  const double eps = 1e-2;
  const TestFunction mc = mollify(c, eps);
  double worst = 0.0;
  for (int i = 0; i <= 120; ++i) {
    const double r = 1.2 * i / 120.0;
    worst = std::max(worst, std::abs(mc.evaluate(r) - c.evaluate(r)));
  }
  CHECK(worst <= kMollifyConstant * kConeHolderNorm * std::sqrt(eps));
  CHECK(mc.integral() == doctest::Approx(c.integral()).epsilon(1e-8));
}

TEST_CASE("low/high split") {
  const TestFunction chi = default_cutoff_chi();
  CHECK(chi.integral() == doctest::Approx(1.0).epsilon(1e-10));
  const TestFunction c = cone(0.5);
  constexpr double kHighConstant = 0.125;
  constexpr double kLaplacianConstant = 0.5;
  for (double R : {4.0, 8.0, 16.0}) {
    const LowHighSplit s = low_high_split(c, R, chi);
    CHECK(s.low.fourier(0.0).real() == doctest::Approx(c.integral()).epsilon(1e-8));
    const TestFunction g = low_laplacian(c, R, chi);
    double high = 0.0, lap = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double r = 1.2 * i / 200.0;
      high = std::max(high, std::abs(s.high.evaluate(r)));
      lap = std::max(lap, std::abs(g.evaluate(r)));
    }
    CHECK(high <= kHighConstant * kConeHolderNorm * std::pow(R, -0.5));
    CHECK(lap <= kLaplacianConstant * kConeHolderNorm * std::pow(R, 1.5));
  }
  const LowHighSplit b = low_high_split(smooth_bump(), 1000.0, chi);
  double worst = 0.0;
  for (int i = 0; i <= 50; ++i) worst = std::max(worst, std::abs(b.high.evaluate(i * 0.02)));
  CHECK(worst < 1e-4);
}

TEST_CASE("grid functions") {
  std::istringstream in(
      "gefz-grid 1\n# ones on a 3x3 lattice\nstep 0.5\norigin -0.5 -0.5\nsize 3 3\n"
      "1 1 1\n1 1 1\n1 1 1\n");
  const TestFunction g = load_grid_function(in, "square");
  CHECK(g.evaluate(cplx(0.1, 0.2)) == doctest::Approx(1.0));
  CHECK(g.evaluate(cplx(2.0, 0.0)) == 0.0);
  // Each node carries a hat of mass step^2.
  CHECK(g.integral() == doctest::Approx(9 * 0.25).epsilon(1e-6));
  std::istringstream bad("gefz-grid 1\nstep -1\n");
  CHECK_THROWS(load_grid_function(bad));
}

TEST_CASE("Laplacian norm") {
  // Δe^{-r²} = (4r² - 4)e^{-r²}, squared and integrated in polar coordinates.
  const double oracle = boost::math::quadrature::gauss<double, 30>::integrate(
      [](double r) { const double v = (4 * r * r - 4) * std::exp(-r * r); return 2 * kPi * v * v * r; },
      0.0, 8.0);
  CHECK(laplacian_l2_squared(gaussian_bump()) == doctest::Approx(oracle).epsilon(1e-8));
}
