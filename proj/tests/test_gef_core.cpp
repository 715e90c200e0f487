#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <memory>

#include "gefz/gef.hpp"
#include "gefz/numeric.hpp"
#include "gefz/rng.hpp"

using namespace gefz;

namespace {

// Least N ≥ ⌈R²⌉ with P(Poisson(R²) > N) ≤ tol², via the regularized gamma.
int degree_oracle(double R, double tol) {
  int n = static_cast<int>(std::ceil(R * R));
  while (!(boost::math::gamma_p(n + 1.0, R * R) <= tol * tol)) ++n;
  return n;
}

struct Acc {
  double sum = 0, sum2 = 0;
  long n = 0;
  void add(double x) { sum += x; sum2 += x * x; ++n; }
  double mean() const { return sum / n; }
  double se() const { return std::sqrt((sum2 / n - mean() * mean()) / (n - 1)); }
};

}  // namespace

TEST_CASE("truncation degree") {
  const int small = truncation_degree(1e-3, 1e-12);
  CHECK(small >= 1);
  CHECK(small <= 4);
  CHECK(truncation_degree(6.0, 1e-12) == degree_oracle(6.0, 1e-12));
  CHECK(truncation_degree(6.0, 1e-12) == 113);
  CHECK(truncation_degree(12.0, 1e-12) > truncation_degree(6.0, 1e-12));
  CHECK_THROWS_AS(truncation_degree(0.0, 1e-12), std::invalid_argument);
  CHECK_THROWS_AS(truncation_degree(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("coefficient moments and determinism") {
  Acc abs2, re, im;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    Philox rng = make_stream(7, StreamTag::kGefSample, i);
    const cplx z = rng.complex_normal();
    abs2.add(std::norm(z));
    re.add(z.real());
    im.add(z.imag());
  }
  CHECK(std::abs(abs2.mean() - 1.0) < 4 * abs2.se());
  CHECK(std::abs(re.mean()) < 4 * re.se());
  CHECK(std::abs(im.mean()) < 4 * im.se());

  const GefSample a = GefSample::draw(11, 3, 100, 5.0);
  const GefSample b = GefSample::draw(11, 3, 100, 5.0);
  CHECK(a.coefficients() == b.coefficients());
  const GefSample c = GefSample::draw(11, 4, 100, 5.0);
  CHECK(a.coefficients() != c.coefficients());
  CHECK_THROWS_AS(GefSample::draw(11, 3, 5, 5.0), std::invalid_argument);
}

TEST_CASE("evaluation of F*") {
  const GefSample s = GefSample::draw_for_radius(3, 0, 8.0);
  CHECK(std::abs(evaluate_star(s, 0.0).value - s.coefficients()[0]) < 1e-15);
  for (cplx z : {cplx(1.0, 2.0), cplx(-4.0, 3.5), cplx(0.3, -7.0)}) {
    const cplx a = evaluate_star(s, z).value;
    const cplx b = evaluate_star_direct(s, z);
    CHECK(std::abs(a - b) <= 1e-11 * (1.0 + std::abs(b)));
  }
  CHECK_THROWS_AS(evaluate_star(s, cplx(20.0, 0.0)), RadiusError);

  const GefSample lin = GefSample::from_coefficients({-1.0, 1.0}, 3.0);
  const StarValue v = evaluate_star(lin, 1.0);
  CHECK(v.potential.is_zero);
  CHECK(std::isinf(v.potential.log_modulus_star));
  CHECK(v.potential.log_modulus_star < 0);

  const StarValue w = evaluate_star(lin, 2.0);
  CHECK(w.potential.log_modulus_star == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(w.potential.centered == doctest::Approx(-2.0 - kLogModulusMean).epsilon(1e-14));
}

TEST_CASE("unit variance of F* far from the origin") {
  Acc acc;
  const cplx z = std::polar(10.0, 0.7);
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const GefSample s = GefSample::draw_for_radius(5, i, 10.0);
    acc.add(std::norm(evaluate_star(s, z).value));
  }
  CHECK(std::abs(acc.mean() - 1.0) < 4 * acc.se());
}

TEST_CASE("covariance kernel") {
  CHECK(normalized_correlation(cplx(1, 2), cplx(1, 2)) == 1.0);
  CHECK(normalized_correlation(0.0, cplx(6.0, 0.0)) == doctest::Approx(std::exp(-18.0)).epsilon(1e-12));
  CHECK(normalized_correlation(0.0, 6.0) == doctest::Approx(1.523e-8).epsilon(1e-3));
  const cplx z(0.4, 0.3), w(-0.2, 0.9);
  CHECK(std::abs(covariance_kernel(z, w).value() - std::exp(z * std::conj(w))) < 1e-14);

  // E F*(z1) conj F*(z2) has modulus e^{-|z1-z2|²/2}.
  const cplx z1(0.0, 0.0), z2(1.0, 0.0);
  Acc re, im;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    const GefSample s = GefSample::draw_for_radius(9, i, 2.0);
    const cplx p = evaluate_star(s, z1).value * std::conj(evaluate_star(s, z2).value);
    re.add(p.real());
    im.add(p.imag());
  }
  const double modulus = std::hypot(re.mean(), im.mean());
  const double se = std::hypot(re.se(), im.se());
  CHECK(std::abs(modulus - std::exp(-0.5)) < 4 * se);
}

TEST_CASE("projective translate") {
  auto s = std::make_shared<const GefSample>(GefSample::draw_for_radius(13, 0, 8.0));
  const ProjectiveTranslate t0(s, 0.0, 3.0);
  for (cplx z : {cplx(0.5, 0.1), cplx(-1.0, 2.0)}) {
    const cplx f = evaluate_star(*s, z).value * std::exp(0.5 * std::norm(z));
    CHECK(std::abs(t0.value(z) - f) <= 1e-12 * std::abs(f));
  }
  const cplx kappa(2.0, 1.0);
  const ProjectiveTranslate t(s, kappa, 3.0);
  for (cplx z : {cplx(0.5, 0.1), cplx(-1.0, 2.0), cplx(0.0, -2.5)}) {
    CHECK(std::abs(t.star(z)) == doctest::Approx(std::abs(evaluate_star(*s, kappa + z).value)).epsilon(1e-12));
  }

  const cplx z1(0.5, 0.0), z2(0.0, 0.5);
  const cplx expected = std::exp(z1 * std::conj(z2));
  Acc re, im;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    auto si = std::make_shared<const GefSample>(GefSample::draw_for_radius(17, i, 4.0));
    const ProjectiveTranslate ti(si, kappa, 1.0);
    const cplx p = ti.value(z1) * std::conj(ti.value(z2));
    re.add(p.real());
    im.add(p.imag());
  }
  CHECK(std::abs(re.mean() - expected.real()) < 4 * re.se());
  CHECK(std::abs(im.mean() - expected.imag()) < 4 * im.se());
}

TEST_CASE("json round trip") {
  const GefSample s = GefSample::draw_for_radius(21, 2, 4.0);
  const GefSample t = gef_sample_from_json(to_json(s));
  CHECK(t.coefficients() == s.coefficients());
  CHECK(t.seed() == s.seed());
  CHECK(t.valid_radius() == s.valid_radius());
}
