#include "gefz/zeros.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace gefz {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Newton correction p/p' at w plus a backward-error convergence flag. For
// |w| > 1 the reversed polynomial is evaluated in u = 1/w, which keeps every
// intermediate bounded by the coefficient scale.
struct HornerStep {
  cplx newton;
  bool converged;
};

HornerStep horner_step(const std::vector<cplx>& c, const std::vector<double>& ac, cplx w) {
  const std::size_t n = c.size() - 1;
  const double aw = std::abs(w);
  if (aw <= 1.0) {
    cplx p = c[n];
    cplx dp{0.0, 0.0};
    double e = ac[n];
    for (std::size_t k = n; k-- > 0;) {
      dp = dp * w + p;
      p = p * w + c[k];
      e = e * aw + ac[k];
    }
    return {p / dp, std::abs(p) <= 4.0 * kEps * e};
  }
  const cplx u = 1.0 / w;
  const double au = 1.0 / aw;
  cplx q = c[0];
  cplx dq{0.0, 0.0};
  double e = ac[0];
  for (std::size_t k = 1; k <= n; ++k) {
    dq = dq * u + q;
    q = q * u + c[k];
    e = e * au + ac[k];
  }
  const cplx ratio = static_cast<double>(n) * u - u * u * dq / q;
  return {1.0 / ratio, std::abs(q) <= 4.0 * kEps * e};
}

// Starting points from the upper convex hull of (k, log|c_k|): each hull
// edge of width m contributes m points on a circle of the edge's radius.
// Successive circles are rotated by the golden angle.
std::vector<cplx> newton_polygon_start(const std::vector<cplx>& c) {
  const int n = static_cast<int>(c.size()) - 1;
  std::vector<int> hull;
  auto lg = [&](int k) { return std::log(std::abs(c[k])); };
  for (int k = 0; k <= n; ++k) {
    if (c[k] == cplx{}) continue;
    while (hull.size() >= 2) {
      const int a = hull[hull.size() - 2];
      const int b = hull.back();
      // Drop b when it lies on or below the chord a→k.
      if ((lg(b) - lg(a)) * (k - a) <= (lg(k) - lg(a)) * (b - a)) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(k);
  }
  constexpr double kGolden = std::numbers::pi * (3.0 - 2.2360679774997896964);
  std::vector<cplx> w;
  w.reserve(n);
  for (std::size_t e = 0; e + 1 < hull.size(); ++e) {
    const int a = hull[e];
    const int b = hull[e + 1];
    const int m = b - a;
    const double radius = std::exp((lg(a) - lg(b)) / m);
    const double offset = 0.4 + kGolden * static_cast<double>(e);
    for (int j = 0; j < m; ++j) {
      w.push_back(std::polar(radius, offset + 2.0 * std::numbers::pi * j / m));
    }
  }
  return w;
}

std::vector<cplx> aberth(const std::vector<cplx>& c) {
  const std::size_t n = c.size() - 1;
  std::vector<double> ac(c.size());
  for (std::size_t k = 0; k <= n; ++k) ac[k] = std::abs(c[k]);
  const std::vector<cplx> start = newton_polygon_start(c);
  std::vector<double> re(n), im(n);
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = start[i].real();
    im[i] = start[i].imag();
  }
  std::vector<char> done(n, 0);
  std::size_t remaining = n;
  constexpr int kMaxIterations = 600;
  for (int it = 0; it < kMaxIterations && remaining > 0; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) continue;
      const cplx wi{re[i], im[i]};
      const HornerStep h = horner_step(c, ac, wi);
      if (h.converged || !std::isfinite(h.newton.real()) || !std::isfinite(h.newton.imag())) {
        done[i] = 1;
        --remaining;
        continue;
      }
      double sr = 0.0, si = 0.0;
      const double xr = re[i], xi = im[i];
      for (std::size_t j = 0; j < i; ++j) {
        const double dr = xr - re[j], di = xi - im[j];
        const double inv = 1.0 / (dr * dr + di * di);
        sr += dr * inv;
        si -= di * inv;
      }
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dr = xr - re[j], di = xi - im[j];
        const double inv = 1.0 / (dr * dr + di * di);
        sr += dr * inv;
        si -= di * inv;
      }
      const cplx corr = h.newton / (1.0 - h.newton * cplx{sr, si});
      if (!std::isfinite(corr.real()) || !std::isfinite(corr.imag())) {
        done[i] = 1;
        --remaining;
        continue;
      }
      re[i] -= corr.real();
      im[i] -= corr.imag();
      if (std::abs(corr) <= 2.0 * kEps * std::abs(wi)) {
        done[i] = 1;
        --remaining;
      }
    }
  }
  std::vector<cplx> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {re[i], im[i]};
  return out;
}

// Smallest r' ≥ r such that no distance in `d` lies within g of r'.
double nudge_outward(std::vector<double> d, double r, double g) {
  std::sort(d.begin(), d.end());
  double rr = r;
  for (const double x : d) {
    if (x <= rr - g) continue;
    if (x < rr + g) {
      rr = x + 2.0 * g;
    } else {
      break;
    }
  }
  return rr;
}

std::string fmt_point(cplx z) {
  std::ostringstream o;
  o.precision(6);
  o << "(" << z.real() << ", " << z.imag() << ")";
  return o.str();
}

}  // namespace

std::vector<cplx> polynomial_roots(std::span<const cplx> coefficients) {
  std::size_t lo = 0;
  std::size_t hi = coefficients.size();
  while (hi > 0 && coefficients[hi - 1] == cplx{}) --hi;
  if (hi == 0) throw std::invalid_argument("polynomial_roots: zero polynomial");
  while (lo < hi && coefficients[lo] == cplx{}) ++lo;
  std::vector<cplx> roots(lo, cplx{0.0, 0.0});
  std::vector<cplx> c(coefficients.begin() + static_cast<std::ptrdiff_t>(lo),
                      coefficients.begin() + static_cast<std::ptrdiff_t>(hi));
  if (c.size() == 2) {
    roots.push_back(-c[0] / c[1]);
  } else if (c.size() > 2) {
    const auto r = aberth(c);
    roots.insert(roots.end(), r.begin(), r.end());
  }
  return roots;
}

int count_zeros_circle(const GefSample& s, cplx center, double radius, double guard_band) {
  if (!(radius > 0.0)) throw std::invalid_argument("count_zeros_circle: radius must be positive");
  if (std::abs(center) + radius > s.valid_radius() * (1.0 + 1e-12)) {
    throw RadiusError("count_zeros_circle: circle leaves the certified radius");
  }
  const double guard = guard_band < 0.0 ? kDefaultGuardBandRel * radius : guard_band;
  const double suggestion = radius + 4.0 * guard;
  auto value_at = [&](double theta) {
    cplx z = center + std::polar(radius, theta);
    if (std::abs(z) > s.valid_radius()) z *= s.valid_radius() / std::abs(z);
    const cplx v = evaluate_star(s, z).value;
    if (std::abs(v) < 1e-13) {
      throw GuardBandError("count_zeros_circle: F* vanishes on the circle near " + fmt_point(z),
                           suggestion);
    }
    return v;
  };

  constexpr double kMaxStep = std::numbers::pi / 3.0;
  const int m0 = static_cast<int>(std::ceil(8.0 * radius * radius + 64.0));
  const double h = 2.0 * std::numbers::pi / m0;
  struct Arc {
    double a, b;
    cplx va, vb;
  };
  std::vector<Arc> stack;
  double total = 0.0;
  const cplx v0 = value_at(0.0);
  cplx prev = v0;
  for (int j = 0; j < m0; ++j) {
    const double a = j * h;
    const double b = (j + 1 == m0) ? 2.0 * std::numbers::pi : (j + 1) * h;
    const cplx next = (j + 1 == m0) ? v0 : value_at(b);
    stack.push_back({a, b, prev, next});
    while (!stack.empty()) {
      const Arc arc = stack.back();
      stack.pop_back();
      const double d = std::arg(arc.vb * std::conj(arc.va));
      if (std::abs(d) <= kMaxStep) {
        total += d;
        continue;
      }
      if (radius * (arc.b - arc.a) < guard) {
        throw GuardBandError("count_zeros_circle: a zero lies within the guard band near " +
                                 fmt_point(center + std::polar(radius, arc.a)),
                             suggestion);
      }
      const double mid = 0.5 * (arc.a + arc.b);
      const cplx vm = value_at(mid);
      stack.push_back({mid, arc.b, vm, arc.vb});
      stack.push_back({arc.a, mid, arc.va, vm});
    }
    prev = next;
  }
  const double w = total / (2.0 * std::numbers::pi);
  const long n = std::lround(w);
  if (std::abs(w - static_cast<double>(n)) > 1e-6) {
    throw ToleranceError("count_zeros_circle: winding sum is not an integer", std::abs(w - n));
  }
  return static_cast<int>(n);
}

ZeroSet find_zeros_disk(const GefSample& s, cplx center, double radius,
                        const ZeroFinderOptions& options) {
  if (!(radius > 0.0)) throw std::invalid_argument("find_zeros_disk: radius must be positive");
  const double vr = s.valid_radius();
  if (std::abs(center) + radius > vr * (1.0 + 1e-12)) {
    throw RadiusError("find_zeros_disk: disk leaves the certified radius");
  }

  // Roots of the rescaled polynomial p(w) = F(σw)·e^{-L}, with σ the valid
  // radius and L chosen so the largest coefficient has modulus ~1.
  const auto& zeta = s.coefficients();
  const int n = s.truncation_degree();
  const double sigma = std::max(vr, 1e-3);
  const double log_sigma = std::log(sigma);
  double top = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= n; ++k) top = std::max(top, k * log_sigma - 0.5 * std::lgamma(k + 1.0));
  std::vector<cplx> c(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    const double lg = k * log_sigma - 0.5 * std::lgamma(k + 1.0) - top;
    c[k] = zeta[k] * std::exp(lg);
    if (zeta[k] != cplx{} && c[k] == cplx{}) {
      throw std::range_error("find_zeros_disk: coefficient scaling underflows at this radius");
    }
  }
  const std::vector<cplx> w = polynomial_roots(c);

  // Candidates: roots near the disk, polished on F* itself.
  std::vector<cplx> cand;
  for (const cplx wi : w) {
    const cplx z = sigma * wi;
    if (std::abs(z - center) <= radius + 1.0 && std::abs(z) <= vr) cand.push_back(z);
  }
  std::vector<double> resid(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) {
    cplx z = cand[i];
    for (int it = 0; it < 30; ++it) {
      const auto sd = evaluate_star_with_derivative(s, z);
      if (sd.value == cplx{}) break;
      if (sd.derivative == cplx{}) {
        throw NewtonConvergenceError("find_zeros_disk: vanishing derivative near " + fmt_point(z) +
                                     " (multiple zero?)");
      }
      const cplx step = sd.value / sd.derivative;
      const cplx next = z - step;
      if (std::abs(next) > vr) break;
      z = next;
      if (std::abs(step) <= 4.0 * kEps * std::max(1.0, std::abs(z))) break;
    }
    cand[i] = z;
    resid[i] = std::abs(evaluate_star(s, z).value);
  }

  // Validation radius: the requested one, moved outward past any zero that
  // sits within the guard band.
  const double guard = options.validation_guard_rel * std::max(1.0, radius);
  std::vector<double> dist(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) dist[i] = std::abs(cand[i] - center);
  const double rr = nudge_outward(dist, radius, guard);
  if (std::abs(center) + rr > vr * (1.0 + 1e-12)) {
    throw GuardBandError("find_zeros_disk: no clear validation circle inside the certified radius",
                         0.0);
  }

  ZeroSet zs;
  zs.disk_center = center;
  zs.disk_radius = rr;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (dist[i] >= rr) continue;
    if (!(resid[i] <= options.residual_tol)) {
      throw NewtonConvergenceError("find_zeros_disk: Newton refinement stalled near " +
                                   fmt_point(cand[i]) + ", residual " + std::to_string(resid[i]));
    }
    zs.zeros.push_back(cand[i]);
    zs.residuals.push_back(resid[i]);
  }

  // Stable order and separation check.
  std::vector<std::size_t> idx(zs.zeros.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const cplx x = zs.zeros[a], y = zs.zeros[b];
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  std::vector<cplx> zz;
  std::vector<double> rz;
  for (const auto i : idx) {
    zz.push_back(zs.zeros[i]);
    rz.push_back(zs.residuals[i]);
  }
  zs.zeros = std::move(zz);
  zs.residuals = std::move(rz);
  for (std::size_t i = 0; i < zs.zeros.size(); ++i) {
    for (std::size_t j = i + 1; j < zs.zeros.size(); ++j) {
      if (zs.zeros[j].real() - zs.zeros[i].real() >= options.separation_floor) break;
      if (std::abs(zs.zeros[j] - zs.zeros[i]) < options.separation_floor) {
        throw IncompleteExtractionError("find_zeros_disk: zeros closer than the separation floor near " +
                                        fmt_point(zs.zeros[i]) + " (multiple zero?)");
      }
    }
  }

  zs.validated_count = count_zeros_circle(s, center, rr, 0.25 * guard);
  if (zs.validated_count != static_cast<int>(zs.zeros.size())) {
    std::ostringstream o;
    o << "find_zeros_disk: extracted " << zs.zeros.size() << " zeros but the winding number is "
      << zs.validated_count << " (disk " << fmt_point(center) << ", radius " << rr << ")";
    throw IncompleteExtractionError(o.str());
  }
  return zs;
}

double linear_statistic(const ZeroSet& zs, const TestFunction& h, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("linear_statistic: R must be positive");
  if (std::abs(zs.disk_center) + R * h.support_radius() > zs.disk_radius * (1.0 + 1e-12)) {
    throw std::invalid_argument("linear_statistic: support of h(./R) exceeds the extraction disk");
  }
  std::vector<double> v;
  v.reserve(zs.zeros.size());
  for (const cplx a : zs.zeros) v.push_back(h.evaluate(a / R));
  return pairwise_sum(v);
}

CircleAverage circle_log_average(const GefSample& s, cplx center, double r,
                                 std::span<const cplx> zeros, double tol) {
  std::vector<cplx> near;
  double add_back = 0.0;
  for (const cplx a : zeros) {
    const double d = std::abs(a - center);
    if (std::abs(d - r) < 1.0) {
      near.push_back(a);
      add_back += std::log(std::max(r, d));
    }
  }
  auto f = [&](double theta) {
    const cplx z = center + std::polar(r, theta);
    const auto pv = evaluate_star(s, z).potential;
    double v = pv.log_modulus_star;
    for (const cplx a : near) v -= std::log(std::abs(z - a));
    if (!std::isfinite(v)) {
      throw GuardBandError("circle_log_average: zero on the contour", r * (1.0 + 4e-3));
    }
    return v;
  };
  int m = 32 * static_cast<int>(std::ceil(r)) + 64;
  const double two_pi = 2.0 * std::numbers::pi;
  CompensatedSum sum;
  for (int j = 0; j < m; ++j) sum += f(two_pi * j / m);
  double estimate = sum.value() / m;
  constexpr int kMaxNodes = 1 << 22;
  while (true) {
    CompensatedSum odd;
    for (int j = 0; j < m; ++j) odd += f(two_pi * (j + 0.5) / m);
    const double refined = 0.5 * (estimate + odd.value() / m);
    const double err = std::abs(refined - estimate);
    m *= 2;
    estimate = refined;
    if (err <= tol * std::max(1.0, std::abs(estimate))) {
      return {estimate + add_back, err, m};
    }
    if (m >= kMaxNodes) {
      throw ToleranceError("circle_log_average: trapezoid rule did not converge", err);
    }
  }
}

JensenResult jensen_check(const GefSample& s, const ZeroSet& zeros, double R, double guard_band) {
  if (!(R > 0.0)) throw std::invalid_argument("jensen_check: R must be positive");
  if (zeros.disk_center != cplx{} || zeros.disk_radius < R) {
    throw std::invalid_argument("jensen_check: zero set must cover the disk |z| <= R");
  }
  const cplx z0 = s.coefficients()[0];
  if (z0 == cplx{}) throw std::invalid_argument("jensen_check: F(0) = 0");
  const double guard = guard_band < 0.0 ? kDefaultGuardBandRel * R : guard_band;
  std::vector<double> dist;
  for (const cplx a : zeros.zeros) dist.push_back(std::abs(a));
  for (const double d : dist) {
    if (std::abs(d - R) < guard) {
      throw GuardBandError("jensen_check: a zero lies within the guard band of |z| = R",
                           nudge_outward(dist, R, guard));
    }
  }
  JensenResult out;
  out.radius = R;
  const CircleAverage ca = circle_log_average(s, 0.0, R, zeros.zeros, 1e-13);
  out.circle_average_star = ca.value;
  out.left = ca.value + 0.5 * R * R - std::log(std::abs(z0));
  CompensatedSum right;
  for (const double d : dist) {
    if (d < R) {
      right += std::log(R / d);
      ++out.zeros_inside;
    }
  }
  out.right = right.value();
  out.discrepancy = std::abs(out.left - out.right);
  return out;
}

JensenResult jensen_check(const GefSample& s, double R, double guard_band) {
  const double disk = std::min(R + 1.0, s.valid_radius() * (1.0 - 1e-9));
  if (disk < R) throw RadiusError("jensen_check: radius exceeds the certified radius");
  const ZeroSet zs = find_zeros_disk(s, 0.0, disk);
  return jensen_check(s, zs, R, guard_band);
}

JensenResult jensen_check_nudged(const GefSample& s, const ZeroSet& zeros, double R,
                                 int max_nudges) {
  double r = R;
  for (int attempt = 0;; ++attempt) {
    try {
      return jensen_check(s, zeros, r);
    } catch (const GuardBandError& e) {
      if (attempt >= max_nudges || !(e.suggested_radius() > r) ||
          e.suggested_radius() > zeros.disk_radius) {
        throw;
      }
      r = e.suggested_radius();
    }
  }
}

void write_zeros_csv(std::ostream& out, long long sample_index, const ZeroSet& zs, bool header) {
  if (header) out << "sample_index,re,im,residual\r\n";
  char buf[128];
  for (std::size_t i = 0; i < zs.zeros.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.6e\r\n", sample_index, zs.zeros[i].real(),
                  zs.zeros[i].imag(), zs.residuals[i]);
    out << buf;
  }
}

}  // namespace gefz
