#include "gefz/numeric.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>

namespace gefz {

namespace {

double pairwise_rec(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_rec(v.first(half)) + pairwise_rec(v.subspan(half));
}

void append_panel(std::vector<QuadNode>& out, double a, double b) {
  using rule = boost::math::quadrature::gauss<double, 20>;
  const auto& x = rule::abscissa();
  const auto& w = rule::weights();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.push_back({mid - half * x[i], half * w[i]});
    out.push_back({mid + half * x[i], half * w[i]});
  }
}

// Panels shrinking geometrically from `far` toward the singular point `sing`.
void append_graded(std::vector<QuadNode>& out, double far, double sing, int levels) {
  constexpr double kRatio = 0.2;
  double edge = far;
  for (int l = 0; l < levels; ++l) {
    const double next = sing + (edge - sing) * kRatio;
    append_panel(out, std::min(next, edge), std::max(next, edge));
    edge = next;
  }
  append_panel(out, std::min(sing, edge), std::max(sing, edge));
}

bool near(double a, double b) { return std::abs(a - b) <= 1e-14 * std::max(1.0, std::abs(a)); }

}  // namespace

double pairwise_sum(std::span<const double> values) { return pairwise_rec(values); }

std::vector<QuadNode> gauss_legendre_panels(double a, double b, int panels) {
  std::vector<QuadNode> out;
  out.reserve(static_cast<std::size_t>(panels) * 20);
  const double h = (b - a) / panels;
  for (int i = 0; i < panels; ++i) append_panel(out, a + i * h, a + (i + 1) * h);
  return out;
}

std::vector<QuadNode> graded_rule(double a, double b, std::span<const double> breaks,
                                  std::span<const double> singular, int panels_per_unit,
                                  int min_panels, int grading_levels) {
  std::vector<double> pts{a, b};
  for (double p : breaks)
    if (p > a && p < b) pts.push_back(p);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(), near), pts.end());

  auto is_singular = [&](double p) {
    return std::any_of(singular.begin(), singular.end(), [&](double s) { return near(s, p); });
  };

  std::vector<QuadNode> out;
  const double total = b - a;
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    const double lo = pts[s];
    const double hi = pts[s + 1];
    const int n = std::max(
        {1, static_cast<int>(std::ceil((hi - lo) * panels_per_unit)),
         static_cast<int>(std::ceil(min_panels * (hi - lo) / total))});
    const double h = (hi - lo) / n;
    for (int i = 0; i < n; ++i) {
      const double pa = lo + i * h;
      const double pb = lo + (i + 1) * h;
      const bool grade_lo = i == 0 && is_singular(lo);
      const bool grade_hi = i == n - 1 && is_singular(hi);
      if (grade_lo && grade_hi) {
        const double m = 0.5 * (pa + pb);
        append_graded(out, m, pa, grading_levels);
        append_graded(out, m, pb, grading_levels);
      } else if (grade_lo) {
        append_graded(out, pb, pa, grading_levels);
      } else if (grade_hi) {
        append_graded(out, pa, pb, grading_levels);
      } else {
        append_panel(out, pa, pb);
      }
    }
  }
  return out;
}

double zeta_series(double s) {
  if (!(s > 1.0)) throw std::domain_error("zeta_series: s must exceed 1");
  constexpr int kTerms = 2000;
  CompensatedSum sum;
  for (int n = kTerms; n >= 1; --n) sum += std::pow(static_cast<double>(n), -s);
  // Euler–Maclaurin tail for n > kTerms.
  const double k = kTerms;
  const double tail = std::pow(k, 1.0 - s) / (s - 1.0) - 0.5 * std::pow(k, -s) +
                      s / 12.0 * std::pow(k, -s - 1.0) -
                      s * (s + 1.0) * (s + 2.0) / 720.0 * std::pow(k, -s - 3.0);
  sum += tail;
  return sum.value();
}

double dilog(double x) {
  if (x < 0.0 || x > 1.0) throw std::domain_error("dilog: argument outside [0, 1]");
  if (x == 1.0) return kPi * kPi / 6.0;
  if (x > 0.5) {
    return kPi * kPi / 6.0 - std::log(x) * std::log1p(-x) - dilog(1.0 - x);
  }
  CompensatedSum sum;
  double p = x;
  for (int k = 1; k < 200; ++k) {
    const double term = p / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-18 * sum.value()) break;
    p *= x;
  }
  return sum.value();
}

}  // namespace gefz
