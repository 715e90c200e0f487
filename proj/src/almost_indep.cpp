#include "gefz/almost_indep.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "gefz/gef.hpp"
#include "gefz/parallel.hpp"
#include "gefz/rng.hpp"
#include "gefz/zeros.hpp"

namespace gefz {

namespace {

constexpr double kHalfDiagonal = 0.70710678118654752440;  // 1/√2

double point_rect_distance(cplx z, double x0, double y0, double x1, double y1) {
  const double dx = std::max({0.0, x0 - z.real(), z.real() - x1});
  const double dy = std::max({0.0, y0 - z.imag(), z.imag() - y1});
  return std::hypot(dx, dy);
}

}  // namespace

Compact Compact::rectangle(double x0, double y0, double x1, double y1) {
  if (!(x1 >= x0 && y1 >= y0)) throw std::invalid_argument("Compact::rectangle: bad corners");
  Compact c;
  c.kind = Kind::kRectangle;
  c.x0 = x0;
  c.y0 = y0;
  c.x1 = x1;
  c.y1 = y1;
  return c;
}

Compact Compact::cloud(std::vector<cplx> pts) {
  if (pts.empty()) throw std::invalid_argument("Compact::cloud: empty compact");
  Compact c;
  c.kind = Kind::kPoints;
  c.points = std::move(pts);
  return c;
}

double Compact::diameter() const {
  if (kind == Kind::kRectangle) return std::hypot(x1 - x0, y1 - y0);
  double d = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) d = std::max(d, std::abs(points[i] - points[j]));
  return d;
}

double Compact::distance_to(cplx z) const {
  if (kind == Kind::kRectangle) return point_rect_distance(z, x0, y0, x1, y1);
  double d = std::numeric_limits<double>::infinity();
  for (cplx p : points) d = std::min(d, std::abs(z - p));
  return d;
}

double compact_distance(const Compact& a, const Compact& b) {
  if (a.kind == Compact::Kind::kRectangle && b.kind == Compact::Kind::kRectangle) {
    const double dx = std::max({0.0, a.x0 - b.x1, b.x0 - a.x1});
    const double dy = std::max({0.0, a.y0 - b.y1, b.y0 - a.y1});
    return std::hypot(dx, dy);
  }
  const Compact& cloud = a.kind == Compact::Kind::kPoints ? a : b;
  const Compact& other = a.kind == Compact::Kind::kPoints ? b : a;
  double d = std::numeric_limits<double>::infinity();
  for (cplx p : cloud.points) d = std::min(d, other.distance_to(p));
  return d;
}

double minimal_rho(const Compact& k) { return std::sqrt(std::log(3.0 + k.diameter())); }

CompactNet build_net(const Compact& compact, double A, double rho, int compact_id,
                     bool enforce_minimal_rho) {
  if (compact.kind == Compact::Kind::kPoints && compact.points.empty()) {
    throw std::invalid_argument("build_net: empty compact");
  }
  if (!(A >= 1.0)) throw std::invalid_argument("build_net: A must be at least 1");
  const double rmin = minimal_rho(compact);
  if (!(rho > 0.0) || (enforce_minimal_rho && !(rho >= rmin * (1.0 - 1e-12)))) {
    throw std::invalid_argument("build_net: rho below sqrt(log(3 + diam))");
  }
  CompactNet net;
  net.compact_id = compact_id;
  net.compact = compact;
  net.rho = rho;
  net.A = A;

  double bx0, by0, bx1, by1;
  if (compact.kind == Compact::Kind::kRectangle) {
    bx0 = compact.x0, by0 = compact.y0, bx1 = compact.x1, by1 = compact.y1;
  } else {
    bx0 = by0 = std::numeric_limits<double>::infinity();
    bx1 = by1 = -bx0;
    for (cplx p : compact.points) {
      bx0 = std::min(bx0, p.real());
      bx1 = std::max(bx1, p.real());
      by0 = std::min(by0, p.imag());
      by1 = std::max(by1, p.imag());
    }
  }
  for (long long i = static_cast<long long>(std::floor(bx0 - 1)); i <= std::ceil(bx1 + 1); ++i) {
    for (long long j = static_cast<long long>(std::floor(by0 - 1)); j <= std::ceil(by1 + 1); ++j) {
      const cplx p(static_cast<double>(i), static_cast<double>(j));
      if (compact.distance_to(p) <= kHalfDiagonal + 1e-12) net.lattice_points.push_back(p);
    }
  }
  net.points_per_circle = static_cast<int>(std::ceil(A * A * rho * rho - 1e-9));
  const int m = net.points_per_circle;
  for (cplx c : net.lattice_points) {
    for (int k = 0; k < m; ++k) net.circle_points.push_back(c + std::polar(1.0, 2.0 * kPi * k / m));
  }
  return net;
}

bool neighbourhoods_disjoint(const CompactNet& a, const CompactNet& b) {
  return compact_distance(a.compact, b.compact) > a.A * a.rho + b.A * b.rho;
}

double interaction_bound(const CompactNet& net) {
  return std::exp(-net.A * net.A * net.rho * net.rho / 5.0);
}

double interaction_sum(cplx z, const CompactNet& own, const std::vector<CompactNet>& others) {
  CompensatedSum s;
  for (const auto& o : others) {
    if (o.compact_id == own.compact_id) continue;
    if (!neighbourhoods_disjoint(own, o)) {
      throw DisjointnessError("interaction_sum: A·rho neighbourhoods of the compacts intersect");
    }
    for (cplx w : o.circle_points) s += std::exp(-0.5 * std::norm(z - w));
  }
  const double v = s.value();
  return v < 1e-300 ? 0.0 : v;
}

CouplingGram coupling_gram(const std::vector<CompactNet>& nets) {
  CouplingGram g;
  std::vector<double> diag;
  for (const auto& n : nets) {
    const double d = interaction_bound(n);
    for (cplx p : n.circle_points) {
      g.points.push_back(p);
      g.bunch_index.push_back(n.compact_id);
      diag.push_back(d);
    }
  }
  g.size = static_cast<int>(g.points.size());
  const std::size_t n = static_cast<std::size_t>(g.size);
  g.matrix.assign(n * n, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    g.matrix[i * n + i] = diag[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (g.bunch_index[i] == g.bunch_index[j]) continue;
      const cplx z = g.points[i], w = g.points[j];
      // z·conj(w) − |z|²/2 − |w|²/2 has real part −|z−w|²/2.
      const cplx e(-0.5 * std::norm(z - w), (z * std::conj(w)).imag());
      const cplx v = -std::exp(e);
      g.matrix[i * n + j] = v;
      g.matrix[j * n + i] = std::conj(v);
    }
  }
  return g;
}

double gershgorin_margin(const CouplingGram& g) {
  double margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < g.size; ++i) {
    CompensatedSum off;
    for (int j = 0; j < g.size; ++j)
      if (j != i) off += std::abs(g(i, j));
    margin = std::min(margin, g(i, i).real() - off.value());
  }
  return margin;
}

double smallest_eigenvalue(const CouplingGram& g) {
  Eigen::MatrixXcd m(g.size, g.size);
  for (int i = 0; i < g.size; ++i)
    for (int j = 0; j < g.size; ++j) m(i, j) = g(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

ConfigurationCheck check_configuration(const std::vector<Compact>& compacts, double A,
                                       const std::vector<double>& rhos) {
  std::vector<CompactNet> nets;
  for (std::size_t i = 0; i < compacts.size(); ++i) {
    const double rho = i < rhos.size() && rhos[i] > 0.0 ? rhos[i] : minimal_rho(compacts[i]);
    nets.push_back(build_net(compacts[i], A, rho, static_cast<int>(i)));
  }
  for (std::size_t i = 0; i < nets.size(); ++i)
    for (std::size_t j = i + 1; j < nets.size(); ++j)
      if (!neighbourhoods_disjoint(nets[i], nets[j])) {
        throw DisjointnessError("check_configuration: A·rho neighbourhoods intersect");
      }
  ConfigurationCheck c;
  c.nets = static_cast<int>(nets.size());
  double worst = 0.0;
  for (const auto& n : nets) {
    const double bound = interaction_bound(n);
    for (cplx z : n.circle_points) worst = std::max(worst, interaction_sum(z, n, nets) / bound);
  }
  c.max_interaction_ratio = worst;
  c.interaction_bound_holds = worst < 1.0;
  const CouplingGram g = coupling_gram(nets);
  c.gram_size = g.size;
  c.gershgorin_margin = gershgorin_margin(g);
  c.smallest_eigenvalue = smallest_eigenvalue(g);
  return c;
}

RandomConfiguration random_configuration(std::uint64_t seed, std::uint64_t index, double A,
                                         double slack) {
  Philox rng = make_stream(seed, StreamTag::kConfigurations, index);
  auto u = [&] { return rng.uniform_open0(); };
  RandomConfiguration cfg;
  const int count = 2 + static_cast<int>(u() > 0.5);
  for (int k = 0; k < count; ++k) {
    const double w = 0.2 + 1.0 * u();
    const double h = 0.2 + 1.0 * u();
    const double angle = 2.0 * kPi * u();
    Compact c = Compact::rectangle(-0.5 * w, -0.5 * h, 0.5 * w, 0.5 * h);
    const double rho = minimal_rho(c) * (1.0 + 0.2 * u());
    // Walk outward along a random direction until clear of every earlier compact.
    const cplx dir = std::polar(1.0, angle);
    double t = 0.0;
    for (;;) {
      const cplx shift = t * dir;
      Compact moved = Compact::rectangle(c.x0 + shift.real(), c.y0 + shift.imag(),
                                         c.x1 + shift.real(), c.y1 + shift.imag());
      bool ok = true;
      for (std::size_t i = 0; i < cfg.compacts.size() && ok; ++i) {
        ok = compact_distance(moved, cfg.compacts[i]) > A * (rho + cfg.rhos[i]) + slack;
      }
      if (ok) {
        cfg.compacts.push_back(moved);
        cfg.rhos.push_back(rho);
        break;
      }
      t += 0.05;
    }
  }
  return cfg;
}

std::optional<double> calibrate_min_A(std::uint64_t seed, int configurations, double A_max) {
  for (double A = 1.0; A <= A_max + 1e-9; A += 0.25) {
    bool all = true;
    for (int i = 0; i < configurations && all; ++i) {
      const RandomConfiguration cfg = random_configuration(seed, static_cast<std::uint64_t>(i), A);
      std::vector<CompactNet> nets;
      for (std::size_t k = 0; k < cfg.compacts.size(); ++k)
        nets.push_back(build_net(cfg.compacts[k], A, cfg.rhos[k], static_cast<int>(k)));
      for (const auto& n : nets) {
        const double bound = interaction_bound(n);
        for (cplx z : n.circle_points) {
          if (!(interaction_sum(z, n, nets) < bound)) {
            all = false;
            break;
          }
        }
        if (!all) break;
      }
      if (all) all = gershgorin_margin(coupling_gram(nets)) > 0.0;
    }
    if (all) return A;
  }
  return std::nullopt;
}

DecorrelationResult empirical_decorrelation(const Square& a, const Square& b, int n_samples,
                                            std::uint64_t seed, int threads) {
  if (n_samples < 2) throw std::invalid_argument("empirical_decorrelation: need at least 2 samples");
  if (!(a.side > 0.0 && b.side > 0.0)) throw std::invalid_argument("empirical_decorrelation: bad square");
  // The zero process is translation invariant in law: recentre at the midpoint.
  const cplx mid = 0.5 * (a.center + b.center);
  const cplx ca = a.center - mid, cb = b.center - mid;
  const double disk = std::max(std::abs(ca) + a.side * kHalfDiagonal,
                               std::abs(cb) + b.side * kHalfDiagonal) + 0.5;
  std::vector<double> xa(n_samples), xb(n_samples);
  auto inside = [](cplx z, cplx c, double side) {
    return std::abs(z.real() - c.real()) < 0.5 * side && std::abs(z.imag() - c.imag()) < 0.5 * side;
  };
  parallel_for(static_cast<std::size_t>(n_samples), threads, [&](std::size_t i) {
    const GefSample s = GefSample::draw_for_radius(seed, i, disk + 1.0);
    const ZeroSet zs = find_zeros_disk(s, 0.0, disk);
    int na = 0, nb = 0;
    for (cplx z : zs.zeros) {
      na += inside(z, ca, a.side);
      nb += inside(z, cb, b.side);
    }
    xa[i] = na;
    xb[i] = nb;
  });
  const double n = n_samples;
  const double ma = pairwise_sum(xa) / n, mb = pairwise_sum(xb) / n;
  std::vector<double> caa(n_samples), cbb(n_samples), cab(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    caa[i] = (xa[i] - ma) * (xa[i] - ma);
    cbb[i] = (xb[i] - mb) * (xb[i] - mb);
    cab[i] = (xa[i] - ma) * (xb[i] - mb);
  }
  const double saa = pairwise_sum(caa), sbb = pairwise_sum(cbb), sab = pairwise_sum(cab);
  DecorrelationResult r;
  r.samples = n_samples;
  r.mean_a = ma;
  r.mean_b = mb;
  r.correlation = saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
  return r;
}

AlmostIndepConfig almost_indep_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("almost-indep config: object expected");
  for (const auto& [k, v] : j.items()) {
    if (k != "A" && k != "compacts") throw std::invalid_argument("almost-indep config: unknown key " + k);
  }
  AlmostIndepConfig cfg;
  if (j.contains("A")) cfg.A = j.at("A").get<double>();
  for (const auto& c : j.at("compacts")) {
    for (const auto& [k, v] : c.items()) {
      if (k != "rect" && k != "points" && k != "rho") {
        throw std::invalid_argument("almost-indep config: unknown compact key " + k);
      }
    }
    if (c.contains("rect")) {
      const auto r = c.at("rect").get<std::vector<double>>();
      if (r.size() != 4) throw std::invalid_argument("almost-indep config: rect needs 4 numbers");
      cfg.compacts.push_back(Compact::rectangle(r[0], r[1], r[2], r[3]));
    } else if (c.contains("points")) {
      std::vector<cplx> pts;
      for (const auto& p : c.at("points")) {
        const auto xy = p.get<std::vector<double>>();
        if (xy.size() != 2) throw std::invalid_argument("almost-indep config: point needs 2 numbers");
        pts.emplace_back(xy[0], xy[1]);
      }
      cfg.compacts.push_back(Compact::cloud(std::move(pts)));
    } else {
      throw std::invalid_argument("almost-indep config: compact needs rect or points");
    }
    cfg.rhos.push_back(c.value("rho", 0.0));
  }
  return cfg;
}

nlohmann::ordered_json to_json(const ConfigurationCheck& c) {
  nlohmann::ordered_json j;
  j["nets"] = c.nets;
  j["gram_size"] = c.gram_size;
  j["max_interaction_ratio"] = c.max_interaction_ratio;
  j["interaction_bound_holds"] = c.interaction_bound_holds;
  j["gershgorin_margin"] = c.gershgorin_margin;
  j["smallest_eigenvalue"] = c.smallest_eigenvalue;
  return j;
}

}  // namespace gefz
