#include <doctest.h>

#include <cmath>

#include "gefz/almost_indep.hpp"
#include "gefz/numeric.hpp"

using namespace gefz;

TEST_CASE("net construction") {
  const CompactNet single = build_net(Compact::cloud({0.0}), 3.0, 1.0, 0, false);
  CHECK(single.lattice_points.size() == 1);
  CHECK(single.points_per_circle == 9);
  CHECK(single.circle_points.size() == 9);

  const Compact sq = Compact::rectangle(0.0, 0.0, 1.0, 1.0);
  const CompactNet net = build_net(sq, 5.0, 1.2, 0, false);
  CHECK(net.points_per_circle == 36);
  // 1/√2-net: every point of the square is that close to a lattice point.
  double worst = 0.0;
  for (int i = 0; i <= 50; ++i) {
    for (int j = 0; j <= 50; ++j) {
      const cplx z(i / 50.0, j / 50.0);
      double best = 1e9;
      for (cplx p : net.lattice_points) best = std::min(best, std::abs(z - p));
      worst = std::max(worst, best);
    }
  }
  CHECK(worst <= 1.0 / std::sqrt(2.0) + 1e-12);
  for (cplx p : net.circle_points) {
    double best = 1e9;
    for (cplx q : net.lattice_points) best = std::min(best, std::abs(std::abs(p - q) - 1.0));
    CHECK(best < 1e-12);
  }

  const Compact seven = Compact::rectangle(0.0, 0.0, 7.0 / std::sqrt(2.0), 7.0 / std::sqrt(2.0));
  CHECK(seven.diameter() == doctest::Approx(7.0));
  CHECK(minimal_rho(seven) == doctest::Approx(std::sqrt(std::log(10.0))).epsilon(1e-12));
  CHECK(minimal_rho(seven) == doctest::Approx(1.517).epsilon(1e-3));
  CHECK_THROWS_AS(build_net(seven, 5.0, 1.5), std::invalid_argument);
  CHECK_NOTHROW(build_net(seven, 5.0, 1.52));
}

TEST_CASE("interaction sums") {
  const double d = 3.0;
  const CompactNet a = build_net(Compact::cloud({0.0}), 1.0, 1.0, 0, false);
  const CompactNet b = build_net(Compact::cloud({cplx(d, 0.0)}), 1.0, 1.0, 1, false);
  REQUIRE(a.circle_points.size() == 1);
  const double s = interaction_sum(a.circle_points[0], a, {b});
  CHECK(s == doctest::Approx(std::exp(-0.5 * std::norm(a.circle_points[0] - b.circle_points[0]))));

  const double A = 5.0, rho = 1.2, sep = 2 * A * rho;
  const CompactNet p = build_net(Compact::rectangle(0, 0, 1, 1), A, rho, 0, false);
  const CompactNet q = build_net(Compact::rectangle(1 + sep + 1e-9, 0, 2 + sep + 1e-9, 1), A, rho, 1, false);
  double worst = 0.0;
  for (cplx z : p.circle_points) worst = std::max(worst, interaction_sum(z, p, {q}));
  CHECK(worst < interaction_bound(p));
  CHECK(interaction_bound(p) == doctest::Approx(std::exp(-7.2)));

  const CompactNet far = build_net(Compact::rectangle(60, 0, 61, 1), A, rho, 2, false);
  CHECK(interaction_sum(p.circle_points[0], p, {far}) == 0.0);

  const CompactNet close = build_net(Compact::rectangle(2, 0, 3, 1), A, rho, 3, false);
  CHECK_THROWS_AS(interaction_sum(p.circle_points[0], p, {close}), DisjointnessError);
}

TEST_CASE("coupling Gram matrix") {
  const double A = 2.0, rho = 1.0;
  const CompactNet one = build_net(Compact::cloud({0.0}), A, rho, 0, false);
  const CouplingGram g1 = coupling_gram({one});
  const double delta = std::exp(-A * A * rho * rho / 5.0);
  for (int i = 0; i < g1.size; ++i) {
    for (int j = 0; j < g1.size; ++j) CHECK(std::abs(g1(i, j) - (i == j ? delta : 0.0)) < 1e-15);
  }
  CHECK(gershgorin_margin(g1) == doctest::Approx(delta));

  // Two singleton bunches with one circle point each.
  const CompactNet a = build_net(Compact::cloud({0.0}), 1.0, 1.0, 0, false);
  const CompactNet b = build_net(Compact::cloud({cplx(4.0, 0.0)}), 1.0, 1.0, 1, false);
  const CouplingGram g2 = coupling_gram({a, b});
  REQUIRE(g2.size == 2);
  const double dd = std::exp(-0.2);
  const double c = std::exp(-0.5 * std::norm(g2.points[0] - g2.points[1]));
  CHECK(std::abs(g2(0, 1)) == doctest::Approx(c));
  CHECK(std::abs(g2(0, 1) - std::conj(g2(1, 0))) < 1e-15);
  CHECK(smallest_eigenvalue(g2) == doctest::Approx(dd - c).epsilon(1e-12));

  const RandomConfiguration rc = random_configuration(5, 0, 5.0);
  std::vector<CompactNet> nets;
  for (std::size_t i = 0; i < rc.compacts.size(); ++i) {
    nets.push_back(build_net(rc.compacts[i], 5.0, rc.rhos[i], static_cast<int>(i)));
  }
  const CouplingGram g = coupling_gram(nets);
  double asym = 0.0;
  for (int i = 0; i < g.size; ++i)
    for (int j = 0; j < g.size; ++j) asym = std::max(asym, std::abs(g(i, j) - std::conj(g(j, i))));
  CHECK(asym == 0.0);
}

TEST_CASE("configuration checks") {
  const double A = 5.0, rho = 1.25, sep = 2 * A * rho + 0.01;
  const ConfigurationCheck ok = check_configuration(
      {Compact::rectangle(0, 0, 1, 1), Compact::rectangle(1 + sep, 0, 2 + sep, 1)}, A, {rho, rho});
  CHECK(ok.interaction_bound_holds);
  CHECK(ok.gershgorin_margin > 0.0);
  CHECK(ok.smallest_eigenvalue >= ok.gershgorin_margin - 1e-12);

  // Too small A with nearly touching compacts: reported, not thrown.
  const ConfigurationCheck bad = check_configuration(
      {Compact::cloud({0.0}), Compact::cloud({cplx(2.15, 0.0)})}, 1.0, {1.05, 1.05});
  CHECK(bad.gershgorin_margin <= 0.0);

  for (std::uint64_t i = 0; i < 5; ++i) {
    const RandomConfiguration rc = random_configuration(77, i, kDefaultA);
    const ConfigurationCheck c = check_configuration(rc.compacts, kDefaultA, rc.rhos);
    CHECK(c.interaction_bound_holds);
    CHECK(c.gershgorin_margin > 0.0);
  }
}

TEST_CASE("empirical decorrelation") {
  const DecorrelationResult same = empirical_decorrelation({0.0, 2.0}, {0.0, 2.0}, 200, 3, 1);
  CHECK(same.correlation == doctest::Approx(1.0));
  const DecorrelationResult near = empirical_decorrelation({cplx(-0.5, 0), 2.0}, {cplx(0.5, 0), 2.0}, 1000, 3, 1);
  CHECK(near.correlation > 0.1);
  const DecorrelationResult far = empirical_decorrelation({cplx(-4, 0), 2.0}, {cplx(4, 0), 2.0}, 1000, 3, 1);
  CHECK(std::abs(far.correlation) < 4 / std::sqrt(1000.0));
}

TEST_CASE("config parsing") {
  const auto cfg = almost_indep_config_from_json(nlohmann::json::parse(
      R"({"A": 4, "compacts": [{"rect": [0,0,1,1], "rho": 1.3}, {"points": [[10,0]]}]})"));
  CHECK(cfg.A == 4.0);
  REQUIRE(cfg.compacts.size() == 2);
  CHECK(cfg.rhos[0] == 1.3);
  CHECK(cfg.rhos[1] == 0.0);
  CHECK_THROWS(almost_indep_config_from_json(nlohmann::json::parse(R"({"A": 4, "compacts": [], "x": 1})")));
}
