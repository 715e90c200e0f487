#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gefz/numeric.hpp"

namespace gefz {

/// A compact set: an axis-parallel rectangle or a finite point cloud.
struct Compact {
  enum class Kind { kRectangle, kPoints };
  Kind kind = Kind::kPoints;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;  ///< rectangle corners
  std::vector<cplx> points;                       ///< point cloud

  static Compact rectangle(double x0, double y0, double x1, double y1);
  static Compact cloud(std::vector<cplx> pts);

  double diameter() const;
  /// Euclidean distance from z to the set (0 inside a rectangle).
  double distance_to(cplx z) const;
};

/// Distance between two compacts.
double compact_distance(const Compact& a, const Compact& b);

/// Smallest admissible scale √(log(3 + diam K)).
double minimal_rho(const Compact& k);

struct CompactNet {
  int compact_id = 0;
  Compact compact;
  std::vector<cplx> lattice_points;  ///< unit-lattice points within 1/√2 of K
  std::vector<cplx> circle_points;   ///< ⌈A²ρ²⌉ equidistant points per unit circle
  int points_per_circle = 0;
  double rho = 0.0;
  double A = 0.0;
};

inline constexpr double kDefaultA = 5.0;

/// Throws std::invalid_argument on an empty compact, A < 1 or (when
/// enforce_minimal_rho) ρ below minimal_rho(compact).
CompactNet build_net(const Compact& compact, double A, double rho, int compact_id = 0,
                     bool enforce_minimal_rho = true);

/// The Aρ-neighbourhoods of two nets are disjoint when the compacts are
/// farther apart than Aρ_j + Aρ_k.
bool neighbourhoods_disjoint(const CompactNet& a, const CompactNet& b);

class DisjointnessError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Σ_{k≠j} Σ_{ζ∈Z_k} e^{-|z-ζ|²/2} for a point z of net `own`. Throws
/// DisjointnessError when some other net's neighbourhood meets own's.
/// Sums below 1e-300 are returned as 0.
double interaction_sum(cplx z, const CompactNet& own, const std::vector<CompactNet>& others);

/// Interaction bound e^{-A²ρ²/5} for a net.
double interaction_bound(const CompactNet& net);

struct CouplingGram {
  int size = 0;
  std::vector<cplx> matrix;     ///< row-major size × size, Hermitian
  std::vector<int> bunch_index;  ///< net id of each row
  std::vector<cplx> points;      ///< the circle point of each row
  cplx operator()(int i, int j) const { return matrix[static_cast<std::size_t>(i) * size + j]; }
};

/// Γ: diagonal e^{-A²ρ_j²/5}, zero inside a bunch, and
/// -e^{z·conj(ζ) - |z|²/2 - |ζ|²/2} between bunches.
CouplingGram coupling_gram(const std::vector<CompactNet>& nets);

/// min over rows of Γ_ii − Σ_{j≠i}|Γ_ij|. Positive certifies Γ ≻ 0.
double gershgorin_margin(const CouplingGram& g);

/// Smallest eigenvalue of Γ (Hermitian eigensolver).
double smallest_eigenvalue(const CouplingGram& g);

struct ConfigurationCheck {
  int nets = 0;
  int gram_size = 0;
  double max_interaction_ratio = 0.0;  ///< max_z interaction_sum / bound
  bool interaction_bound_holds = false;
  double gershgorin_margin = 0.0;
  double smallest_eigenvalue = 0.0;
};

/// Builds nets for the compacts (ρ_j given, or minimal_rho when absent),
/// checks disjointness, and evaluates interaction bound, margin and
/// eigenvalue floor.
ConfigurationCheck check_configuration(const std::vector<Compact>& compacts, double A,
                                       const std::vector<double>& rhos);

/// Seeded random admissible configuration: 2-3 rectangles (sides in
/// [0.2, 1.2]) with ρ_j in [1, 1.2]·minimal_rho, placed so that neighbourhoods
/// are disjoint with `slack` to spare.
struct RandomConfiguration {
  std::vector<Compact> compacts;
  std::vector<double> rhos;
};
RandomConfiguration random_configuration(std::uint64_t seed, std::uint64_t index, double A,
                                         double slack = 0.25);

/// Smallest A on the grid {1, 1.25, ..., A_max} for which every random
/// configuration (same seeds, placed for that A) passes both checks.
std::optional<double> calibrate_min_A(std::uint64_t seed, int configurations, double A_max = 8.0);

struct Square {
  cplx center{0.0, 0.0};
  double side = 2.0;
};

struct DecorrelationResult {
  double correlation = 0.0;
  double mean_a = 0.0, mean_b = 0.0;
  int samples = 0;
};

/// Correlation across an ensemble of the zero counts of two squares (centre
/// distance may be zero; overlapping squares are allowed).
DecorrelationResult empirical_decorrelation(const Square& a, const Square& b, int n_samples,
                                            std::uint64_t seed, int threads = 0);

/// Parses {"A": .., "compacts": [{"rect": [x0,y0,x1,y1], "rho": ..} |
/// {"points": [[x,y],..], "rho": ..}]}. Missing rho means minimal_rho.
struct AlmostIndepConfig {
  double A = kDefaultA;
  std::vector<Compact> compacts;
  std::vector<double> rhos;  ///< ≤ 0 entries mean "use minimal_rho"
};
AlmostIndepConfig almost_indep_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const ConfigurationCheck& c);

}  // namespace gefz
