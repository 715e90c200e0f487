#include "gefz/verify.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gefz/almost_indep.hpp"
#include "gefz/correlation.hpp"
#include "gefz/ensemble.hpp"
#include "gefz/numeric.hpp"
#include "gefz/parallel.hpp"
#include "gefz/report.hpp"
#include "gefz/spectral.hpp"
#include "gefz/zeros.hpp"

namespace gefz {

bool VerifyReport::all_passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.passed; });
}

int VerifyReport::exit_code() const {
  bool numerical = false, statistical = false;
  for (const auto& c : criteria) {
    if (c.passed) continue;
    (c.kind == CriterionKind::kNumerical ? numerical : statistical) = true;
  }
  if (numerical) return kExitNumerical;
  return statistical ? kExitStatistical : kExitPass;
}

namespace {

std::string num(double v) { return csv_number(v); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// splitmix64 finalizer; decorrelates the per-criterion master seeds.
std::uint64_t derive_seed(std::uint64_t master, int id) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<double> doubles(ConfigReader& r, const std::string& key, std::vector<double> fallback) {
  return r.get<std::vector<double>>(key, std::move(fallback));
}

struct Settings {
  std::uint64_t seed = 20240607;

  int jensen_samples = 100;
  double jensen_R = 6.0;
  double jensen_tol = 1e-6;

  long long intensity_samples = 2000;
  double intensity_R = 6.0;
  double intensity_se_factor = 4.0;
  double variance_se_factor = 3.0;

  std::vector<double> smooth_R{8.0, 16.0, 32.0};
  double smooth_lo = 0.9, smooth_hi = 1.1;

  double indicator_R = 64.0;
  double indicator_rel_tol = 0.1;

  double m_large_lambda = 20.0;
  double m_large_tol = 1e-3;
  double m_scan_lo = 1e-3, m_scan_hi = 1e3;
  int m_scan_points = 2001;

  int laguerre_max_alpha = 10;
  double laguerre_tol = 1e-8;

  std::vector<double> covariance_rho{0.0, 0.5, 1.0};
  long long covariance_pairs = 100000;
  double covariance_se_factor = 3.0;

  double pair_r_small = 0.05;
  double pair_small_tol = 1e-3;
  long long pair_samples = 2000;
  double pair_disk = 6.0;
  double pair_r_min = 0.2, pair_r_max = 3.0;
  int pair_bins = 14;
  double pair_se_factor = 3.0;
  double pair_variance_R = 4.0;
  double pair_variance_rel_tol = 0.01;

  long long clt_samples = 4000;
  double clt_R = 16.0;
  double clt_cone_alpha = 0.6;
  double clt_p_min = 0.01, clt_skew_max = 0.15, clt_kurt_max = 0.3;
  std::vector<double> clt_slope_R{8.0, 16.0, 32.0};
  double clt_slope_target = -0.1, clt_slope_tol = 0.05;

  double abn_alpha = 0.5;
  std::vector<double> abn_R{8.0, 16.0};
  long long abn_samples = 4000;
  double abn_stabilization = 0.2;
  double abn_p_reject = 0.01;

  long long lm_samples = 2000;
  double lm_mean_R = 6.0;
  double lm_mean_se_factor = 4.0;
  std::vector<double> lm_decay_R{4.0, 8.0, 16.0};
  double lm_decay_target = -1.0, lm_decay_tol = 0.3;
  double lm_ks_R = 16.0;
  double lm_ks_max = 0.05;

  double ai_A = kDefaultA;
  int ai_configurations = 50;
  double ai_separation = 8.0;
  double ai_side = 2.0;
  int ai_samples = 4000;
  double ai_corr_factor = 4.0;

  long long pot_samples = 2000;
  double pot_se_factor = 3.0;

  int rerun_threads = 0;  ///< 0 → primary thread count + 1

  nlohmann::ordered_json effective;
};

Settings parse_settings(const nlohmann::json& config) {
  Settings s;
  ConfigReader root(config, "verify");
  s.seed = root.get<std::uint64_t>("seed", s.seed);
  {
    auto c = root.child("jensen");
    s.jensen_samples = c.get("samples", s.jensen_samples);
    s.jensen_R = c.get("R", s.jensen_R);
    s.jensen_tol = c.get("tolerance", s.jensen_tol);
    c.finish();
    root.adopt("jensen", c);
  }
  {
    auto c = root.child("intensity_variance");
    s.intensity_samples = c.get("samples", s.intensity_samples);
    s.intensity_R = c.get("R", s.intensity_R);
    s.intensity_se_factor = c.get("mean_se_factor", s.intensity_se_factor);
    s.variance_se_factor = c.get("variance_se_factor", s.variance_se_factor);
    c.finish();
    root.adopt("intensity_variance", c);
  }
  {
    auto c = root.child("smooth_asymptotics");
    s.smooth_R = doubles(c, "R", s.smooth_R);
    s.smooth_lo = c.get("ratio_min", s.smooth_lo);
    s.smooth_hi = c.get("ratio_max", s.smooth_hi);
    c.finish();
    root.adopt("smooth_asymptotics", c);
  }
  {
    auto c = root.child("indicator_asymptotics");
    s.indicator_R = c.get("R", s.indicator_R);
    s.indicator_rel_tol = c.get("relative_tolerance", s.indicator_rel_tol);
    c.finish();
    root.adopt("indicator_asymptotics", c);
  }
  {
    auto c = root.child("spectral_density");
    s.m_large_lambda = c.get("large_lambda", s.m_large_lambda);
    s.m_large_tol = c.get("large_lambda_tolerance", s.m_large_tol);
    s.m_scan_lo = c.get("scan_min", s.m_scan_lo);
    s.m_scan_hi = c.get("scan_max", s.m_scan_hi);
    s.m_scan_points = c.get("scan_points", s.m_scan_points);
    c.finish();
    root.adopt("spectral_density", c);
  }
  {
    auto c = root.child("laguerre");
    s.laguerre_max_alpha = c.get("max_alpha", s.laguerre_max_alpha);
    s.laguerre_tol = c.get("tolerance", s.laguerre_tol);
    c.finish();
    root.adopt("laguerre", c);
  }
  {
    auto c = root.child("covariance");
    s.covariance_rho = doubles(c, "rho", s.covariance_rho);
    s.covariance_pairs = c.get("pairs", s.covariance_pairs);
    s.covariance_se_factor = c.get("se_factor", s.covariance_se_factor);
    c.finish();
    root.adopt("covariance", c);
  }
  {
    auto c = root.child("pair_correlation");
    s.pair_r_small = c.get("small_r", s.pair_r_small);
    s.pair_small_tol = c.get("small_r_tolerance", s.pair_small_tol);
    s.pair_samples = c.get("samples", s.pair_samples);
    s.pair_disk = c.get("disk", s.pair_disk);
    s.pair_r_min = c.get("r_min", s.pair_r_min);
    s.pair_r_max = c.get("r_max", s.pair_r_max);
    s.pair_bins = c.get("bins", s.pair_bins);
    s.pair_se_factor = c.get("se_factor", s.pair_se_factor);
    s.pair_variance_R = c.get("variance_R", s.pair_variance_R);
    s.pair_variance_rel_tol = c.get("variance_relative_tolerance", s.pair_variance_rel_tol);
    c.finish();
    root.adopt("pair_correlation", c);
  }
  {
    auto c = root.child("clt");
    s.clt_samples = c.get("samples", s.clt_samples);
    s.clt_R = c.get("R", s.clt_R);
    s.clt_cone_alpha = c.get("cone_alpha", s.clt_cone_alpha);
    s.clt_p_min = c.get("ks_p_min", s.clt_p_min);
    s.clt_skew_max = c.get("skewness_max", s.clt_skew_max);
    s.clt_kurt_max = c.get("excess_kurtosis_max", s.clt_kurt_max);
    s.clt_slope_R = doubles(c, "slope_R", s.clt_slope_R);
    s.clt_slope_target = c.get("slope_target", s.clt_slope_target);
    s.clt_slope_tol = c.get("slope_tolerance", s.clt_slope_tol);
    c.finish();
    root.adopt("clt", c);
  }
  {
    auto c = root.child("abnormal");
    s.abn_alpha = c.get("alpha", s.abn_alpha);
    s.abn_R = doubles(c, "R", s.abn_R);
    s.abn_samples = c.get("samples", s.abn_samples);
    s.abn_stabilization = c.get("stabilization_tolerance", s.abn_stabilization);
    s.abn_p_reject = c.get("ks_p_reject", s.abn_p_reject);
    c.finish();
    root.adopt("abnormal", c);
  }
  {
    auto c = root.child("log_minus");
    s.lm_samples = c.get("samples", s.lm_samples);
    s.lm_mean_R = c.get("mean_R", s.lm_mean_R);
    s.lm_mean_se_factor = c.get("mean_se_factor", s.lm_mean_se_factor);
    s.lm_decay_R = doubles(c, "decay_R", s.lm_decay_R);
    s.lm_decay_target = c.get("decay_target", s.lm_decay_target);
    s.lm_decay_tol = c.get("decay_tolerance", s.lm_decay_tol);
    s.lm_ks_R = c.get("ks_R", s.lm_ks_R);
    s.lm_ks_max = c.get("ks_distance_max", s.lm_ks_max);
    c.finish();
    root.adopt("log_minus", c);
  }
  {
    auto c = root.child("almost_independence");
    s.ai_A = c.get("A", s.ai_A);
    s.ai_configurations = c.get("configurations", s.ai_configurations);
    s.ai_separation = c.get("separation", s.ai_separation);
    s.ai_side = c.get("square_side", s.ai_side);
    s.ai_samples = c.get("samples", s.ai_samples);
    s.ai_corr_factor = c.get("correlation_factor", s.ai_corr_factor);
    c.finish();
    root.adopt("almost_independence", c);
  }
  {
    auto c = root.child("potential");
    s.pot_samples = c.get("samples", s.pot_samples);
    s.pot_se_factor = c.get("se_factor", s.pot_se_factor);
    c.finish();
    root.adopt("potential", c);
  }
  {
    auto c = root.child("determinism");
    s.rerun_threads = c.get("rerun_threads", s.rerun_threads);
    c.finish();
    root.adopt("determinism", c);
  }
  root.finish();
  s.effective = root.effective();
  return s;
}

struct Context {
  const Settings& s;
  Provenance prov;
  std::filesystem::path dir;
  EnsembleOptions ens;
  int threads = 1;

  std::uint64_t seed(int id) const { return derive_seed(s.seed, id); }
  void csv(const std::string& name, const CsvTable& t) const { write_csv(dir / name, prov, t); }
  void json(const std::string& name, const nlohmann::ordered_json& body) const {
    write_json(dir / name, prov, body);
  }
};

CriterionResult make(int id, std::string title, CriterionKind kind) {
  CriterionResult r;
  r.id = id;
  r.title = std::move(title);
  r.kind = kind;
  r.details = nlohmann::ordered_json::object();
  return r;
}

// ---- 1 -----------------------------------------------------------------------

CriterionResult c01_jensen(const Context& ctx) {
  auto r = make(1, "Jensen completeness", CriterionKind::kNumerical);
  const auto& s = ctx.s;
  const auto n = static_cast<std::size_t>(s.jensen_samples);
  std::vector<JensenResult> res(n);
  std::vector<std::string> failure(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    try {
      const GefSample g = GefSample::draw_for_radius(ctx.seed(1), i, s.jensen_R + 2.0);
      const ZeroSet zs = find_zeros_disk(g, 0.0, s.jensen_R + 1.0);
      res[i] = jensen_check_nudged(g, zs, s.jensen_R);
    } catch (const std::exception& e) {
      failure[i] = e.what();
    }
  });
  CsvTable t({"sample_index", "radius", "zeros_inside", "left", "right", "discrepancy", "error"});
  double worst = 0.0;
  int failed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!failure[i].empty()) {
      ++failed;
      t.add_row({std::to_string(i), "", "", "", "", "", failure[i]});
      continue;
    }
    const double d = std::abs(res[i].discrepancy);
    worst = std::max(worst, d);
    if (!(d < s.jensen_tol)) ++failed;
    t.add_row({std::to_string(i), num(res[i].radius), std::to_string(res[i].zeros_inside),
               num(res[i].left), num(res[i].right), num(res[i].discrepancy), ""});
  }
  ctx.csv("c01_jensen.csv", t);
  r.passed = failed == 0;
  r.details["samples"] = s.jensen_samples;
  r.details["max_discrepancy"] = worst;
  r.details["tolerance"] = s.jensen_tol;
  r.details["failed_samples"] = failed;
  r.summary = "max |discrepancy| " + fmt("%.3e", worst) + " (tol " + fmt("%.0e", s.jensen_tol) +
              "), " + std::to_string(failed) + " failing samples";
  return r;
}

// ---- 2, 3 --------------------------------------------------------------------

std::vector<CriterionResult> c02_c03_indicator(const Context& ctx) {
  const auto& s = ctx.s;
  const TestFunction h = indicator_disk();
  const EnsembleSummary e = run_ensemble(h, s.intensity_R, s.intensity_samples, ctx.seed(2), ctx.ens);
  const double mean_theory = s.intensity_R * s.intensity_R;
  const double mean_se = std::sqrt(e.variance / static_cast<double>(e.n_samples));
  const double exact = variance_exact(h, s.intensity_R);
  const double var_se = bootstrap_variance_se(e.values, ctx.seed(2));

  CsvTable t({"sample_index", "zero_count"});
  for (std::size_t i = 0; i < e.values.size(); ++i) t.add_row({std::to_string(i), num(e.values[i])});
  ctx.csv("c02_zero_counts.csv", t);

  auto r2 = make(2, "First intensity", CriterionKind::kStatistical);
  const double z2 = (e.mean - mean_theory) / mean_se;
  r2.passed = std::abs(z2) <= s.intensity_se_factor;
  r2.details["samples"] = e.n_samples;
  r2.details["aborted"] = e.aborted_indices.size();
  r2.details["mean"] = e.mean;
  r2.details["mean_theory"] = mean_theory;
  r2.details["standard_error"] = mean_se;
  r2.details["z"] = z2;
  r2.summary = "mean count " + fmt("%.4f", e.mean) + " vs " + fmt("%.1f", mean_theory) + " (z " +
               fmt("%+.2f", z2) + ", limit " + fmt("%.0f", s.intensity_se_factor) + ")";

  auto r3 = make(3, "Variance formula vs Monte Carlo", CriterionKind::kStatistical);
  const double z3 = (e.variance - exact) / var_se;
  r3.passed = std::abs(z3) <= s.variance_se_factor;
  r3.details["variance_mc"] = e.variance;
  r3.details["variance_exact"] = exact;
  r3.details["bootstrap_se"] = var_se;
  r3.details["z"] = z3;
  r3.summary = "MC variance " + fmt("%.4f", e.variance) + " vs exact " + fmt("%.4f", exact) +
               " (z " + fmt("%+.2f", z3) + " bootstrap SE)";
  ctx.json("c02_c03_indicator.json", {{"intensity", r2.details}, {"variance", r3.details}});
  return {r2, r3};
}

// ---- 4 -----------------------------------------------------------------------

CriterionResult c04_smooth(const Context& ctx) {
  auto r = make(4, "Smooth asymptotics (Gaussian bump)", CriterionKind::kNumerical);
  const TestFunction h = gaussian_bump();
  CsvTable t({"R", "variance_exact", "asymptotic", "ratio"});
  std::vector<double> ratios;
  for (double R : ctx.s.smooth_R) {
    const double v = variance_exact(h, R);
    const double a = asymptotic_smooth(h, R);
    ratios.push_back(v / a);
    t.add_row({num(R), num(v), num(a), num(v / a)});
  }
  ctx.csv("c04_smooth_asymptotics.csv", t);
  bool monotone = true;
  for (std::size_t i = 1; i < ratios.size(); ++i) monotone &= ratios[i] > ratios[i - 1];
  const double last = ratios.back();
  r.passed = monotone && last >= ctx.s.smooth_lo && last <= ctx.s.smooth_hi;
  r.details["ratios"] = ratios;
  r.details["monotone"] = monotone;
  r.summary = "ratio at R=" + fmt("%g", ctx.s.smooth_R.back()) + " is " + fmt("%.5f", last) +
              (monotone ? ", monotone" : ", NOT monotone");
  return r;
}

// ---- 5 -----------------------------------------------------------------------

CriterionResult c05_indicator_asymptotics(const Context& ctx) {
  auto r = make(5, "Indicator boundary asymptotics", CriterionKind::kNumerical);
  const double R = ctx.s.indicator_R;
  const double v = variance_exact(indicator_disk(), R);
  const double a = asymptotic_indicator(2.0 * kPi, R);
  const double rel = std::abs(v / a - 1.0);
  r.passed = rel <= ctx.s.indicator_rel_tol;
  r.details = {{"R", R}, {"variance_exact", v}, {"asymptotic", a}, {"relative_error", rel}};
  ctx.json("c05_indicator_asymptotics.json", r.details);
  r.summary = "exact " + fmt("%.6f", v) + " vs " + fmt("%.6f", a) + " (rel " + fmt("%.2e", rel) + ")";
  return r;
}

// ---- 6 -----------------------------------------------------------------------

CriterionResult c06_spectral(const Context& ctx) {
  auto r = make(6, "Spectral density properties", CriterionKind::kNumerical);
  const auto& s = ctx.s;
  const double m0 = spectral_density_M(0.0);
  const double mL = spectral_density_M(s.m_large_lambda);
  const double large_err = std::abs(mL - 1.0 / kPi);
  CsvTable t({"lambda", "M", "ratio"});
  double lo = INFINITY, hi = -INFINITY;
  const int n = std::max(2, s.m_scan_points);
  for (int i = 0; i < n; ++i) {
    const double lam = s.m_scan_lo * std::pow(s.m_scan_hi / s.m_scan_lo, i / double(n - 1));
    const double m = spectral_density_M(lam);
    const double ratio = m / std::min(std::pow(lam, 4), 1.0);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    t.add_row({num(lam), num(m), num(ratio)});
  }
  ctx.csv("c06_spectral_density.csv", t);
  const double slack = 1e-9;
  const bool in_band = lo >= kMLowerRatio * (1.0 - slack) && hi <= kMUpperRatio * (1.0 + slack);
  r.passed = m0 == 0.0 && large_err < s.m_large_tol && in_band;
  r.details = {{"M0", m0},          {"M_large", mL},         {"large_error", large_err},
               {"ratio_min", lo},   {"ratio_max", hi},       {"frozen_lower", kMLowerRatio},
               {"frozen_upper", kMUpperRatio}};
  r.summary = "M(0)=" + fmt("%g", m0) + ", |M(" + fmt("%g", s.m_large_lambda) + ")-1/pi|=" +
              fmt("%.2e", large_err) + ", ratio range [" + fmt("%.6f", lo) + ", " +
              fmt("%.4f", hi) + "]";
  return r;
}

// ---- 7 -----------------------------------------------------------------------

CriterionResult c07_laguerre(const Context& ctx) {
  auto r = make(7, "Laguerre coefficients", CriterionKind::kNumerical);
  CsvTable t({"alpha", "closed_form", "quadrature", "abs_error"});
  double worst = 0.0;
  for (int a = 0; a <= ctx.s.laguerre_max_alpha; ++a) {
    const double c = laguerre_coefficient(a);
    const double q = laguerre_coefficient_oracle(a);
    worst = std::max(worst, std::abs(c - q));
    t.add_row({std::to_string(a), num(c), num(q), num(std::abs(c - q))});
  }
  ctx.csv("c07_laguerre.csv", t);
  const double c0_err = std::abs(laguerre_coefficient(0) + 0.5 * kEulerGamma);
  r.passed = worst < ctx.s.laguerre_tol && c0_err < ctx.s.laguerre_tol;
  r.details = {{"max_error", worst}, {"c0_error", c0_err}};
  r.summary = "max |closed - quadrature| " + fmt("%.2e", worst) + ", |c0 + gamma/2| " +
              fmt("%.2e", c0_err);
  return r;
}

// ---- 8 -----------------------------------------------------------------------

CriterionResult c08_covariance(const Context& ctx) {
  auto r = make(8, "Log-modulus covariance", CriterionKind::kStatistical);
  CsvTable t({"rho", "mc", "standard_error", "dilog_over_4", "z"});
  bool ok = true;
  double worst = 0.0;
  for (std::size_t i = 0; i < ctx.s.covariance_rho.size(); ++i) {
    const double rho = ctx.s.covariance_rho[i];
    const ProbeEstimate p =
        correlated_gaussian_covariance_probe(rho, ctx.s.covariance_pairs, ctx.seed(8) + i);
    const double ref = log_modulus_covariance(rho);
    const double z = (p.value - ref) / p.standard_error;
    worst = std::max(worst, std::abs(z));
    ok &= std::abs(z) <= ctx.s.covariance_se_factor;
    t.add_row({num(rho), num(p.value), num(p.standard_error), num(ref), num(z)});
  }
  ctx.csv("c08_covariance.csv", t);
  r.passed = ok;
  r.details = {{"max_abs_z", worst}};
  r.summary = "max |z| " + fmt("%.2f", worst) + " over " +
              std::to_string(ctx.s.covariance_rho.size()) + " correlations";
  return r;
}

// ---- 9 -----------------------------------------------------------------------

CriterionResult c09_pair(const Context& ctx) {
  auto r = make(9, "Pair correlation", CriterionKind::kStatistical);
  const auto& s = ctx.s;
  const double d_small = pair_correlation_smooth(s.pair_r_small).smooth_density;
  const double small_err = std::abs(d_small + 1.0 / (kPi * kPi));
  const auto bins = pair_correlation_histogram(s.pair_samples, s.pair_disk, s.pair_r_min,
                                               s.pair_r_max, s.pair_bins, ctx.seed(9), ctx.ens);
  CsvTable t({"r_lo", "r_hi", "estimate", "standard_error", "theory", "z"});
  double worst = 0.0;
  int outside = 0;
  for (const auto& b : bins) {
    const double z = (b.estimate - b.theory) / b.standard_error;
    worst = std::max(worst, std::abs(z));
    if (std::abs(z) > s.pair_se_factor) ++outside;
    t.add_row({num(b.r_lo), num(b.r_hi), num(b.estimate), num(b.standard_error), num(b.theory), num(z)});
  }
  ctx.csv("c09_pair_histogram.csv", t);
  const TestFunction g = gaussian_bump();
  const double vp = variance_from_pair_measure(g, s.pair_variance_R);
  const double ve = variance_exact(g, s.pair_variance_R);
  const double rel = std::abs(vp / ve - 1.0);
  // The histogram is the only statistical part; the other two are deterministic.
  const bool numeric_ok = small_err < s.pair_small_tol && rel < s.pair_variance_rel_tol;
  if (!numeric_ok) r.kind = CriterionKind::kNumerical;
  r.passed = numeric_ok && outside == 0;
  r.details = {{"d_small_r", d_small},
               {"small_r_error", small_err},
               {"bins_outside", outside},
               {"max_abs_z", worst},
               {"variance_pair_measure", vp},
               {"variance_exact", ve},
               {"variance_relative_error", rel}};
  ctx.json("c09_pair_correlation.json", r.details);
  r.summary = "|d(" + fmt("%g", s.pair_r_small) + ")+1/pi^2| " + fmt("%.2e", small_err) + ", " +
              std::to_string(outside) + "/" + std::to_string(bins.size()) +
              " bins beyond limit (max |z| " + fmt("%.2f", worst) + "), pair-measure variance rel " +
              fmt("%.2e", rel);
  return r;
}

// ---- 10, 11 ------------------------------------------------------------------

nlohmann::ordered_json clt_json(const CltRow& c) {
  nlohmann::ordered_json j;
  j["R"] = c.R;
  j["n"] = c.n;
  j["mean"] = c.mean;
  j["mean_theory"] = c.mean_theory;
  j["variance"] = c.variance;
  j["variance_exact"] = c.variance_exact;
  j["variance_se"] = c.variance_se;
  j["skewness"] = c.skewness;
  j["excess_kurtosis"] = c.excess_kurtosis;
  j["ks_statistic"] = c.ks_statistic;
  j["ks_p_value"] = c.ks_p_value;
  j["holder_diagnostic"] = c.holder_diagnostic ? nlohmann::ordered_json(*c.holder_diagnostic)
                                               : nlohmann::ordered_json(nullptr);
  return j;
}

nlohmann::ordered_json abnormal_json(const AbnormalRow& a) {
  nlohmann::ordered_json j;
  j["R"] = a.R;
  j["n"] = a.n;
  j["mean"] = a.mean;
  j["mean_theory"] = a.mean_theory;
  j["sigma_mc"] = a.sigma_mc;
  j["sigma_exact"] = std::sqrt(a.variance_exact);
  j["scaled_sigma"] = a.scaled_sigma;
  j["skewness"] = a.skewness;
  j["excess_kurtosis"] = a.excess_kurtosis;
  j["ks_statistic"] = a.ks_statistic;
  j["ks_p_value"] = a.ks_p_value;
  j["ks_statistic_empirical"] = a.ks_statistic_empirical;
  j["ks_p_value_empirical"] = a.ks_p_value_empirical;
  return j;
}

void standardized_csv(const Context& ctx, const std::string& name, const std::vector<double>& z) {
  CsvTable t({"sample_index", "standardized"});
  for (std::size_t i = 0; i < z.size(); ++i) t.add_row({std::to_string(i), num(z[i])});
  ctx.csv(name, t);
}

std::vector<CriterionResult> c10_c11_normality(const Context& ctx, bool want10, bool want11) {
  const auto& s = ctx.s;
  std::vector<CriterionResult> out;
  const TestFunction bump = smooth_bump();
  // The smooth-bump ensemble is shared: it is the CLT subject of 10 and the
  // control of 11 (same seed, same pipeline, same size).
  std::optional<EnsembleSummary> bump_ens;
  if (want10 || want11) bump_ens = run_ensemble(bump, s.clt_R, s.clt_samples, ctx.seed(10), ctx.ens);

  if (want10) {
    auto r = make(10, "CLT for smooth and Hölder test functions", CriterionKind::kStatistical);
    const TestFunction c = cone(s.clt_cone_alpha);
    const CltRow rb = clt_row(bump, *bump_ens, ctx.seed(10));
    const CltRow rc = clt_row(c, run_ensemble(c, s.clt_R, s.clt_samples, ctx.seed(10), ctx.ens),
                              ctx.seed(10));
    auto gate = [&](const CltRow& row) {
      return row.ks_p_value > s.clt_p_min && std::abs(row.skewness) < s.clt_skew_max &&
             std::abs(row.excess_kurtosis) < s.clt_kurt_max;
    };
    std::vector<double> sig;
    CsvTable t({"R", "sigma_exact"});
    for (double R : s.clt_slope_R) {
      sig.push_back(std::sqrt(variance_exact(c, R)));
      t.add_row({num(R), num(sig.back())});
    }
    ctx.csv("c10_cone_sigma.csv", t);
    const double slope = loglog_slope(s.clt_slope_R, sig);
    const bool slope_ok = std::abs(slope - s.clt_slope_target) <= s.clt_slope_tol;
    r.passed = gate(rb) && gate(rc) && slope_ok;
    r.details["smooth_bump"] = clt_json(rb);
    r.details["cone"] = clt_json(rc);
    r.details["cone_sigma_slope"] = slope;
    ctx.json("c10_clt.json", r.details);
    standardized_csv(ctx, "c10_smooth_bump_standardized.csv", rb.standardized);
    standardized_csv(ctx, "c10_cone_standardized.csv", rc.standardized);
    r.summary = "bump p=" + fmt("%.3f", rb.ks_p_value) + " skew " + fmt("%+.3f", rb.skewness) +
                " kurt " + fmt("%+.3f", rb.excess_kurtosis) + "; cone p=" + fmt("%.3f", rc.ks_p_value) +
                " skew " + fmt("%+.3f", rc.skewness) + " kurt " + fmt("%+.3f", rc.excess_kurtosis) +
                "; slope " + fmt("%+.4f", slope);
    out.push_back(r);
  }

  if (want11) {
    auto r = make(11, "Abnormal fluctuations", CriterionKind::kStatistical);
    const TestFunction h = abnormal(s.abn_alpha);
    std::vector<AbnormalRow> rows;
    for (double R : s.abn_R) {
      rows.push_back(abnormal_row(h, s.abn_alpha, run_ensemble(h, R, s.abn_samples, ctx.seed(11), ctx.ens)));
    }
    const AbnormalRow control = abnormal_row(bump, s.abn_alpha, *bump_ens);
    const double stab = rows.back().scaled_sigma / rows.front().scaled_sigma;
    const bool stab_ok = std::abs(stab - 1.0) <= s.abn_stabilization;
    const bool rejects = rows.back().ks_p_value < s.abn_p_reject;
    const bool control_ok = control.ks_p_value > s.abn_p_reject;
    r.passed = stab_ok && rejects && control_ok;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& a : rows) arr.push_back(abnormal_json(a));
    r.details["abnormal"] = arr;
    r.details["control"] = abnormal_json(control);
    r.details["stabilization_ratio"] = stab;
    // Same ratio from the exact variance, free of sampling noise.
    const double stab_exact = std::sqrt(std::pow(rows.back().R, 2.0 * s.abn_alpha) * rows.back().variance_exact /
                                        (std::pow(rows.front().R, 2.0 * s.abn_alpha) * rows.front().variance_exact));
    r.details["stabilization_ratio_exact"] = stab_exact;
    r.details["rejects_normality"] = rejects;
    ctx.json("c11_abnormal.json", r.details);
    standardized_csv(ctx, "c11_abnormal_standardized.csv", rows.back().standardized);
    r.summary = "R^a sigma ratio " + fmt("%.4f", stab) + " (exact " + fmt("%.4f", stab_exact) + "); abnormal KS p=" +
                fmt("%.3g", rows.back().ks_p_value) + " (needs < " + fmt("%g", s.abn_p_reject) +
                "); control p=" + fmt("%.3f", control.ks_p_value);
    out.push_back(r);
  }
  return out;
}

// ---- 12 ----------------------------------------------------------------------

CriterionResult c12_log_minus(const Context& ctx) {
  auto r = make(12, "log-minus example", CriterionKind::kStatistical);
  const auto& s = ctx.s;
  std::vector<double> Rs = s.lm_decay_R;
  Rs.push_back(s.lm_mean_R);
  Rs.push_back(s.lm_ks_R);
  std::sort(Rs.begin(), Rs.end());
  Rs.erase(std::unique(Rs.begin(), Rs.end()), Rs.end());
  const auto rows = log_minus_probe(Rs, s.lm_samples, ctx.seed(12), ctx.ens);
  CsvTable t({"R", "n", "mean", "mean_theory", "mean_se", "circle_var_mc", "circle_var_exact",
              "identity_max_error", "ks_distance_reference"});
  const LogMinusRow* mean_row = nullptr;
  const LogMinusRow* ks_row = nullptr;
  std::vector<double> dx, dy;
  for (const auto& row : rows) {
    t.add_row({num(row.R), std::to_string(row.n), num(row.mean), num(row.mean_theory), num(row.mean_se),
               num(row.circle_term_variance_mc), num(row.circle_term_variance_exact),
               num(row.identity_max_error), num(row.ks_distance_reference)});
    if (row.R == s.lm_mean_R) mean_row = &row;
    if (row.R == s.lm_ks_R) ks_row = &row;
    if (std::find(s.lm_decay_R.begin(), s.lm_decay_R.end(), row.R) != s.lm_decay_R.end()) {
      dx.push_back(row.R);
      dy.push_back(row.circle_term_variance_mc);
    }
  }
  ctx.csv("c12_log_minus.csv", t);
  const double z = (mean_row->mean - mean_row->mean_theory) / mean_row->mean_se;
  const double slope = loglog_slope(dx, dy);
  const bool ok_mean = std::abs(z) <= s.lm_mean_se_factor;
  const bool ok_decay = std::abs(slope - s.lm_decay_target) <= s.lm_decay_tol;
  const bool ok_ks = ks_row->ks_distance_reference < s.lm_ks_max;
  r.passed = ok_mean && ok_decay && ok_ks;
  r.details = {{"mean_z", z}, {"decay_exponent", slope}, {"ks_distance", ks_row->ks_distance_reference}};
  r.summary = "mean z " + fmt("%+.2f", z) + ", circle variance exponent " + fmt("%+.3f", slope) +
              ", KS distance " + fmt("%.4f", ks_row->ks_distance_reference);
  return r;
}

// ---- 13 ----------------------------------------------------------------------

CriterionResult c13_almost_independence(const Context& ctx) {
  auto r = make(13, "Almost independence skeleton", CriterionKind::kNumerical);
  const auto& s = ctx.s;
  const auto n = static_cast<std::size_t>(s.ai_configurations);
  std::vector<ConfigurationCheck> checks(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    const RandomConfiguration rc = random_configuration(ctx.seed(13), i, s.ai_A);
    checks[i] = check_configuration(rc.compacts, s.ai_A, rc.rhos);
  });
  CsvTable t({"configuration", "nets", "gram_size", "max_interaction_ratio", "bound_holds",
              "gershgorin_margin", "smallest_eigenvalue"});
  bool bound_ok = true, margin_ok = true;
  double worst_margin = INFINITY, worst_ratio = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = checks[i];
    bound_ok &= c.interaction_bound_holds;
    margin_ok &= c.gershgorin_margin > 0.0;
    worst_margin = std::min(worst_margin, c.gershgorin_margin);
    worst_ratio = std::max(worst_ratio, c.max_interaction_ratio);
    t.add_row({std::to_string(i), std::to_string(c.nets), std::to_string(c.gram_size),
               num(c.max_interaction_ratio), c.interaction_bound_holds ? "true" : "false",
               num(c.gershgorin_margin), num(c.smallest_eigenvalue)});
  }
  ctx.csv("c13_configurations.csv", t);
  const double half = 0.5 * s.ai_separation;
  const DecorrelationResult d = empirical_decorrelation(Square{{-half, 0.0}, s.ai_side},
                                                        Square{{half, 0.0}, s.ai_side},
                                                        s.ai_samples, ctx.seed(13), ctx.threads);
  const double limit = s.ai_corr_factor / std::sqrt(static_cast<double>(s.ai_samples));
  const bool corr_ok = std::abs(d.correlation) < limit;
  if (bound_ok && margin_ok && !corr_ok) r.kind = CriterionKind::kStatistical;
  r.passed = bound_ok && margin_ok && corr_ok;
  r.details = {{"configurations", s.ai_configurations},
               {"interaction_bound_holds", bound_ok},
               {"max_interaction_ratio", worst_ratio},
               {"min_gershgorin_margin", worst_margin},
               {"decorrelation", d.correlation},
               {"decorrelation_limit", limit},
               {"decorrelation_samples", d.samples}};
  ctx.json("c13_almost_independence.json", r.details);
  r.summary = "bound " + std::string(bound_ok ? "holds" : "FAILS") + " (max ratio " +
              fmt("%.2e", worst_ratio) + "), min margin " + fmt("%.3e", worst_margin) +
              ", corr " + fmt("%+.4f", d.correlation) + " (limit " + fmt("%.4f", limit) + ")";
  return r;
}

// ---- 14 ----------------------------------------------------------------------

CriterionResult c14_potential(const Context& ctx) {
  auto r = make(14, "Potential variance", CriterionKind::kStatistical);
  const auto& s = ctx.s;
  const PotentialProbe p = potential_variance_probe(s.pot_samples, ctx.seed(14), ctx.ens);
  const double z = (p.variance_mc - p.variance_exact) / p.variance_se;
  const double C = potential_variance_bound_constant();
  CsvTable t({"test_function", "variance", "bound", "ratio"});
  bool bound_ok = true;
  const std::vector<std::pair<std::string, double>> names = {
      {"indicator", 0.0}, {"gaussian", 0.0}, {"cone", 0.6},
      {"abnormal", 0.5},  {"log_minus", 0.0}, {"smooth_bump", 0.0}};
  for (const auto& [name, param] : names) {
    const TestFunction g = builtin(name, param);
    const double v = potential_variance_exact(g);
    const double b = C * g.l2_norm() * g.l2_norm();
    bound_ok &= v <= b;
    t.add_row({g.name(), num(v), num(b), num(v / b)});
  }
  ctx.csv("c14_potential_bound.csv", t);
  const bool mc_ok = std::abs(z) <= s.pot_se_factor;
  if (!bound_ok) r.kind = CriterionKind::kNumerical;
  r.passed = mc_ok && bound_ok;
  r.details = {{"variance_mc", p.variance_mc}, {"variance_se", p.variance_se},
               {"variance_exact", p.variance_exact}, {"z", z},
               {"mean_mc", p.mean_mc}, {"mean_theory", p.mean_theory},
               {"bound_constant", C}, {"bound_holds", bound_ok}};
  ctx.json("c14_potential.json", r.details);
  r.summary = "MC " + fmt("%.4f", p.variance_mc) + " vs spectral " + fmt("%.4f", p.variance_exact) +
              " (z " + fmt("%+.2f", z) + "), bound (pi/4)zeta(3)=" + fmt("%.4f", C) +
              (bound_ok ? " holds" : " FAILS");
  return r;
}

std::vector<CriterionResult> run_criteria(const Settings& s, const std::set<int>& only,
                                          int threads, const std::filesystem::path& dir,
                                          const Provenance& prov,
                                          const std::function<void(const CriterionResult&)>& cb) {
  Context ctx{s, prov, dir, {}, threads};
  ctx.ens.threads = threads;
  auto want = [&](int id) { return only.empty() || only.count(id) > 0; };
  std::vector<CriterionResult> out;
  auto push = [&](CriterionResult r) {
    if (cb) cb(r);
    out.push_back(std::move(r));
  };
  auto guarded = [&](int id, const std::string& title, auto&& fn) {
    try {
      for (auto& r : fn()) push(std::move(r));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      auto r = make(id, title, CriterionKind::kNumerical);
      r.passed = false;
      r.summary = std::string("error: ") + e.what();
      push(std::move(r));
    }
  };
  using V = std::vector<CriterionResult>;
  if (want(1)) guarded(1, "Jensen completeness", [&] { return V{c01_jensen(ctx)}; });
  if (want(2) || want(3)) {
    guarded(2, "First intensity / variance", [&] {
      V v = c02_c03_indicator(ctx);
      V keep;
      for (auto& r : v)
        if (want(r.id)) keep.push_back(std::move(r));
      return keep;
    });
  }
  if (want(4)) guarded(4, "Smooth asymptotics", [&] { return V{c04_smooth(ctx)}; });
  if (want(5)) guarded(5, "Indicator asymptotics", [&] { return V{c05_indicator_asymptotics(ctx)}; });
  if (want(6)) guarded(6, "Spectral density", [&] { return V{c06_spectral(ctx)}; });
  if (want(7)) guarded(7, "Laguerre coefficients", [&] { return V{c07_laguerre(ctx)}; });
  if (want(8)) guarded(8, "Log-modulus covariance", [&] { return V{c08_covariance(ctx)}; });
  if (want(9)) guarded(9, "Pair correlation", [&] { return V{c09_pair(ctx)}; });
  if (want(10) || want(11)) {
    guarded(10, "Normality / abnormality", [&] { return c10_c11_normality(ctx, want(10), want(11)); });
  }
  if (want(12)) guarded(12, "log-minus example", [&] { return V{c12_log_minus(ctx)}; });
  if (want(13)) guarded(13, "Almost independence", [&] { return V{c13_almost_independence(ctx)}; });
  if (want(14)) guarded(14, "Potential variance", [&] { return V{c14_potential(ctx)}; });
  return out;
}

nlohmann::ordered_json verdict_json(const std::vector<CriterionResult>& rs) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rs) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["title"] = r.title;
    j["kind"] = r.kind == CriterionKind::kNumerical ? "numerical" : "statistical";
    j["passed"] = r.passed;
    j["summary"] = r.summary;
    j["details"] = r.details;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace

std::string output_body(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto ext = file.extension().string();
  if (ext == ".json") {
    auto j = nlohmann::ordered_json::parse(text);
    if (j.is_object()) j.erase("provenance");
    return j.dump(2);
  }
  if (ext == ".csv") {
    std::string out;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (!line.empty() && line[0] == '#') continue;
      out += line;
      out += '\n';
    }
    return out;
  }
  if (ext == ".svg" && text.rfind("<!--", 0) == 0) {
    const auto end = text.find("-->");
    return end == std::string::npos ? text : text.substr(end + 3);
  }
  return text;
}

std::vector<std::string> compare_output_dirs(const std::filesystem::path& a,
                                             const std::filesystem::path& b) {
  namespace fs = std::filesystem;
  auto list = [](const fs::path& root) {
    std::set<std::string> names;
    if (!fs::exists(root)) return names;
    for (const auto& e : fs::directory_iterator(root)) {
      if (!e.is_regular_file()) continue;
      const auto ext = e.path().extension().string();
      if (ext == ".csv" || ext == ".json") names.insert(e.path().filename().string());
    }
    return names;
  };
  const auto na = list(a), nb = list(b);
  std::set<std::string> all = na;
  all.insert(nb.begin(), nb.end());
  std::vector<std::string> differ;
  for (const auto& n : all) {
    if (!na.count(n) || !nb.count(n) || output_body(a / n) != output_body(b / n)) differ.push_back(n);
  }
  return differ;
}

VerifyReport run_verify(const nlohmann::json& config, const VerifyOptions& options) {
  Settings s = parse_settings(config);
  if (options.seed) {
    s.seed = *options.seed;
    s.effective["seed"] = s.seed;
  }
  Provenance prov;
  prov.command = "verify";
  prov.master_seed = s.seed;
  prov.config_hash = config_hash(nlohmann::json::parse(s.effective.dump()));
  prov.effective_config = s.effective;

  const int threads = options.threads > 0 ? options.threads : default_threads();
  std::set<int> primary = options.only;
  primary.erase(15);
  const bool want15 = options.only.empty() || options.only.count(15);
  if (!options.only.empty() && primary.empty() && want15) {
    for (int i = 1; i <= 14; ++i) primary.insert(i);
  }

  // Stale outputs of an earlier run would otherwise enter the comparison.
  if (std::filesystem::exists(options.out_dir)) {
    for (const auto& e : std::filesystem::directory_iterator(options.out_dir)) {
      const auto name = e.path().filename().string();
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".csv" || ext == ".json") &&
          (name == "verdict.json" || (name.size() > 3 && name[0] == 'c' && std::isdigit(name[1])))) {
        std::filesystem::remove(e.path());
      }
    }
  }

  VerifyReport report;
  report.criteria = run_criteria(s, primary, threads, options.out_dir, prov, options.on_result);

  if (want15) {
    auto r = make(15, "Determinism across thread counts", CriterionKind::kNumerical);
    const int rerun = s.rerun_threads > 0 && s.rerun_threads != threads ? s.rerun_threads : threads + 1;
    const auto rerun_dir = options.out_dir / "rerun";
    std::filesystem::remove_all(rerun_dir);
    const auto again = run_criteria(s, primary, rerun, rerun_dir, prov, {});
    const auto differ = compare_output_dirs(options.out_dir, rerun_dir);
    bool same_verdicts = again.size() == report.criteria.size();
    for (std::size_t i = 0; same_verdicts && i < again.size(); ++i) {
      same_verdicts = again[i].passed == report.criteria[i].passed &&
                      again[i].details.dump() == report.criteria[i].details.dump();
    }
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(options.out_dir)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".csv" || ext == ".json")) ++files;
    }
    r.passed = differ.empty() && same_verdicts;
    r.details = {{"threads_primary", threads},
                 {"threads_rerun", rerun},
                 {"files_compared", files},
                 {"differing_files", differ},
                 {"verdicts_identical", same_verdicts}};
    r.summary = std::to_string(files) + " CSV/JSON files compared (threads " + std::to_string(threads) +
                " vs " + std::to_string(rerun) + "), " + std::to_string(differ.size()) + " differ";
    if (options.on_result) options.on_result(r);
    report.criteria.push_back(std::move(r));
  }

  nlohmann::ordered_json body;
  body["all_passed"] = report.all_passed();
  body["exit_code"] = report.exit_code();
  // Thread counts live only in criterion 15, which is not part of the compared set.
  body["criteria"] = verdict_json(report.criteria);
  write_json(options.out_dir / "verdict.json", prov, body);
  return report;
}

}  // namespace gefz
