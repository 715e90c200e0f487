#include "gefz/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gefz/almost_indep.hpp"
#include "gefz/correlation.hpp"
#include "gefz/ensemble.hpp"
#include "gefz/gef.hpp"
#include "gefz/parallel.hpp"
#include "gefz/report.hpp"
#include "gefz/spectral.hpp"
#include "gefz/verify.hpp"
#include "gefz/zeros.hpp"

namespace gefz {

namespace fs = std::filesystem;

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"sample",   "zeros",        "variance",
                                                 "pair-correlation", "normality", "abnormal",
                                                 "almost-indep", "verify",     "report"};
  return names;
}

namespace {

constexpr std::uint64_t kDefaultSeed = 1;

std::string num(double v) { return csv_number(v); }

struct Run {
  ConfigReader root;
  CommandOptions options;
  std::string command;
  std::uint64_t seed = kDefaultSeed;

  Run(const nlohmann::json& config, const CommandOptions& o, std::string name)
      : root(config, name), options(o), command(std::move(name)) {
    seed = root.get<std::uint64_t>("seed", kDefaultSeed);
    if (options.seed) seed = *options.seed;
  }

  // Finishes schema validation and freezes the provenance block.
  Provenance provenance() {
    root.finish();
    nlohmann::ordered_json eff = root.effective();
    eff["seed"] = seed;
    Provenance p;
    p.command = command;
    p.master_seed = seed;
    p.config_hash = config_hash(nlohmann::json::parse(eff.dump()));
    p.effective_config = eff;
    return p;
  }

  EnsembleOptions ensemble() const {
    EnsembleOptions e;
    e.threads = options.threads;
    return e;
  }
  fs::path out(const std::string& name) const { return options.out_dir / name; }
};

TestFunction read_test_function(ConfigReader& parent, const std::string& default_name,
                                double default_param = 0.5) {
  ConfigReader c = parent.child("test_function");
  const auto name = c.get<std::string>("name", default_name);
  const auto param = c.get<double>("param", default_param);
  const auto grid = c.get<std::string>("grid_file", "");
  c.finish();
  parent.adopt("test_function", c);
  if (!grid.empty()) {
    std::ifstream in(grid);
    if (!in) throw ConfigError("cannot open grid file " + grid);
    try {
      return load_grid_function(in, name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("grid file: ") + e.what());
    }
  }
  try {
    return builtin(name, param);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void require_positive(double v, const std::string& what) {
  if (!(v > 0.0)) throw ConfigError(what + " must be positive");
}

std::string r_tag(double R) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", R);
  return buf;
}

// ---- sample / zeros ------------------------------------------------------------

int cmd_sample(const nlohmann::json& config, const CommandOptions& o) {
  Run run(config, o, "sample");
  const int n = run.root.get("samples", 4);
  const double R = run.root.get("R", 6.0);
  const double tail = run.root.get("tail_tolerance", kDefaultTailTolerance);
  const bool zeros = run.root.get("write_zeros", true);
  require_positive(R, "R");
  require_positive(tail, "tail_tolerance");
  if (n <= 0) throw ConfigError("samples must be positive");
  const Provenance p = run.provenance();

  std::vector<GefSample> samples;
  for (int i = 0; i < n; ++i) samples.push_back(GefSample::draw_for_radius(run.seed, i, R + 1.0, tail));
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : samples) arr.push_back(nlohmann::ordered_json::parse(to_json(s).dump()));
  write_json(run.out("samples.json"), p, {{"samples", arr}});
  if (zeros) {
    std::vector<ZeroSet> zs(samples.size());
    parallel_for(samples.size(), o.threads,
                 [&](std::size_t i) { zs[i] = find_zeros_disk(samples[i], 0.0, R); });
    std::ostringstream body;
    for (std::size_t i = 0; i < zs.size(); ++i) write_zeros_csv(body, static_cast<long long>(i), zs[i], i == 0);
    atomic_write(run.out("zeros.csv"), provenance_csv_header(p) + body.str());
  }
  std::cout << "wrote " << n << " samples to " << o.out_dir.string() << "\n";
  return kExitPass;
}

int cmd_zeros(const nlohmann::json& config, const CommandOptions& o) {
  Run run(config, o, "zeros");
  const int n = run.root.get("samples", 10);
  const double R = run.root.get("R", 6.0);
  const auto c = run.root.get<std::vector<double>>("center", {0.0, 0.0});
  require_positive(R, "R");
  if (n <= 0) throw ConfigError("samples must be positive");
  if (c.size() != 2) throw ConfigError("center must be [x, y]");
  const Provenance p = run.provenance();
  const cplx center(c[0], c[1]);
  const double valid = std::abs(center) + R + 1.0;

  std::vector<ZeroSet> zs(static_cast<std::size_t>(n));
  parallel_for(zs.size(), o.threads, [&](std::size_t i) {
    zs[i] = find_zeros_disk(GefSample::draw_for_radius(run.seed, i, valid), center, R);
  });
  std::ostringstream body;
  CsvTable summary({"sample_index", "zeros", "validated_count", "expected"});
  for (std::size_t i = 0; i < zs.size(); ++i) {
    write_zeros_csv(body, static_cast<long long>(i), zs[i], i == 0);
    summary.add_row({std::to_string(i), std::to_string(zs[i].zeros.size()),
                     std::to_string(zs[i].validated_count), num(R * R)});
  }
  atomic_write(run.out("zeros.csv"), provenance_csv_header(p) + body.str());
  write_csv(run.out("zeros_summary.csv"), p, summary);
  std::cout << "extracted zeros of " << n << " samples on |z - c| < " << R << "\n";
  return kExitPass;
}

// ---- variance ------------------------------------------------------------------

int cmd_variance(const nlohmann::json& config, const CommandOptions& o) {
  Run run(config, o, "variance");
  const TestFunction h = read_test_function(run.root, "indicator");
  const auto Rs = run.root.get<std::vector<double>>("R", {2.0, 4.0, 8.0});
  const long long mc = run.root.get<long long>("mc_samples", 0);
  const double tol = run.root.get("tolerance", 1e-8);
  for (double R : Rs) require_positive(R, "R");
  if (Rs.empty()) throw ConfigError("R list is empty");
  if (mc != 0 && mc < 100) throw ConfigError("mc_samples must be 0 or at least 100");
  const Provenance p = run.provenance();

  std::vector<VarianceReport> rows;
  for (double R : Rs) {
    VarianceReport r = variance_report(h, R);
    if (r.exact_error > tol * r.exact) {
      std::cerr << "gefz: variance at R=" << R << " has error " << r.exact_error << "\n";
      return kExitNumerical;
    }
    if (mc > 0) {
      const EnsembleSummary e = run_ensemble(h, R, mc, run.seed, run.ensemble());
      r.mc_estimate = e.variance;
      r.mc_standard_error = bootstrap_variance_se(e.values, run.seed);
    }
    rows.push_back(r);
  }
  std::ostringstream body;
  write_variance_csv_header(body);
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  SvgSeries exact{"exact", {}, "#1f77b4", true, true, {}};
  SvgSeries lower{"lower bound", {}, "#2ca02c", false, true, {}};
  SvgSeries upper{"upper bound", {}, "#d62728", false, true, {}};
  SvgSeries asym{"asymptotic", {}, "#9467bd", false, true, {}};
  for (const auto& r : rows) {
    write_variance_csv_row(body, r);
    arr.push_back(to_json(r));
    exact.points.push_back({r.R, r.exact});
    lower.points.push_back({r.R, r.lower_bound});
    upper.points.push_back({r.R, r.upper_bound});
    if (r.asymptotic_prediction) asym.points.push_back({r.R, *r.asymptotic_prediction});
  }
  atomic_write(run.out("variance.csv"), provenance_csv_header(p) + body.str());
  write_json(run.out("variance.json"), p, {{"test_function", h.name()}, {"rows", arr}});
  std::vector<SvgSeries> series{exact, lower, upper};
  if (!asym.points.empty()) series.push_back(asym);
  write_svg(run.out("variance.svg"), p,
            svg_plot("Variance of n(R, " + h.name() + ")", "R", "variance", series, true, true));
  std::cout << "variance table with " << rows.size() << " rows written\n";
  return kExitPass;
}

// ---- pair correlation ----------------------------------------------------------

int cmd_pair_correlation(const nlohmann::json& config, const CommandOptions& o) {
  Run run(config, o, "pair-correlation");
  const double r_max = run.root.get("r_max", 4.0);
  const int points = run.root.get("points", 200);
  ConfigReader hc = run.root.child("histogram");
  const long long samples = hc.get<long long>("samples", 0);
  const double disk = hc.get("disk", 6.0);
  const double lo = hc.get("r_min", 0.2);
  const double hi = hc.get("r_max", 3.0);
  const int bins = hc.get("bins", 14);
  hc.finish();
  run.root.adopt("histogram", hc);
  require_positive(r_max, "r_max");
  if (points < 2) throw ConfigError("points must be at least 2");
  const Provenance p = run.provenance();

  std::vector<double> radii;
  for (int i = 0; i < points; ++i) radii.push_back(r_max * (i + 1) / points);
  std::ostringstream body;
  write_pair_correlation_csv(body, radii);
  atomic_write(run.out("pair_correlation.csv"), provenance_csv_header(p) + body.str());
  SvgSeries curve{"1/pi^2 + d(r)", {}, "#1f77b4", false, true, {}};
  for (double r : radii) curve.points.push_back({r, pair_correlation_smooth(r).with_intensity});
  std::vector<SvgSeries> series{curve};
  if (samples > 0) {
    const auto hist = pair_correlation_histogram(samples, disk, lo, hi, bins, run.seed, run.ensemble());
    CsvTable t({"r_lo", "r_hi", "estimate", "standard_error", "theory"});
    SvgSeries mc{"Monte Carlo", {}, "#d62728", true, false, {}};
    for (const auto& b : hist) {
      t.add_row({num(b.r_lo), num(b.r_hi), num(b.estimate), num(b.standard_error), num(b.theory)});
      mc.points.push_back({0.5 * (b.r_lo + b.r_hi), b.estimate});
      mc.error_bars.push_back(b.standard_error);
    }
    write_csv(run.out("pair_histogram.csv"), p, t);
    series.push_back(mc);
  }
  write_svg(run.out("pair_correlation.svg"), p,
            svg_plot("Two-point intensity of GEF zeros", "r", "intensity", series));
  std::cout << "pair correlation written\n";
  return kExitPass;
}

// ---- normality / abnormal ------------------------------------------------------

int cmd_normality(const nlohmann::json& config, const CommandOptions& o) {
  Run run(config, o, "normality");
  const TestFunction h = read_test_function(run.root, "smooth_bump");
  const auto Rs = run.root.get<std::vector<double>>("R", {8.0});
  const long long n = run.root.get<long long>("samples", 1000);
  const double p_min = run.root.get("ks_p_min", 0.01);
  ConfigReader lc = run.root.child("log_minus");
  const auto lm_R = lc.get<std::vector<double>>("R", {});
  const long long lm_n = lc.get<long long>("samples", 1000);
  lc.finish();
  run.root.adopt("log_minus", lc);
  if (n < 100) throw ConfigError("samples must be at least 100");
  for (double R : Rs) require_positive(R, "R");
  const Provenance p = run.provenance();

  const auto rows = clt_probe(h, Rs, n, run.seed, run.ensemble());
  CsvTable t({"R", "n", "mean", "mean_theory", "variance", "variance_exact", "variance_se", "skewness",
              "excess_kurtosis", "ks_statistic", "ks_p_value", "holder_diagnostic", "normal_at_threshold"});
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    const bool normal = r.ks_p_value > p_min;
    t.add_row({num(r.R), std::to_string(r.n), num(r.mean), num(r.mean_theory), num(r.variance),
               num(r.variance_exact), num(r.variance_se), num(r.skewness), num(r.excess_kurtosis),
               num(r.ks_statistic), num(r.ks_p_value),
               r.holder_diagnostic ? num(*r.holder_diagnostic) : "", normal ? "true" : "false"});
    nlohmann::ordered_json j;
    j["R"] = r.R;
    j["ks_p_value"] = r.ks_p_value;
    j["skewness"] = r.skewness;
    j["excess_kurtosis"] = r.excess_kurtosis;
    j["normal_at_threshold"] = normal;
    arr.push_back(j);
    write_svg(run.out("normality_R" + r_tag(r.R) + ".svg"), p,
              svg_histogram_vs_normal("n(R, " + h.name() + "), R = " + r_tag(r.R), r.standardized));
  }
  write_csv(run.out("normality.csv"), p, t);
  nlohmann::ordered_json body{{"test_function", h.name()}, {"rows", arr}};
  if (!lm_R.empty()) {
    const auto lm = log_minus_probe(lm_R, lm_n, run.seed, run.ensemble());
    CsvTable lt({"R", "n", "mean", "mean_theory", "mean_se", "circle_var_mc", "circle_var_exact",
                 "identity_max_error", "ks_distance_reference"});
    for (const auto& r : lm) {
      lt.add_row({num(r.R), std::to_string(r.n), num(r.mean), num(r.mean_theory), num(r.mean_se),
                  num(r.circle_term_variance_mc), num(r.circle_term_variance_exact),
                  num(r.identity_max_error), num(r.ks_distance_reference)});
    }
    write_csv(run.out("log_minus.csv"), p, lt);
  }
  write_json(run.out("normality.json"), p, body);
  std::cout << "normality table with " << rows.size() << " rows written\n";
  return kExitPass;
}

int cmd_abnormal(const nlohmann::json& config, const CommandOptions& o) {
  Run run(config, o, "abnormal");
  const double alpha = run.root.get("alpha", 0.5);
  const auto Rs = run.root.get<std::vector<double>>("R", {8.0, 16.0});
  const long long n = run.root.get<long long>("samples", 1000);
  const bool control = run.root.get("control", true);
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (n < 100) throw ConfigError("samples must be at least 100");
  for (double R : Rs) require_positive(R, "R");
  const Provenance p = run.provenance();

  auto rows = abnormal_probe(alpha, Rs, n, run.seed, run.ensemble());
  const std::size_t n_abn = rows.size();
  if (control) {
    for (auto& r : abnormal_probe_for(smooth_bump(), alpha, Rs, n, run.seed, run.ensemble())) {
      rows.push_back(std::move(r));
    }
  }
  CsvTable t({"function", "R", "n", "sigma_mc", "sigma_exact", "scaled_sigma", "skewness",
              "excess_kurtosis", "ks_statistic", "ks_p_value", "ks_p_value_empirical"});
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string name = i < n_abn ? "abnormal" : "smooth_bump";
    t.add_row({name, num(r.R), std::to_string(r.n), num(r.sigma_mc), num(std::sqrt(r.variance_exact)),
               num(r.scaled_sigma), num(r.skewness), num(r.excess_kurtosis), num(r.ks_statistic),
               num(r.ks_p_value), num(r.ks_p_value_empirical)});
    arr.push_back({{"function", name}, {"R", r.R}, {"scaled_sigma", r.scaled_sigma},
                   {"ks_p_value", r.ks_p_value}, {"skewness", r.skewness},
                   {"excess_kurtosis", r.excess_kurtosis}});
    write_svg(run.out("abnormal_" + name + "_R" + r_tag(r.R) + ".svg"), p,
              svg_histogram_vs_normal(name + ", R = " + r_tag(r.R), r.standardized));
  }
  write_csv(run.out("abnormal.csv"), p, t);
  nlohmann::ordered_json body{{"alpha", alpha}, {"rows", arr}};
  if (n_abn >= 2) body["stabilization_ratio"] = rows[n_abn - 1].scaled_sigma / rows[0].scaled_sigma;
  write_json(run.out("abnormal.json"), p, body);
  std::cout << "abnormal probe written\n";
  return kExitPass;
}

// ---- almost independence --------------------------------------------------------

int cmd_almost_indep(const nlohmann::json& config, const CommandOptions& o) {
  Run run(config, o, "almost-indep");
  ConfigReader cc = run.root.child("configuration");
  // The nested record has its own strict parser; only its presence is tracked here.
  const nlohmann::json raw = config.is_object() && config.contains("configuration")
                                 ? config.at("configuration")
                                 : nlohmann::json::object();
  const int randoms = run.root.get("random_configurations", 0);
  ConfigReader dc = run.root.child("decorrelation");
  const int d_samples = dc.get("samples", 0);
  const double sep = dc.get("separation", 8.0);
  const double side = dc.get("side", 2.0);
  dc.finish();
  run.root.adopt("decorrelation", dc);
  const double A_random = run.root.get("A", kDefaultA);

  AlmostIndepConfig ai;
  if (!raw.empty()) {
    try {
      ai = almost_indep_config_from_json(raw);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  Provenance p = run.provenance();
  p.effective_config["configuration"] = nlohmann::ordered_json::parse(raw.dump());

  nlohmann::ordered_json body;
  int exit = kExitPass;
  if (!ai.compacts.empty()) {
    try {
      const ConfigurationCheck c = check_configuration(ai.compacts, ai.A, ai.rhos);
      body["configuration"] = to_json(c);
      if (!c.interaction_bound_holds || !(c.gershgorin_margin > 0.0)) exit = kExitNumerical;
    } catch (const DisjointnessError& e) {
      throw ConfigError(e.what());
    }
  }
  if (randoms > 0) {
    std::vector<ConfigurationCheck> checks(static_cast<std::size_t>(randoms));
    parallel_for(checks.size(), o.threads, [&](std::size_t i) {
      const RandomConfiguration rc = random_configuration(run.seed, i, A_random);
      checks[i] = check_configuration(rc.compacts, A_random, rc.rhos);
    });
    CsvTable t({"configuration", "nets", "gram_size", "max_interaction_ratio", "bound_holds",
                "gershgorin_margin", "smallest_eigenvalue"});
    for (std::size_t i = 0; i < checks.size(); ++i) {
      const auto& c = checks[i];
      t.add_row({std::to_string(i), std::to_string(c.nets), std::to_string(c.gram_size),
                 num(c.max_interaction_ratio), c.interaction_bound_holds ? "true" : "false",
                 num(c.gershgorin_margin), num(c.smallest_eigenvalue)});
      if (!c.interaction_bound_holds || !(c.gershgorin_margin > 0.0)) exit = kExitNumerical;
    }
    write_csv(run.out("almost_indep_configurations.csv"), p, t);
  }
  if (d_samples > 0) {
    const DecorrelationResult d = empirical_decorrelation(Square{{-0.5 * sep, 0.0}, side},
                                                          Square{{0.5 * sep, 0.0}, side}, d_samples,
                                                          run.seed, o.threads);
    body["decorrelation"] = {{"separation", sep},       {"side", side},
                             {"samples", d.samples},    {"correlation", d.correlation},
                             {"mean_a", d.mean_a},      {"mean_b", d.mean_b}};
  }
  (void)cc;
  write_json(run.out("almost_indep.json"), p, body);
  std::cout << "almost-independence checks written\n";
  return exit;
}

// ---- verify / report --------------------------------------------------------------

int cmd_verify(const nlohmann::json& config, const CommandOptions& o) {
  VerifyOptions v;
  v.seed = o.seed;
  v.threads = o.threads;
  v.out_dir = o.out_dir;
  v.on_result = [](const CriterionResult& r) {
    std::printf("[%s] criterion %2d %s: %s\n", r.passed ? "PASS" : "FAIL", r.id, r.title.c_str(),
                r.summary.c_str());
    std::fflush(stdout);
  };
  const VerifyReport report = run_verify(config, v);
  return report.exit_code();
}

int cmd_report(const nlohmann::json& config, const CommandOptions& o) {
  Run run(config, o, "report");
  const auto input = run.root.get<std::string>("input", o.out_dir.string());
  const Provenance p = run.provenance();
  const fs::path verdict = fs::path(input) / "verdict.json";
  if (!fs::exists(verdict)) throw ConfigError("no verdict.json in " + input);
  const nlohmann::ordered_json j = nlohmann::ordered_json::parse(std::ifstream(verdict));
  std::ostringstream md;
  md << "# gefz verification report\n\n";
  md << "| # | criterion | kind | result | evidence |\n|---|---|---|---|---|\n";
  SvgSeries pass{"passed", {}, "#2ca02c", true, false, {}};
  SvgSeries fail{"failed", {}, "#d62728", true, false, {}};
  for (const auto& c : j.at("criteria")) {
    const bool ok = c.at("passed").get<bool>();
    md << "| " << c.at("id").get<int>() << " | " << c.at("title").get<std::string>() << " | "
       << c.at("kind").get<std::string>() << " | " << (ok ? "pass" : "FAIL") << " | "
       << c.at("summary").get<std::string>() << " |\n";
    (ok ? pass : fail).points.push_back({c.at("id").get<double>(), ok ? 1.0 : 0.0});
  }
  md << "\nOverall: " << (j.at("all_passed").get<bool>() ? "all criteria passed" : "failures present")
     << "\n";
  atomic_write(run.out("report.md"), "<!-- gefz " + std::string(version()) + " config_hash=" +
                                         p.config_hash + " -->\n" + md.str());
  write_svg(run.out("report.svg"), p, svg_plot("Acceptance verdicts", "criterion", "passed", {pass, fail}));
  std::cout << md.str();
  return j.at("exit_code").get<int>();
}

}  // namespace

int run_command(const std::string& name, const nlohmann::json& config, const CommandOptions& options) {
  if (name == "sample") return cmd_sample(config, options);
  if (name == "zeros") return cmd_zeros(config, options);
  if (name == "variance") return cmd_variance(config, options);
  if (name == "pair-correlation") return cmd_pair_correlation(config, options);
  if (name == "normality") return cmd_normality(config, options);
  if (name == "abnormal") return cmd_abnormal(config, options);
  if (name == "almost-indep") return cmd_almost_indep(config, options);
  if (name == "verify") return cmd_verify(config, options);
  if (name == "report") return cmd_report(config, options);
  throw ConfigError("unknown command " + name);
}

}  // namespace gefz
