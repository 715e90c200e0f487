#include "gefz/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#ifndef GEFZ_VERSION
#define GEFZ_VERSION "0.0.0"
#endif

namespace gefz {

const char* version() { return GEFZ_VERSION; }

ConfigReader::ConfigReader(const nlohmann::json& object, std::string where)
    : object_(object.is_null() ? nlohmann::json::object() : object), where_(std::move(where)) {
  if (!object_.is_object()) throw ConfigError(where_ + ": JSON object expected");
  effective_ = nlohmann::ordered_json::object();
}

ConfigReader ConfigReader::child(const std::string& key) {
  requested_.insert(key);
  return ConfigReader(object_.contains(key) ? object_.at(key) : nlohmann::json::object(),
                      where_ + "." + key);
}

void ConfigReader::adopt(const std::string& key, const ConfigReader& child) {
  effective_[key] = child.effective();
}

void ConfigReader::finish() const {
  for (const auto& [k, v] : object_.items()) {
    if (!requested_.count(k)) throw ConfigError(where_ + ": unknown key " + k);
  }
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string config_hash(const nlohmann::json& config) {
  const std::string s = config.dump();  // std::map storage: keys sorted
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string provenance_csv_header(const Provenance& p) {
  std::ostringstream o;
  o << "# gefz " << version() << "\r\n";
  o << "# command: " << p.command << "\r\n";
  o << "# master_seed: " << p.master_seed << "\r\n";
  o << "# config_hash: " << p.config_hash << "\r\n";
  o << "# config: " << p.effective_config.dump() << "\r\n";
  return o.str();
}

nlohmann::ordered_json provenance_json(const Provenance& p) {
  nlohmann::ordered_json j;
  j["tool"] = "gefz";
  j["version"] = version();
  j["command"] = p.command;
  j["master_seed"] = p.master_seed;
  j["config_hash"] = p.config_hash;
  j["config"] = p.effective_config;
  return j;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw std::logic_error("CsvTable: row width mismatch");
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      out += csv_field(r[i]);
    }
    out += "\r\n";
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void write_csv(const std::filesystem::path& path, const Provenance& p, const CsvTable& t) {
  atomic_write(path, provenance_csv_header(p) + t.str());
}

void write_json(const std::filesystem::path& path, const Provenance& p,
                const nlohmann::ordered_json& body) {
  nlohmann::ordered_json j;
  j["provenance"] = provenance_json(p);
  for (const auto& [k, v] : body.items()) j[k] = v;
  atomic_write(path, j.dump(2) + "\n");
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

}  // namespace

std::string svg_plot(const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<SvgSeries>& series, bool log_x,
                     bool log_y) {
  constexpr double W = 640, H = 420, L = 70, Rm = 20, T = 40, B = 50;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
  auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const auto [x, y] = s.points[i];
      if ((log_x && x <= 0) || (log_y && y <= 0) || !std::isfinite(x) || !std::isfinite(y)) continue;
      const double e = i < s.error_bars.size() ? s.error_bars[i] : 0.0;
      xmin = std::min(xmin, tx(x));
      xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, ty(log_y ? y : y - e));
      ymax = std::max(ymax, ty(log_y ? y : y + e));
    }
  }
  if (!(xmin < xmax)) xmin -= 1, xmax += 1;
  if (!(ymin < ymax)) ymin -= 1, ymax += 1;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return L + (tx(x) - xmin) / (xmax - xmin) * (W - L - Rm); };
  auto py = [&](double y) { return H - B - (ty(y) - ymin) / (ymax - ymin) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape_xml(title) << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - Rm << "\" height=\""
    << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double gx = xmin + (xmax - xmin) * i / 5.0;
    const double gy = ymin + (ymax - ymin) * i / 5.0;
    const double sx = L + (W - L - Rm) * i / 5.0;
    const double sy = H - B - (H - T - B) * i / 5.0;
    o << "<text x=\"" << fmt(sx) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
      << tick_label(log_x ? std::pow(10.0, gx) : gx) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << fmt(sy + 4) << "\" text-anchor=\"end\">"
      << tick_label(log_y ? std::pow(10.0, gy) : gy) << "</text>\n";
  }
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
    << escape_xml(x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << H / 2 << ")\">" << escape_xml(y_label) << "</text>\n";
  int legend = 0;
  for (const auto& s : series) {
    std::string path;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const auto [x, y] = s.points[i];
      if ((log_x && x <= 0) || (log_y && y <= 0) || !std::isfinite(x) || !std::isfinite(y)) continue;
      path += (path.empty() ? "M" : " L") + fmt(px(x)) + " " + fmt(py(y));
      if (s.markers) {
        o << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y)) << "\" r=\"2.5\" fill=\""
          << s.color << "\"/>\n";
      }
      if (i < s.error_bars.size() && !log_y) {
        const double e = s.error_bars[i];
        o << "<line x1=\"" << fmt(px(x)) << "\" x2=\"" << fmt(px(x)) << "\" y1=\"" << fmt(py(y - e))
          << "\" y2=\"" << fmt(py(y + e)) << "\" stroke=\"" << s.color << "\"/>\n";
      }
    }
    if (s.line && !path.empty()) {
      o << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.5\"/>\n";
    }
    o << "<text x=\"" << L + 10 << "\" y=\"" << T + 16 + 14 * legend << "\" fill=\"" << s.color
      << "\">" << escape_xml(s.label) << "</text>\n";
    ++legend;
  }
  o << "</svg>\n";
  return o.str();
}

std::string svg_histogram_vs_normal(const std::string& title, const std::vector<double>& z,
                                    int bins) {
  const double lo = -4.0, hi = 4.0, w = (hi - lo) / bins;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double v : z) {
    const int b = static_cast<int>(std::floor((v - lo) / w));
    if (b >= 0 && b < bins) counts[static_cast<std::size_t>(b)] += 1.0;
  }
  SvgSeries hist{"empirical density", {}, "#1f77b4", false, true, {}};
  for (int b = 0; b < bins; ++b) {
    const double d = z.empty() ? 0.0 : counts[static_cast<std::size_t>(b)] / (z.size() * w);
    hist.points.push_back({lo + b * w, d});
    hist.points.push_back({lo + (b + 1) * w, d});
  }
  SvgSeries normal{"N(0,1) density", {}, "#d62728", false, true, {}};
  for (int i = 0; i <= 200; ++i) {
    const double x = lo + (hi - lo) * i / 200.0;
    normal.points.push_back({x, std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846)});
  }
  return svg_plot(title, "standardized value", "density", {hist, normal});
}

void write_svg(const std::filesystem::path& path, const Provenance& p, const std::string& svg) {
  std::ostringstream head;
  head << "<!-- gefz " << version() << " command=" << p.command << " master_seed=" << p.master_seed
       << " config_hash=" << p.config_hash << " -->\n";
  atomic_write(path, head.str() + svg);
}

}  // namespace gefz
