#include "achopf/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace achopf {

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void Table::add(std::vector<double> row) {
  if (row.size() != columns.size()) throw InvalidInput("Table::add: row width does not match the columns");
  rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
  std::string out;
  for (size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
  out += "\n";
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + fmt17(r[i]);
    out += "\n";
  }
  return out;
}

bool ReportBundle::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

Table& ReportBundle::table(const std::string& file, std::vector<std::string> columns) {
  auto it = tables.find(file);
  if (it == tables.end()) {
    Table t;
    t.columns = std::move(columns);
    it = tables.emplace(file, std::move(t)).first;
  } else if (it->second.columns != columns) {
    throw InvalidInput("ReportBundle: table " + file + " reopened with different columns");
  }
  return it->second;
}

void ReportBundle::check(int id, const std::string& name, bool ok, const std::string& detail) {
  checks.push_back({id, name, ok, detail});
}

nlohmann::ordered_json to_json(cplx z) { return nlohmann::ordered_json::array({z.real(), z.imag()}); }

namespace {

// JSON has no inf/nan; keep them as strings so the output stays valid.
nlohmann::ordered_json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt17(v);
}

}  // namespace

nlohmann::ordered_json to_json(const RateFit& f) {
  nlohmann::ordered_json j;
  j["slope"] = num(f.slope);
  j["intercept"] = num(f.intercept);
  j["r_squared"] = num(f.r_squared);
  j["monotone"] = f.monotone;
  j["converging"] = f.converging;
  j["xs"] = f.xs;
  auto errs = nlohmann::ordered_json::array();
  for (double e : f.errs) errs.push_back(num(e));
  j["errs"] = errs;
  j["warnings"] = f.warnings;
  return j;
}

std::string render_json(const ReportBundle& b) {
  nlohmann::ordered_json j;
  j["subcommand"] = b.subcommand;
  j["passed"] = b.passed();
  auto checks = nlohmann::ordered_json::array();
  for (const auto& c : b.checks)
    checks.push_back({{"id", c.id}, {"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["checks"] = checks;
  j["results"] = b.json;
  j["notes"] = b.notes;
  // Floats print with 17 significant digits through nlohmann's round-trip formatter.
  return j.dump(2) + "\n";
}

std::string render_summary(const ReportBundle& b) {
  std::ostringstream os;
  os << "achopf " << b.subcommand << "\n";
  for (const auto& c : b.checks) {
    os << (c.passed ? "PASS " : "FAIL ");
    if (c.id > 0) os << "[" << c.id << "] ";
    os << c.name << ": " << c.detail << "\n";
  }
  for (const auto& n : b.notes) os << "note: " << n << "\n";
  if (!b.tables.empty()) {
    os << "tables:";
    for (const auto& [name, t] : b.tables) os << " " << name << " (" << t.rows.size() << " rows)";
    os << "\n";
  }
  os << (b.passed() ? "overall: PASS\n" : "overall: FAIL\n");
  return os.str();
}

std::string render_svg(const Chart& c) {
  const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  auto tx = [&](double v) { return c.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return c.log_y ? std::log10(v) : v; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& [name, pts] : c.series)
    for (auto [x, y] : pts) {
      if ((c.log_x && !(x > 0)) || (c.log_y && !(y > 0)) || !std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, tx(x)), x1 = std::max(x1, tx(x));
      y0 = std::min(y0, ty(y)), y1 = std::max(y1, ty(y));
    }
  if (!(x1 > x0)) x0 -= 1, x1 += 1;
  if (!(y1 > y0)) y0 -= 1, y1 += 1;
  auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << c.title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">" << c.x_label
     << (c.log_x ? " (log10)" : "") << "</text>\n";
  os << "<text x=\"16\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 " << H / 2 << ")\">"
     << c.y_label << (c.log_y ? " (log10)" : "") << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
    const double X = L + (W - L - R) * k / 4, Y = H - B - (H - T - B) * k / 4;
    os << "<text x=\"" << X << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
       << fmt_short(xv) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << Y + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << fmt_short(yv)
       << "</text>\n";
  }
  int si = 0;
  for (const auto& [name, pts] : c.series) {
    const char* col = colors[si % 6];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : pts) {
      if ((c.log_x && !(x > 0)) || (c.log_y && !(y > 0)) || !std::isfinite(x) || !std::isfinite(y)) continue;
      os << fmt_short(px(x)) << "," << fmt_short(py(y)) << " ";
    }
    os << "\"/>\n";
    os << "<text x=\"" << W - R - 150 << "\" y=\"" << T + 14 * (si + 1) << "\" font-size=\"11\" fill=\"" << col
       << "\">" << name << "</text>\n";
    ++si;
  }
  os << "</svg>\n";
  return os.str();
}

void write_bundle(const ReportBundle& b, const std::string& dir, bool svg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create output directory '" + dir + "': " + ec.message());
  auto put = [&](const std::string& name, const std::string& body) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw InvalidInput("cannot write " + (fs::path(dir) / name).string());
    f << body;
  };
  put(b.subcommand + ".json", render_json(b));
  for (const auto& [name, t] : b.tables) put(name, t.to_csv());
  for (const auto& [name, body] : b.files) put(name, body);
  put("summary.txt", render_summary(b));
  if (svg)
    for (const auto& c : b.charts) put(c.file, render_svg(c));
}

}  // namespace achopf
