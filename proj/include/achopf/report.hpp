#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "achopf/model.hpp"
#include "achopf/rates.hpp"

namespace achopf {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row);
  std::string to_csv() const;  // 17 significant digits
};

struct CheckResult {
  int id = 0;  // acceptance criterion number; 0 for checks outside the list
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Chart {
  std::string file;  // name of the .svg
  std::string title;
  std::string x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
};

struct ReportBundle {
  std::string subcommand;
  nlohmann::ordered_json json = nlohmann::ordered_json::object();
  std::map<std::string, Table> tables;  // file name -> table
  std::vector<CheckResult> checks;
  std::vector<std::string> notes;
  std::vector<Chart> charts;
  std::map<std::string, std::string> files;  // verbatim extra outputs, e.g. PeriodicField JSON

  bool passed() const;
  Table& table(const std::string& file, std::vector<std::string> columns);
  void check(int id, const std::string& name, bool ok, const std::string& detail);
};

// Pair-encoded complex number [re, im].
nlohmann::ordered_json to_json(cplx z);
nlohmann::ordered_json to_json(const RateFit& f);

std::string render_json(const ReportBundle& b);
std::string render_summary(const ReportBundle& b);
std::string render_svg(const Chart& c);

// Writes <dir>/<subcommand>.json, every table, summary.txt and, when asked,
// the charts. Files are written one after another.
void write_bundle(const ReportBundle& b, const std::string& dir, bool svg);

// "%.17g"
std::string fmt17(double v);
// Short human form for summaries.
std::string fmt_short(double v);

}  // namespace achopf
