#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pmt/metrics.hpp"

namespace pmt {

namespace detail {

// 6 significant digits, locale-independent
inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

inline std::string report_header() {
  std::string h = "experiment,case";
  for (const auto& c : metric_columns()) h += "," + c;
  return h + ",n_images,n_pairs";
}

inline std::string report_row(const MetricReport& r) {
  std::string row = r.experiment + "," + r.case_name;
  for (const auto& c : metric_columns()) {
    row += ",";
    auto it = r.values.find(c);
    if (it != r.values.end()) row += detail::format_value(it->second);
  }
  row += "," + std::to_string(r.n_images) + "," + std::to_string(r.n_pairs);
  return row;
}

// Rows sorted by (experiment, case); re-emission of the same set is
// byte-identical.
inline void emit_report(std::vector<MetricReport> reports, const std::string& path) {
  if (reports.empty()) throw ValueError("emit_report: empty report set");
  std::stable_sort(reports.begin(), reports.end(),
                   [](const MetricReport& a, const MetricReport& b) {
                     return std::tie(a.experiment, a.case_name) <
                            std::tie(b.experiment, b.case_name);
                   });
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << report_header() << "\n";
  for (const auto& r : reports) f << report_row(r) << "\n";
  if (!f) throw IoError("write failed: " + path);
}

inline std::vector<MetricReport> load_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError("empty report: " + path);
  if (line != report_header()) {
    throw ValueError("unexpected report header in " + path);
  }
  std::vector<MetricReport> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    cells.resize(2 + metric_columns().size() + 2);
    MetricReport r;
    r.experiment = cells[0];
    r.case_name = cells[1];
    for (std::size_t i = 0; i < metric_columns().size(); ++i) {
      if (!cells[2 + i].empty()) {
        r.values[metric_columns()[i]] = std::stod(cells[2 + i]);
      }
    }
    r.n_images = cells[2 + metric_columns().size()].empty()
                     ? 0
                     : std::stoul(cells[2 + metric_columns().size()]);
    r.n_pairs = cells[3 + metric_columns().size()].empty()
                    ? 0
                    : std::stoul(cells[3 + metric_columns().size()]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pmt
