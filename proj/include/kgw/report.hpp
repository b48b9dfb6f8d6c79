#pragma once

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace kgw {

struct CaseResult {
  std::string name;
  std::string status;  // pass | fail | skip
  double value = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  long runtime_ms = 0;
};

struct SuiteReport {
  std::string suite;
  std::vector<CaseResult> cases;

  bool all_passed() const {
    for (auto& c : cases)
      if (c.status == "fail") return false;
    return true;
  }
};

inline std::string num17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// mask_runtime exists for byte-level report comparisons in tests
inline nlohmann::ordered_json report_to_json(const SuiteReport& r, bool mask_runtime = false) {
  nlohmann::ordered_json j;
  j["suite"] = r.suite;
  j["cases"] = nlohmann::ordered_json::array();
  for (auto& c : r.cases) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["status"] = c.status;
    cj["value"] = num17(c.value);
    cj["expected"] = num17(c.expected);
    cj["tolerance"] = num17(c.tolerance);
    cj["runtime_ms"] = mask_runtime ? 0 : c.runtime_ms;
    j["cases"].push_back(cj);
  }
  return j;
}

inline void write_report(const SuiteReport& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/" + r.suite + "_report.json");
  out << report_to_json(r).dump(2) << "\n";
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  void write(const std::string& path) const {
    std::ofstream out(path);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << num17(row[i]);
      out << "\n";
    }
  }
};

// minimal standalone SVG polyline of y(x), log10 y axis if positive
inline void write_svg_polyline(const std::string& path, const std::vector<double>& xs,
                               const std::vector<double>& ys, const std::string& title) {
  if (xs.empty() || xs.size() != ys.size()) return;
  const double W = 480, H = 320, Mg = 40;
  double xmin = xs.front(), xmax = xs.front(), ymin = ys.front(), ymax = ys.front();
  for (auto x : xs) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
  }
  for (auto y : ys) {
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  std::ofstream out(path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  out << "<text x='10' y='20'>" << title << "</text>\n<polyline fill='none' stroke='black' points='";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double px = Mg + (xs[i] - xmin) / (xmax - xmin) * (W - 2 * Mg);
    double py = H - Mg - (ys[i] - ymin) / (ymax - ymin) * (H - 2 * Mg);
    out << px << "," << py << " ";
  }
  out << "'/>\n</svg>\n";
}

}  // namespace kgw
