#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kgw/errors.hpp"

namespace kgw {

// Flat `key = value` configuration with dotted keys; '#' starts a comment.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
  }

  static Config from_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        auto issp = [](unsigned char c) { return std::isspace(c); };
        while (!s.empty() && issp(s.front())) s.erase(s.begin());
        while (!s.empty() && issp(s.back())) s.pop_back();
        return s;
      };
      std::string t = trim(line);
      if (t.empty()) continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(t.substr(0, eq));
      std::string val = trim(t.substr(eq + 1));
      if (key.empty()) throw UsageError("config line " + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = val;
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& val) { values_[key] = val; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  long get_int(const std::string& key, long dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
      std::size_t pos = 0;
      long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw UsageError("config field '" + key + "': expected integer, got '" + it->second + "'");
    }
  }

  double get_double(const std::string& key, double dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw UsageError("config field '" + key + "': expected number, got '" + it->second + "'");
    }
  }

  std::string get_enum(const std::string& key, const std::string& dflt,
                       const std::vector<std::string>& allowed) const {
    std::string v = get_string(key, dflt);
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string opts;
      for (auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
      throw UsageError("config field '" + key + "': unknown preset '" + v + "' (allowed: " + opts +
                       ")");
    }
    return v;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Resolved experiment parameters shared by the suites.
struct SuiteConfig {
  std::string suite;
  std::uint64_t seed = 42;
  std::string scalar_mode = "exact";
  double tolerance = 1e-9;
  std::string out_dir = "reports";

  // lattice block
  int nx = 64, nt = 128;
  double dx = 0.1, dt = 0.04;
  double mass = 0.5;
  int p = 2;
  int margin = 4;
  std::string metric_preset = "flat";
  std::string source_preset = "smooth";

  // perturbation block (fractions of the domain extents)
  double pert_center_t = 0.55, pert_center_x = 0.5;
  double pert_width_t = 0.12, pert_width_x = 0.18;
  double amp_tt = 0.05, amp_tx = 0.0, amp_xx = -0.04, amp_j = 0.3;

  static SuiteConfig from_config(const Config& cfg) {
    SuiteConfig sc;
    sc.suite = cfg.get_string("suite", "");
    sc.seed = std::uint64_t(cfg.get_int("seed", 42));
    sc.scalar_mode = cfg.get_enum("scalar_mode", "exact", {"exact", "floating"});
    sc.tolerance = cfg.get_double("tolerance", 1e-9);
    sc.out_dir = cfg.get_string("out", "reports");
    sc.nx = int(cfg.get_int("lattice.nx", 64));
    sc.nt = int(cfg.get_int("lattice.nt", 128));
    sc.dx = cfg.get_double("lattice.dx", 0.1);
    sc.dt = cfg.get_double("lattice.dt", 0.04);
    sc.mass = cfg.get_double("lattice.mass", 0.5);
    sc.p = int(cfg.get_int("lattice.p", 2));
    sc.margin = int(cfg.get_int("lattice.margin", 4));
    sc.metric_preset = cfg.get_enum("lattice.metric", "flat",
                                    {"flat", "bump-tt", "bump-xx", "bump-mixed", "wavy"});
    sc.source_preset =
        cfg.get_enum("lattice.source", "smooth", {"zero", "constant", "bump", "smooth"});
    sc.pert_center_t = cfg.get_double("pert.center_t", 0.55);
    sc.pert_center_x = cfg.get_double("pert.center_x", 0.5);
    sc.pert_width_t = cfg.get_double("pert.width_t", 0.12);
    sc.pert_width_x = cfg.get_double("pert.width_x", 0.18);
    sc.amp_tt = cfg.get_double("pert.amp_tt", 0.05);
    sc.amp_tx = cfg.get_double("pert.amp_tx", 0.0);
    sc.amp_xx = cfg.get_double("pert.amp_xx", -0.04);
    sc.amp_j = cfg.get_double("pert.amp_j", 0.3);
    if (sc.nx <= 0 || sc.nt <= 0 || sc.dx <= 0 || sc.dt <= 0 || sc.p <= 0 || sc.margin <= 0)
      throw UsageError("config: lattice sizes must be positive");
    return sc;
  }
};

}  // namespace kgw
