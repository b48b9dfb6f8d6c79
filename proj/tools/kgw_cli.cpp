// Command line front end: runs a named verification suite against a config
// and writes the JSON report plus any CSV/SVG artifacts.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "kgw/config.hpp"
#include "kgw/report.hpp"
#include "kgw/suites.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kgw - lattice and algebra verification workbench"};
  app.require_subcommand(0, 1);

  std::string config_path, out_dir = "reports";
  long seed = -1;
  double tolerance = -1.0;
  std::string suite_name;

  auto* list_cmd = app.add_subcommand("list", "list available suites");

  // every suite is a subcommand so `kgw <suite> --config ...` works
  std::vector<CLI::App*> suite_cmds;
  for (auto& [name, desc] : kgw::suites::list_suites()) {
    auto* cmd = app.add_subcommand(name, desc);
    cmd->add_option("--config", config_path, "path to a key = value config file");
    cmd->add_option("--out", out_dir, "output directory for reports");
    cmd->add_option("--seed", seed, "random seed override");
    cmd->add_option("--tolerance", tolerance, "tolerance override");
    suite_cmds.push_back(cmd);
  }

  CLI11_PARSE(app, argc, argv);

  if (list_cmd->parsed()) {
    for (auto& [name, desc] : kgw::suites::list_suites())
      std::printf("%-16s %s\n", name.c_str(), desc.c_str());
    return 0;
  }

  for (auto* cmd : suite_cmds)
    if (cmd->parsed()) suite_name = cmd->get_name();
  if (suite_name.empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    kgw::Config raw = config_path.empty() ? kgw::Config{} : kgw::Config::from_file(config_path);
    raw.set("suite", suite_name);
    if (seed >= 0) raw.set("seed", std::to_string(seed));
    if (tolerance > 0) raw.set("tolerance", kgw::num17(tolerance));
    raw.set("out", out_dir);
    kgw::SuiteConfig cfg = kgw::SuiteConfig::from_config(raw);
    kgw::SuiteReport rep = kgw::suites::run_suite(cfg);
    kgw::write_report(rep, cfg.out_dir);
    for (auto& c : rep.cases)
      std::printf("%-34s %-4s value=%.6g expected=%.6g tol=%.3g (%ld ms)\n", c.name.c_str(),
                  c.status.c_str(), c.value, c.expected, c.tolerance, c.runtime_ms);
    return rep.all_passed() ? 0 : 1;
  } catch (const kgw::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
