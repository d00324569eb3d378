#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "adsv/harness.hpp"

namespace adsv {

int run_cli(int argc, char** argv) {
  CLI::App app{"spherically symmetric Einstein--massless Vlasov laboratory"};
  std::string config_path, mode_override, out_override;
  int threads = 0;
  double res_scale = 0.0;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--mode", mode_override,
                 "override the mode (cascade|initdata|geodesics|evolve|pipeline)");
  app.add_option("--out", out_override, "override the output directory");
  app.add_option("--threads", threads, "worker threads for particle push/deposit");
  app.add_option("--resolution-scale", res_scale, "multiply the grid resolution");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  RunConfig cfg;
  try {
    std::ifstream is(config_path);
    if (!is) throw ConfigError("cannot open config " + config_path);
    nlohmann::json j = nlohmann::json::parse(is);
    cfg = RunConfig::from_json(j);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (!mode_override.empty()) cfg.mode = mode_override;
  if (!out_override.empty()) cfg.out = out_override;
  if (threads > 0) cfg.threads = threads;
  if (res_scale > 0.0) cfg.resolution_scale = res_scale;

  RunResult res = run(cfg);
  if (res.manifest.contains("error"))
    std::cerr << res.manifest["error"].get<std::string>() << "\n";
  std::cout << "manifest: " << cfg.out << "/manifest.json (exit " << res.exit_code
            << ")\n";
  return res.exit_code;
}

}  // namespace adsv
