// perfrac <mode> --config <path> [--out <dir>] [--quiet]

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "perfrac/config.hpp"
#include "perfrac/error.hpp"
#include "perfrac/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Homogenized and fine-scale fracture runs on periodically perforated domains"};
  std::string mode, config_path, out_dir;
  bool quiet = false;
  app.add_option("mode", mode, "cell | homog-run | fine-run | validate | mms")
      ->required()
      ->check(CLI::IsMember({"cell", "homog-run", "fine-run", "validate", "mms"}));
  app.add_option("--config", config_path, "flat section.key = value file")->required();
  app.add_option("--out", out_dir, "output directory (overrides run.out)");
  app.add_flag("--quiet", quiet, "suppress progress output");
  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw perfrac::Error(perfrac::ErrorCode::IoError, "cannot read " + config_path);
    std::ostringstream text;
    text << in.rdbuf();
    perfrac::RunConfig config = perfrac::parse_config(text.str());
    config.mode = perfrac::parse_mode(mode);
    if (!out_dir.empty()) config.out_dir = out_dir;
    const auto written = perfrac::run(config, std::cerr, quiet);
    if (!quiet)
      for (const auto& f : written.files) std::cout << f << '\n';
    return 0;
  } catch (const perfrac::Error& e) {
    std::cerr << "perfrac: " << e.what() << '\n';
    return perfrac::exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "perfrac: INTERNAL: " << e.what() << '\n';
    return 1;
  }
}
