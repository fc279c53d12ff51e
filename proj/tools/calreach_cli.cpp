// Command-line front end: scenario generation, batch runs, scene rendering.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "calreach/cli.hpp"

namespace fs = std::filesystem;
using namespace calreach;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << content;
}

fs::path resolve_out_dir(const std::string& flag) {
  std::string dir = flag;
  if (dir.empty()) {
    if (const char* env = std::getenv("CALREACH_OUT_DIR")) {
      dir = env;
    }
  }
  if (dir.empty()) {
    dir = ".";
  }
  fs::create_directories(dir);
  return dir;
}

RunConfig load_config(const std::string& config_path,
                      const std::vector<std::string>& overrides) {
  std::string text;
  if (!config_path.empty()) {
    text = read_file(config_path);
  }
  return parse_config(text, overrides);
}

// A path argument may name one scenario file or a directory of them;
// directory contents are taken in sorted filename order.
std::vector<std::pair<std::string, Scenario>> load_scenes(
    const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const std::string& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".json") {
          found.push_back(e.path());
        }
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  if (files.empty()) {
    throw std::runtime_error("no scenario files found");
  }
  std::vector<std::pair<std::string, Scenario>> scenes;
  for (const fs::path& f : files) {
    scenes.emplace_back(f.stem().string(),
                        scenario_from_json(read_file(f.string())));
  }
  return scenes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Calibrated occupancy forecasting: scenario generation, batch "
      "evaluation, and scene rendering"};
  app.require_subcommand(1);

  std::string family_name;
  int count = 1;
  std::uint64_t seed = 0;
  std::string out_dir_flag;
  CLI::App* gen = app.add_subcommand(
      "generate", "Write synthetic scenario JSON files");
  gen->add_option("--family", family_name,
                  "intersection, corridor, random-constant-turn, or "
                  "shifting-noise")
      ->required();
  gen->add_option("--count", count, "number of scenarios");
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out-dir", out_dir_flag,
                  "output directory (default $CALREACH_OUT_DIR or .)");

  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::string> scenario_inputs;
  std::int64_t render_step = -1;
  CLI::App* run = app.add_subcommand(
      "run", "Run a scenario batch and write CSV/JSON results");
  run->add_option("--config", config_path, "key=value config file");
  run->add_option("--set", overrides, "config override key=value");
  run->add_option("--scenarios", scenario_inputs,
                  "scenario file or directory (repeatable)")
      ->required();
  run->add_option("--render-step", render_step,
                  "also render each scene at this timestep");
  run->add_option("--out-dir", out_dir_flag,
                  "output directory (default $CALREACH_OUT_DIR or .)");

  std::string scenario_path;
  std::int64_t timestep = -1;
  CLI::App* render = app.add_subcommand(
      "render", "Run one scenario and render an SVG frame");
  render->add_option("--scenario", scenario_path, "scenario JSON file")
      ->required();
  render->add_option("--config", config_path, "key=value config file");
  render->add_option("--set", overrides, "config override key=value");
  render->add_option("--timestep", timestep,
                     "issue timestep to draw (default: first planning step)");
  render->add_option("--out-dir", out_dir_flag,
                     "output directory (default $CALREACH_OUT_DIR or .)");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out_dir = resolve_out_dir(out_dir_flag);

    if (gen->parsed()) {
      const ScenarioFamily family = family_from_name(family_name);
      const std::vector<Scenario> scenes =
          generate_scenarios(family, count, seed);
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s-%03zu.json",
                      family_name.c_str(), i);
        write_file(out_dir / name, scenario_to_json(scenes[i]));
        std::cout << (out_dir / name).string() << "\n";
      }
      return 0;
    }

    if (run->parsed()) {
      const RunConfig cfg = load_config(config_path, overrides);
      const auto scenes = load_scenes(scenario_inputs);
      const BatchResult br = run_batch(cfg, scenes);
      write_file(out_dir / "coverage.csv", br.coverage_csv);
      write_file(out_dir / "planning.csv", br.planning_csv);
      for (const EpisodeOutcome& ep : br.episodes) {
        write_file(out_dir / ("episode-" + ep.scene + ".json"),
                   episode_to_json(ep));
        if (ep.failed) {
          std::cerr << "scene " << ep.scene << " failed: " << ep.error
                    << "\n";
        } else if (render_step >= 0) {
          char name[128];
          std::snprintf(name, sizeof(name), "scene-%lld-%s.svg",
                        static_cast<long long>(render_step),
                        ep.scene.c_str());
          write_file(out_dir / name, render_scene(ep.log, render_step));
        }
      }
      std::cout << "wrote " << (out_dir / "coverage.csv").string() << " and "
                << (out_dir / "planning.csv").string() << " ("
                << br.episodes.size() << " scenes)\n";
      return 0;
    }

    if (render->parsed()) {
      const RunConfig cfg = load_config(config_path, overrides);
      const Scenario sc = scenario_from_json(read_file(scenario_path));
      const EpisodeLog log = run_episode(sc, cfg);
      if (timestep < 0) {
        timestep = sc.calib_steps;
      }
      char name[64];
      std::snprintf(name, sizeof(name), "scene-%lld.svg",
                    static_cast<long long>(timestep));
      write_file(out_dir / name, render_scene(log, timestep));
      std::cout << (out_dir / name).string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
