#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "semistatic/bench/capabilities.hpp"
#include "semistatic/bench/scenario.hpp"
#include "semistatic/measure.hpp"

using namespace semistatic;
using namespace semistatic::bench;

namespace {

int run(const ScenarioConfig& config) {
  const auto caps = probe_capabilities(config.events_file);
  ScenarioResult result;
  try {
    result = run_scenario(config, caps);
  } catch (const CapabilityMissing& e) {
    std::cerr << "capability missing: " << e.what() << '\n';
    return 3;
  }
  if (config.output == "-") {
    write_csv(std::cout, result);
  } else {
    std::ofstream out(config.output);
    if (!out) {
      std::cerr << "cannot write " << config.output << '\n';
      return 1;
    }
    write_csv(out, result);
  }
  print_summary(config.output == "-" ? std::cerr : std::cout, result);
  return 0;
}

int calibrate(std::size_t iterations, std::size_t warmup) {
  const auto set = measure::calibrate_overhead(iterations, warmup);
  std::vector<std::uint64_t> kept = set.raw();
  const auto dropped = measure::drop_outliers(kept);
  const auto raw = measure::summarize_values(kept);
  const auto corrected = measure::summarize(set);
  std::cout << "iterations        " << iterations << " (+" << warmup << " warm-up)\n"
            << "outliers dropped  " << dropped << '\n'
            << "overhead mean     " << set.overhead_mean() << " reference cycles\n"
            << "subtracted        " << set.overhead_cycles() << '\n'
            << "raw median / sd   " << raw.median << " / " << raw.sd << '\n'
            << "cv (retained)     " << (raw.mean > 0 ? raw.sd / raw.mean : 0.0) << '\n'
            << "corrected median  " << corrected.median << '\n'
            << "clamped to zero   " << set.clamped_count() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-static condition benchmarks"};
  app.require_subcommand(1);

  ScenarioConfig config;
  std::string scenario = "s3";
  int pin_core = -1;
  auto* run_cmd = app.add_subcommand("run", "Run one scenario and write its samples as CSV");
  run_cmd->add_option("--scenario", scenario, "s1 .. s9")->required();
  run_cmd->add_option("--iterations", config.iterations,
                      "Retained samples per arm (default 1e7, or 1e6 for s2, s4, s8, s9)");
  run_cmd->add_option("--seed", config.seed, "PRNG seed")->capture_default_str();
  run_cmd->add_flag("--warming", config.warming, "Warm the branch target in the cold region");
  run_cmd->add_flag("--buffer", config.buffer, "Run smc_buffer after each direction change");
  run_cmd->add_flag("--safe-mode", config.safe_mode, "Relock stub pages after every change");
  run_cmd->add_option("--pin-core", pin_core, "Pin the measuring thread to this core");
  run_cmd->add_option("--change-interval", config.change_interval,
                      "s8: iterations per condition change (0 sweeps); s9: microseconds per flip");
  run_cmd->add_option("--fanout", config.switch_fanout, "s7: number of targets")
      ->capture_default_str();
  run_cmd->add_option("--events-file", config.events_file, "Raw event table");
  run_cmd->add_option("--warmup", config.warmup, "Leading samples discarded per arm")
      ->capture_default_str();
  run_cmd->add_option("--calibration-iterations", config.calibration_iterations,
                      "Empty-region samples for the overhead estimate")
      ->capture_default_str();
  run_cmd->add_option("--filler-macs", config.filler_macs,
                      "Multiply-accumulates in the unmeasured filler")
      ->capture_default_str();
  run_cmd->add_option("--rank-subset", config.rank_subset, "s1: samples per arm in the rank test")
      ->capture_default_str();
  run_cmd->add_option("--out", config.output, "CSV path, or - for stdout")->required();

  std::string events_file;
  auto* caps_cmd = app.add_subcommand("capabilities", "Report what this host can run");
  caps_cmd->add_option("--events-file", events_file, "Raw event table");

  std::size_t cal_iterations = measure::kDefaultCalibrationIterations;
  std::size_t cal_warmup = measure::kDefaultWarmup;
  auto* cal_cmd = app.add_subcommand("calibrate", "Measure the timing overhead");
  cal_cmd->add_option("--iterations", cal_iterations)->capture_default_str();
  cal_cmd->add_option("--warmup", cal_warmup)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto id = parse_scenario(scenario);
      if (!id) {
        std::cerr << "unknown scenario '" << scenario << "'\n";
        return 2;
      }
      config.scenario = *id;
      if (pin_core >= 0) {
        config.pin_core = pin_core;
      }
      config.validate();
      return run(config);
    }
    if (*caps_cmd) {
      std::cout << capability_report(probe_capabilities(events_file));
      return 0;
    }
    if (*cal_cmd) {
      return calibrate(cal_iterations, cal_warmup);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
