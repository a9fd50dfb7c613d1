#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "wasscert/experiments.hpp"
#include "wasscert/measures.hpp"
#include "wasscert/network.hpp"
#include "wasscert/training.hpp"

namespace wasscert {

/// Everything a driver needs; serialises losslessly to the run's config.json.
struct ExperimentConfig {
  std::string command;
  SamplingDistribution distribution = SamplingDistribution::uniform_cube(1);
  TargetFunction target = TargetFunction::abs_offset({0.5});
  std::vector<std::size_t> hidden{64};
  Activation activation = Activation::Relu;
  TrainSettings training;
  double p = 2.0;
  std::vector<std::size_t> grid;
  std::size_t reps = 1;
  std::size_t n = 64;
  std::size_t m_ref = 0;  ///< 0: same as n
  std::size_t floor_n = 0;
  WidthSchedule schedule = WidthSchedule::Fixed;
  std::size_t risk_samples = 20'000;
  std::size_t infimum_n = 0;
  bool identical_pairs = false;
  std::uint64_t seed = 0;
  std::string output_dir = "results";

  Seed master_seed() const { return Seed{seed, 0}; }
  MlpSpec network_spec() const;
  SweepSettings sweep_settings() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

std::string to_string(WidthSchedule schedule);

/// Strict parse: unknown keys, wrong types and out-of-range values throw
/// ConfigError naming the key and the violated constraint. Missing keys take
/// their defaults.
ExperimentConfig config_from_json(const nlohmann::ordered_json& j);

/// Full config with every default materialised, in a fixed key order.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

ExperimentConfig load_config(const std::string& path);

}  // namespace wasscert
