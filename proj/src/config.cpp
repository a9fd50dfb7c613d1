#include "wasscert/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "wasscert/errors.hpp"

namespace wasscert {

using Json = nlohmann::ordered_json;

namespace {

// Rejects keys outside `allowed`, naming the first offender.
void check_keys(const Json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      throw ConfigError((where.empty() ? "" : where + ".") + item.key() + ": unknown key");
    }
  }
}

std::string path(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

double get_number(const Json& j, const std::string& where, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(path(where, key) + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path(where, key) + ": must be finite");
  return x;
}

std::size_t get_count(const Json& j, const std::string& where, const std::string& key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(path(where, key) + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

std::string get_string(const Json& j, const std::string& where, const std::string& key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(path(where, key) + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> get_vector(const Json& j, const std::string& where, const std::string& key, std::size_t dim,
                               const std::vector<double>& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_number()) return std::vector<double>(dim, v.get<double>());
  if (!v.is_array()) throw ConfigError(path(where, key) + ": expected a number or an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(path(where, key) + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::size_t> get_counts(const Json& j, const std::string& key) {
  if (!j.contains(key)) return {};
  const auto& v = j.at(key);
  if (!v.is_array()) throw ConfigError(key + ": expected an array of positive integers");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_unsigned() || e.get<std::size_t>() == 0) {
      throw ConfigError(key + ": expected an array of positive integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

std::pair<double, double> get_box(const Json& j, const std::string& where) {
  if (!j.contains("box")) return {0.0, 1.0};
  const auto& v = j.at("box");
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(path(where, "box") + ": expected [lo, hi]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

SamplingDistribution parse_distribution(const Json& j) {
  const std::string where = "distribution";
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const auto kind = distribution_kind_from_string(get_string(j, where, "kind", "uniform-cube"));
  const std::size_t dim = get_count(j, where, "dim", 1);
  if (dim == 0) throw ConfigError("distribution.dim: must be >= 1");
  SamplingDistribution d;
  switch (kind) {
    case DistributionKind::UniformCube: {
      check_keys(j, where, {"kind", "dim", "side"});
      const double side = get_number(j, where, "side", 1.0);
      if (!(side > 0.0)) throw ConfigError("distribution.side: must be > 0");
      d = SamplingDistribution::uniform_cube(dim, side);
      break;
    }
    case DistributionKind::TruncatedGaussian: {
      check_keys(j, where, {"kind", "dim", "mean", "scale", "box"});
      const auto [lo, hi] = get_box(j, where);
      d = SamplingDistribution::truncated_gaussian(dim, get_vector(j, where, "mean", dim, std::vector<double>(dim, 0.5)),
                                                   get_number(j, where, "scale", 0.25), lo, hi);
      break;
    }
    case DistributionKind::TwoComponentMixture: {
      check_keys(j, where, {"kind", "dim", "components", "box"});
      const auto [lo, hi] = get_box(j, where);
      std::vector<GaussianComponent> comps{{std::vector<double>(dim, 0.25), 0.1, 0.5},
                                           {std::vector<double>(dim, 0.75), 0.1, 0.5}};
      if (j.contains("components")) {
        const auto& arr = j.at("components");
        if (!arr.is_array() || arr.size() != 2) throw ConfigError("distribution.components: expected 2 components");
        for (std::size_t k = 0; k < 2; ++k) {
          const std::string cw = "distribution.components[" + std::to_string(k) + "]";
          check_keys(arr[k], cw, {"mean", "scale", "weight"});
          comps[k].mean = get_vector(arr[k], cw, "mean", dim, comps[k].mean);
          comps[k].scale = get_number(arr[k], cw, "scale", comps[k].scale);
          comps[k].weight = get_number(arr[k], cw, "weight", comps[k].weight);
        }
      }
      d = SamplingDistribution::mixture(dim, comps[0], comps[1], lo, hi);
      break;
    }
  }
  d.validate();
  return d;
}

Json distribution_json(const SamplingDistribution& d) {
  Json j;
  j["kind"] = to_string(d.kind);
  j["dim"] = d.dim;
  if (d.kind == DistributionKind::UniformCube) {
    j["side"] = d.hi;
    return j;
  }
  if (d.kind == DistributionKind::TruncatedGaussian) {
    j["mean"] = d.components[0].mean;
    j["scale"] = d.components[0].scale;
  } else {
    Json comps = Json::array();
    for (const auto& c : d.components) comps.push_back(Json{{"mean", c.mean}, {"scale", c.scale}, {"weight", c.weight}});
    j["components"] = comps;
  }
  j["box"] = {d.lo, d.hi};
  return j;
}

TargetFunction parse_target(const Json& j, std::size_t dim) {
  const std::string where = "target";
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const auto kind = target_kind_from_string(get_string(j, where, "kind", "abs-offset"));
  TargetFunction f;
  switch (kind) {
    case TargetKind::AbsOffset:
      check_keys(j, where, {"kind", "center"});
      f = TargetFunction::abs_offset(get_vector(j, where, "center", dim, std::vector<double>(dim, 0.5)));
      break;
    case TargetKind::Sinusoid:
      check_keys(j, where, {"kind", "amplitude", "frequency"});
      f = TargetFunction::sinusoid(get_number(j, where, "amplitude", 1.0),
                                   get_vector(j, where, "frequency", dim, std::vector<double>(dim, 1.0)));
      break;
    case TargetKind::RadialNorm:
      check_keys(j, where, {"kind"});
      f = TargetFunction::radial_norm();
      break;
    case TargetKind::PiecewiseLinear:
      check_keys(j, where, {"kind", "knots", "values"});
      f = TargetFunction::piecewise_linear(get_vector(j, where, "knots", 0, {0.0, 1.0}),
                                           get_vector(j, where, "values", 0, {0.0, 0.0}));
      break;
  }
  f.validate(dim);
  return f;
}

Json target_json(const TargetFunction& f) {
  Json j;
  j["kind"] = to_string(f.kind);
  switch (f.kind) {
    case TargetKind::AbsOffset:
      j["center"] = f.center;
      break;
    case TargetKind::Sinusoid:
      j["amplitude"] = f.amplitude;
      j["frequency"] = f.frequency;
      break;
    case TargetKind::RadialNorm:
      break;
    case TargetKind::PiecewiseLinear:
      j["knots"] = f.knots;
      j["values"] = f.values;
      break;
  }
  return j;
}

TrainSettings parse_training(const Json& j) {
  const std::string where = "training";
  check_keys(j, where,
             {"restarts", "steps", "step_size", "final_step_fraction", "beta1", "beta2", "adam_epsilon",
              "spectral_cap", "mode"});
  TrainSettings s;
  s.restarts = get_count(j, where, "restarts", s.restarts);
  s.steps = get_count(j, where, "steps", s.steps);
  s.step_size = get_number(j, where, "step_size", s.step_size);
  s.final_step_fraction = get_number(j, where, "final_step_fraction", s.final_step_fraction);
  s.beta1 = get_number(j, where, "beta1", s.beta1);
  s.beta2 = get_number(j, where, "beta2", s.beta2);
  s.adam_epsilon = get_number(j, where, "adam_epsilon", s.adam_epsilon);
  s.spectral_cap = get_number(j, where, "spectral_cap", s.spectral_cap);
  s.mode = optimizer_mode_from_string(get_string(j, where, "mode", to_string(s.mode)));
  s.validate();
  return s;
}

Json training_json(const TrainSettings& s) {
  return Json{{"restarts", s.restarts},
              {"steps", s.steps},
              {"step_size", s.step_size},
              {"final_step_fraction", s.final_step_fraction},
              {"beta1", s.beta1},
              {"beta2", s.beta2},
              {"adam_epsilon", s.adam_epsilon},
              {"spectral_cap", s.spectral_cap},
              {"mode", to_string(s.mode)}};
}

const std::set<std::string> kCommands = {"sample",        "wasserstein",    "train",      "certify",
                                         "rate-fit",      "converge-n",     "converge-width", "local-study"};

}  // namespace

std::string to_string(WidthSchedule schedule) { return schedule == WidthSchedule::Fixed ? "fixed" : "square"; }

MlpSpec ExperimentConfig::network_spec() const {
  MlpSpec spec;
  spec.dims.push_back(distribution.dim);
  spec.dims.insert(spec.dims.end(), hidden.begin(), hidden.end());
  spec.dims.push_back(1);
  spec.activation = activation;
  return spec;
}

SweepSettings ExperimentConfig::sweep_settings() const {
  SweepSettings s;
  s.dist = distribution;
  s.target = target;
  s.activation = activation;
  s.hidden = hidden;
  s.training = training;
  s.p = p;
  s.reps = reps;
  s.risk_samples = risk_samples;
  return s;
}

ExperimentConfig config_from_json(const Json& j) {
  check_keys(j, "",
             {"command", "distribution", "target", "network", "training", "p", "grid", "reps", "n", "m_ref", "floor_n",
              "schedule", "risk_samples", "infimum_n", "identical_pairs", "seed", "output_dir"});
  ExperimentConfig c;
  c.command = get_string(j, "", "command", "");
  if (!c.command.empty() && !kCommands.contains(c.command)) {
    throw ConfigError("command: unknown subcommand '" + c.command + "'");
  }
  if (j.contains("distribution")) c.distribution = parse_distribution(j.at("distribution"));
  c.target = parse_target(j.contains("target") ? j.at("target") : Json::object(), c.distribution.dim);

  if (j.contains("network")) {
    const auto& net = j.at("network");
    check_keys(net, "network", {"hidden", "activation"});
    if (net.contains("hidden")) {
      c.hidden = get_counts(net, "hidden");
      if (c.hidden.empty()) throw ConfigError("network.hidden: need at least one hidden layer width");
    }
    c.activation = activation_from_string(get_string(net, "network", "activation", "relu"));
  }
  if (j.contains("training")) c.training = parse_training(j.at("training"));

  c.p = get_number(j, "", "p", c.p);
  if (!(c.p >= 1.0)) throw ConfigError("p: constraint p >= 1 violated");
  c.grid = get_counts(j, "grid");
  c.reps = get_count(j, "", "reps", c.reps);
  if (c.reps < 1) throw ConfigError("reps: constraint reps >= 1 violated");
  c.n = get_count(j, "", "n", c.n);
  if (c.n < 1) throw ConfigError("n: constraint n >= 1 violated");
  c.m_ref = get_count(j, "", "m_ref", c.m_ref);
  c.floor_n = get_count(j, "", "floor_n", c.floor_n);
  const auto schedule = get_string(j, "", "schedule", "fixed");
  if (schedule == "fixed") {
    c.schedule = WidthSchedule::Fixed;
  } else if (schedule == "square") {
    c.schedule = WidthSchedule::Square;
  } else {
    throw ConfigError("schedule: expected fixed or square");
  }
  c.risk_samples = get_count(j, "", "risk_samples", c.risk_samples);
  if (c.risk_samples < 100) throw ConfigError("risk_samples: constraint risk_samples >= 100 violated");
  c.infimum_n = get_count(j, "", "infimum_n", c.infimum_n);
  if (j.contains("identical_pairs")) {
    if (!j.at("identical_pairs").is_boolean()) throw ConfigError("identical_pairs: expected a boolean");
    c.identical_pairs = j.at("identical_pairs").get<bool>();
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  c.output_dir = get_string(j, "", "output_dir", c.output_dir);
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["command"] = c.command;
  j["distribution"] = distribution_json(c.distribution);
  j["target"] = target_json(c.target);
  j["network"] = Json{{"hidden", c.hidden}, {"activation", to_string(c.activation)}};
  j["training"] = training_json(c.training);
  j["p"] = c.p;
  j["grid"] = c.grid;
  j["reps"] = c.reps;
  j["n"] = c.n;
  j["m_ref"] = c.m_ref;
  j["floor_n"] = c.floor_n;
  j["schedule"] = to_string(c.schedule);
  j["risk_samples"] = c.risk_samples;
  j["infimum_n"] = c.infimum_n;
  j["identical_pairs"] = c.identical_pairs;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config: cannot read " + file);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: malformed JSON in " + file + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace wasscert
