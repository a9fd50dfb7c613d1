#include "wasscert/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wasscert/bounds.hpp"
#include "wasscert/config.hpp"
#include "wasscert/errors.hpp"
#include "wasscert/experiments.hpp"
#include "wasscert/io.hpp"
#include "wasscert/transport.hpp"

namespace wasscert {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kCellsHeader = "axis_value,rep,loss,risk,risk_se,wp,seed";
constexpr const char* kCertificateHeader =
    "seed,N,M_ref,p,empirical_term,lipschitz,matching_term,bound,measured_risk,exact";

// NaN is not valid JSON; emit null instead.
Json number(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream s;
  s << std::put_time(&utc, "%Y%m%dT%H%M%SZ");
  return s.str();
}

fs::path make_run_dir(const std::string& base, const std::string& name) {
  const fs::path parent = fs::path(base) / name;
  const std::string stamp = timestamp();
  fs::path dir = parent / stamp;
  for (int k = 1; fs::exists(dir); ++k) dir = parent / (stamp + "-" + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << text;
}

void write_json(const fs::path& file, const Json& j) { write_text(file, j.dump(2) + "\n"); }

std::string cells_csv(const std::vector<std::vector<CellRecord>>& cells) {
  std::ostringstream s;
  s << kCellsHeader << '\n';
  for (const auto& row : cells) {
    for (const auto& c : row) {
      s << format_number(c.axis_value) << ',' << c.rep << ',' << format_number(c.loss) << ','
        << format_number(c.risk) << ',' << format_number(c.risk_se) << ',' << format_number(c.wp) << ',' << c.seed
        << '\n';
    }
  }
  return s.str();
}

std::vector<double> means_of(const std::vector<MeanWithError>& v) {
  std::vector<double> out;
  for (const auto& m : v) out.push_back(m.mean);
  return out;
}

std::vector<double> errors_of(const std::vector<MeanWithError>& v) {
  std::vector<double> out;
  for (const auto& m : v) out.push_back(m.standard_error);
  return out;
}

Json json_array(const std::vector<double>& values) {
  Json a = Json::array();
  for (double v : values) a.push_back(number(v));
  return a;
}

Json certificate_json(const BoundCertificate& c) {
  return Json{{"command", "certify"},
              {"seed", c.seed.stream},
              {"N", c.n},
              {"M_ref", c.m_ref},
              {"p", c.p},
              {"empirical_term", c.empirical_term},
              {"lipschitz", c.lipschitz},
              {"matching_term", c.matching_term},
              {"bound", c.bound},
              {"measured_risk", c.measured_risk},
              {"pushforward_term", c.pushforward_term},
              {"exact", c.exact},
              {"residual", c.residual}};
}

void append_certificate_row(const fs::path& csv, const BoundCertificate& c) {
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  const bool fresh = !fs::exists(csv) || fs::file_size(csv) == 0;
  std::ofstream out(csv, std::ios::app);
  if (!out) throw ConfigError("cannot append to " + csv.string());
  if (fresh) out << kCertificateHeader << '\n';
  out << c.seed.stream << ',' << c.n << ',' << c.m_ref << ',' << format_number(c.p) << ','
      << format_number(c.empirical_term) << ',' << format_number(c.lipschitz) << ','
      << format_number(c.matching_term) << ',' << format_number(c.bound) << ','
      << format_number(c.measured_risk) << ',' << (c.exact ? "true" : "false") << '\n';
}

ExperimentConfig command_config(const std::string& path, const std::string& command, const std::string& out_dir) {
  auto config = load_config(path);
  if (!config.command.empty() && config.command != command) {
    throw ConfigError("command: config is for '" + config.command + "', not '" + command + "'");
  }
  config.command = command;
  if (!out_dir.empty()) config.output_dir = out_dir;
  return config;
}

Json sweep_summary(const ExperimentConfig& config, const ConvergenceSweep& sweep) {
  std::size_t invalid = 0;
  for (const auto& row : sweep.cells) {
    for (const auto& c : row) invalid += c.valid ? 0 : 1;
  }
  Json j;
  j["command"] = config.command;
  j["axis"] = sweep.axis;
  j["grid"] = sweep.grid;
  j["p"] = config.p;
  j["mean_loss"] = json_array(means_of(sweep.loss));
  j["se_loss"] = json_array(errors_of(sweep.loss));
  j["mean_risk"] = json_array(means_of(sweep.risk));
  j["se_risk"] = json_array(errors_of(sweep.risk));
  if (config.command == "local-study") {
    j["mean_bound"] = json_array(means_of(sweep.bound));
    j["max_loss"] = sweep.max_loss;
  }
  j["floor_loss"] = sweep.floor_loss ? number(*sweep.floor_loss) : Json(nullptr);
  j["floor_risk"] = sweep.floor_risk ? number(*sweep.floor_risk) : Json(nullptr);
  j["floor_provenance"] = sweep.floor_provenance;
  j["risk_decreasing_fraction"] = number(sweep.risk_decreasing_fraction);
  j["invalid_cells"] = invalid;
  return j;
}

int run_sweep(const ExperimentConfig& config, std::ostream& out) {
  if (config.grid.empty()) throw ConfigError("grid: required for " + config.command);
  const auto dir = make_run_dir(config.output_dir, config.command);
  write_json(dir / "config.json", config_to_json(config));

  Json summary;
  std::vector<std::vector<CellRecord>> cells;
  if (config.command == "rate-fit") {
    const auto fit = rate_fit(config.distribution, config.p, config.grid, config.reps, config.master_seed(),
                              config.identical_pairs);
    cells = fit.cells;
    summary["command"] = config.command;
    summary["ns"] = fit.ns;
    summary["p"] = config.p;
    summary["dim"] = config.distribution.dim;
    summary["mean_wp"] = json_array(means_of(fit.means));
    summary["se_wp"] = json_array(errors_of(fit.means));
    summary["fitted"] = fit.fitted;
    summary["slope"] = number(fit.slope);
    summary["slope_se"] = number(fit.slope_se);
    summary["intercept"] = number(fit.intercept);
    summary["prefactor"] = number(fit.prefactor);
    summary["stated_exponent"] = fit.stated_exponent;
  } else {
    ConvergenceSweep sweep;
    auto settings = config.sweep_settings();
    if (config.command == "converge-n") {
      sweep = converge_n(settings, config.grid, config.floor_n, config.master_seed());
    } else if (config.command == "converge-width") {
      sweep = converge_width(settings, config.grid, config.schedule, config.n, config.master_seed());
    } else {
      sweep = local_minimiser_study(settings, config.grid, config.master_seed());
    }
    cells = sweep.cells;
    summary = sweep_summary(config, sweep);
  }
  write_text(dir / "cells.csv", cells_csv(cells));
  write_json(dir / "summary.json", summary);

  Json line = summary;
  line["run_dir"] = dir.string();
  out << line.dump() << '\n';
  return kExitOk;
}

int run_sample(const std::string& config_path, std::size_t n, std::size_t dim, std::uint64_t seed, bool seed_set,
               const std::string& out_path, std::ostream& out) {
  ExperimentConfig config;
  if (!config_path.empty()) {
    config = load_config(config_path);
  } else if (dim > 0) {
    config.distribution = SamplingDistribution::uniform_cube(dim);
  }
  if (n > 0) config.n = n;
  if (seed_set) config.seed = seed;
  const auto cloud = sample_points(config.distribution, config.n, config.master_seed());
  write_points(out_path, cloud);
  out << Json{{"command", "sample"},
              {"kind", to_string(config.distribution.kind)},
              {"dim", cloud.dim()},
              {"n", cloud.size()},
              {"seed", config.seed},
              {"out", out_path}}
             .dump()
      << '\n';
  return kExitOk;
}

int run_wasserstein(const std::string& a_path, const std::string& b_path, double p, const std::string& method,
                    double epsilon, double tol, std::ostream& out) {
  const EmpiricalMeasure a(read_points(a_path));
  const EmpiricalMeasure b(read_points(b_path));
  WassersteinResult result;
  if (method == "auto") {
    result = wasserstein(a, b, p);
  } else if (method == "exact") {
    result = wasserstein_exact(a, b, p);
  } else if (method == "1d") {
    result = wasserstein_1d(a, b, p);
  } else if (method == "brute-force") {
    result = brute_force_wasserstein(a, b, p);
  } else {
    SinkhornOptions options;
    options.epsilon = epsilon;
    options.tol = tol;
    result = sinkhorn(a, b, p, options);
  }
  out << Json{{"command", "wasserstein"},
              {"distance", result.distance},
              {"method", to_string(result.method)},
              {"residual", result.residual},
              {"p", p},
              {"n_a", a.size()},
              {"n_b", b.size()}}
             .dump()
      << '\n';
  return kExitOk;
}

int run_train(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  const auto cloud = sample_points(config.distribution, config.n, derive(config.master_seed(), 0));
  const auto model =
      train(config.network_spec(), cloud, config.target, config.p, config.training, derive(config.master_seed(), 1));
  for (const auto& w : model.warnings) err << "warning: " << w << '\n';

  const auto dir = make_run_dir(config.output_dir, "train");
  write_json(dir / "config.json", config_to_json(config));
  save_model((dir / "model.bin").string(), model.params);
  write_points((dir / "points.csv").string(), cloud);
  std::ostringstream trace;
  trace << "iteration,loss,restart\n";
  for (std::size_t r = 0; r < model.trace.losses.size(); ++r) {
    const auto& losses = model.trace.losses[r];
    for (std::size_t t = 0; t < losses.size(); ++t) trace << t << ',' << format_number(losses[t]) << ',' << r << '\n';
  }
  write_text(dir / "trace.csv", trace.str());

  Json summary{{"command", "train"},
               {"final_loss", model.trace.final_loss},
               {"best_restart", model.trace.best_restart},
               {"param_count", param_count(model.spec())},
               {"lipschitz_upper", lipschitz_upper(model.params)},
               {"cap_binds", model.cap_binds},
               {"warnings", model.warnings}};
  write_json(dir / "summary.json", summary);
  summary["run_dir"] = dir.string();
  out << summary.dump() << '\n';
  return kExitOk;
}

int run_certify(const ExperimentConfig& config, const std::string& model_path, const std::string& points_path,
                const std::string& csv_path, std::ostream& out, std::ostream& err) {
  const fs::path csv = csv_path.empty() ? fs::path(config.output_dir) / "certificates.csv" : fs::path(csv_path);
  const std::size_t m_ref = config.m_ref == 0 ? config.n : config.m_ref;

  if (!model_path.empty() || config.reps == 1) {
    BoundCertificate cert;
    if (!model_path.empty()) {
      if (points_path.empty()) throw ConfigError("--points: required together with --model");
      const auto params = load_model(model_path);
      const auto points = read_points(points_path);
      const std::size_t ref = config.m_ref == 0 ? points.size() : config.m_ref;
      cert = certify([&](std::span<const double> x) { return mlp_forward(params, x); }, lipschitz_upper(params),
                     points, config.target, config.distribution, ref, config.p, derive(config.master_seed(), 2));
    } else {
      const auto cloud = sample_points(config.distribution, config.n, derive(config.master_seed(), 0));
      const auto model = train(config.network_spec(), cloud, config.target, config.p, config.training,
                               derive(config.master_seed(), 1));
      for (const auto& w : model.warnings) err << "warning: " << w << '\n';
      cert = certify(model, config.target, config.distribution, m_ref, config.p, derive(config.master_seed(), 2));
    }
    append_certificate_row(csv, cert);
    out << certificate_json(cert).dump() << '\n';
    return kExitOk;
  }

  CertificateExperiment exp;
  exp.dist = config.distribution;
  exp.target = config.target;
  exp.spec = config.network_spec();
  exp.training = config.training;
  exp.n = config.n;
  exp.m_ref = m_ref;
  exp.p = config.p;
  exp.infimum_n = config.infimum_n;
  exp.infimum_risk_samples = config.risk_samples;
  const auto summary = expected_certificate(exp, config.reps, config.master_seed());
  for (const auto& c : summary.certificates) {
    append_certificate_row(csv, c);
    out << certificate_json(c).dump() << '\n';
  }
  auto pair = [](const MeanWithError& m) { return Json{{"mean", m.mean}, {"se", m.standard_error}}; };
  out << Json{{"command", "certify"},
              {"reps", config.reps},
              {"measured_risk", pair(summary.measured_risk)},
              {"empirical_term", pair(summary.empirical_term)},
              {"matching_term", pair(summary.matching_term)},
              {"bound", pair(summary.bound)},
              {"violations", summary.violations},
              {"infimum_proxy", number(summary.infimum_proxy)},
              {"infimum_provenance", summary.infimum_provenance}}
             .dump()
      << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wasserstein generalisation certificates for neural-network interpolants"};
  app.require_subcommand(1);

  std::string config_path, out_dir, out_path, a_path, b_path, method = "auto", model_path, points_path, csv_path;
  std::size_t n = 0, dim = 0;
  std::uint64_t seed = 0;
  double p = 2.0, epsilon = 0.0, tol = 1e-8;

  auto* sample = app.add_subcommand("sample", "Draw points from a distribution into a CSV file");
  sample->add_option("--config", config_path, "Experiment config (distribution, n, seed)");
  sample->add_option("--n", n, "Number of points (overrides config)");
  sample->add_option("--dim", dim, "Uniform unit cube of this dimension when no config is given");
  auto* seed_opt = sample->add_option("--seed", seed, "Master seed (overrides config)");
  sample->add_option("--out", out_path, "Output point file")->required();

  auto* wass = app.add_subcommand("wasserstein", "W_p distance between two point files");
  wass->add_option("--a", a_path, "First point file")->required();
  wass->add_option("--b", b_path, "Second point file")->required();
  wass->add_option("--p", p, "Order p >= 1");
  wass->add_option("--method", method, "auto, exact, 1d, sinkhorn or brute-force")
      ->check(CLI::IsMember({"auto", "exact", "1d", "sinkhorn", "brute-force"}));
  wass->add_option("--epsilon", epsilon, "Sinkhorn regularisation (0: 1% of median cost)");
  wass->add_option("--tol", tol, "Sinkhorn marginal tolerance");

  std::vector<CLI::App*> config_commands;
  for (const char* name : {"train", "certify", "rate-fit", "converge-n", "converge-width", "local-study"}) {
    auto* sub = app.add_subcommand(name, std::string("Run the ") + name + " driver");
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "Results root (overrides output_dir)");
    config_commands.push_back(sub);
  }
  auto* certify_cmd = app.get_subcommand("certify");
  certify_cmd->add_option("--model", model_path, "Certify an existing model file instead of training");
  certify_cmd->add_option("--points", points_path, "Training points of --model");
  certify_cmd->add_option("--csv", csv_path, "Certificate CSV to append to (default <output_dir>/certificates.csv)");

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("wasscert");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (sample->parsed()) return run_sample(config_path, n, dim, seed, seed_opt->count() > 0, out_path, out);
    if (wass->parsed()) return run_wasserstein(a_path, b_path, p, method, epsilon, tol, out);
    for (auto* sub : config_commands) {
      if (!sub->parsed()) continue;
      const std::string name = sub->get_name();
      auto config = command_config(config_path, name, out_dir);
      if (name == "train") return run_train(config, out, err);
      if (name == "certify") return run_certify(config, model_path, points_path, csv_path, out, err);
      if (name == "local-study") config.training.mode = OptimizerMode::SingleRunLocal;
      return run_sweep(config, out);
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace wasscert
