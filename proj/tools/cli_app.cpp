#include "cli_app.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "sbm/arx.hpp"
#include "sbm/dataio.hpp"
#include "sbm/error.hpp"
#include "sbm/eval.hpp"
#include "sbm/json_io.hpp"
#include "sbm/kalman.hpp"
#include "sbm/preprocess.hpp"
#include "sbm/synthplant.hpp"

namespace fs = std::filesystem;

namespace sbm::cli {

namespace {

// Problems with the invocation itself (bad keys, missing files): exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::string outdir = "out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

struct RoleArgs {
  ChannelRoleMap roles = default_roles();

  void add_to(CLI::App* app) {
    app->add_option("--role-output", roles.output, "Output channel")->capture_default_str();
    app->add_option("--role-setpoints", roles.correlated_setpoints, "The six correlated setpoints")
        ->expected(6)
        ->capture_default_str();
    app->add_option("--role-independent", roles.independent_setpoint, "Independent setpoint")->capture_default_str();
    app->add_option("--role-excluded", roles.excluded_setpoint, "Setpoint left out of the model")
        ->capture_default_str();
    app->add_option("--role-disturbance", roles.disturbance, "Measured disturbance")->capture_default_str();
  }
};

struct PreprocessArgs {
  double d_train_days = 7.0;
  double cutoff_hz = kDefaultCutoffHz;
  SavGolSpec savgol;

  void add_to(CLI::App* app) {
    app->add_option("--d-train", d_train_days, "Training days")->capture_default_str();
    app->add_option("--cutoff-hz", cutoff_hz, "Low-pass cutoff for the inputs")
        ->default_str(format_double(kDefaultCutoffHz));
    app->add_option("--savgol-window", savgol.window, "Savitzky-Golay window on the output")->capture_default_str();
    app->add_option("--savgol-order", savgol.poly_order, "Savitzky-Golay polynomial order")->capture_default_str();
  }

  std::size_t train_samples(const TimeSeriesFrame& frame) const {
    if (!(d_train_days > 0.0)) throw Error(ErrorCode::InvalidConfig, "'d-train': must be positive");
    const auto n = static_cast<std::size_t>(std::llround(d_train_days * 86400.0 / frame.sample_interval_s()));
    if (n > frame.length()) {
      throw Error(ErrorCode::InsufficientData, "'d-train': " + std::to_string(n) + " samples requested, data has " +
                                                   std::to_string(frame.length()));
    }
    return n;
  }
};

struct GenerateArgs {
  std::optional<double> days;
  std::string scenario = "plant";
  int months = 1;
  double interval_s = 60.0;
  std::optional<double> noise;
  std::optional<double> setpoint_noise;
  std::optional<double> nonlinearity;
};

struct PreprocessCmd {
  std::string input;
  RoleArgs roles;
  PreprocessArgs pre;
};

struct FitCmd {
  std::string input;
  bool preprocessed = false;
  std::string output_channel = "y";
  int order = 3;
  std::string orders;
  std::vector<double> selection_days;
  RoleArgs roles;
  PreprocessArgs pre;
};

struct FilterCmd {
  std::string input;
  std::string model;
  std::string preprocessor;
  std::string sigma;
  double d_train_days = 7.0;
  std::optional<double> r;
  std::size_t record_every = 1;
};

struct ExperimentCmd {
  std::string input;
  std::vector<std::string> siblings;
  int order = 3;
  double t_sched_days = 4.0;
  double stride_hours = 1.0;
  bool no_adaptive = false;
  std::string sigma;
  std::optional<double> r;
  bool r_from_fit = false;
  std::size_t record_every = 60;
  RoleArgs roles;
  PreprocessArgs pre;
};

class Runner {
 public:
  Runner(const CommonArgs& common, std::ostream& out) : common_(common), out_(out) {}

  void prepare_outdir() {
    outdir_ = fs::absolute(common_.outdir);
    std::error_code ec;
    fs::create_directories(outdir_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create output directory '" + outdir_.string() + "'");
  }

  fs::path out_path(const std::string& name) {
    outputs_.push_back(name);
    return outdir_ / name;
  }

  void note(const std::string& message) const {
    if (!common_.quiet) out_ << message << '\n';
  }

  void write_manifest(const std::string& command, const std::string& effective_config) {
    {
      std::ofstream cfg(outdir_ / "effective_config.toml", std::ios::binary);
      cfg << effective_config;
    }
    json manifest;
    manifest["command"] = command;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    manifest["timestamp"] = format_iso8601(std::floor(std::chrono::duration<double>(now).count()));
    manifest["config_file"] = "effective_config.toml";
    manifest["outputs"] = outputs_;
    write_json_file(manifest, outdir_ / "run_manifest.json");
  }

 private:
  const CommonArgs& common_;
  std::ostream& out_;
  fs::path outdir_;
  std::vector<std::string> outputs_;
};

fs::path existing_file(const std::string& key, const std::string& value) {
  if (value.empty()) throw ConfigError("'" + key + "': no path given");
  fs::path p = fs::absolute(value);
  if (!fs::is_regular_file(p)) throw ConfigError("'" + key + "': file not found: " + p.string());
  return p;
}

std::vector<int> parse_orders(const std::string& text) {
  std::vector<int> orders;
  auto fail = [&]() -> std::vector<int> { throw ConfigError("'orders': cannot parse '" + text + "'"); };
  try {
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
      const int lo = std::stoi(text.substr(0, dots));
      const int hi = std::stoi(text.substr(dots + 2));
      if (lo < 1 || hi < lo) return fail();
      for (int n = lo; n <= hi; ++n) orders.push_back(n);
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const int n = std::stoi(item);
        if (n < 1) return fail();
        orders.push_back(n);
      }
    }
  } catch (const std::logic_error&) {
    return fail();
  }
  if (orders.empty()) return fail();
  return orders;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << text;
}

// --- generate -------------------------------------------------------------

PlantConfig plant_scenario(const std::string& name) {
  if (name == "plant") return PlantConfig{};
  if (name == "drift") return scenarios::drift_experiment();
  if (name == "drift-siblings") return scenarios::drift_siblings();
  if (name == "stability") return scenarios::stability_months();
  if (name == "year") return scenarios::year();
  throw ConfigError("'scenario': unknown plant scenario '" + name + "'");
}

void cmd_generate(const GenerateArgs& g, const CommonArgs& common, Runner& run) {
  if (!g.days) throw ConfigError("'days': required");
  if (g.months < 1) throw ConfigError("'months': must be >= 1");
  run.prepare_outdir();

  if (g.scenario == "arx-exact" || g.scenario == "arx-noisy") {
    ArxScenario sc = g.scenario == "arx-exact" ? scenarios::exact_recovery() : scenarios::noisy_order3(1);
    if (common.seed) sc.seed = *common.seed;
    if (g.noise) sc.noise_std = *g.noise;
    if (!(*g.days > 0.0) || !(g.interval_s > 0.0)) throw Error(ErrorCode::InvalidConfig, "'days': must be positive");
    sc.truth.sample_interval_s = g.interval_s;
    sc.length = static_cast<std::size_t>(std::llround(*g.days * 86400.0 / g.interval_s));
    const ArxDataset ds = generate_arx_dataset(sc);
    write_csv(ds.frame, run.out_path("dataset.csv"));
    write_ground_truth(ds.truth, ds.frame.length(), run.out_path("groundtruth.json"));
    run.note("wrote " + std::to_string(ds.frame.length()) + " samples");
    return;
  }

  PlantConfig cfg = plant_scenario(g.scenario);
  cfg.duration_days = *g.days;
  cfg.sample_interval_s = g.interval_s;
  if (common.seed) cfg.seed = *common.seed;
  if (g.noise) cfg.output_noise_std = *g.noise;
  if (g.setpoint_noise) cfg.setpoint_noise = *g.setpoint_noise;
  if (g.nonlinearity) cfg.nonlinearity_gain = *g.nonlinearity;

  if (g.months == 1) {
    const PlantDataset ds = generate_dataset(cfg);
    write_csv(ds.frame, run.out_path("dataset.csv"));
    write_ground_truth(ds.truth, ds.frame.length(), run.out_path("groundtruth.json"));
    run.note("wrote " + std::to_string(ds.frame.length()) + " samples");
    return;
  }
  const auto suite = monthly_suite(cfg, g.months);
  for (std::size_t m = 0; m < suite.size(); ++m) {
    char tag[16];
    std::snprintf(tag, sizeof tag, "%02zu", m + 1);
    write_csv(suite[m].frame, run.out_path(std::string("month_") + tag + ".csv"));
    write_ground_truth(suite[m].truth, suite[m].frame.length(), run.out_path(std::string("groundtruth_") + tag + ".json"));
  }
  run.note("wrote " + std::to_string(suite.size()) + " months");
}

// --- preprocess -----------------------------------------------------------

LoadOptions load_options(const ChannelRoleMap& roles) {
  LoadOptions load;
  load.roles = roles;
  return load;
}

void cmd_preprocess(const PreprocessCmd& c, Runner& run) {
  const fs::path input = existing_file("input", c.input);
  c.roles.roles.validate_shape();
  run.prepare_outdir();
  const TimeSeriesFrame raw = load_csv(input, load_options(c.roles.roles));
  const std::size_t n_train = c.pre.train_samples(raw);
  const SbmPreprocessor pre =
      fit_sbm_preprocessor(slice_window(raw, 0, n_train), c.roles.roles, c.pre.savgol, c.pre.cutoff_hz);
  write_csv(build_sbm_dataset(raw, pre), run.out_path("sbm.csv"));
  write_json_file(to_json(pre), run.out_path("preprocessor.json"));
  run.note("preprocessed " + std::to_string(raw.length()) + " samples");
}

// --- fit ------------------------------------------------------------------

void cmd_fit(const FitCmd& c, bool order_given, Runner& run) {
  const fs::path input = existing_file("input", c.input);
  std::optional<std::vector<int>> orders;
  if (!c.orders.empty()) orders = parse_orders(c.orders);
  if (c.order < 1) throw ConfigError("'order': must be >= 1");
  if (!c.preprocessed) c.roles.roles.validate_shape();
  run.prepare_outdir();

  std::optional<TimeSeriesFrame> model_frame;
  std::string output_name = c.output_channel;
  if (c.preprocessed) {
    model_frame = load_csv(input);
    if (!model_frame->has_channel(output_name)) {
      throw Error(ErrorCode::MissingChannel, "output channel '" + output_name + "' not in " + input.string());
    }
  } else {
    const TimeSeriesFrame raw = load_csv(input, load_options(c.roles.roles));
    const std::size_t n_train = c.pre.train_samples(raw);
    const SbmPreprocessor pre =
        fit_sbm_preprocessor(slice_window(raw, 0, n_train), c.roles.roles, c.pre.savgol, c.pre.cutoff_hz);
    write_json_file(to_json(pre), run.out_path("preprocessor.json"));
    model_frame = build_sbm_dataset(raw, pre);
    output_name = "y";
  }
  const std::size_t n_train = c.pre.train_samples(*model_frame);

  int order = c.order;
  if (orders) {
    std::vector<double> days = c.selection_days.empty() ? std::vector<double>{c.pre.d_train_days} : c.selection_days;
    const OrderSelection sel = select_order(*model_frame, *orders, days, output_name);
    std::ostringstream table;
    table << "order,d_train_days,rows,naic,rank_deficient\n";
    for (const auto& cell : sel.table) {
      table << cell.order << ',' << format_double(cell.d_train_days) << ',' << cell.rows << ','
            << (std::isnan(cell.naic) ? std::string("nan") : format_double(cell.naic)) << ','
            << (cell.rank_deficient ? 1 : 0) << '\n';
    }
    write_text(run.out_path("order_selection.csv"), table.str());
    run.note("order selection chose N = " + std::to_string(sel.chosen));
    if (!order_given) order = sel.chosen;
  }

  const ArxModel model =
      fit_least_squares(build_regression(slice_window(*model_frame, 0, n_train), order, output_name));
  json j = to_json(model);
  j["naic"] = naic(build_regression(slice_window(*model_frame, 0, n_train), order, output_name), model);
  j["stable"] = model.is_stable();
  write_json_file(j, run.out_path("model.json"));
  run.note("fitted ARX order " + std::to_string(order) + " on " + std::to_string(n_train) + " samples");
}

// --- run-filter -----------------------------------------------------------

void cmd_run_filter(const FilterCmd& c, Runner& run) {
  const fs::path input = existing_file("input", c.input);
  const fs::path model_path = existing_file("model", c.model);
  std::optional<fs::path> pre_path;
  if (!c.preprocessor.empty()) pre_path = existing_file("preprocessor", c.preprocessor);
  std::optional<fs::path> sigma_path;
  if (!c.sigma.empty()) sigma_path = existing_file("sigma", c.sigma);
  if (c.record_every < 1) throw ConfigError("'record-every': must be >= 1");
  if (c.r && !(*c.r > 0.0)) throw ConfigError("'r': must be positive");
  run.prepare_outdir();

  const ArxModel model = arx_model_from_json(read_json_file(model_path));
  TimeSeriesFrame frame = [&] {
    if (!pre_path) return load_csv(input);
    const SbmPreprocessor pre = preprocessor_from_json(read_json_file(*pre_path));
    return build_sbm_dataset(load_csv(input, load_options(pre.roles)), pre);
  }();
  std::vector<std::string> names = model.input_names;
  names.push_back(model.output_name);
  frame = select_channels(frame, names);

  const Eigen::Index k = model.parameter_count();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(k, k);
  if (sigma_path) {
    json sj = read_json_file(*sigma_path);
    sigma = matrix_from_json(sj.contains("sigma") ? sj["sigma"] : sj);
  }
  if (!(c.d_train_days > 0.0)) throw ConfigError("'d-train': must be positive");
  const auto n_train = static_cast<std::size_t>(std::llround(c.d_train_days * 86400.0 / frame.sample_interval_s()));
  FilterTuning tuning = default_tuning(model.theta(), sigma, std::max<std::size_t>(n_train, 1));
  if (c.r) tuning.R = *c.r;
  ParameterFilter filter(model.theta(), tuning);
  const StreamResult result = run_stream(filter, frame, model.order, c.record_every, model.output_name);
  write_trajectory_csv(result.trajectory, run.out_path("trajectory.csv"));
  const BoundsReport bounds = check_covariance_bounds(filter);
  json summary;
  summary["steps"] = filter.step_count();
  summary["final_theta"] = to_json(filter.theta());
  summary["bounds"] = to_string(bounds.status);
  summary["R"] = tuning.R;
  write_json_file(summary, run.out_path("filter_summary.json"));
  run.note("filtered " + std::to_string(filter.step_count()) + " samples");
}

// --- experiment -----------------------------------------------------------

void cmd_experiment(const ExperimentCmd& c, Runner& run) {
  ExperimentConfig cfg;
  cfg.dataset = existing_file("input", c.input);
  for (const auto& s : c.siblings) cfg.siblings.push_back(existing_file("siblings", s));
  auto& st = cfg.settings;
  st.roles = c.roles.roles;
  st.d_train_days = c.pre.d_train_days;
  st.order = c.order;
  st.horizon.t_sched_s = c.t_sched_days * 86400.0;
  st.horizon.eval_stride_s = c.stride_hours * 3600.0;
  st.adaptive = !c.no_adaptive;
  st.savgol = c.pre.savgol;
  st.cutoff_hz = c.pre.cutoff_hz;
  st.record_every = c.record_every;
  st.tuning.r = c.r;
  st.tuning.r_from_fit = c.r_from_fit;
  if (!c.sigma.empty()) {
    json sj = read_json_file(existing_file("sigma", c.sigma));
    st.sigma = matrix_from_json(sj.contains("sigma") ? sj["sigma"] : sj);
  }
  st.validate();
  run.prepare_outdir();
  const ExperimentReport report = run_experiment(cfg);
  const fs::path dir = run.out_path("report.json").parent_path();
  run.out_path("mse_static.csv");
  if (report.adaptive_series) {
    run.out_path("mse_adaptive.csv");
    run.out_path("trajectory.csv");
  }
  write_report(report, dir);
  for (const auto& s : report.static_summary) {
    run.note("static " + s.name + ": median " + format_double(s.median));
  }
  for (const auto& s : report.adaptive_summary) {
    run.note("adaptive " + s.name + ": median " + format_double(s.median));
  }
}

// Rewrites path-valued options as absolute paths so the echoed config is
// independent of the working directory.
void absolutize_paths(CLI::App* sub) {
  static const std::vector<std::string> path_options{"--input", "--model", "--preprocessor", "--sigma", "--siblings",
                                                     "--outdir"};
  for (CLI::Option* opt : sub->get_options()) {
    if (opt->count() == 0) continue;
    if (std::find(path_options.begin(), path_options.end(), opt->get_name()) == path_options.end()) continue;
    std::vector<std::string> resolved;
    for (const auto& r : opt->results()) resolved.push_back(fs::absolute(r).lexically_normal().string());
    opt->clear();
    for (const auto& r : resolved) opt->add_result(r);
    opt->run_callback();
  }
}

std::string toml_string(const std::string& v) {
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// Every option of the subcommand with its effective value; unset optional
// values are listed as comments so the file can be fed back via --config.
std::string effective_config(const CLI::App* sub) {
  std::ostringstream os;
  os << '[' << sub->get_name() << "]\n";
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string key = opt->get_single_name();
    if (key == "help" || key.empty()) continue;
    std::vector<std::string> values;
    if (opt->count() > 0) {
      values = opt->results();
    } else if (opt->get_type_size_max() == 0) {
      values.push_back("false");
    } else {
      std::string def = opt->get_default_str();
      if (def.size() >= 2 && def.front() == '[' && def.back() == ']') {
        std::stringstream ss(def.substr(1, def.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) values.push_back(item);
      } else if (!def.empty()) {
        values.push_back(def);
      }
    }
    if (values.empty()) {
      os << "# " << key << " unset\n";
    } else if (opt->get_type_size_max() <= 1 && opt->get_expected_max() <= 1 && values.size() == 1) {
      os << key << '=' << toml_string(values.front()) << '\n';
    } else {
      os << key << "=[";
      for (std::size_t i = 0; i < values.size(); ++i) os << (i ? ", " : "") << toml_string(values[i]);
      os << "]\n";
    }
  }
  return os.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scale-bridging ARX models with online parameter updating"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "Read options from a TOML/INI file; flags on the command line win");

  CommonArgs common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--outdir", common.outdir, "Output directory")->capture_default_str();
    sub->add_option("--seed", common.seed, "Random seed");
    sub->add_flag("--quiet", common.quiet, "No progress messages");
  };

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset and its ground truth");
  add_common(generate);
  generate->add_option("--days", gen.days, "Duration in days")->required();
  generate->add_option("--scenario", gen.scenario,
                       "plant, drift, drift-siblings, stability, year, arx-exact or arx-noisy")
      ->capture_default_str();
  generate->add_option("--months", gen.months, "Number of monthly datasets")->capture_default_str();
  generate->add_option("--interval", gen.interval_s, "Sample interval in seconds")->capture_default_str();
  generate->add_option("--noise", gen.noise, "Output noise standard deviation");
  generate->add_option("--setpoint-noise", gen.setpoint_noise, "Noise on the correlated setpoints");
  generate->add_option("--nonlinearity", gen.nonlinearity, "Quadratic gain on input 1");

  PreprocessCmd pre;
  auto* preprocess = app.add_subcommand("preprocess", "Normalize, project and filter a raw dataset");
  add_common(preprocess);
  preprocess->add_option("--input", pre.input, "Raw dataset CSV")->required();
  pre.roles.add_to(preprocess);
  pre.pre.add_to(preprocess);

  FitCmd fit;
  auto* fitc = app.add_subcommand("fit", "Fit an ARX model, optionally sweeping the order");
  add_common(fitc);
  fitc->add_option("--input", fit.input, "Dataset CSV")->required();
  fitc->add_flag("--preprocessed", fit.preprocessed, "Input already holds the model channels");
  fitc->add_option("--output-channel", fit.output_channel, "Output channel of a preprocessed input")
      ->capture_default_str();
  auto* order_opt = fitc->add_option("--order", fit.order, "Model order N")->capture_default_str();
  fitc->add_option("--orders", fit.orders, "Orders to compare, e.g. 1..5 or 1,2,3");
  fitc->add_option("--train-days", fit.selection_days, "Training lengths in days for the order sweep");
  fit.roles.add_to(fitc);
  fit.pre.add_to(fitc);

  FilterCmd flt;
  auto* filter = app.add_subcommand("run-filter", "Stream the Kalman parameter filter over a dataset");
  add_common(filter);
  filter->add_option("--input", flt.input, "Dataset CSV (model channels, or raw with --preprocessor)")->required();
  filter->add_option("--model", flt.model, "model.json from fit")->required();
  filter->add_option("--preprocessor", flt.preprocessor, "preprocessor.json for raw input");
  filter->add_option("--sigma", flt.sigma, "JSON matrix: cross-dataset parameter covariance (default zero)");
  filter->add_option("--d-train", flt.d_train_days, "Training days; Q = Sigma / n_train")->capture_default_str();
  filter->add_option("--r", flt.r, "Residual variance R (default 1)");
  filter->add_option("--record-every", flt.record_every, "Record every k-th step")->capture_default_str();

  ExperimentCmd exp;
  auto* experiment = app.add_subcommand("experiment", "Static versus adaptive moving-horizon evaluation");
  add_common(experiment);
  experiment->add_option("--input", exp.input, "Raw dataset CSV")->required();
  experiment->add_option("--siblings", exp.siblings, "Sibling datasets used for Sigma");
  experiment->add_option("--order", exp.order, "Model order N")->capture_default_str();
  experiment->add_option("--t-sched-days", exp.t_sched_days, "Scheduling horizon in days")->capture_default_str();
  experiment->add_option("--stride-hours", exp.stride_hours, "Evaluation stride in hours")->capture_default_str();
  experiment->add_flag("--no-adaptive", exp.no_adaptive, "Static model only");
  experiment->add_option("--sigma", exp.sigma, "JSON matrix overriding the sibling-derived Sigma");
  experiment->add_option("--r", exp.r, "Residual variance R");
  experiment->add_flag("--r-from-fit", exp.r_from_fit, "Use the static fit's residual variance as R");
  experiment->add_option("--record-every", exp.record_every, "Trajectory stride in samples")->capture_default_str();
  exp.roles.add_to(experiment);
  exp.pre.add_to(experiment);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  Runner runner(common, out);
  CLI::App* active = app.get_subcommands().front();
  try {
    absolutize_paths(active);
    std::string command;
    if (generate->parsed()) {
      command = "generate";
      cmd_generate(gen, common, runner);
    } else if (preprocess->parsed()) {
      command = "preprocess";
      cmd_preprocess(pre, runner);
    } else if (fitc->parsed()) {
      command = "fit";
      cmd_fit(fit, order_opt->count() > 0, runner);
    } else if (filter->parsed()) {
      command = "run-filter";
      cmd_run_filter(flt, runner);
    } else {
      command = "experiment";
      cmd_experiment(exp, runner);
    }
    runner.write_manifest(command, effective_config(active));
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    const bool config = e.code() == ErrorCode::InvalidConfig || e.code() == ErrorCode::InvalidSpec;
    err << (config ? "config error: " : "error: ") << e.what() << '\n';
    return config ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace sbm::cli
