#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "tdk/bridge.hpp"
#include "tdk/csv.hpp"
#include "tdk/env.hpp"
#include "tdk/estimator.hpp"
#include "tdk/loopback_driver.hpp"
#include "tdk/policy.hpp"
#include "tdk/runtime.hpp"
#include "tdk/stats.hpp"
#include "tdk/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace tdk {
namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Bad flag values that CLI11 cannot catch on its own.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

fs::path log_root() {
  const char* dir = std::getenv("TDK_LOG_DIR");
  return dir && *dir ? fs::path(dir) : fs::path("logs");
}

fs::path output_path(const std::string& out, const std::string& fallback) {
  fs::path p = out.empty() ? log_root() / fallback : fs::path(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

HandModel load_hand(const std::string& path) {
  return path.empty() ? builtin_proto0() : load_hand_model_file(path);
}

Axis axis_flag(const std::string& s) {
  try {
    return parse_axis(s);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

Direction direction_flag(const std::string& s) {
  try {
    return parse_direction(s);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

PolicyMetadata metadata_for(const HandModel& model, const EnvConfig& env) {
  PolicyMetadata m;
  m.history_depth = env.history_depth;
  m.obs_scale = env.obs_scale;
  m.q_min = model.q_min();
  m.q_max = model.q_max();
  m.v_max = env.v_max;
  m.policy_rate_hz = 1.0 / env.policy_dt();
  m.axis = env.axis;
  m.direction = env.direction;
  return m;
}

// Common options ---------------------------------------------------------------

struct Common {
  std::string config;
  std::string hand;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_seed(CLI::App* cmd, Common& c) {
  cmd->add_option_function<std::uint64_t>(
         "--seed", [&c](std::uint64_t s) { c.seed = s, c.seed_given = true; }, "Random seed")
      ->type_name("N");
}

// train ---------------------------------------------------------------------

struct TrainArgs : Common {
  std::size_t iterations = 0;
  std::size_t threads = 0;
  bool threads_given = false;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  const HandModel model = load_hand(a.hand);
  RunConfig rc = a.config.empty() ? RunConfig{} : load_run_config_file(a.config);
  if (a.seed_given) rc.train.seed = a.seed;
  if (a.iterations > 0) rc.train.iterations = a.iterations;
  if (a.threads_given) rc.train.threads = a.threads;
  rc.env.validate(model);

  const fs::path dir = a.out.empty() ? log_root() / ("train-seed" + std::to_string(rc.train.seed)) : fs::path(a.out);
  fs::create_directories(dir);
  write_file(dir / "config.json", serialize_run_config(rc));

  HandEnvBatch env(model, rc.env, rc.train.num_envs, rc.train.threads);
  std::ofstream log(dir / "training.csv");
  CsvWriter writer(log, training_log_header());
  const PolicyMetadata meta = metadata_for(model, rc.env);
  const TrainResult result = train(env, rc.train, [&](const IterationLog& it, const Trainer& trainer) {
    writer.write_row(training_log_row(it));
    log.flush();
    if (!a.quiet)
      std::cerr << "iter " << it.iter << "  reward " << it.mean_reward << "  omega_target " << it.mean_omega_target
                << "  clip " << it.clip_frac << '\n';
    const std::size_t every = rc.train.checkpoint_every;
    if (every > 0 && (it.iter + 1) % every == 0)
      save_policy_file((dir / ("policy_iter" + std::to_string(it.iter + 1) + ".json")).string(),
                       trainer.agent().policy, meta);
  });
  save_policy_file((dir / "policy.json").string(), result.agent.policy, meta);
  std::cout << (dir / "policy.json").string() << '\n';
  return kOk;
}

// rollout -------------------------------------------------------------------

struct RolloutArgs : Common {
  std::string policy;
  std::size_t steps = 400;
  std::string axis;
  std::string direction;
};

int run_rollout(const RolloutArgs& a) {
  const HandModel model = load_hand(a.hand);
  EnvConfig env_cfg = a.config.empty() ? EnvConfig{} : load_run_config_file(a.config).env;
  if (!a.axis.empty()) env_cfg.axis = axis_flag(a.axis);
  if (!a.direction.empty()) env_cfg.direction = direction_flag(a.direction);
  const HandEnv env(model, env_cfg);

  std::optional<PolicyDocument> doc;
  if (!a.policy.empty()) {
    doc = load_policy_file(a.policy);
    if (doc->policy.actor.input_dim() != env.actor_dim() || doc->policy.action_dim() != env.action_dim())
      throw DimensionError("policy dimensions do not match the environment");
  }
  const BatchPolicy act = doc ? mean_policy(doc->policy) : random_policy(env.action_dim(), a.seed);

  const fs::path path = output_path(a.out, "rollout.csv");
  std::ofstream out(path);
  CsvWriter writer(out, trajectory_header(env.action_dim()));
  EnvState state = env.reset(0, a.seed);
  for (std::size_t t = 0; t < a.steps; ++t) {
    const Mat obs = env.actor_observation(state);
    const StepResult r = env.step(state, act(obs, t).col(0));
    writer.write_row(trajectory_row(t, 0, r, env_cfg.direction_sign(), env_cfg.axis));
  }
  std::cout << path.string() << '\n';
  return kOk;
}

// eval ----------------------------------------------------------------------

struct EvalArgs : Common {
  std::string in;
  std::string axis = "y";
  std::string direction = "neg";
  double alpha = kDefaultEvalSmoothing;
  std::string series;
};

int run_eval(const EvalArgs& a) {
  const CsvTable log = read_csv_file(a.in);
  const Axis axis = axis_flag(a.axis);
  const Direction dir = direction_flag(a.direction);
  const RotationStats st = rotation_stats(log, axis, dir, a.alpha);

  ordered_json j;
  j["axis"] = std::string(to_string(axis));
  j["direction"] = std::string(to_string(dir));
  j["alpha"] = st.alpha;
  j["samples"] = st.samples.size();
  j["mean"] = st.mean;
  j["median"] = st.median;
  j["p05"] = st.p05;
  j["p25"] = st.p25;
  j["p75"] = st.p75;
  j["p95"] = st.p95;
  j["mean_target"] = st.mean_target;
  j["in_band_fraction"] = st.raw_in_band_fraction;
  j["smoothed_in_band_fraction"] = st.in_band_fraction;
  const std::string text = j.dump(2);
  if (a.out.empty()) {
    std::cout << text << '\n';
  } else {
    write_file(output_path(a.out, ""), text);
  }

  if (!a.series.empty()) {
    const double s = direction_sign(dir);
    std::ofstream out(output_path(a.series, ""));
    CsvWriter writer(out, {"sample", "omega", "omega_smoothed", "rot_term", "in_band"});
    for (std::size_t i = 0; i < st.samples.size(); ++i) {
      const double term = rotation_term(st.samples[i], s);
      writer.write_row(std::vector<double>{static_cast<double>(i), st.samples[i], st.smoothed[i], term,
                                           term == kRotationPlateau ? 1.0 : 0.0});
    }
  }
  return kOk;
}

// estimate ------------------------------------------------------------------

struct EstimateArgs : Common {
  std::string in;
  std::string calibration;
  double rate_hz = 20.0;
};

int run_estimate(const EstimateArgs& a) {
  const HandModel model = load_hand(a.hand);
  const std::size_t M = model.num_motors(), n = model.num_actuated();
  const CsvTable log = read_csv_file(a.in);
  if (log.rows.empty()) throw Error("motor log '" + a.in + "' has no rows");
  std::vector<std::size_t> theta_cols, rate_cols;
  for (const auto& name : indexed_columns("theta", M)) theta_cols.push_back(log.require_column(name));
  for (const auto& name : indexed_columns("theta_dot", M))
    if (auto c = log.column(name)) rate_cols.push_back(*c);
  const bool has_rates = rate_cols.size() == M;
  const auto row_vec = [](const std::vector<double>& row, const std::vector<std::size_t>& cols) {
    Vec v(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) v[static_cast<Eigen::Index>(i)] = row[cols[i]];
    return v;
  };

  // Without a calibration file the first sample is taken at the zero pose.
  const Calibration cal = a.calibration.empty()
                              ? calibrate(model, row_vec(log.rows[0], theta_cols), Vec::Zero(static_cast<Eigen::Index>(n)))
                              : parse_calibration(read_file(a.calibration), model);
  JointEstimator::Options opt;
  opt.dt = 1.0 / a.rate_hz;
  JointEstimator est(model, cal, opt);

  std::vector<std::string> header{"step"};
  for (auto& c : indexed_columns("qhat", n)) header.push_back(c);
  for (auto& c : indexed_columns("qdot", n)) header.push_back(c);
  const fs::path path = output_path(a.out, "estimate.csv");
  std::ofstream out(path);
  CsvWriter writer(out, header);
  for (std::size_t t = 0; t < log.rows.size(); ++t) {
    const auto& row = log.rows[t];
    est.step(row_vec(row, theta_cols), has_rates ? std::optional<Vec>(row_vec(row, rate_cols)) : std::nullopt);
    std::vector<double> r{static_cast<double>(t)};
    const Vec& x = est.state().x;
    r.insert(r.end(), x.data(), x.data() + x.size());
    writer.write_row(r);
  }
  std::cout << path.string() << '\n';
  return kOk;
}

// calibrate-sim -------------------------------------------------------------

int run_calibrate_sim(const Common& a) {
  const HandModel model = load_hand(a.hand);
  const ControlLoopConfig cfg = a.config.empty() ? ControlLoopConfig{} : parse_control_config(read_file(a.config));
  const Vec pose = cfg.calibration_pose.value_or(Vec::Zero(static_cast<Eigen::Index>(model.num_actuated())));

  // Motor zero offsets are arbitrary on real hardware; the seed picks them here.
  LoopbackDriver::Options opt;
  CounterRng rng(a.seed, 0x63616c, 0);  // "cal"
  opt.initial_theta = Vec(static_cast<Eigen::Index>(model.num_motors()));
  for (Eigen::Index i = 0; i < opt.initial_theta.size(); ++i) opt.initial_theta[i] = rng.uniform(-1.0, 1.0);
  LoopbackDriver driver(model.num_motors(), opt);
  const auto state = driver.read_motor_state();
  if (!state) throw Error("loopback driver did not answer");
  const Calibration cal = calibrate(model, state->theta, pose);
  const std::string text = serialize_calibration(cal);
  if (a.out.empty()) {
    std::cout << text << '\n';
  } else {
    write_file(output_path(a.out, ""), text);
  }
  return kOk;
}

// serve-bridge --------------------------------------------------------------

struct BridgeArgs : Common {
  std::string bind = "127.0.0.1";
  std::uint16_t port = 5555;
  double tracking = 0.5;
};

int run_serve_bridge(const BridgeArgs& a) {
  const HandModel model = load_hand(a.hand);
  LoopbackDriver::Options opt;
  opt.tracking = a.tracking;
  LoopbackDriver backend(model.num_motors(), opt);
  BridgeServer server(backend, model.num_motors(), a.port, a.bind);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.start();
  std::cout << "listening on " << a.bind << ':' << server.port() << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  return kOk;
}

// run-loop ------------------------------------------------------------------

struct LoopArgs : Common {
  std::string policy;
  std::string connect;
  std::size_t steps = 0;
  bool fast = false;
};

int run_loop(const LoopArgs& a) {
  const HandModel model = load_hand(a.hand);
  ControlLoopConfig cfg = a.config.empty() ? ControlLoopConfig{} : parse_control_config(read_file(a.config));
  if (!a.policy.empty()) cfg.policy_path = a.policy;
  if (a.steps > 0) cfg.max_ticks = a.steps;
  if (a.fast) cfg.realtime = false;
  if (cfg.policy_path.empty()) throw UsageError("run-loop needs a policy (--policy or \"policy\" in the config)");
  if (!a.config.empty() && fs::path(cfg.policy_path).is_relative() && a.policy.empty())
    cfg.policy_path = (fs::path(a.config).parent_path() / cfg.policy_path).string();
  const PolicyDocument doc = load_policy_file(cfg.policy_path);

  std::unique_ptr<DriverInterface> driver;
  if (a.connect.empty()) {
    driver = std::make_unique<LoopbackDriver>(model.num_motors(), LoopbackDriver::Options{1.0 / cfg.rate_hz, 0.5, {}});
  } else {
    const auto colon = a.connect.rfind(':');
    if (colon == std::string::npos) throw UsageError("--connect expects host:port");
    int port = 0;
    try {
      port = std::stoi(a.connect.substr(colon + 1));
    } catch (const std::exception&) {
      throw UsageError("--connect expects host:port");
    }
    driver = std::make_unique<BridgeClientDriver>(a.connect.substr(0, colon), static_cast<std::uint16_t>(port),
                                                  model.num_motors(), cfg.watchdog_timeout);
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const fs::path path = output_path(a.out, "telemetry.csv");
  std::ofstream out(path);
  const SessionLog log = run_control_loop(cfg, model, doc.policy, *driver, &out, &g_stop);
  std::cerr << log.records.size() << " ticks, telemetry in " << path.string() << '\n';
  if (log.faulted) {
    std::cerr << "error: safe stop: " << log.fault_reason << '\n';
    return kRuntime;
  }
  return kOk;
}

}  // namespace
}  // namespace tdk

int main(int argc, char** argv) {
  using namespace tdk;
  CLI::App app{"Tendon-driven hand toolkit: training, evaluation and hardware runtime"};
  app.require_subcommand(1);

  const auto common = [](CLI::App* cmd, Common& c, bool config = true) {
    if (config) cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--hand", c.hand, "Hand description (default: built-in Proto-0)")->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "Output path (default under $TDK_LOG_DIR)");
  };

  TrainArgs train_a;
  auto* train = app.add_subcommand("train", "Train a policy with PPO");
  common(train, train_a);
  add_seed(train, train_a);
  train->add_option("--iterations", train_a.iterations, "Override the configured iteration count");
  train->add_option_function<std::size_t>(
      "--threads", [&](std::size_t t) { train_a.threads = t, train_a.threads_given = true; },
      "Env stepping threads (0 = all cores)");
  train->add_flag("--quiet", train_a.quiet, "No per-iteration progress");

  RolloutArgs roll_a;
  auto* rollout = app.add_subcommand("rollout", "Run one environment and write its trajectory CSV");
  common(rollout, roll_a);
  add_seed(rollout, roll_a);
  rollout->add_option("--policy", roll_a.policy, "Policy document (default: uniform random actions)")
      ->check(CLI::ExistingFile);
  rollout->add_option("--steps", roll_a.steps, "Policy steps")->check(CLI::PositiveNumber);
  rollout->add_option("--axis", roll_a.axis, "Target axis {x,y,z}");
  rollout->add_option("--direction", roll_a.direction, "Target direction {pos,neg}");

  EvalArgs eval_a;
  auto* eval = app.add_subcommand("eval", "Rotation statistics of a trajectory CSV");
  common(eval, eval_a, false);
  eval->add_option("--in", eval_a.in, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--axis", eval_a.axis, "Axis {x,y,z}");
  eval->add_option("--direction", eval_a.direction, "Target direction {pos,neg}");
  eval->add_option("--alpha", eval_a.alpha, "Smoothing factor in (0, 1]");
  eval->add_option("--series", eval_a.series, "Plot-ready per-sample CSV");

  EstimateArgs est_a;
  auto* estimate = app.add_subcommand("estimate", "Joint estimates from a motor-angle log");
  common(estimate, est_a, false);
  estimate->add_option("--in", est_a.in, "CSV with theta0..theta{M-1} (optional theta_dot*)")
      ->required()
      ->check(CLI::ExistingFile);
  estimate->add_option("--calibration", est_a.calibration, "Calibration file (default: first row at zero pose)")
      ->check(CLI::ExistingFile);
  estimate->add_option("--rate", est_a.rate_hz, "Sample rate in Hz")->check(CLI::PositiveNumber);

  Common cal_a;
  auto* calib = app.add_subcommand("calibrate-sim", "Calibrate against the loopback driver at the known pose");
  common(calib, cal_a);
  add_seed(calib, cal_a);

  BridgeArgs bridge_a;
  auto* serve = app.add_subcommand("serve-bridge", "Serve a loopback motor bus over TCP");
  common(serve, bridge_a, false);
  serve->add_option("--bind", bridge_a.bind, "Bind address");
  serve->add_option("--port", bridge_a.port, "TCP port (0 picks a free one)");
  serve->add_option("--tracking", bridge_a.tracking, "Loopback tracking fraction per read")
      ->check(CLI::Range(0.0, 1.0));

  LoopArgs loop_a;
  auto* loop = app.add_subcommand("run-loop", "Run the 20 Hz control loop");
  common(loop, loop_a);
  loop->add_option("--policy", loop_a.policy, "Policy document (overrides the config)")->check(CLI::ExistingFile);
  loop->add_option("--connect", loop_a.connect, "Bridge host:port (default: in-process loopback)");
  loop->add_option("--steps", loop_a.steps, "Stop after this many ticks");
  loop->add_flag("--fast", loop_a.fast, "Do not pace ticks with the wall clock");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return run_train(train_a);
    if (*rollout) return run_rollout(roll_a);
    if (*eval) return run_eval(eval_a);
    if (*estimate) return run_estimate(est_a);
    if (*calib) return run_calibrate_sim(cal_a);
    if (*serve) return run_serve_bridge(bridge_a);
    if (*loop) return run_loop(loop_a);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const PolicyFormatError& e) {
    std::cerr << "policy format error: " << e.what() << '\n';
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << '\n';
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << '\n';
  } catch (const EstimatorError& e) {
    std::cerr << "estimator error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 2;
}
