#include "tdk/runtime.hpp"

#include <ostream>
#include <thread>

#include "json_fields.hpp"
#include "tdk/csv.hpp"
#include "tdk/env.hpp"

namespace tdk {

void ControlLoopConfig::validate() const {
  if (!(rate_hz > 0.0)) throw ConfigError("control config: rate_hz must be > 0");
  if (!(obs_scale > 0.0 && obs_scale <= 1.0)) throw ConfigError("control config: obs_scale must be in (0, 1]");
  if (!(watchdog_timeout > 0.0)) throw ConfigError("control config: watchdog_timeout must be > 0");
  if (!(v_max > 0.0)) throw ConfigError("control config: v_max must be > 0");
  if (max_missed_ticks < 0) throw ConfigError("control config: max_missed_ticks must be >= 0");
}

namespace {

JointEstimator::Options estimator_options(const ControlLoopConfig& config) {
  JointEstimator::Options o = config.estimator;
  o.dt = 1.0 / config.rate_hz;
  return o;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ControlState::ControlState(const HandModel& model, Calibration cal, const ControlLoopConfig& config)
    : estimator(model, cal, estimator_options(config)),
      qbar(cal.q_cal.cwiseMax(model.q_min()).cwiseMin(model.q_max())),
      history(cal.q_cal.replicate(1, static_cast<Eigen::Index>(kHistoryDepth))),
      a_prev(Vec::Zero(static_cast<Eigen::Index>(model.num_actuated()))),
      theta_des(cal.theta_cal) {}

Vec runtime_actor_observation(const HandModel& model, const ControlLoopConfig& config, const ControlState& state) {
  return build_actor_observation(state.qbar, state.history, state.a_prev, model.q_min(), model.q_max(),
                                 config.obs_scale);
}

TelemetryRecord control_step(DriverInterface& driver, const HandModel& model, const GaussianPolicy& policy,
                             const ControlLoopConfig& config, ControlState& state,
                             std::chrono::steady_clock::time_point t0) {
  TelemetryRecord rec;
  rec.tick = state.tick++;
  rec.t_wall = seconds_since(t0);
  const auto n = static_cast<Eigen::Index>(model.num_actuated());
  const auto m = static_cast<Eigen::Index>(model.num_motors());

  if (state.safe_stop) {
    rec.fault = kFaultSafeStop;
  } else if (std::optional<MotorState> ms = driver.read_motor_state()) {
    if (ms->theta.size() != m || ms->theta_dot.size() != m)
      throw DimensionError("control_step: driver returned " + std::to_string(ms->theta.size()) + " motor angles");
    state.missed = 0;
    rec.t_read = seconds_since(t0);

    const TendonLengths z = state.estimator.step(ms->theta, ms->theta_dot);
    const Vec qhat = state.estimator.q();
    const Eigen::Index depth = state.history.cols();
    state.history.leftCols(depth - 1) = state.history.rightCols(depth - 1).eval();
    state.history.col(depth - 1) = qhat;
    rec.t_estimate = seconds_since(t0);

    const Vec obs = runtime_actor_observation(model, config, state);
    const Vec a = policy.act(obs).cwiseMax(-1.0).cwiseMin(1.0);
    state.qbar = apply_action(state.qbar, a, model.q_min(), model.q_max(), config.v_max, 1.0 / config.rate_hz);
    state.a_prev = a;
    rec.t_act = seconds_since(t0);

    state.theta_des = joints_to_motor_angles(model, state.estimator.calibration(), state.qbar);
    driver.write_motor_targets(state.theta_des);
    rec.t_write = seconds_since(t0);

    rec.theta = ms->theta;
    rec.l = z.l;
    rec.qhat = qhat;
    rec.action = a;
    state.last_state = std::move(ms);
  } else {
    ++state.missed;
    if (state.missed > config.max_missed_ticks) {
      state.safe_stop = true;
      rec.fault = kFaultSafeStop;
    } else {
      rec.fault = kFaultMissedRead;
      driver.write_motor_targets(state.theta_des);  // hold the last command
    }
  }

  if (rec.theta.size() == 0) {
    rec.theta = state.last_state ? state.last_state->theta : state.estimator.calibration().theta_cal;
    rec.l = state.estimator.calibration().l_cal;
    if (state.last_state)
      rec.l = motor_angles_to_tendon_lengths(model, state.estimator.calibration(), state.last_state->theta).l;
    rec.qhat = state.estimator.q();
    rec.action = Vec::Zero(n);
  }
  rec.qbar = state.qbar;
  rec.theta_des = state.theta_des;
  return rec;
}

SessionLog run_control_loop(const ControlLoopConfig& config, const HandModel& model, const GaussianPolicy& policy,
                            DriverInterface& driver, std::ostream* telemetry, const std::atomic<bool>* stop) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(model.num_actuated());
  if (policy.action_dim() != model.num_actuated() || policy.actor.input_dim() != actor_obs_dim(model.num_actuated()))
    throw DimensionError("run_control_loop: policy dimensions do not match the hand model");
  const Vec q_cal = config.calibration_pose.value_or(Vec::Zero(n));
  if (q_cal.size() != n) throw DimensionError("run_control_loop: calibration pose size mismatch");

  // Boot: calibrate before the first policy query.
  std::optional<MotorState> boot;
  for (int attempt = 0; attempt <= config.max_missed_ticks && !boot; ++attempt) boot = driver.read_motor_state();
  if (!boot) throw Error("run_control_loop: driver did not answer during boot calibration");

  SessionLog log;
  log.calibration = calibrate(model, boot->theta, q_cal);
  ControlState state(model, log.calibration, config);

  std::optional<CsvWriter> writer;
  if (telemetry) writer.emplace(*telemetry, telemetry_header(model.num_motors(), model.num_actuated()));

  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / config.rate_hz));
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t k = 0; config.max_ticks == 0 || k < config.max_ticks; ++k) {
    if (stop && stop->load()) break;
    if (config.realtime) std::this_thread::sleep_until(t0 + static_cast<long>(k) * period);
    TelemetryRecord rec = control_step(driver, model, policy, config, state, t0);
    if (writer) writer->write_row(telemetry_row(rec));
    log.records.push_back(std::move(rec));
    if (state.safe_stop) {
      log.faulted = true;
      log.fault_reason = "driver missed " + std::to_string(state.missed) + " consecutive reads; safe stop";
      break;
    }
  }
  if (telemetry) telemetry->flush();
  return log;
}

std::vector<std::string> telemetry_header(std::size_t motors, std::size_t actuated) {
  std::vector<std::string> h{"tick", "t_wall"};
  auto add = [&h](std::string_view prefix, std::size_t count) {
    for (auto& c : indexed_columns(prefix, count)) h.push_back(std::move(c));
  };
  add("theta", motors);
  add("l", motors);
  add("qhat", actuated);
  add("a", actuated);
  add("qbar", actuated);
  add("theta_des", motors);
  for (const char* c : {"fault", "t_read", "t_estimate", "t_act", "t_write"}) h.emplace_back(c);
  return h;
}

std::vector<double> telemetry_row(const TelemetryRecord& r) {
  std::vector<double> row{static_cast<double>(r.tick), r.t_wall};
  for (const Vec* v : {&r.theta, &r.l, &r.qhat, &r.action, &r.qbar, &r.theta_des})
    row.insert(row.end(), v->data(), v->data() + v->size());
  row.insert(row.end(), {static_cast<double>(r.fault), r.t_read, r.t_estimate, r.t_act, r.t_write});
  return row;
}

ControlLoopConfig parse_control_config(std::string_view json_text) {
  using detail::json;
  const json doc = detail::parse_json_document(json_text, "control config");
  const std::string where = "control";
  detail::reject_unknown_keys(doc,
                              {"rate_hz", "obs_scale", "policy", "calibration_pose", "watchdog_timeout",
                               "max_missed_ticks", "max_ticks", "realtime", "v_max", "estimator"},
                              where);
  ControlLoopConfig c;
  detail::read_field(doc, "rate_hz", c.rate_hz, where);
  detail::read_field(doc, "obs_scale", c.obs_scale, where);
  detail::read_field(doc, "policy", c.policy_path, where);
  if (doc.contains("calibration_pose"))
    c.calibration_pose = detail::read_vec(doc.at("calibration_pose"), where + ".calibration_pose");
  detail::read_field(doc, "watchdog_timeout", c.watchdog_timeout, where);
  detail::read_field(doc, "max_missed_ticks", c.max_missed_ticks, where);
  detail::read_field(doc, "max_ticks", c.max_ticks, where);
  detail::read_field(doc, "realtime", c.realtime, where);
  detail::read_field(doc, "v_max", c.v_max, where);
  if (doc.contains("estimator")) {
    const json& e = doc.at("estimator");
    const std::string at = where + ".estimator";
    detail::reject_unknown_keys(e, {"p0", "q_var", "qdot_var", "l_var", "ldot_var", "exact_curvature"}, at);
    detail::read_field(e, "p0", c.estimator.p0, at);
    detail::read_field(e, "q_var", c.estimator.noise.q_var, at);
    detail::read_field(e, "qdot_var", c.estimator.noise.qdot_var, at);
    detail::read_field(e, "l_var", c.estimator.noise.l_var, at);
    detail::read_field(e, "ldot_var", c.estimator.noise.ldot_var, at);
    detail::read_field(e, "exact_curvature", c.estimator.exact_curvature, at);
  }
  c.validate();
  return c;
}

std::string serialize_calibration(const Calibration& cal) {
  const detail::json doc = {{"theta_cal", detail::vec_json(cal.theta_cal)},
                            {"q_cal", detail::vec_json(cal.q_cal)},
                            {"l_cal", detail::vec_json(cal.l_cal)}};
  return doc.dump(1);
}

Calibration parse_calibration(std::string_view json_text, const HandModel& model) {
  const detail::json doc = detail::parse_json_document(json_text, "calibration");
  detail::reject_unknown_keys(doc, {"theta_cal", "q_cal", "l_cal"}, "calibration");
  const auto read = [&](const char* key, std::size_t size) {
    if (!doc.contains(key)) throw ConfigError(std::string("calibration: missing '") + key + "'");
    Vec v = detail::read_vec(doc.at(key), std::string("calibration.") + key);
    if (v.size() != static_cast<Eigen::Index>(size))
      throw ConfigError(std::string("calibration.") + key + ": expected " + std::to_string(size) + " entries, got " +
                        std::to_string(v.size()));
    return v;
  };
  return {read("theta_cal", model.num_motors()), read("q_cal", model.num_actuated()),
          read("l_cal", model.num_motors())};
}

}  // namespace tdk
