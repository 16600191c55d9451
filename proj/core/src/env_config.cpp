#include <cmath>

#include "json_fields.hpp"
#include "tdk/env_config.hpp"

namespace tdk {

DomainRanges DomainRanges::nominal() {
  DomainRanges r;
  r.observation_noise = {0.0, 0.0};
  for (Range* m : {&r.joint_stiffness, &r.joint_damping, &r.tendon_stiffness, &r.tendon_damping,
                   &r.joint_range, &r.hand_mass, &r.object_mass, &r.friction, &r.object_scale})
    *m = {1.0, 1.0};
  return r;
}

std::string_view to_string(Task t) {
  return t == Task::BallRotation ? "ball_rotation" : "joint_tracking";
}

Task parse_task(std::string_view s) {
  if (s == "ball_rotation") return Task::BallRotation;
  if (s == "joint_tracking") return Task::JointTracking;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected ball_rotation or joint_tracking)");
}

void EnvConfig::validate(const HandModel& model) const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("env config: " + what);
  };
  require(sim_rate_hz > 0.0 && std::isfinite(sim_rate_hz), "sim_rate_hz must be > 0");
  require(substeps >= 1, "substeps must be >= 1");
  require(v_max > 0.0, "v_max must be > 0");
  require(drop_distance > 0.0, "drop_distance must be > 0");
  require(obs_scale > 0.0 && obs_scale <= 1.0, "obs_scale must be in (0, 1]");
  require(episode_length >= 1, "episode_length must be >= 1");
  require(kp > 0.0 && kd >= 0.0, "kp must be > 0 and kd >= 0");
  require(joint_inertia > 0.0, "joint_inertia must be > 0");
  require(history_depth == 5, "history_depth must be 5");
  require(ball.radius > 0.0 && ball.contact_margin >= 0.0, "ball radius must be > 0");
  require(ball.center_lag >= 0.0 && ball.gravity >= 0.0 && ball.free_fall_substeps >= 0,
          "ball lag, gravity and free_fall_substeps must be >= 0");
  require(rest_fraction >= 0.0 && rest_fraction <= 1.0, "rest_fraction must be in [0, 1]");
  require(tracking_fraction >= 0.0 && tracking_fraction <= 1.0, "tracking_fraction must be in [0, 1]");
  require(reset_noise >= 0.0, "reset_noise must be >= 0");
  const auto n = static_cast<Eigen::Index>(model.num_actuated());
  if (rest_pose) {
    require(rest_pose->size() == n, "rest_pose needs one entry per actuated joint");
    require(((rest_pose->array() >= model.q_min().array()) && (rest_pose->array() <= model.q_max().array())).all(),
            "rest_pose must lie within the joint limits");
  }
  if (tracking_target) require(tracking_target->size() == n, "tracking_target needs one entry per actuated joint");
  const DomainRanges& r = ranges;
  for (const Range* m : {&r.observation_noise, &r.joint_stiffness, &r.joint_damping, &r.tendon_stiffness,
                         &r.tendon_damping, &r.joint_range, &r.hand_mass, &r.object_mass, &r.friction,
                         &r.object_scale})
    require(m->lo <= m->hi, "every randomization range needs lo <= hi");
  require(r.observation_noise.lo >= 0.0, "observation noise must be >= 0");
  for (const Range* m : {&r.joint_stiffness, &r.joint_damping, &r.tendon_stiffness, &r.tendon_damping,
                         &r.joint_range, &r.hand_mass, &r.object_mass, &r.object_scale})
    require(m->lo > 0.0, "randomization multipliers must be > 0");
  require(r.friction.lo >= 0.0, "friction multiplier must be >= 0");
}

namespace detail {

namespace {

Range range_from_json(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(where + ": expected [lo, hi]");
  return {v[0].get<double>(), v[1].get<double>()};
}

#define TDK_RANGE_FIELDS(X) \
  X(observation_noise)      \
  X(joint_stiffness)        \
  X(joint_damping)          \
  X(tendon_stiffness)       \
  X(tendon_damping)         \
  X(joint_range)            \
  X(hand_mass)              \
  X(object_mass)            \
  X(friction)               \
  X(object_scale)

DomainRanges ranges_from_json(const json& v, const std::string& where) {
#define TDK_NAME(f) #f,
  reject_unknown_keys(v, {TDK_RANGE_FIELDS(TDK_NAME)}, where);
#undef TDK_NAME
  DomainRanges r;
#define TDK_READ(f) \
  if (v.contains(#f)) r.f = range_from_json(v.at(#f), where + "." #f);
  TDK_RANGE_FIELDS(TDK_READ)
#undef TDK_READ
  return r;
}

json ranges_to_json(const DomainRanges& r) {
  json v = json::object();
#define TDK_WRITE(f) v[#f] = json::array({r.f.lo, r.f.hi});
  TDK_RANGE_FIELDS(TDK_WRITE)
#undef TDK_WRITE
  return v;
}

}  // namespace

EnvConfig env_config_from_json(const json& doc, const std::string& where) {
  reject_unknown_keys(doc,
                      {"task", "sim_rate_hz", "substeps", "v_max", "drop_distance", "axis", "direction",
                       "obs_scale", "weights", "randomize", "ranges", "episode_length", "kp", "kd",
                       "joint_inertia", "history_depth", "ball", "rest_fraction", "rest_pose",
                       "reset_noise", "tracking_fraction", "tracking_target"},
                      where);
  EnvConfig c;
  std::string s;
  if (doc.contains("task")) {
    read_field(doc, "task", s, where);
    c.task = parse_task(s);
  }
  read_field(doc, "sim_rate_hz", c.sim_rate_hz, where);
  read_field(doc, "substeps", c.substeps, where);
  read_field(doc, "v_max", c.v_max, where);
  read_field(doc, "drop_distance", c.drop_distance, where);
  try {
    if (doc.contains("axis")) {
      read_field(doc, "axis", s, where);
      c.axis = parse_axis(s);
    }
    if (doc.contains("direction")) {
      read_field(doc, "direction", s, where);
      c.direction = parse_direction(s);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  read_field(doc, "obs_scale", c.obs_scale, where);
  if (doc.contains("weights")) {
    const json& w = doc.at("weights");
    const std::string at = where + ".weights";
    reject_unknown_keys(w, {"rotation", "torque", "action", "drop"}, at);
    read_field(w, "rotation", c.weights.rotation, at);
    read_field(w, "torque", c.weights.torque, at);
    read_field(w, "action", c.weights.action, at);
    read_field(w, "drop", c.weights.drop, at);
  }
  read_field(doc, "randomize", c.randomize, where);
  if (doc.contains("ranges")) c.ranges = ranges_from_json(doc.at("ranges"), where + ".ranges");
  read_field(doc, "episode_length", c.episode_length, where);
  read_field(doc, "kp", c.kp, where);
  read_field(doc, "kd", c.kd, where);
  read_field(doc, "joint_inertia", c.joint_inertia, where);
  read_field(doc, "history_depth", c.history_depth, where);
  if (doc.contains("ball")) {
    const json& b = doc.at("ball");
    const std::string at = where + ".ball";
    reject_unknown_keys(b,
                        {"radius", "contact_margin", "contact_stiffness", "center_lag", "gravity",
                         "free_fall_substeps", "friction", "fit_regularization"},
                        at);
    read_field(b, "radius", c.ball.radius, at);
    read_field(b, "contact_margin", c.ball.contact_margin, at);
    read_field(b, "contact_stiffness", c.ball.contact_stiffness, at);
    read_field(b, "center_lag", c.ball.center_lag, at);
    read_field(b, "gravity", c.ball.gravity, at);
    read_field(b, "free_fall_substeps", c.ball.free_fall_substeps, at);
    read_field(b, "friction", c.ball.friction, at);
    read_field(b, "fit_regularization", c.ball.fit_regularization, at);
  }
  read_field(doc, "rest_fraction", c.rest_fraction, where);
  if (doc.contains("rest_pose")) c.rest_pose = read_vec(doc.at("rest_pose"), where + ".rest_pose");
  read_field(doc, "reset_noise", c.reset_noise, where);
  read_field(doc, "tracking_fraction", c.tracking_fraction, where);
  if (doc.contains("tracking_target"))
    c.tracking_target = read_vec(doc.at("tracking_target"), where + ".tracking_target");
  return c;
}

json env_config_to_json(const EnvConfig& c) {
  json doc = json::object();
  doc["task"] = std::string(to_string(c.task));
  doc["sim_rate_hz"] = c.sim_rate_hz;
  doc["substeps"] = c.substeps;
  doc["v_max"] = c.v_max;
  doc["drop_distance"] = c.drop_distance;
  doc["axis"] = std::string(to_string(c.axis));
  doc["direction"] = std::string(to_string(c.direction));
  doc["obs_scale"] = c.obs_scale;
  doc["weights"] = {{"rotation", c.weights.rotation},
                    {"torque", c.weights.torque},
                    {"action", c.weights.action},
                    {"drop", c.weights.drop}};
  doc["randomize"] = c.randomize;
  doc["ranges"] = ranges_to_json(c.ranges);
  doc["episode_length"] = c.episode_length;
  doc["kp"] = c.kp;
  doc["kd"] = c.kd;
  doc["joint_inertia"] = c.joint_inertia;
  doc["history_depth"] = c.history_depth;
  doc["ball"] = {{"radius", c.ball.radius},
                 {"contact_margin", c.ball.contact_margin},
                 {"contact_stiffness", c.ball.contact_stiffness},
                 {"center_lag", c.ball.center_lag},
                 {"gravity", c.ball.gravity},
                 {"free_fall_substeps", c.ball.free_fall_substeps},
                 {"friction", c.ball.friction},
                 {"fit_regularization", c.ball.fit_regularization}};
  doc["rest_fraction"] = c.rest_fraction;
  if (c.rest_pose) doc["rest_pose"] = vec_json(*c.rest_pose);
  doc["reset_noise"] = c.reset_noise;
  doc["tracking_fraction"] = c.tracking_fraction;
  if (c.tracking_target) doc["tracking_target"] = vec_json(*c.tracking_target);
  return doc;
}

}  // namespace detail

EnvConfig parse_env_config(std::string_view json_text) {
  return detail::env_config_from_json(detail::parse_json_document(json_text, "env config"), "env");
}

std::string serialize_env_config(const EnvConfig& config) {
  return detail::env_config_to_json(config).dump(2);
}

}  // namespace tdk
