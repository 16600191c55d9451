#include "tdk/policy.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace tdk {

double gaussian_log_prob(const Vec& mean, const Vec& log_std, const Vec& a) {
  if (mean.size() != log_std.size() || a.size() != mean.size())
    throw DimensionError("gaussian_log_prob: dimension mismatch");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double z = (a[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - half_log_2pi;
  }
  return lp;
}

double gaussian_entropy(const Vec& log_std) {
  return log_std.sum() + 0.5 * static_cast<double>(log_std.size()) * (1.0 + std::log(2.0 * std::numbers::pi));
}

PolicySample policy_sample(const Vec& mean, const Vec& log_std, CounterRng& rng) {
  if (mean.size() != log_std.size()) throw DimensionError("policy_sample: dimension mismatch");
  Vec a(mean.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
  return {a, gaussian_log_prob(mean, log_std, a)};
}

namespace {

using nlohmann::json;

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

[[noreturn]] void bad(const std::string& what) { throw PolicyFormatError("policy document: " + what); }

const json& need(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) bad(where + " is missing '" + key + "'");
  return obj.at(key);
}

Vec vec_from(const json& v, const std::string& where, Eigen::Index expected = -1) {
  if (!v.is_array()) bad(where + " must be an array");
  if (expected >= 0 && static_cast<Eigen::Index>(v.size()) != expected)
    bad(where + " has " + std::to_string(v.size()) + " entries, expected " + std::to_string(expected));
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) bad(where + " must contain numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

std::size_t size_from(const json& obj, const char* key, const std::string& where) {
  const json& v = need(obj, key, where);
  if (!v.is_number_unsigned()) bad(where + "." + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

std::string save_policy(const GaussianPolicy& policy, const PolicyMetadata& m) {
  policy.actor.validate();
  if (policy.log_std.size() != static_cast<Eigen::Index>(policy.actor.output_dim()))
    throw DimensionError("save_policy: log_std size does not match the actor output");
  json layers = json::array();
  for (const auto& l : policy.actor.layers) {
    json weight = json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) weight.push_back(l.weight(r, c));
    layers.push_back({{"in", l.weight.cols()}, {"out", l.weight.rows()}, {"weight", weight},
                      {"bias", vec_json(l.bias)}});
  }
  json doc;
  doc["format"] = std::string(kPolicyFormat);
  doc["version"] = kPolicyVersion;
  doc["actor"] = {{"input_dim", policy.actor.input_dim()},
                  {"output_dim", policy.actor.output_dim()},
                  {"hidden_activation", std::string(to_string(policy.actor.hidden))},
                  {"output_activation", std::string(to_string(policy.actor.output))},
                  {"layers", layers}};
  doc["log_std"] = vec_json(policy.log_std);
  doc["observation"] = {{"history_depth", m.history_depth},
                        {"obs_scale", m.obs_scale},
                        {"q_min", vec_json(m.q_min)},
                        {"q_max", vec_json(m.q_max)}};
  doc["action"] = {{"v_max", m.v_max}, {"policy_rate_hz", m.policy_rate_hz}};
  doc["task"] = {{"axis", std::string(to_string(m.axis))}, {"direction", std::string(to_string(m.direction))}};
  return doc.dump(1);
}

namespace {

PolicyDocument parse_policy(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    bad(std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) bad("top level must be an object");
  const json& format = need(doc, "format", "document");
  if (!format.is_string() || format.get<std::string>() != kPolicyFormat) bad("unknown format");
  const json& version = need(doc, "version", "document");
  if (!version.is_number_integer() || version.get<int>() != kPolicyVersion)
    bad("unsupported version " + version.dump() + " (expected " + std::to_string(kPolicyVersion) + ")");

  PolicyDocument out;
  const json& actor = need(doc, "actor", "document");
  const std::size_t input_dim = size_from(actor, "input_dim", "actor");
  const std::size_t output_dim = size_from(actor, "output_dim", "actor");
  try {
    out.policy.actor.hidden = parse_activation(need(actor, "hidden_activation", "actor").get<std::string>());
    out.policy.actor.output = parse_activation(need(actor, "output_activation", "actor").get<std::string>());
  } catch (const PolicyFormatError&) {
    throw;
  } catch (const std::exception& e) {
    bad(std::string("actor activation: ") + e.what());
  }
  const json& layers = need(actor, "layers", "actor");
  if (!layers.is_array() || layers.empty()) bad("actor.layers must be a non-empty array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = "actor.layers[" + std::to_string(i) + "]";
    const auto in = static_cast<Eigen::Index>(size_from(layers[i], "in", where));
    const auto outd = static_cast<Eigen::Index>(size_from(layers[i], "out", where));
    const Vec flat = vec_from(need(layers[i], "weight", where), where + ".weight", in * outd);
    DenseLayer l{Mat(outd, in), vec_from(need(layers[i], "bias", where), where + ".bias", outd)};
    for (Eigen::Index r = 0; r < outd; ++r)
      for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = flat[r * in + c];
    out.policy.actor.layers.push_back(std::move(l));
  }
  try {
    out.policy.actor.validate();
  } catch (const Error& e) {
    bad(e.what());
  }
  if (out.policy.actor.input_dim() != input_dim)
    bad("actor.input_dim is " + std::to_string(input_dim) + " but the first layer takes " +
        std::to_string(out.policy.actor.input_dim()));
  if (out.policy.actor.output_dim() != output_dim)
    bad("actor.output_dim is " + std::to_string(output_dim) + " but the last layer gives " +
        std::to_string(out.policy.actor.output_dim()));
  out.policy.log_std = vec_from(need(doc, "log_std", "document"), "log_std", static_cast<Eigen::Index>(output_dim));

  const json& obs = need(doc, "observation", "document");
  PolicyMetadata& m = out.metadata;
  const json& depth = need(obs, "history_depth", "observation");
  if (!depth.is_number_integer()) bad("observation.history_depth must be an integer");
  m.history_depth = depth.get<int>();
  const json& scale = need(obs, "obs_scale", "observation");
  if (!scale.is_number()) bad("observation.obs_scale must be a number");
  m.obs_scale = scale.get<double>();
  m.q_min = vec_from(need(obs, "q_min", "observation"), "observation.q_min", static_cast<Eigen::Index>(output_dim));
  m.q_max = vec_from(need(obs, "q_max", "observation"), "observation.q_max", static_cast<Eigen::Index>(output_dim));
  if (m.history_depth < 1 || input_dim != output_dim * static_cast<std::size_t>(m.history_depth + 2))
    bad("actor input_dim " + std::to_string(input_dim) + " does not match " + std::to_string(output_dim) +
        " joints with history depth " + std::to_string(m.history_depth));

  const json& action = need(doc, "action", "document");
  m.v_max = need(action, "v_max", "action").get<double>();
  m.policy_rate_hz = need(action, "policy_rate_hz", "action").get<double>();
  if (doc.contains("task")) {
    try {
      m.axis = parse_axis(need(doc["task"], "axis", "task").get<std::string>());
      m.direction = parse_direction(need(doc["task"], "direction", "task").get<std::string>());
    } catch (const PolicyFormatError&) {
      throw;
    } catch (const std::exception& e) {
      bad(std::string("task: ") + e.what());
    }
  }
  return out;
}

}  // namespace

PolicyDocument load_policy(std::string_view text) {
  try {
    return parse_policy(text);
  } catch (const json::exception& e) {
    bad(e.what());
  }
}

void save_policy_file(const std::string& path, const GaussianPolicy& policy, const PolicyMetadata& metadata) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write policy file '" + path + "'");
  f << save_policy(policy, metadata) << '\n';
  if (!f) throw Error("failed writing policy file '" + path + "'");
}

PolicyDocument load_policy_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open policy file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return load_policy(ss.str());
}

}  // namespace tdk
