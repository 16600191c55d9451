// Hand config reader/writer. The document is JSON; see docs/hand_model_schema.md.

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tdk/handmodel.hpp"

namespace tdk {

namespace {

using nlohmann::json;

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Structural errors carry the JSON pointer of the offending value; the DOM
// keeps no source positions, so line/column are 0.
[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw ParseError("hand config " + path + ": " + what, 0, 0);
}

const json& field(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(path, std::string("missing field '") + key + "'");
  return *it;
}

// Unknown keys are usually typos of optional fields, so they are rejected.
void only(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
      schema_error(path, "unknown field '" + key + "'");
  }
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected a number");
  return v.get<double>();
}

std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) schema_error(path, "expected a string");
  return v.get<std::string>();
}

int sign_value(const json& v, const std::string& path) {
  if (!v.is_number_integer()) schema_error(path, "expected an integer (+1 or -1)");
  return v.get<int>();
}

Vec3 vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) schema_error(path, "expected an array of 3 numbers");
  return {number(v[0], path + "/0"), number(v[1], path + "/1"), number(v[2], path + "/2")};
}

const json& array_field(const json& obj, const std::string& path, const char* key) {
  const json& v = field(obj, path, key);
  if (!v.is_array()) schema_error(path + "/" + key, "expected an array");
  return v;
}

std::string at(const std::string& path, const char* key, std::size_t i) {
  return path + "/" + key + "/" + std::to_string(i);
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

HandDescription parse_hand_description(std::string_view config_text) {
  json doc;
  try {
    doc = json::parse(config_text.begin(), config_text.end());
  } catch (const json::parse_error& e) {
    auto [line, col] = line_column(config_text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("hand config syntax error at line " + std::to_string(line) + ", column " +
                         std::to_string(col) + ": " + e.what(),
                     line, col);
  }

  const std::string root;
  const std::string schema = text(field(doc, root, "schema"), "/schema");
  if (schema != kHandSchema)
    schema_error("/schema", "unsupported schema '" + schema + "' (expected '" + std::string(kHandSchema) + "')");

  only(doc, root,
       {"schema", "name", "antagonistic_tolerance", "expect", "links", "joints", "couplings", "tendons", "motors",
        "fingertips"});
  HandDescription d;
  d.name = doc.contains("name") ? text(doc["name"], "/name") : std::string();
  d.antagonistic_tolerance = number(field(doc, root, "antagonistic_tolerance"), "/antagonistic_tolerance");

  if (doc.contains("expect")) {
    const json& e = doc["expect"];
    only(e, "/expect", {"joints", "actuated", "motors", "dual_motors"});
    auto opt = [&](const char* key) -> std::optional<std::size_t> {
      if (!e.contains(key)) return std::nullopt;
      if (!e[key].is_number_unsigned()) schema_error(std::string("/expect/") + key, "expected a count");
      return e[key].get<std::size_t>();
    };
    d.expect = {opt("joints"), opt("actuated"), opt("motors"), opt("dual_motors")};
  }

  const json& links = array_field(doc, root, "links");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto p = at(root, "links", i);
    only(links[i], p, {"name", "length"});
    d.links.push_back({text(field(links[i], p, "name"), p + "/name"),
                       number(field(links[i], p, "length"), p + "/length")});
  }

  const json& joints = array_field(doc, root, "joints");
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const auto p = at(root, "joints", i);
    const json& j = joints[i];
    only(j, p, {"name", "kind", "parent", "child", "origin", "axis", "range", "radius", "hinge_offset"});
    JointSpec js;
    js.name = text(field(j, p, "name"), p + "/name");
    const auto kind = text(field(j, p, "kind"), p + "/kind");
    if (kind == "rolling") {
      js.kind = JointKind::Rolling;
    } else if (kind == "hinge") {
      js.kind = JointKind::Hinge;
    } else {
      schema_error(p + "/kind", "unknown joint kind '" + kind + "'");
    }
    js.parent_link = text(field(j, p, "parent"), p + "/parent");
    js.child_link = text(field(j, p, "child"), p + "/child");
    if (j.contains("origin")) js.origin = vec3(j["origin"], p + "/origin");
    js.axis = vec3(field(j, p, "axis"), p + "/axis");
    const json& range = field(j, p, "range");
    if (!range.is_array() || range.size() != 2) schema_error(p + "/range", "expected [q_min, q_max]");
    js.q_min = number(range[0], p + "/range/0");
    js.q_max = number(range[1], p + "/range/1");
    if (js.kind == JointKind::Rolling) {
      js.radius = number(field(j, p, "radius"), p + "/radius");
      js.hinge_offset = number(field(j, p, "hinge_offset"), p + "/hinge_offset");
    }
    d.joints.push_back(std::move(js));
  }

  const json& couplings = array_field(doc, root, "couplings");
  for (std::size_t i = 0; i < couplings.size(); ++i) {
    const auto p = at(root, "couplings", i);
    const json& c = couplings[i];
    only(c, p, {"driver", "driven", "ratio"});
    d.couplings.push_back({text(field(c, p, "driver"), p + "/driver"),
                           text(field(c, p, "driven"), p + "/driven"),
                           number(field(c, p, "ratio"), p + "/ratio")});
  }

  const json& tendons = array_field(doc, root, "tendons");
  for (std::size_t i = 0; i < tendons.size(); ++i) {
    const auto p = at(root, "tendons", i);
    const json& t = tendons[i];
    only(t, p, {"name", "rest_length", "terms"});
    TendonRoute route;
    route.name = text(field(t, p, "name"), p + "/name");
    route.rest_length = number(field(t, p, "rest_length"), p + "/rest_length");
    const json& terms = array_field(t, p, "terms");
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const auto tp = at(p, "terms", k);
      only(terms[k], tp, {"joint", "kind", "value", "sign"});
      RouteTerm term;
      term.joint = text(field(terms[k], tp, "joint"), tp + "/joint");
      const auto kind = text(field(terms[k], tp, "kind"), tp + "/kind");
      if (kind == "linear") {
        term.kind = TermKind::Linear;
      } else if (kind == "rolling") {
        term.kind = TermKind::Rolling;
      } else {
        schema_error(tp + "/kind", "unknown term kind '" + kind + "'");
      }
      term.value = number(field(terms[k], tp, "value"), tp + "/value");
      term.sign = sign_value(field(terms[k], tp, "sign"), tp + "/sign");
      route.terms.push_back(std::move(term));
    }
    d.tendons.push_back(std::move(route));
  }

  const json& motors = array_field(doc, root, "motors");
  for (std::size_t i = 0; i < motors.size(); ++i) {
    const auto p = at(root, "motors", i);
    only(motors[i], p, {"name", "attachments"});
    MotorSpec m;
    m.name = text(field(motors[i], p, "name"), p + "/name");
    const json& att = array_field(motors[i], p, "attachments");
    for (std::size_t k = 0; k < att.size(); ++k) {
      const auto ap = at(p, "attachments", k);
      only(att[k], ap, {"tendon", "spool_radius", "winding"});
      m.attachments.push_back({text(field(att[k], ap, "tendon"), ap + "/tendon"),
                               number(field(att[k], ap, "spool_radius"), ap + "/spool_radius"),
                               sign_value(field(att[k], ap, "winding"), ap + "/winding")});
    }
    d.motors.push_back(std::move(m));
  }

  const json& tips = array_field(doc, root, "fingertips");
  for (std::size_t i = 0; i < tips.size(); ++i) {
    const auto p = at(root, "fingertips", i);
    only(tips[i], p, {"name", "link", "offset", "cradle"});
    FingertipSpec f;
    f.name = text(field(tips[i], p, "name"), p + "/name");
    f.link = text(field(tips[i], p, "link"), p + "/link");
    if (tips[i].contains("offset")) f.offset = vec3(tips[i]["offset"], p + "/offset");
    if (tips[i].contains("cradle")) {
      if (!tips[i]["cradle"].is_boolean()) schema_error(p + "/cradle", "expected a boolean");
      f.cradle = tips[i]["cradle"].get<bool>();
    }
    d.fingertips.push_back(std::move(f));
  }
  return d;
}

HandModel load_hand_model(std::string_view config_text) {
  return HandModel::from_description(parse_hand_description(config_text));
}

HandModel load_hand_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open hand config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_hand_model(ss.str());
}

std::string serialize_hand_model(const HandDescription& d) {
  json doc = json::object();
  doc["schema"] = std::string(kHandSchema);
  doc["name"] = d.name;
  json expect = json::object();
  if (d.expect.joints) expect["joints"] = *d.expect.joints;
  if (d.expect.actuated) expect["actuated"] = *d.expect.actuated;
  if (d.expect.motors) expect["motors"] = *d.expect.motors;
  if (d.expect.dual_motors) expect["dual_motors"] = *d.expect.dual_motors;
  if (!expect.empty()) doc["expect"] = expect;
  doc["antagonistic_tolerance"] = d.antagonistic_tolerance;

  json links = json::array();
  for (const auto& l : d.links) links.push_back({{"name", l.name}, {"length", l.length}});
  doc["links"] = links;

  json joints = json::array();
  for (const auto& js : d.joints) {
    json j = {{"name", js.name},
              {"kind", std::string(to_string(js.kind))},
              {"parent", js.parent_link},
              {"child", js.child_link},
              {"axis", vec3_json(js.axis)},
              {"range", json::array({js.q_min, js.q_max})}};
    if (js.origin) j["origin"] = vec3_json(*js.origin);
    if (js.kind == JointKind::Rolling) {
      j["radius"] = js.radius;
      j["hinge_offset"] = js.hinge_offset;
    }
    joints.push_back(std::move(j));
  }
  doc["joints"] = joints;

  json couplings = json::array();
  for (const auto& c : d.couplings)
    couplings.push_back({{"driver", c.driver}, {"driven", c.driven}, {"ratio", c.ratio}});
  doc["couplings"] = couplings;

  json tendons = json::array();
  for (const auto& t : d.tendons) {
    json terms = json::array();
    for (const auto& term : t.terms)
      terms.push_back({{"joint", term.joint},
                       {"kind", std::string(to_string(term.kind))},
                       {"value", term.value},
                       {"sign", term.sign}});
    tendons.push_back({{"name", t.name}, {"rest_length", t.rest_length}, {"terms", terms}});
  }
  doc["tendons"] = tendons;

  json motors = json::array();
  for (const auto& m : d.motors) {
    json att = json::array();
    for (const auto& a : m.attachments)
      att.push_back({{"tendon", a.tendon}, {"spool_radius", a.spool_radius}, {"winding", a.winding}});
    motors.push_back({{"name", m.name}, {"attachments", att}});
  }
  doc["motors"] = motors;

  json tips = json::array();
  for (const auto& f : d.fingertips) {
    json t = {{"name", f.name}, {"link", f.link}};
    if (f.offset) t["offset"] = vec3_json(*f.offset);
    if (f.cradle) t["cradle"] = true;
    tips.push_back(std::move(t));
  }
  doc["fingertips"] = tips;
  return doc.dump(2) + "\n";
}

}  // namespace tdk
