#include "tdk/handmodel.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace tdk {

namespace detail {
std::string_view proto0_config_text();
}

std::string_view to_string(JointKind kind) {
  return kind == JointKind::Rolling ? "rolling" : "hinge";
}

std::string_view to_string(TermKind kind) {
  return kind == TermKind::Rolling ? "rolling" : "linear";
}

namespace {

constexpr double kUnitTol = 1e-9;

std::string join_messages(const std::vector<Violation>& violations) {
  std::ostringstream os;
  os << "hand model invalid (" << violations.size() << " violation"
     << (violations.size() == 1 ? "" : "s") << ")";
  for (const auto& v : violations) os << "\n  [" << v.invariant << "] " << v.message;
  return os.str();
}

template <typename T>
std::map<std::string, std::size_t> index_by_name(const std::vector<T>& items) {
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i) out.emplace(items[i].name, i);
  return out;
}

class Checker {
 public:
  void fail(std::string invariant, std::string message) {
    out.push_back({std::move(invariant), std::move(message)});
  }
  std::vector<Violation> out;
};

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(join_messages(violations)), violations_(std::move(violations)) {}

std::vector<Violation> validate_hand_model(const HandDescription& d) {
  Checker c;

  // links
  if (d.links.empty()) c.fail("link.root", "no links; the first link is the root (palm)");
  std::set<std::string> seen;
  for (const auto& l : d.links) {
    if (l.name.empty()) c.fail("link.name", "link with empty name");
    if (!seen.insert(l.name).second) c.fail("link.unique", "duplicate link '" + l.name + "'");
    if (!(l.length >= 0.0) || !std::isfinite(l.length))
      c.fail("link.length", "link '" + l.name + "' must have a finite length >= 0");
  }
  const auto links = index_by_name(d.links);

  // joints
  seen.clear();
  std::map<std::string, std::size_t> link_owner;  // child link -> joint index
  std::set<std::string> reachable;
  if (!d.links.empty()) reachable.insert(d.links.front().name);
  for (std::size_t j = 0; j < d.joints.size(); ++j) {
    const auto& js = d.joints[j];
    const std::string who = "joint '" + js.name + "'";
    if (js.name.empty()) c.fail("joint.name", "joint with empty name");
    if (!seen.insert(js.name).second) c.fail("joint.unique", "duplicate " + who);
    if (!(js.q_min < js.q_max))
      c.fail("joint.range", who + " has q_min >= q_max");
    if (std::abs(js.axis.norm() - 1.0) > kUnitTol)
      c.fail("joint.axis", who + " axis is not unit-norm");
    if (js.kind == JointKind::Rolling) {
      if (!(js.radius > 0.0)) c.fail("joint.radius", who + " rolling radius must be > 0");
      if (!(js.hinge_offset >= 0.0) || !std::isfinite(js.hinge_offset))
        c.fail("joint.hinge_offset", who + " hinge offset must be finite and >= 0");
      if (std::abs(js.axis.x()) > kUnitTol)
        c.fail("joint.axis", who + " rolling axis must be orthogonal to the local x axis");
    }
    if (!links.contains(js.parent_link))
      c.fail("joint.parent", who + " references missing parent link '" + js.parent_link + "'");
    if (!links.contains(js.child_link))
      c.fail("joint.child", who + " references missing child link '" + js.child_link + "'");
    if (!d.links.empty() && js.child_link == d.links.front().name)
      c.fail("joint.child", who + " uses the root link as a child");
    if (!link_owner.emplace(js.child_link, j).second)
      c.fail("joint.child", "link '" + js.child_link + "' is the child of more than one joint");
    if (links.contains(js.parent_link) && !reachable.contains(js.parent_link))
      c.fail("joint.order", who + " appears before the joint that places its parent link");
    reachable.insert(js.child_link);
  }
  const auto joints = index_by_name(d.joints);

  // couplings
  std::set<std::string> driven;
  for (const auto& cp : d.couplings) {
    const std::string who = "coupling " + cp.driven + "<-" + cp.driver;
    if (!joints.contains(cp.driver)) c.fail("coupling.joint", who + " references missing joint '" + cp.driver + "'");
    if (!joints.contains(cp.driven)) c.fail("coupling.joint", who + " references missing joint '" + cp.driven + "'");
    if (cp.driver == cp.driven) c.fail("coupling.self", who + " couples a joint to itself");
    if (!driven.insert(cp.driven).second) c.fail("coupling.unique", "joint '" + cp.driven + "' is driven by more than one coupling");
    if (!std::isfinite(cp.ratio)) c.fail("coupling.ratio", who + " ratio must be finite");
  }
  for (const auto& cp : d.couplings) {
    if (driven.contains(cp.driver))
      c.fail("coupling.chain", "coupling driver '" + cp.driver + "' is itself a driven joint");
  }
  const std::size_t actuated = d.joints.size() >= driven.size() ? d.joints.size() - driven.size() : 0;

  // tendons
  seen.clear();
  for (const auto& t : d.tendons) {
    const std::string who = "tendon '" + t.name + "'";
    if (!seen.insert(t.name).second) c.fail("tendon.unique", "duplicate " + who);
    if (!(t.rest_length > 0.0)) c.fail("tendon.rest_length", who + " rest length must be > 0");
    if (t.terms.empty()) c.fail("tendon.terms", who + " has no route terms");
    std::optional<std::size_t> prev;
    for (const auto& term : t.terms) {
      auto it = joints.find(term.joint);
      if (it == joints.end()) {
        c.fail("tendon.joint", who + " references missing joint '" + term.joint + "'");
        continue;
      }
      if (prev && it->second <= *prev)
        c.fail("tendon.order", who + " terms are not in proximal-to-distal order");
      prev = it->second;
      if (term.sign != 1 && term.sign != -1) c.fail("tendon.sign", who + " term sign must be +1 or -1");
      if (!(term.value > 0.0) || !std::isfinite(term.value))
        c.fail("tendon.value", who + " term value must be finite and > 0");
    }
  }
  const auto tendons = index_by_name(d.tendons);

  // motors
  seen.clear();
  std::set<std::string> attached;
  std::size_t dual = 0;
  for (const auto& m : d.motors) {
    const std::string who = "motor '" + m.name + "'";
    if (!seen.insert(m.name).second) c.fail("motor.unique", "duplicate " + who);
    if (m.attachments.empty() || m.attachments.size() > 2)
      c.fail("motor.attachments", who + " must have 1 or 2 tendon attachments");
    if (m.attachments.size() == 2) ++dual;
    for (const auto& a : m.attachments) {
      if (!tendons.contains(a.tendon)) c.fail("motor.tendon", who + " references missing tendon '" + a.tendon + "'");
      if (!attached.insert(a.tendon).second) c.fail("motor.tendon", "tendon '" + a.tendon + "' is attached to more than one spool");
      if (!(a.spool_radius > 0.0)) c.fail("motor.spool_radius", who + " spool radius must be > 0");
      if (a.winding != 1 && a.winding != -1) c.fail("motor.winding", who + " winding must be +1 or -1");
    }
  }

  // fingertips
  if (d.fingertips.size() != kFingerOrder.size()) {
    c.fail("fingertip.count", "expected 5 fingertips, found " + std::to_string(d.fingertips.size()));
  } else {
    for (std::size_t i = 0; i < kFingerOrder.size(); ++i) {
      if (d.fingertips[i].name != kFingerOrder[i])
        c.fail("fingertip.order", "fingertip " + std::to_string(i) + " must be '" +
                                      std::string(kFingerOrder[i]) + "', found '" + d.fingertips[i].name + "'");
    }
  }
  for (const auto& f : d.fingertips) {
    if (!links.contains(f.link)) c.fail("fingertip.link", "fingertip '" + f.name + "' references missing link '" + f.link + "'");
  }

  if (!(d.antagonistic_tolerance >= 0.0))
    c.fail("model.antagonistic_tolerance", "antagonistic tolerance must be >= 0");

  auto expect = [&](const std::optional<std::size_t>& want, std::size_t got, const char* key, const char* what) {
    if (want && *want != got)
      c.fail(key, std::string("expected ") + std::to_string(*want) + " " + what + ", found " + std::to_string(got));
  };
  expect(d.expect.joints, d.joints.size(), "expect.joints", "joints");
  expect(d.expect.actuated, actuated, "expect.actuated", "actuated joints");
  expect(d.expect.motors, d.motors.size(), "expect.motors", "motors");
  expect(d.expect.dual_motors, dual, "expect.dual_motors", "two-tendon motors");

  return std::move(c.out);
}

HandModel HandModel::from_description(HandDescription desc) {
  if (auto v = validate_hand_model(desc); !v.empty()) throw ValidationError(std::move(v));

  HandModel m;
  m.desc_ = std::move(desc);
  const auto& d = m.desc_;
  const auto links = index_by_name(d.links);
  const auto joints = index_by_name(d.joints);
  const auto tendons = index_by_name(d.tendons);

  std::map<std::size_t, std::pair<std::size_t, double>> coupled;  // driven -> (driver, ratio)
  for (const auto& cp : d.couplings) coupled[joints.at(cp.driven)] = {joints.at(cp.driver), cp.ratio};

  const std::size_t nj = d.joints.size();
  std::vector<std::size_t> act_of(nj, 0);
  for (std::size_t j = 0; j < nj; ++j) {
    if (!coupled.contains(j)) {
      act_of[j] = m.actuated_.size();
      m.actuated_.push_back(j);
    }
  }
  m.joint_source_.resize(nj);
  m.joint_scale_.resize(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    if (auto it = coupled.find(j); it != coupled.end()) {
      m.joint_source_[j] = act_of[it->second.first];
      m.joint_scale_[j] = it->second.second;
    } else {
      m.joint_source_[j] = act_of[j];
      m.joint_scale_[j] = 1.0;
    }
  }

  for (const auto& js : d.joints) {
    const std::size_t parent = links.at(js.parent_link);
    m.joint_parent_.push_back(parent);
    m.joint_child_.push_back(links.at(js.child_link));
    m.joint_origin_.push_back(js.origin.value_or(Vec3(d.links[parent].length, 0.0, 0.0)));
  }

  for (const auto& t : d.tendons) {
    ResolvedTendon rt{{}, t.rest_length};
    for (const auto& term : t.terms) {
      const std::size_t j = joints.at(term.joint);
      rt.terms.push_back({j, m.joint_source_[j], m.joint_scale_[j], term.kind, term.value, term.sign});
    }
    m.tendons_.push_back(std::move(rt));
  }
  for (const auto& mot : d.motors) {
    auto resolve = [&](const Attachment& a) {
      return ResolvedAttachment{tendons.at(a.tendon), a.spool_radius, a.winding};
    };
    ResolvedMotor rm{resolve(mot.attachments[0]), std::nullopt};
    if (mot.attachments.size() == 2) rm.secondary = resolve(mot.attachments[1]);
    m.motors_.push_back(rm);
  }
  for (const auto& f : d.fingertips) {
    const std::size_t link = links.at(f.link);
    m.fingertips_.push_back({link, f.offset.value_or(Vec3(d.links[link].length, 0.0, 0.0)), f.cradle});
  }

  const auto na = m.actuated_.size();
  m.q_min_.resize(static_cast<Eigen::Index>(na));
  m.q_max_.resize(static_cast<Eigen::Index>(na));
  for (std::size_t a = 0; a < na; ++a) {
    m.q_min_[static_cast<Eigen::Index>(a)] = d.joints[m.actuated_[a]].q_min;
    m.q_max_[static_cast<Eigen::Index>(a)] = d.joints[m.actuated_[a]].q_max;
  }
  return m;
}

std::optional<std::size_t> HandModel::joint_index(std::string_view name) const {
  for (std::size_t j = 0; j < desc_.joints.size(); ++j)
    if (desc_.joints[j].name == name) return j;
  return std::nullopt;
}

std::optional<std::size_t> HandModel::actuated_index(std::string_view name) const {
  for (std::size_t a = 0; a < actuated_.size(); ++a)
    if (desc_.joints[actuated_[a]].name == name) return a;
  return std::nullopt;
}

std::string_view builtin_proto0_text() { return detail::proto0_config_text(); }

const HandModel& builtin_proto0() {
  static const HandModel model = load_hand_model(builtin_proto0_text());
  return model;
}

}  // namespace tdk
