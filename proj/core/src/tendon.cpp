#include "tdk/tendon.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tdk {

namespace {

using Index = Eigen::Index;

void check_actuated(const HandModel& model, const Vec& q, const char* what) {
  if (static_cast<std::size_t>(q.size()) != model.num_actuated())
    throw DimensionError(std::string(what) + ": expected " + std::to_string(model.num_actuated()) +
                         " joint coordinates, got " + std::to_string(q.size()));
}

void check_motors(const HandModel& model, const Vec& v, const char* what) {
  if (static_cast<std::size_t>(v.size()) != model.num_motors())
    throw DimensionError(std::string(what) + ": expected " + std::to_string(model.num_motors()) +
                         " motor values, got " + std::to_string(v.size()));
}

double term_length(const HandModel::ResolvedTerm& t, double q_joint) {
  if (t.kind == TermKind::Linear) return t.sign * t.value * q_joint;
  return t.sign * 2.0 * t.value * std::sin(0.5 * q_joint);
}

// d/dq_act of a term, where q_joint = scale * q_act.
double term_slope(const HandModel::ResolvedTerm& t, double q_joint) {
  if (t.kind == TermKind::Linear) return t.sign * t.value * t.scale;
  return t.sign * t.value * t.scale * std::cos(0.5 * q_joint);
}

double term_curvature(const HandModel::ResolvedTerm& t, double q_joint) {
  if (t.kind == TermKind::Linear) return 0.0;
  return -0.5 * t.sign * t.value * t.scale * t.scale * std::sin(0.5 * q_joint);
}

double route_length(const HandModel::ResolvedTendon& route, const Vec& q_act) {
  double l = route.rest_length;
  for (const auto& t : route.terms) l += term_length(t, t.scale * q_act[static_cast<Index>(t.actuated)]);
  return l;
}

}  // namespace

Vec route_lengths(const HandModel& model, const Vec& q_act) {
  check_actuated(model, q_act, "route_lengths");
  const auto& routes = model.tendons();
  Vec out(static_cast<Index>(routes.size()));
  for (std::size_t r = 0; r < routes.size(); ++r) out[static_cast<Index>(r)] = route_length(routes[r], q_act);
  return out;
}

TendonLengths tendon_lengths(const HandModel& model, const Vec& q_act) {
  check_actuated(model, q_act, "tendon_lengths");
  const auto& motors = model.motors();
  Vec l(static_cast<Index>(motors.size()));
  for (std::size_t k = 0; k < motors.size(); ++k)
    l[static_cast<Index>(k)] = route_length(model.tendons()[motors[k].primary.tendon], q_act);
  return {l, std::nullopt};
}

MuscleJacobian muscle_jacobian(const HandModel& model, const Vec& q_act) {
  check_actuated(model, q_act, "muscle_jacobian");
  const auto& motors = model.motors();
  Mat J = Mat::Zero(static_cast<Index>(motors.size()), q_act.size());
  for (std::size_t k = 0; k < motors.size(); ++k) {
    for (const auto& t : model.tendons()[motors[k].primary.tendon].terms) {
      const Index a = static_cast<Index>(t.actuated);
      J(static_cast<Index>(k), a) += term_slope(t, t.scale * q_act[a]);
    }
  }
  return J;
}

Mat muscle_jacobian_rate(const HandModel& model, const Vec& q_act, const Vec& qdot_act) {
  check_actuated(model, q_act, "muscle_jacobian_rate");
  check_actuated(model, qdot_act, "muscle_jacobian_rate");
  const auto& motors = model.motors();
  Mat D = Mat::Zero(static_cast<Index>(motors.size()), q_act.size());
  for (std::size_t k = 0; k < motors.size(); ++k) {
    for (const auto& t : model.tendons()[motors[k].primary.tendon].terms) {
      const Index a = static_cast<Index>(t.actuated);
      D(static_cast<Index>(k), a) += term_curvature(t, t.scale * q_act[a]) * qdot_act[a];
    }
  }
  return D;
}

Calibration calibrate(const HandModel& model, const Vec& theta_observed, const Vec& q_known) {
  check_motors(model, theta_observed, "calibrate");
  check_actuated(model, q_known, "calibrate");
  return {theta_observed, q_known, tendon_lengths(model, q_known).l};
}

Vec joints_to_motor_angles(const HandModel& model, const Calibration& cal, const Vec& q_des) {
  const Vec l = tendon_lengths(model, q_des).l;
  Vec theta(l.size());
  const auto& motors = model.motors();
  for (std::size_t k = 0; k < motors.size(); ++k) {
    const auto i = static_cast<Index>(k);
    const auto& p = motors[k].primary;
    theta[i] = cal.theta_cal[i] + p.winding * (l[i] - cal.l_cal[i]) / p.spool_radius;
  }
  return theta;
}

TendonLengths motor_angles_to_tendon_lengths(const HandModel& model, const Calibration& cal, const Vec& theta,
                                             const std::optional<Vec>& theta_dot) {
  check_motors(model, theta, "motor_angles_to_tendon_lengths");
  const auto& motors = model.motors();
  TendonLengths out{Vec(theta.size()), std::nullopt};
  Vec gain(theta.size());
  for (std::size_t k = 0; k < motors.size(); ++k) {
    const auto i = static_cast<Index>(k);
    gain[i] = motors[k].primary.winding * motors[k].primary.spool_radius;
    out.l[i] = cal.l_cal[i] + gain[i] * (theta[i] - cal.theta_cal[i]);
  }
  if (theta_dot) {
    check_motors(model, *theta_dot, "motor_angles_to_tendon_lengths");
    out.ldot = gain.cwiseProduct(*theta_dot);
  }
  return out;
}

Vec TendonRateEstimator::update(const Vec& l, double dt) {
  if (!(dt > 0.0)) throw Error("TendonRateEstimator: dt must be > 0");
  Vec raw = Vec::Zero(l.size());
  if (previous_) raw = (l - *previous_) / dt;
  previous_ = l;
  return smoother_.update(raw);
}

void TendonRateEstimator::reset() {
  smoother_.reset();
  previous_.reset();
}

AntagonisticReport antagonistic_consistency_check(const HandModel& model, int samples_per_joint) {
  AntagonisticReport report;
  const auto na = static_cast<Index>(model.num_actuated());
  const int n = std::max(samples_per_joint, 2);
  const Vec zero = Vec::Zero(na);
  const Vec rest = route_lengths(model, zero);

  for (std::size_t k = 0; k < model.num_motors(); ++k) {
    const auto& motor = model.motors()[k];
    if (!motor.secondary) continue;
    const auto& p = motor.primary;
    const auto& s = *motor.secondary;

    std::set<std::size_t> coords;
    for (const auto* route : {&model.tendons()[p.tendon], &model.tendons()[s.tendon]})
      for (const auto& t : route->terms) coords.insert(t.actuated);

    double worst = 0.0;
    for (std::size_t a : coords) {
      const double lo = model.q_min()[static_cast<Index>(a)];
      const double hi = model.q_max()[static_cast<Index>(a)];
      Vec q = zero;
      for (int i = 0; i < n; ++i) {
        q[static_cast<Index>(a)] = lo + (hi - lo) * i / (n - 1);
        const Vec l = route_lengths(model, q);
        const double spool_turn = p.winding * (l[static_cast<Index>(p.tendon)] - rest[static_cast<Index>(p.tendon)]) /
                                  p.spool_radius;
        // Both tendons share the spool; opposite windings make them antagonistic.
        const double predicted = s.winding * s.spool_radius * spool_turn;
        const double modelled = l[static_cast<Index>(s.tendon)] - rest[static_cast<Index>(s.tendon)];
        worst = std::max(worst, std::abs(predicted - modelled));
      }
    }
    report.per_motor.emplace_back(k, worst);
    report.max_deviation = std::max(report.max_deviation, worst);
  }
  report.within_tolerance = report.max_deviation <= model.description().antagonistic_tolerance;
  return report;
}

}  // namespace tdk
