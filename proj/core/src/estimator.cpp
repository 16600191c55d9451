#include "tdk/estimator.hpp"

#include <Eigen/Cholesky>

namespace tdk {

EkfState ekf_init(const Vec& q0, std::size_t motors, double p0, const EkfNoise& noise, double dt,
                  bool exact_curvature) {
  if (!q0.allFinite()) throw Error("ekf_init: q0 must be finite");
  if (!(dt > 0.0)) throw Error("ekf_init: dt must be > 0");
  const Eigen::Index n = q0.size();
  const auto m = static_cast<Eigen::Index>(motors);
  EkfState s;
  s.x = Vec::Zero(2 * n);
  s.x.head(n) = q0;
  s.P = p0 * Mat::Identity(2 * n, 2 * n);
  Vec qdiag(2 * n);
  qdiag << Vec::Constant(n, noise.q_var), Vec::Constant(n, noise.qdot_var);
  s.Q = qdiag.asDiagonal();
  Vec rdiag(2 * m);
  rdiag << Vec::Constant(m, noise.l_var), Vec::Constant(m, noise.ldot_var);
  s.R = rdiag.asDiagonal();
  s.dt = dt;
  s.exact_curvature = exact_curvature;
  return s;
}

namespace {

Mat transition(Eigen::Index n, double dt) {
  Mat F = Mat::Identity(2 * n, 2 * n);
  F.topRightCorner(n, n).diagonal().setConstant(dt);
  return F;
}

}  // namespace

EkfState ekf_predict(const EkfState& s) {
  const Eigen::Index n = s.dof();
  EkfState out = s;
  out.x.head(n) += s.dt * s.x.tail(n);
  const Mat F = transition(n, s.dt);
  out.P = F * s.P * F.transpose() + s.Q;
  out.P = 0.5 * (out.P + out.P.transpose());
  return out;
}

Vec ekf_observation(const EkfState& s, const HandModel& model) {
  const Vec q = s.q();
  const Vec l = tendon_lengths(model, q).l;
  const Vec ldot = muscle_jacobian(model, q) * s.qdot();
  Vec h(l.size() + ldot.size());
  h << l, ldot;
  return h;
}

EkfState ekf_update(const EkfState& s, const TendonLengths& z, const HandModel& model) {
  const Eigen::Index n = s.dof();
  const auto m = static_cast<Eigen::Index>(model.num_motors());
  if (!z.ldot) throw DimensionError("ekf_update: observation needs both l and ldot");
  if (z.l.size() != m || z.ldot->size() != m)
    throw DimensionError("ekf_update: expected " + std::to_string(2 * m) + " observation entries");

  const Vec q = s.q();
  const Vec qdot = s.qdot();
  const Mat J = muscle_jacobian(model, q);

  Vec zz(2 * m);
  zz << z.l, *z.ldot;
  Vec h(2 * m);
  h << tendon_lengths(model, q).l, J * qdot;

  Mat H = Mat::Zero(2 * m, 2 * n);
  H.topLeftCorner(m, n) = J;
  H.bottomRightCorner(m, n) = J;
  if (s.exact_curvature) H.bottomLeftCorner(m, n) = muscle_jacobian_rate(model, q, qdot);

  const Mat PHt = s.P * H.transpose();
  const Mat S = H * PHt + s.R;
  const Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success || !S.allFinite())
    throw EstimatorError("ekf_update: innovation covariance is not positive definite; check R and P");
  const Mat K = llt.solve(PHt.transpose()).transpose();

  EkfState out = s;
  out.x = s.x + K * (zz - h);
  const Mat IKH = Mat::Identity(2 * n, 2 * n) - K * H;
  out.P = IKH * s.P * IKH.transpose() + K * s.R * K.transpose();
  out.P = 0.5 * (out.P + out.P.transpose());
  return out;
}

JointEstimator::JointEstimator(const HandModel& model, Calibration cal, const Options& options)
    : model_(&model),
      cal_(std::move(cal)),
      state_(ekf_init(cal_.q_cal, model.num_motors(), options.p0, options.noise, options.dt,
                      options.exact_curvature)),
      rates_(options.rate_smoothing) {}

TendonLengths JointEstimator::step(const Vec& theta, const std::optional<Vec>& theta_dot) {
  TendonLengths z = motor_angles_to_tendon_lengths(*model_, cal_, theta, theta_dot);
  if (!z.ldot) z.ldot = rates_.update(z.l, state_.dt);
  state_ = ekf_update(ekf_predict(state_), z, *model_);
  return z;
}

}  // namespace tdk
