#pragma once

#include <string>
#include <string_view>

#include "tdk/mlp.hpp"
#include "tdk/rng.hpp"
#include "tdk/rotation.hpp"
#include "tdk/types.hpp"

namespace tdk {

/// Diagonal Gaussian over actions: mean from the actor network, log standard
/// deviation a free parameter independent of the observation.
struct GaussianPolicy {
  MlpWeights actor;
  Vec log_std;

  std::size_t action_dim() const { return static_cast<std::size_t>(log_std.size()); }
  /// Deterministic action (the mean).
  Vec act(const Vec& obs) const { return mlp_forward(actor, obs); }
};

struct PolicySample {
  Vec action;
  double log_prob;
};

/// Exact log density of `a` under N(mean, diag(exp(2 log_std))).
double gaussian_log_prob(const Vec& mean, const Vec& log_std, const Vec& a);
double gaussian_entropy(const Vec& log_std);

/// a = mean + exp(log_std) * eps with eps ~ N(0, I) drawn from `rng`.
PolicySample policy_sample(const Vec& mean, const Vec& log_std, CounterRng& rng);

inline constexpr std::string_view kPolicyFormat = "tdk.policy";
inline constexpr int kPolicyVersion = 1;

/// What a runtime needs besides the weights to rebuild the actor input and
/// integrate actions.
struct PolicyMetadata {
  int history_depth = 5;
  double obs_scale = 1.0;
  Vec q_min;
  Vec q_max;
  double v_max = 5.0;
  double policy_rate_hz = 20.0;
  Axis axis = Axis::Y;
  Direction direction = Direction::Neg;
};

struct PolicyDocument {
  GaussianPolicy policy;
  PolicyMetadata metadata;
};

class PolicyFormatError : public Error {
 public:
  using Error::Error;
};

/// JSON text with row-major weight arrays.
std::string save_policy(const GaussianPolicy& policy, const PolicyMetadata& metadata);
/// Throws PolicyFormatError on a wrong format/version or any dimension mismatch.
PolicyDocument load_policy(std::string_view text);

void save_policy_file(const std::string& path, const GaussianPolicy& policy, const PolicyMetadata& metadata);
PolicyDocument load_policy_file(const std::string& path);

}  // namespace tdk
