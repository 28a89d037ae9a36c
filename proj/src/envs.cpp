#include "kippo/env.hpp"

#include <algorithm>
#include <cmath>

namespace kippo {

Complexity classify(const EnvSpec& spec) {
  int total = spec.state_dim + spec.action_dim;
  if (total < 10) return Complexity::low;
  if (total < 20) return Complexity::medium;
  return Complexity::high;
}

std::string to_string(Complexity c) {
  switch (c) {
    case Complexity::low: return "low";
    case Complexity::medium: return "medium";
    default: return "high";
  }
}

namespace {

double getp(const std::map<std::string, double>& params, const std::string& key, double dflt) {
  auto it = params.find(key);
  return it == params.end() ? dflt : it->second;
}

void reject_unknown(const std::map<std::string, double>& params,
                    const std::vector<std::string>& known, const std::string& env) {
  for (const auto& [k, v] : params) {
    bool ok = false;
    for (const auto& name : known)
      if (k == name) ok = true;
    if (!ok) throw ConfigError("env '" + env + "': unknown parameter '" + k + "'");
  }
}

class EnvBase : public Env {
 public:
  const EnvSpec& spec() const override { return spec_; }

  Vector reset(uint64_t seed) override {
    rng_ = Rng(seed);
    return reset();
  }

  Vector reset() override {
    steps_ = 0;
    needs_reset_ = false;
    return draw_initial();
  }

  StepResult step(const Vector& action) override {
    if (needs_reset_)
      throw ContractError("env '" + name() + "': step() after episode end without reset()");
    if (action.size() != spec_.action_dim)
      throw ShapeError("env '" + name() + "': action has dimension " +
                       std::to_string(action.size()) + ", expected " +
                       std::to_string(spec_.action_dim));
    Vector a = action.cwiseMax(spec_.action_low).cwiseMin(spec_.action_high);
    StepResult r = dynamics(a);
    ++steps_;
    if (steps_ >= spec_.max_episode_steps) r.truncated = true;
    if (r.terminated || r.truncated) needs_reset_ = true;
    return r;
  }

  EnvState save_state() const override {
    EnvState s;
    s.reals.assign(phys_.data(), phys_.data() + phys_.size());
    s.ints = {static_cast<int64_t>(rng_.key()), static_cast<int64_t>(rng_.counter()),
              static_cast<int64_t>(steps_), needs_reset_ ? 1 : 0};
    return s;
  }

  void set_env_state(const EnvState& s) override {
    if (s.ints.size() != 4 || s.reals.size() != static_cast<size_t>(phys_.size()))
      throw SchemaError("env '" + name() + "': malformed saved state");
    phys_ = Eigen::Map<const Vector>(s.reals.data(), static_cast<Index>(s.reals.size()));
    rng_ = Rng::restore(static_cast<uint64_t>(s.ints[0]), static_cast<uint64_t>(s.ints[1]));
    steps_ = static_cast<int>(s.ints[2]);
    needs_reset_ = s.ints[3] != 0;
  }

 protected:
  virtual Vector draw_initial() = 0;
  virtual StepResult dynamics(const Vector& clamped_action) = 0;

  EnvSpec spec_;
  Vector phys_;  // internal physical state
  Rng rng_{0};
  int steps_ = 0;
  bool needs_reset_ = true;
};

// Classic cart-pole with a continuous force input in [-1, 1] scaled to +/-10 N.
// Explicit Euler at dt = 0.02; +1 reward per step alive; terminates when the
// pole passes 12 degrees or the cart leaves +/-2.4 m.
class CartPoleContinuous final : public EnvBase {
 public:
  explicit CartPoleContinuous(const std::map<std::string, double>& params) {
    reject_unknown(params, {"dt", "max_episode_steps", "force_mag"}, "cartpole");
    dt_ = getp(params, "dt", 0.02);
    force_mag_ = getp(params, "force_mag", 10.0);
    spec_.state_dim = 4;
    spec_.action_dim = 1;
    spec_.action_low = Vector::Constant(1, -1.0);
    spec_.action_high = Vector::Constant(1, 1.0);
    spec_.max_episode_steps = static_cast<int>(getp(params, "max_episode_steps", 500));
    phys_ = Vector::Zero(4);
  }

  std::string name() const override { return "cartpole"; }

 protected:
  Vector draw_initial() override {
    for (int i = 0; i < 4; ++i) phys_[i] = rng_.uniform(-0.05, 0.05);
    return phys_;
  }

  StepResult dynamics(const Vector& a) override {
    double x = phys_[0], x_dot = phys_[1], theta = phys_[2], theta_dot = phys_[3];
    double force = force_mag_ * a[0];
    double costh = std::cos(theta), sinth = std::sin(theta);
    double temp = (force + kPoleMassLength * theta_dot * theta_dot * sinth) / kTotalMass;
    double theta_acc =
        (kGravity * sinth - costh * temp) /
        (kLength * (4.0 / 3.0 - kMassPole * costh * costh / kTotalMass));
    double x_acc = temp - kPoleMassLength * theta_acc * costh / kTotalMass;
    phys_[0] = x + dt_ * x_dot;
    phys_[1] = x_dot + dt_ * x_acc;
    phys_[2] = theta + dt_ * theta_dot;
    phys_[3] = theta_dot + dt_ * theta_acc;
    StepResult r;
    r.next_state = phys_;
    r.reward = 1.0;
    r.terminated = std::abs(phys_[0]) > kXThreshold || std::abs(phys_[2]) > kThetaThreshold;
    return r;
  }

 private:
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kTotalMass = kMassCart + kMassPole;
  static constexpr double kLength = 0.5;  // half pole length
  static constexpr double kPoleMassLength = kMassPole * kLength;
  static constexpr double kXThreshold = 2.4;
  static constexpr double kThetaThreshold = 12.0 * M_PI / 180.0;
  double dt_ = 0.02;
  double force_mag_ = 10.0;
};

// Torque-limited pendulum swing-up. Internal state (theta, theta_dot) with
// theta = 0 upright; observation (cos theta, sin theta, theta_dot). Explicit
// Euler at dt = 0.05, angular velocity clamped to +/-8. Reward is the negative
// quadratic cost on wrapped angle, velocity, and torque. No terminal states;
// episodes truncate at 200 steps.
class PendulumSwingUp final : public EnvBase {
 public:
  explicit PendulumSwingUp(const std::map<std::string, double>& params) {
    reject_unknown(params, {"dt", "max_episode_steps"}, "pendulum");
    dt_ = getp(params, "dt", 0.05);
    spec_.state_dim = 3;
    spec_.action_dim = 1;
    spec_.action_low = Vector::Constant(1, -2.0);
    spec_.action_high = Vector::Constant(1, 2.0);
    spec_.max_episode_steps = static_cast<int>(getp(params, "max_episode_steps", 200));
    phys_ = Vector::Zero(2);
  }

  std::string name() const override { return "pendulum"; }

 protected:
  Vector draw_initial() override {
    phys_[0] = rng_.uniform(-M_PI, M_PI);
    phys_[1] = rng_.uniform(-1.0, 1.0);
    return obs();
  }

  StepResult dynamics(const Vector& a) override {
    double theta = phys_[0], theta_dot = phys_[1];
    double u = a[0];
    double wrapped = wrap(theta);
    double theta_acc = 3.0 * kGravity / (2.0 * kLength) * std::sin(theta) +
                       3.0 / (kMass * kLength * kLength) * u;
    phys_[0] = theta + dt_ * theta_dot;
    phys_[1] = std::clamp(theta_dot + dt_ * theta_acc, -kMaxSpeed, kMaxSpeed);
    StepResult r;
    r.next_state = obs();
    r.reward = -(wrapped * wrapped + 0.1 * theta_dot * theta_dot + 0.001 * u * u);
    return r;
  }

 private:
  static double wrap(double theta) {
    double w = std::fmod(theta + M_PI, 2.0 * M_PI);
    if (w < 0) w += 2.0 * M_PI;
    return w - M_PI;
  }
  Vector obs() const {
    Vector o(3);
    o << std::cos(phys_[0]), std::sin(phys_[0]), phys_[1];
    return o;
  }
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kMaxSpeed = 8.0;
  double dt_ = 0.05;
};

// Two-dimensional system x1' = mu*x1, x2' = lambda*(x2 - x1^2) + u under
// explicit Euler. The lifted coordinates (x1, x2, x1^2) evolve exactly
// linearly with control, so a closed-form latent model exists (see
// linpoly_lifted_dynamics). Quadratic state cost, no terminal states.
class LinearizablePoly final : public EnvBase {
 public:
  explicit LinearizablePoly(const std::map<std::string, double>& params) {
    reject_unknown(params, {"dt", "max_episode_steps", "mu", "lambda"}, "linpoly");
    dt_ = getp(params, "dt", 0.05);
    mu_ = getp(params, "mu", -0.05);
    lambda_ = getp(params, "lambda", -1.0);
    spec_.state_dim = 2;
    spec_.action_dim = 1;
    spec_.action_low = Vector::Constant(1, -1.0);
    spec_.action_high = Vector::Constant(1, 1.0);
    spec_.max_episode_steps = static_cast<int>(getp(params, "max_episode_steps", 200));
    phys_ = Vector::Zero(2);
  }

  std::string name() const override { return "linpoly"; }
  double mu() const { return mu_; }
  double lambda() const { return lambda_; }
  double dt() const { return dt_; }

 protected:
  Vector draw_initial() override {
    phys_[0] = rng_.uniform(-1.0, 1.0);
    phys_[1] = rng_.uniform(-1.0, 1.0);
    return phys_;
  }

  StepResult dynamics(const Vector& a) override {
    double x1 = phys_[0], x2 = phys_[1];
    phys_[0] = x1 + dt_ * mu_ * x1;
    phys_[1] = x2 + dt_ * (lambda_ * (x2 - x1 * x1) + a[0]);
    StepResult r;
    r.next_state = phys_;
    r.reward = -phys_.squaredNorm();
    return r;
  }

 private:
  double dt_ = 0.05;
  double mu_ = -0.05;
  double lambda_ = -1.0;
};

}  // namespace

void linpoly_lifted_dynamics(double mu, double lambda, double dt, Matrix& A, Matrix& B) {
  double a = 1.0 + dt * mu;
  double b = 1.0 + dt * lambda;
  A = Matrix::Zero(3, 3);
  A(0, 0) = a;
  A(1, 1) = b;
  A(1, 2) = -dt * lambda;
  A(2, 2) = a * a;
  B = Matrix::Zero(3, 1);
  B(1, 0) = dt;
}

std::unique_ptr<Env> make_env(const std::string& name,
                              const std::map<std::string, double>& params) {
  if (name == "cartpole") return std::make_unique<CartPoleContinuous>(params);
  if (name == "pendulum") return std::make_unique<PendulumSwingUp>(params);
  if (name == "linpoly") return std::make_unique<LinearizablePoly>(params);
  throw ConfigError("unknown environment '" + name + "'");
}

std::vector<std::string> env_names() { return {"cartpole", "pendulum", "linpoly"}; }

}  // namespace kippo
