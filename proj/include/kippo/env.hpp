#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kippo/common.hpp"
#include "kippo/rng.hpp"

namespace kippo {

struct EnvSpec {
  int state_dim = 0;
  int action_dim = 0;
  Vector action_low;
  Vector action_high;
  int max_episode_steps = 0;
};

enum class Complexity { low, medium, high };
Complexity classify(const EnvSpec& spec);
std::string to_string(Complexity c);

struct StepResult {
  Vector next_state;
  double reward = 0.0;
  bool terminated = false;  // reached a terminal state
  bool truncated = false;   // hit the step limit; reported independently
};

// Opaque serialized environment state for checkpointing.
struct EnvState {
  std::vector<double> reals;
  std::vector<int64_t> ints;
};

// Deterministic continuous-control environment. Out-of-range actions are
// clamped to the action bounds. Stepping a finished episode without reset is
// a contract error.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Vector reset(uint64_t seed) = 0;  // reseed the stream, then draw
  virtual Vector reset() = 0;               // continue the current stream
  virtual StepResult step(const Vector& action) = 0;
  virtual EnvState save_state() const = 0;
  virtual void set_env_state(const EnvState& s) = 0;
  virtual std::string name() const = 0;
};

// Registry. Known names: "cartpole", "pendulum", "linpoly". Unknown names or
// parameter keys raise ConfigError.
std::unique_ptr<Env> make_env(const std::string& name,
                              const std::map<std::string, double>& params = {});
std::vector<std::string> env_names();

// Closed-form dynamics of the lifted coordinates (x1, x2, x1^2) of linpoly
// under its explicit-Euler update: z' = A z + B u, exactly.
void linpoly_lifted_dynamics(double mu, double lambda, double dt, Matrix& A, Matrix& B);

}  // namespace kippo
