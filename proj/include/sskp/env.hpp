#pragma once

#include <Eigen/Core>

#include <memory>
#include <string>
#include <vector>

#include "sskp/rng.hpp"

#include "json.hpp"

namespace sskp {

using State = Eigen::VectorXd;
using Action = Eigen::VectorXd;

struct EnvSpec {
    std::string name;
    int state_dim = 0;
    int action_dim = 0;
    Eigen::VectorXd action_low;
    Eigen::VectorXd action_high;
    int max_episode_steps = 0;
};

struct StepResult {
    State next_state;
    double reward = 0.0;
    double cost = 0.0;  // binary: 1 on safety violation, else 0
    bool terminated = false;
    bool truncated = false;
};

// Deterministic toy CMDP with a cost signal and hard trajectory termination on
// safety violation (cost = 1 implies terminated). Single-threaded state
// machine; distinct instances are independent.
class Env {
public:
    virtual ~Env() = default;

    const EnvSpec& spec() const { return spec_; }

    State reset(Rng& rng);

    // Clamps out-of-bound action components, applies the transition, raises
    // `truncated` at max_episode_steps. Stepping a finished episode throws.
    StepResult step(const Action& action);

    int steps_taken() const { return steps_; }
    bool episode_over() const { return done_; }

    // Environment parameters for the run's JSON summary.
    virtual nlohmann::json params() const = 0;

protected:
    virtual State do_reset(Rng& rng) = 0;
    // `action` is already clamped. Sets reward/cost/terminated only.
    virtual StepResult do_step(const Action& action) = 0;

    EnvSpec spec_;

private:
    int steps_ = 0;
    bool done_ = true;  // requires reset before first step
};

// Point mass in [-1,1]^2 steered by bounded displacements. Three hazard
// circles sit between the start corner and the goal circle; entering a hazard
// costs 1 and terminates, entering the goal pays a bonus and terminates.
// Reward per step: -reward_scale * ||pos' - goal|| (+ goal_bonus on entry),
// evaluated at the post-transition position.
class HazardWorld2D : public Env {
public:
    HazardWorld2D();

    Eigen::Vector2d goal_center() const { return goal_center_; }
    double goal_radius() const { return goal_radius_; }
    const std::vector<Eigen::Vector2d>& hazard_centers() const { return hazard_centers_; }
    double hazard_radius() const { return hazard_radius_; }
    double reward_scale() const { return reward_scale_; }
    double goal_bonus() const { return goal_bonus_; }

    nlohmann::json params() const override;

protected:
    State do_reset(Rng& rng) override;
    StepResult do_step(const Action& action) override;

private:
    Eigen::Vector2d position_;
    Eigen::Vector2d goal_center_{0.8, 0.8};
    double goal_radius_ = 0.1;
    std::vector<Eigen::Vector2d> hazard_centers_;
    double hazard_radius_ = 0.15;
    double reward_scale_ = 0.1;
    double goal_bonus_ = 10.0;
    Eigen::Vector2d start_low_{-1.0, -1.0};
    Eigen::Vector2d start_high_{-0.8, -0.8};
};

// 1-D corridor of 20 cells with cliffs on both sides, embedded as continuous
// 2-D observations (normalized cell position, 2x lateral offset). Moving
// forward pays +1 per cell crossed; drifting to |lateral| >= 0.5 is a cliff
// fall (cost 1, terminated). Reaching the last cell terminates as a goal.
class CliffCorridor : public Env {
public:
    CliffCorridor();

    double cliff_threshold() const { return cliff_threshold_; }
    int num_cells() const { return num_cells_; }

    nlohmann::json params() const override;

    State observation() const;

protected:
    State do_reset(Rng& rng) override;
    StepResult do_step(const Action& action) override;

private:
    int num_cells_ = 20;
    double cliff_threshold_ = 0.5;
    double along_ = 0.0;    // in [0, num_cells - 1]
    double lateral_ = 0.0;  // in [-1, 1]
};

// Factory keyed by the run config's environment name.
std::unique_ptr<Env> make_env(const std::string& name);

}  // namespace sskp
