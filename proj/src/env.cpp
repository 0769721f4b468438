#include "sskp/env.hpp"

#include <cmath>
#include <stdexcept>

#include "sskp/errors.hpp"

namespace sskp {

State Env::reset(Rng& rng) {
    steps_ = 0;
    done_ = false;
    return do_reset(rng);
}

StepResult Env::step(const Action& action) {
    if (done_) throw std::logic_error("Env::step: episode is over; call reset first");
    if (action.size() != spec_.action_dim)
        throw std::invalid_argument("Env::step: action dimension mismatch");

    Action clamped = action.cwiseMax(spec_.action_low).cwiseMin(spec_.action_high);
    StepResult result = do_step(clamped);
    ++steps_;
    if (!result.terminated && steps_ >= spec_.max_episode_steps) result.truncated = true;
    done_ = result.terminated || result.truncated;
    return result;
}

HazardWorld2D::HazardWorld2D() {
    spec_.name = "hazard_world_2d";
    spec_.state_dim = 2;
    spec_.action_dim = 2;
    spec_.action_low = Eigen::Vector2d(-0.1, -0.1);
    spec_.action_high = Eigen::Vector2d(0.1, 0.1);
    spec_.max_episode_steps = 100;

    hazard_centers_ = {Eigen::Vector2d(-0.35, -0.25), Eigen::Vector2d(0.15, 0.2),
                       Eigen::Vector2d(0.55, 0.5)};

    // Hazards and the goal region must not overlap.
    for (const auto& c : hazard_centers_) {
        if ((c - goal_center_).norm() <= hazard_radius_ + goal_radius_)
            throw std::logic_error("HazardWorld2D: hazard overlaps goal region");
    }
}

State HazardWorld2D::do_reset(Rng& rng) {
    position_.x() = rng.uniform(start_low_.x(), start_high_.x());
    position_.y() = rng.uniform(start_low_.y(), start_high_.y());
    return position_;
}

StepResult HazardWorld2D::do_step(const Action& action) {
    position_ = (position_ + Eigen::Vector2d(action)).cwiseMax(-1.0).cwiseMin(1.0);

    StepResult r;
    r.next_state = position_;
    const double goal_dist = (position_ - goal_center_).norm();
    r.reward = -reward_scale_ * goal_dist;

    for (const auto& c : hazard_centers_) {
        if ((position_ - c).norm() <= hazard_radius_) {
            r.cost = 1.0;
            r.terminated = true;
            return r;
        }
    }
    if (goal_dist <= goal_radius_) {
        r.reward += goal_bonus_;
        r.terminated = true;
    }
    return r;
}

nlohmann::json HazardWorld2D::params() const {
    nlohmann::json hazards = nlohmann::json::array();
    for (const auto& c : hazard_centers_) hazards.push_back({c.x(), c.y()});
    return {{"name", spec_.name},
            {"goal_center", {goal_center_.x(), goal_center_.y()}},
            {"goal_radius", goal_radius_},
            {"hazard_centers", hazards},
            {"hazard_radius", hazard_radius_},
            {"reward_scale", reward_scale_},
            {"goal_bonus", goal_bonus_},
            {"start_region", {{start_low_.x(), start_low_.y()}, {start_high_.x(), start_high_.y()}}},
            {"max_episode_steps", spec_.max_episode_steps}};
}

CliffCorridor::CliffCorridor() {
    spec_.name = "cliff_corridor";
    spec_.state_dim = 2;
    spec_.action_dim = 2;
    spec_.action_low = Eigen::Vector2d(-1.0, -0.25);
    spec_.action_high = Eigen::Vector2d(1.0, 0.25);
    spec_.max_episode_steps = 60;
}

State CliffCorridor::observation() const {
    State s(2);
    s << 2.0 * along_ / (num_cells_ - 1) - 1.0, 2.0 * lateral_;
    return s;
}

State CliffCorridor::do_reset(Rng&) {
    // Fixed start at cell 0, centered on the path.
    along_ = 0.0;
    lateral_ = 0.0;
    return observation();
}

StepResult CliffCorridor::do_step(const Action& action) {
    const double prev_cell = std::floor(along_);
    along_ = std::min(std::max(along_ + action(0), 0.0), static_cast<double>(num_cells_ - 1));
    lateral_ = std::min(std::max(lateral_ + action(1), -1.0), 1.0);

    StepResult r;
    r.next_state = observation();
    r.reward = std::floor(along_) - prev_cell;  // +1 per forward cell

    if (std::abs(lateral_) >= cliff_threshold_) {
        r.cost = 1.0;
        r.terminated = true;
        return r;
    }
    if (along_ >= static_cast<double>(num_cells_ - 1)) {
        r.terminated = true;  // end of the corridor
    }
    return r;
}

nlohmann::json CliffCorridor::params() const {
    return {{"name", spec_.name},
            {"num_cells", num_cells_},
            {"cliff_threshold", cliff_threshold_},
            {"max_episode_steps", spec_.max_episode_steps}};
}

std::unique_ptr<Env> make_env(const std::string& name) {
    if (name == "hazard_world_2d") return std::make_unique<HazardWorld2D>();
    if (name == "cliff_corridor") return std::make_unique<CliffCorridor>();
    throw ConfigError("make_env: unknown environment '" + name + "'");
}

}  // namespace sskp
