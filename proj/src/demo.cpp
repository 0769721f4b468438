#include "sskp/demo.hpp"

#include <fstream>
#include <stdexcept>

#include "sskp/errors.hpp"

#include "json.hpp"

namespace sskp {

std::string ended_by_name(EndedBy e) {
    switch (e) {
        case EndedBy::Goal: return "goal";
        case EndedBy::Violation: return "violation";
        case EndedBy::Truncation: return "truncation";
    }
    return "truncation";
}

EndedBy ended_by_from_name(const std::string& name) {
    if (name == "goal") return EndedBy::Goal;
    if (name == "violation") return EndedBy::Violation;
    if (name == "truncation") return EndedBy::Truncation;
    throw std::invalid_argument("unknown ended_by: " + name);
}

double DemoDataset::violation_fraction() const {
    if (trajectories.empty()) return 0.0;
    int violations = 0;
    for (const auto& t : trajectories)
        if (t.ended_by == EndedBy::Violation) ++violations;
    return static_cast<double>(violations) / static_cast<double>(trajectories.size());
}

double DemoDataset::mean_length() const {
    if (trajectories.empty()) return 0.0;
    return static_cast<double>(total_steps()) / static_cast<double>(trajectories.size());
}

int DemoDataset::total_steps() const {
    int steps = 0;
    for (const auto& t : trajectories) steps += t.length();
    return steps;
}

Action hazard_world_controller(const HazardWorld2D& env, const State& state, Rng& rng,
                               double noise_scale) {
    const Eigen::Vector2d pos(state(0), state(1));
    const Eigen::Vector2d to_goal = env.goal_center() - pos;
    const double dist = to_goal.norm();
    const double max_step = 0.1;

    // Proportional attraction, saturated at the action bound.
    Eigen::Vector2d action = (dist > max_step) ? Eigen::Vector2d(to_goal / dist * max_step)
                                               : Eigen::Vector2d(to_goal);

    // Radial push-back plus a tangential slide (on the goal side) inside an
    // influence ring around each hazard. The radial gain beats the attraction
    // at the hazard boundary, so only exploration noise causes violations.
    const double influence = env.hazard_radius() + 0.2;
    for (const auto& c : env.hazard_centers()) {
        const Eigen::Vector2d away = pos - c;
        const double d = away.norm();
        if (d < influence && d > 1e-12) {
            const double w = (influence - d) / influence;
            action += away / d * 0.25 * w;
            Eigen::Vector2d tangent(-away.y(), away.x());
            if (tangent.dot(to_goal) < 0.0) tangent = -tangent;
            action += tangent / d * 0.1 * w;
        }
    }

    action += noise_scale * Eigen::Vector2d(rng.normal(), rng.normal());
    return action.cwiseMax(-max_step).cwiseMin(max_step);
}

Action cliff_corridor_controller(const CliffCorridor& env, const State& state, Rng& rng,
                                 double noise_scale) {
    const double lateral = state(1) / 2.0;  // undo the observation scaling
    // Weak centering: lateral drift accumulates, so occasional cliff falls
    // keep the dataset imperfect.
    Eigen::Vector2d action(0.8, -0.3 * lateral);
    action += noise_scale * Eigen::Vector2d(rng.normal(), 2.5 * rng.normal());
    (void)env;
    return action;
}

Controller make_scripted_controller(const Env& env, double noise_scale) {
    if (const auto* hw = dynamic_cast<const HazardWorld2D*>(&env)) {
        return [hw, noise_scale](const State& s, Rng& rng) {
            return hazard_world_controller(*hw, s, rng, noise_scale);
        };
    }
    if (const auto* cc = dynamic_cast<const CliffCorridor*>(&env)) {
        return [cc, noise_scale](const State& s, Rng& rng) {
            return cliff_corridor_controller(*cc, s, rng, noise_scale);
        };
    }
    throw std::invalid_argument("make_scripted_controller: no controller for env '" +
                                env.spec().name + "'");
}

Trajectory rollout(Env& env, const Controller& controller, Rng& rng) {
    Trajectory traj;
    State s = env.reset(rng);
    traj.states.push_back(s);
    while (true) {
        Action a = controller(s, rng);
        StepResult r = env.step(a);
        traj.actions.push_back(a.cwiseMax(env.spec().action_low).cwiseMin(env.spec().action_high));
        traj.rewards.push_back(r.reward);
        traj.costs.push_back(r.cost);
        traj.states.push_back(r.next_state);
        s = r.next_state;
        if (r.terminated || r.truncated) {
            if (r.cost > 0.0) traj.ended_by = EndedBy::Violation;
            else if (r.terminated) traj.ended_by = EndedBy::Goal;
            else traj.ended_by = EndedBy::Truncation;
            break;
        }
    }
    return traj;
}

DemoDataset generate_demonstrations(Env& env, const Controller& controller,
                                    const std::string& controller_name, int n_trajectories,
                                    std::uint64_t seed) {
    if (n_trajectories < 1)
        throw std::invalid_argument("generate_demonstrations: n_trajectories must be >= 1");
    DemoDataset demos;
    demos.env_name = env.spec().name;
    demos.controller_name = controller_name;
    demos.seed = seed;
    Rng root(seed);
    for (int i = 0; i < n_trajectories; ++i) {
        Rng traj_rng = root.split(static_cast<std::uint64_t>(i));
        demos.trajectories.push_back(rollout(env, controller, traj_rng));
    }
    return demos;
}

namespace {

nlohmann::json vectors_to_json(const std::vector<Eigen::VectorXd>& vs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : vs) arr.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    return arr;
}

std::vector<Eigen::VectorXd> vectors_from_json(const nlohmann::json& arr) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& item : arr) {
        auto vals = item.get<std::vector<double>>();
        out.push_back(Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
    return out;
}

}  // namespace

void save_demos(const DemoDataset& demos, const Env& env, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_demos: cannot open " + path);

    nlohmann::json header = {{"type", "header"},
                             {"env", demos.env_name},
                             {"env_params", env.params()},
                             {"state_dim", env.spec().state_dim},
                             {"action_dim", env.spec().action_dim},
                             {"controller", demos.controller_name},
                             {"n_trajectories", demos.trajectories.size()},
                             {"seed", demos.seed},
                             {"stats",
                              {{"violation_fraction", demos.violation_fraction()},
                               {"mean_length", demos.mean_length()},
                               {"total_steps", demos.total_steps()}}}};
    out << header.dump() << "\n";

    for (const auto& t : demos.trajectories) {
        nlohmann::json line = {{"states", vectors_to_json(t.states)},
                               {"actions", vectors_to_json(t.actions)},
                               {"rewards", t.rewards},
                               {"costs", t.costs},
                               {"ended_by", ended_by_name(t.ended_by)}};
        out << line.dump() << "\n";
    }
}

DemoDataset load_demos(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("load_demos: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_demos: empty file " + path);
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("type", "") != "header")
        throw std::runtime_error("load_demos: missing header line in " + path);

    DemoDataset demos;
    demos.env_name = header.at("env").get<std::string>();
    demos.controller_name = header.at("controller").get<std::string>();
    demos.seed = header.at("seed").get<std::uint64_t>();

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        Trajectory t;
        t.states = vectors_from_json(j.at("states"));
        t.actions = vectors_from_json(j.at("actions"));
        t.rewards = j.at("rewards").get<std::vector<double>>();
        t.costs = j.at("costs").get<std::vector<double>>();
        t.ended_by = ended_by_from_name(j.at("ended_by").get<std::string>());
        demos.trajectories.push_back(std::move(t));
    }
    if (demos.trajectories.empty()) throw std::runtime_error("load_demos: no trajectories in " + path);
    return demos;
}

}  // namespace sskp
