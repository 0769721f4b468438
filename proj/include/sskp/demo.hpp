#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sskp/env.hpp"
#include "sskp/rng.hpp"

namespace sskp {

enum class EndedBy { Goal, Violation, Truncation };

std::string ended_by_name(EndedBy e);
EndedBy ended_by_from_name(const std::string& name);

struct Trajectory {
    std::vector<State> states;   // length() + 1 entries, includes the terminal observation
    std::vector<Action> actions;
    std::vector<double> rewards;
    std::vector<double> costs;
    EndedBy ended_by = EndedBy::Truncation;

    int length() const { return static_cast<int>(actions.size()); }
};

struct DemoDataset {
    std::vector<Trajectory> trajectories;
    std::string env_name;
    std::string controller_name;
    std::uint64_t seed = 0;

    double violation_fraction() const;
    double mean_length() const;
    int total_steps() const;
};

// State-feedback controller already carrying its exploration noise.
using Controller = std::function<Action(const State&, Rng&)>;

// Goal-directed potential-field controller: attraction to the goal, repulsion
// from hazards inside an influence ring, plus Gaussian exploration noise.
Action hazard_world_controller(const HazardWorld2D& env, const State& state, Rng& rng,
                               double noise_scale);

// Forward drive with lateral centering, plus Gaussian exploration noise.
Action cliff_corridor_controller(const CliffCorridor& env, const State& state, Rng& rng,
                                 double noise_scale);

// Dispatch on the concrete environment; throws for unknown environments.
Controller make_scripted_controller(const Env& env, double noise_scale);

Trajectory rollout(Env& env, const Controller& controller, Rng& rng);

// Exactly n trajectories; trajectory i uses the stream split(seed, i), so the
// dataset is reproducible bit-exactly from (env, controller, n, seed).
DemoDataset generate_demonstrations(Env& env, const Controller& controller,
                                    const std::string& controller_name, int n_trajectories,
                                    std::uint64_t seed);

// JSON-lines: a header line with env spec + seed + stats, then one trajectory
// per line with schema {states, actions, rewards, costs, ended_by}.
void save_demos(const DemoDataset& demos, const Env& env, const std::string& path);
DemoDataset load_demos(const std::string& path);

}  // namespace sskp
