#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sskp/env.hpp"
#include "sskp/errors.hpp"
#include "sskp/rng.hpp"

#include <cmath>

using namespace sskp;

TEST_CASE("make_env dispatches by name and rejects unknowns") {
    CHECK(make_env("hazard_world_2d")->spec().name == "hazard_world_2d");
    CHECK(make_env("cliff_corridor")->spec().name == "cliff_corridor");
    CHECK_THROWS_AS(make_env("frozen_lake"), ConfigError);
}

TEST_CASE("hazard world reset lands in the start corner") {
    HazardWorld2D env;
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        State s = env.reset(rng);
        REQUIRE(s.size() == 2);
        CHECK(s.x() >= -1.0);
        CHECK(s.x() <= -0.8);
        CHECK(s.y() >= -1.0);
        CHECK(s.y() <= -0.8);
    }
}

TEST_CASE("hazard world reward matches an independent recomputation") {
    HazardWorld2D env;
    Rng rng(2), act_rng(3);
    const Eigen::Vector2d goal = env.goal_center();

    for (int ep = 0; ep < 20; ++ep) {
        State s = env.reset(rng);
        Eigen::Vector2d pos(s.x(), s.y());
        while (true) {
            Action a = act_rng.normal_vector(2) * 0.08;
            StepResult r = env.step(a);

            // Recompute the transition and reward by hand.
            Eigen::Vector2d clamped_a(std::clamp(a.x(), -0.1, 0.1), std::clamp(a.y(), -0.1, 0.1));
            Eigen::Vector2d next = pos + clamped_a;
            next.x() = std::clamp(next.x(), -1.0, 1.0);
            next.y() = std::clamp(next.y(), -1.0, 1.0);
            const double goal_dist = (next - goal).norm();

            bool in_hazard = false;
            for (const auto& c : env.hazard_centers()) {
                if ((next - c).norm() <= env.hazard_radius()) in_hazard = true;
            }

            CHECK(r.next_state.x() == doctest::Approx(next.x()).epsilon(1e-12));
            CHECK(r.next_state.y() == doctest::Approx(next.y()).epsilon(1e-12));
            if (in_hazard) {
                CHECK(r.cost == 1.0);
                CHECK(r.terminated);
                CHECK(r.reward == doctest::Approx(-env.reward_scale() * goal_dist));
            } else {
                CHECK(r.cost == 0.0);
                double expect = -env.reward_scale() * goal_dist;
                if (goal_dist <= env.goal_radius()) {
                    expect += env.goal_bonus();
                    CHECK(r.terminated);
                }
                CHECK(r.reward == doctest::Approx(expect));
            }

            pos = next;
            if (r.terminated || r.truncated) break;
        }
    }
}

TEST_CASE("hazard world clamps oversized actions") {
    HazardWorld2D env;
    Rng rng(4);
    State s = env.reset(rng);
    Action a(2);
    a << 5.0, -5.0;
    StepResult r = env.step(a);
    CHECK(r.next_state.x() == doctest::Approx(std::clamp(s.x() + 0.1, -1.0, 1.0)));
    CHECK(r.next_state.y() == doctest::Approx(std::clamp(s.y() - 0.1, -1.0, 1.0)));
}

TEST_CASE("hazard world walking into a hazard costs 1 and terminates") {
    HazardWorld2D env;
    Rng rng(5);
    Eigen::Vector2d pos = env.reset(rng);
    const Eigen::Vector2d target = env.hazard_centers()[0];
    bool violated = false;
    for (int t = 0; t < 100; ++t) {
        Action a = (target - pos).cwiseMax(-0.1).cwiseMin(0.1);  // steer at the hazard
        StepResult r = env.step(a);
        pos = r.next_state;
        if (r.cost > 0.0) {
            violated = true;
            CHECK(r.terminated);
            CHECK((pos - target).norm() <= env.hazard_radius());
            break;
        }
        if (r.terminated || r.truncated) break;
    }
    CHECK(violated);
}

TEST_CASE("episodes truncate at the step limit and finished episodes refuse to step") {
    HazardWorld2D env;
    Rng rng(6);
    env.reset(rng);
    Action a = Action::Zero(2);  // standing still never terminates
    StepResult last;
    for (int t = 0; t < env.spec().max_episode_steps; ++t) last = env.step(a);
    CHECK(last.truncated);
    CHECK_FALSE(last.terminated);
    CHECK(env.episode_over());
    CHECK_THROWS_AS(env.step(a), std::logic_error);

    env.reset(rng);
    CHECK_FALSE(env.episode_over());
    CHECK_NOTHROW(env.step(a));
}

TEST_CASE("env rejects wrong action dimension") {
    HazardWorld2D env;
    Rng rng(7);
    env.reset(rng);
    Action bad(3);
    bad.setZero();
    CHECK_THROWS_AS(env.step(bad), std::invalid_argument);
}

TEST_CASE("cliff corridor pays +1 per cell crossed and maps observations") {
    CliffCorridor env;
    Rng rng(8);
    State s0 = env.reset(rng);
    // Start: cell 0, centered -> observation (-1, 0).
    CHECK(s0(0) == doctest::Approx(-1.0));
    CHECK(s0(1) == doctest::Approx(0.0));

    Action a(2);
    a << 1.0, 0.0;
    StepResult r = env.step(a);
    CHECK(r.reward == doctest::Approx(1.0));  // crossed into cell 1
    CHECK(r.cost == 0.0);
    CHECK(r.next_state(0) == doctest::Approx(2.0 * 1.0 / (env.num_cells() - 1) - 1.0));

    a << 0.4, 0.0;  // 1.0 -> 1.4, still cell 1
    r = env.step(a);
    CHECK(r.reward == doctest::Approx(0.0));
    a << 0.7, 0.0;  // 1.4 -> 2.1, crossed one cell
    r = env.step(a);
    CHECK(r.reward == doctest::Approx(1.0));
}

TEST_CASE("cliff corridor falls off at the lateral threshold") {
    CliffCorridor env;
    Rng rng(9);
    env.reset(rng);
    Action a(2);
    a << 0.0, 0.25;
    StepResult r = env.step(a);  // lateral 0.25
    CHECK(r.cost == 0.0);
    r = env.step(a);  // lateral 0.5 = threshold
    CHECK(r.cost == 1.0);
    CHECK(r.terminated);
    CHECK(std::abs(r.next_state(1)) == doctest::Approx(2.0 * 0.5));
}

TEST_CASE("cliff corridor terminates at the last cell with total reward num_cells-1") {
    CliffCorridor env;
    Rng rng(10);
    env.reset(rng);
    Action a(2);
    a << 1.0, 0.0;
    double total = 0.0;
    StepResult r;
    int steps = 0;
    do {
        r = env.step(a);
        total += r.reward;
        ++steps;
    } while (!r.terminated && !r.truncated);
    CHECK(r.terminated);
    CHECK(r.cost == 0.0);
    CHECK(total == doctest::Approx(env.num_cells() - 1));
    CHECK(steps == env.num_cells() - 1);  // max speed 1 cell per step
}

TEST_CASE("cliff corridor clamps forward motion at the walls") {
    CliffCorridor env;
    Rng rng(11);
    env.reset(rng);
    Action back(2);
    back << -1.0, 0.0;
    StepResult r = env.step(back);
    CHECK(r.reward == doctest::Approx(0.0));  // pinned at cell 0
    CHECK(r.next_state(0) == doctest::Approx(-1.0));
}
