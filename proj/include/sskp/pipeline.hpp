#pragma once

#include <string>
#include <vector>

#include "sskp/agent.hpp"
#include "sskp/config.hpp"

namespace sskp {

// Everything the pipeline stages need, assembled from config + CLI overrides.
struct Settings {
    std::string env_name = "hazard_world_2d";
    std::string out_dir = "out";
    std::uint64_t root_seed = 0;

    int n_demos = 300;
    double demo_noise = 0.05;

    SkillModelConfig skills;

    std::vector<int> predictor_hidden{64, 64, 64};
    double predictor_learning_rate = 1e-3;
    int predictor_train_steps = 2000;
    int predictor_batch_size = 256;
    double lambda_min = 0.02;
    double lambda_max = 0.5;
    double xi = 0.0;

    RunMode mode = RunMode::SSkP;
    long long total_timesteps = 50000;
    PlannerConfig planner;
    SacConfig sac;
    int online_predictor_update_steps = 64;
    int online_predictor_batch_size = 256;
    double online_predictor_learning_rate = 1e-3;
    long long checkpoint_every = 10000;

    int diag_states = 100;
    int curve_window = 10;
};

// Reads every recognized key (so check_all_consumed() flags the rest).
Settings settings_from_config(const Config& config);

// Filesystem-safe tag for run directories ("sskp", "sskp_np", "sskp_wo_rp").
std::string run_mode_tag(RunMode mode);

std::string demos_path(const Settings& s);
std::string skill_model_path(const Settings& s);
std::string pu_dataset_path(const Settings& s);
std::string predictor_path(const Settings& s);
std::string run_dir(const Settings& s, RunMode mode, std::uint64_t seed);
std::string diagnostics_path(const Settings& s);

// Stage entry points; each returns the main artifact path it wrote. Stages
// communicate only through files under out_dir.
std::string run_gen_demos(const Settings& s);
std::string run_train_skills(const Settings& s);
std::string run_train_risk(const Settings& s);
std::string run_train_online(const Settings& s, RunMode mode, std::uint64_t seed);
std::string run_diagnose(const Settings& s);
std::string run_evaluate(const Settings& s, const std::string& run_directory);
std::string run_report(const Settings& s, const std::vector<RunMode>& modes,
                       const std::vector<std::uint64_t>& seeds);

}  // namespace sskp
