#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sskp/errors.hpp"
#include "sskp/pipeline.hpp"

namespace {

int dispatch(int argc, char** argv) {
    CLI::App app{"Safe skill planning: offline skill/risk learning + online safe RL"};
    app.require_subcommand(1);

    std::string config_path, out_dir, env_name, mode_name;
    std::vector<std::uint64_t> seeds;
    app.add_option("--config", config_path, "Config file (flat key = value lines)");
    app.add_option("--seed", seeds, "Seed (repeatable; first one seeds offline stages)");
    app.add_option("--mode", mode_name, "Run mode: SSkP, SSkP-NP, SSkP-w/o-RP");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--env", env_name, "Environment: hazard_world_2d, cliff_corridor");

    app.add_subcommand("gen-demos", "Generate scripted demonstration trajectories");
    app.add_subcommand("train-skills", "Train the skill model on demonstrations");
    app.add_subcommand("train-risk", "Assemble PU data and train the risk predictor");
    app.add_subcommand("train-online", "Run online safe RL (one run per seed)");
    app.add_subcommand("diagnose-planning", "Export per-iteration risk deltas over random states");
    app.add_subcommand("evaluate", "Export curve + metrics for one finished run");
    app.add_subcommand("report", "Aggregate runs across seeds and modes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    sskp::Config config =
        config_path.empty() ? sskp::Config{} : sskp::Config::parse_file(config_path);
    sskp::Settings s = sskp::settings_from_config(config);
    config.check_all_consumed();
    if (!out_dir.empty()) s.out_dir = out_dir;
    if (!env_name.empty()) s.env_name = env_name;
    if (!mode_name.empty()) s.mode = sskp::run_mode_from_name(mode_name);
    if (!seeds.empty()) s.root_seed = seeds.front();
    const std::vector<std::uint64_t> seed_list =
        seeds.empty() ? std::vector<std::uint64_t>{s.root_seed} : seeds;

    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "gen-demos") {
        std::cout << sskp::run_gen_demos(s) << "\n";
    } else if (command == "train-skills") {
        std::cout << sskp::run_train_skills(s) << "\n";
    } else if (command == "train-risk") {
        std::cout << sskp::run_train_risk(s) << "\n";
    } else if (command == "train-online") {
        for (std::uint64_t seed : seed_list)
            std::cout << sskp::run_train_online(s, s.mode, seed) << "\n";
    } else if (command == "diagnose-planning") {
        std::cout << sskp::run_diagnose(s) << "\n";
    } else if (command == "evaluate") {
        for (std::uint64_t seed : seed_list)
            std::cout << sskp::run_evaluate(s, sskp::run_dir(s, s.mode, seed)) << "\n";
    } else if (command == "report") {
        std::vector<sskp::RunMode> modes;
        if (!mode_name.empty()) {
            modes.push_back(s.mode);
        } else {
            modes = {sskp::RunMode::SSkP, sskp::RunMode::NoPlanning, sskp::RunMode::NoPredictor};
        }
        std::cout << sskp::run_report(s, modes, seed_list) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const sskp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const sskp::MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return 3;
    } catch (const sskp::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
