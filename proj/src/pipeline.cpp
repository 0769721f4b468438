#include "sskp/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "sskp/demo.hpp"
#include "sskp/errors.hpp"
#include "sskp/metrics.hpp"
#include "sskp/planner.hpp"

#include "json.hpp"

namespace sskp {

namespace fs = std::filesystem;

Settings settings_from_config(const Config& c) {
    Settings s;
    s.env_name = c.get_string("env", s.env_name);
    s.out_dir = c.get_string("out_dir", s.out_dir);
    s.root_seed = static_cast<std::uint64_t>(c.get_int("seed", 0));

    s.n_demos = static_cast<int>(c.get_int("demo.n_trajectories", s.n_demos));
    s.demo_noise = c.get_double("demo.noise_scale", s.demo_noise);

    s.skills.skill_dim = static_cast<int>(c.get_int("skills.skill_dim", s.skills.skill_dim));
    s.skills.horizon = static_cast<int>(c.get_int("skills.horizon", s.skills.horizon));
    s.skills.hidden = c.get_int_list("skills.hidden", s.skills.hidden);
    s.skills.beta = c.get_double("skills.beta", s.skills.beta);
    s.skills.prior_weight = c.get_double("skills.prior_weight", s.skills.prior_weight);
    s.skills.learning_rate = c.get_double("skills.learning_rate", s.skills.learning_rate);
    s.skills.epochs = static_cast<int>(c.get_int("skills.epochs", s.skills.epochs));
    s.skills.batch_size = static_cast<int>(c.get_int("skills.batch_size", s.skills.batch_size));

    s.predictor_hidden = c.get_int_list("risk.hidden", s.predictor_hidden);
    s.predictor_learning_rate = c.get_double("risk.learning_rate", s.predictor_learning_rate);
    s.predictor_train_steps =
        static_cast<int>(c.get_int("risk.train_steps", s.predictor_train_steps));
    s.predictor_batch_size =
        static_cast<int>(c.get_int("risk.batch_size", s.predictor_batch_size));
    s.lambda_min = c.get_double("risk.lambda_min", s.lambda_min);
    s.lambda_max = c.get_double("risk.lambda_max", s.lambda_max);
    s.xi = c.get_double("risk.xi", s.xi);

    s.mode = run_mode_from_name(c.get_string("run.mode", run_mode_name(s.mode)));
    s.total_timesteps = c.get_int("run.total_timesteps", s.total_timesteps);
    s.online_predictor_update_steps = static_cast<int>(
        c.get_int("run.predictor_update_steps", s.online_predictor_update_steps));
    s.online_predictor_batch_size =
        static_cast<int>(c.get_int("run.predictor_batch_size", s.online_predictor_batch_size));
    s.online_predictor_learning_rate =
        c.get_double("run.predictor_learning_rate", s.online_predictor_learning_rate);
    s.checkpoint_every = c.get_int("run.checkpoint_every", s.checkpoint_every);

    s.planner.n_samples = static_cast<int>(c.get_int("planner.n_samples", s.planner.n_samples));
    s.planner.top_k = static_cast<int>(c.get_int("planner.top_k", s.planner.top_k));
    s.planner.n_iterations =
        static_cast<int>(c.get_int("planner.n_iterations", s.planner.n_iterations));
    s.planner.variance_floor = c.get_double("planner.variance_floor", s.planner.variance_floor);
    s.planner.init_from_proposal_params =
        c.get_bool("planner.init_from_proposal_params", s.planner.init_from_proposal_params);

    s.sac.gamma = c.get_double("sac.gamma", s.sac.gamma);
    s.sac.alpha = c.get_double("sac.alpha", s.sac.alpha);
    s.sac.polyak_tau = c.get_double("sac.polyak_tau", s.sac.polyak_tau);
    s.sac.learning_rate = c.get_double("sac.learning_rate", s.sac.learning_rate);
    s.sac.batch_size = static_cast<int>(c.get_int("sac.batch_size", s.sac.batch_size));
    s.sac.buffer_capacity =
        static_cast<int>(c.get_int("sac.buffer_capacity", s.sac.buffer_capacity));
    s.sac.warmup_steps = static_cast<int>(c.get_int("sac.warmup_steps", s.sac.warmup_steps));
    s.sac.updates_per_skill_step =
        static_cast<int>(c.get_int("sac.updates_per_skill_step", s.sac.updates_per_skill_step));
    s.sac.actor_hidden = c.get_int_list("sac.actor_hidden", s.sac.actor_hidden);
    s.sac.critic_hidden = c.get_int_list("sac.critic_hidden", s.sac.critic_hidden);

    s.diag_states = static_cast<int>(c.get_int("diag.n_states", s.diag_states));
    s.curve_window = static_cast<int>(c.get_int("metrics.curve_window", s.curve_window));
    return s;
}

std::string run_mode_tag(RunMode mode) {
    switch (mode) {
        case RunMode::SSkP: return "sskp";
        case RunMode::NoPlanning: return "sskp_np";
        case RunMode::NoPredictor: return "sskp_wo_rp";
    }
    throw std::logic_error("run_mode_tag: unknown mode");
}

std::string demos_path(const Settings& s) { return s.out_dir + "/demos.jsonl"; }
std::string skill_model_path(const Settings& s) { return s.out_dir + "/skill_model.json"; }
std::string pu_dataset_path(const Settings& s) { return s.out_dir + "/pu_offline.jsonl"; }
std::string predictor_path(const Settings& s) { return s.out_dir + "/predictor.json"; }
std::string diagnostics_path(const Settings& s) { return s.out_dir + "/diagnostics.csv"; }

std::string run_dir(const Settings& s, RunMode mode, std::uint64_t seed) {
    return s.out_dir + "/online_" + run_mode_tag(mode) + "_seed" + std::to_string(seed);
}

namespace {

void require_artifact(const std::string& path, const std::string& stage) {
    if (!fs::exists(path))
        throw MissingArtifactError(stage + ": missing prerequisite artifact '" + path +
                                   "' (run the earlier stages first)");
}

}  // namespace

std::string run_gen_demos(const Settings& s) {
    fs::create_directories(s.out_dir);
    auto env = make_env(s.env_name);
    const Controller controller = make_scripted_controller(*env, s.demo_noise);
    const DemoDataset demos =
        generate_demonstrations(*env, controller, "scripted", s.n_demos,
                                stage_seed(s.root_seed, Stage::Demos));
    const std::string path = demos_path(s);
    save_demos(demos, *env, path);
    return path;
}

std::string run_train_skills(const Settings& s) {
    require_artifact(demos_path(s), "train-skills");
    const DemoDataset demos = load_demos(demos_path(s));
    auto env = make_env(s.env_name);

    Rng rng(stage_seed(s.root_seed, Stage::Skills));
    SkillTrainLog log;
    const SkillModel model = train_skill_model(demos, env->spec(), s.skills, rng, &log);

    const std::string path = skill_model_path(s);
    save_skill_model(model, path);

    nlohmann::json lj = {{"recon", log.recon}, {"kl", log.kl}, {"prior_kl", log.prior_kl}};
    std::ofstream out(s.out_dir + "/skill_train_log.json");
    out << lj.dump(2) << "\n";
    return path;
}

std::string run_train_risk(const Settings& s) {
    require_artifact(demos_path(s), "train-risk");
    require_artifact(skill_model_path(s), "train-risk");
    const DemoDataset demos = load_demos(demos_path(s));
    const SkillModel model = load_skill_model(skill_model_path(s));

    Rng rng(stage_seed(s.root_seed, Stage::Risk));
    Rng assemble_rng = rng.split(1);
    Rng init_rng = rng.split(2);
    Rng train_rng = rng.split(3);

    const PUDataset pu = assemble_pu_data(demos, model, model.horizon, assemble_rng);
    save_pu_dataset(pu, pu_dataset_path(s));

    RiskPredictor predictor =
        make_risk_predictor(model.state_dim, model.skill_dim, s.predictor_hidden, init_rng);
    predictor.pu.lambda_min = s.lambda_min;
    predictor.pu.lambda_max = s.lambda_max;
    predictor.pu.xi = s.xi;
    predictor.pu.lambda = estimate_class_prior(pu, s.lambda_min, s.lambda_max);

    Adam optimizer(predictor.net, s.predictor_learning_rate);
    update_predictor(predictor, pu, optimizer, s.predictor_train_steps, s.predictor_batch_size,
                     train_rng);

    const std::string path = predictor_path(s);
    save_predictor(predictor, path);
    return path;
}

std::string run_train_online(const Settings& s, RunMode mode, std::uint64_t seed) {
    require_artifact(skill_model_path(s), "train-online");
    const SkillModel model = load_skill_model(skill_model_path(s));

    RunConfig rc;
    rc.env_name = s.env_name;
    rc.mode = mode;
    rc.total_timesteps = s.total_timesteps;
    rc.seed = seed;
    rc.planner = s.planner;
    rc.sac = s.sac;
    rc.predictor_update_steps = s.online_predictor_update_steps;
    rc.predictor_batch_size = s.online_predictor_batch_size;
    rc.predictor_learning_rate = s.online_predictor_learning_rate;
    rc.checkpoint_every = s.checkpoint_every;
    rc.out_dir = run_dir(s, mode, seed);

    Rng rng(stage_seed(seed, Stage::Online));
    if (mode == RunMode::NoPredictor) {
        train_online(rc, model, nullptr, nullptr, rng);
    } else {
        require_artifact(predictor_path(s), "train-online");
        require_artifact(pu_dataset_path(s), "train-online");
        const RiskPredictor predictor = load_predictor(predictor_path(s));
        const PUDataset pu = load_pu_dataset(pu_dataset_path(s));
        train_online(rc, model, &predictor, &pu, rng);
    }
    return rc.out_dir + "/metrics.csv";
}

std::string run_diagnose(const Settings& s) {
    require_artifact(skill_model_path(s), "diagnose-planning");
    require_artifact(predictor_path(s), "diagnose-planning");
    const SkillModel model = load_skill_model(skill_model_path(s));
    const RiskPredictor predictor = load_predictor(predictor_path(s));

    Rng rng(stage_seed(s.root_seed, Stage::Diagnose));
    Rng state_rng = rng.split(1);
    Rng plan_rng = rng.split(2);

    auto env = make_env(s.env_name);
    std::vector<State> states;
    states.reserve(s.diag_states);
    for (int i = 0; i < s.diag_states; ++i) states.push_back(env->reset(state_rng));

    const auto rows =
        planning_diagnostics(predictor, states, prior_proposal(model), s.planner, plan_rng);
    const std::string path = diagnostics_path(s);
    write_diagnostics_csv(rows, path);
    return path;
}

std::string run_evaluate(const Settings& s, const std::string& run_directory) {
    const std::string csv_path = run_directory + "/metrics.csv";
    require_artifact(csv_path, "evaluate");
    const RunLog log = load_run_log_csv(csv_path);

    long long total = s.total_timesteps;
    const std::string summary_path = run_directory + "/summary.json";
    if (fs::exists(summary_path)) {
        std::ifstream in(summary_path);
        nlohmann::json j;
        in >> j;
        total = j.value("total_timesteps", total);
    }

    const auto curve = reward_vs_violations_curve(log, s.curve_window);
    write_curve_csv(curve, run_directory + "/curve.csv");

    const auto pv = ptr_over_violations(log, total);
    nlohmann::json ej = {{"ptr", ptr(log, total)},
                         {"ptr_over_v", pv.value},
                         {"ptr_over_v_times_1e3", pv.value * 1e3},
                         {"zero_violations", pv.zero_violations},
                         {"violations", total_violations(log)},
                         {"episodes", log.episodes.size()},
                         {"total_timesteps", total}};
    std::ofstream out(run_directory + "/eval.json");
    if (!out) throw std::runtime_error("evaluate: cannot open eval.json in " + run_directory);
    out << ej.dump(2) << "\n";
    return run_directory + "/curve.csv";
}

std::string run_report(const Settings& s, const std::vector<RunMode>& modes,
                       const std::vector<std::uint64_t>& seeds) {
    if (modes.empty() || seeds.empty())
        throw std::invalid_argument("report: need at least one mode and one seed");
    fs::create_directories(s.out_dir);

    nlohmann::json methods = nlohmann::json::array();
    std::vector<SummaryRow> table;
    for (RunMode mode : modes) {
        std::vector<std::vector<CurvePoint>> curves;
        nlohmann::json per_seed = nlohmann::json::array();
        double sum_ptr = 0.0, sum_ratio = 0.0;
        int sum_violations = 0;
        bool any_zero = false;
        for (std::uint64_t seed : seeds) {
            const std::string dir = run_dir(s, mode, seed);
            require_artifact(dir + "/metrics.csv", "report");
            const RunLog log = load_run_log_csv(dir + "/metrics.csv");
            curves.push_back(reward_vs_violations_curve(log, s.curve_window));

            const double p = ptr(log, s.total_timesteps);
            const auto pv = ptr_over_violations(log, s.total_timesteps);
            const int v = total_violations(log);
            sum_ptr += p;
            sum_ratio += pv.value;
            sum_violations += v;
            any_zero = any_zero || pv.zero_violations;
            per_seed.push_back({{"seed", seed},
                                {"ptr", p},
                                {"ptr_over_v", pv.value},
                                {"ptr_over_v_times_1e3", pv.value * 1e3},
                                {"zero_violations", pv.zero_violations},
                                {"violations", v}});
        }
        const AggregatedCurve agg = aggregate_seeds(curves);
        write_aggregate_csv(agg, s.out_dir + "/report_curve_" + run_mode_tag(mode) + ".csv");

        const double n = static_cast<double>(seeds.size());
        methods.push_back({{"method", run_mode_name(mode)},
                           {"env", s.env_name},
                           {"seeds", per_seed},
                           {"mean_ptr", sum_ptr / n},
                           {"mean_ptr_over_v_times_1e3", (sum_ratio / n) * 1e3},
                           {"total_violations", sum_violations}});

        SummaryRow row;
        row.method = run_mode_name(mode);
        row.env = s.env_name;
        row.ptr = sum_ptr / n;
        row.ptr_over_v_times_1e3 = (sum_ratio / n) * 1e3;
        row.zero_violations = any_zero;
        row.violations = sum_violations;
        table.push_back(row);
    }

    nlohmann::json rj = {{"env", s.env_name},
                         {"total_timesteps", s.total_timesteps},
                         {"curve_window", s.curve_window},
                         {"methods", methods}};
    const std::string path = s.out_dir + "/report.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot open " + path);
    out << rj.dump(2) << "\n";
    write_summary_json(table, s.out_dir + "/table1.json");
    return path;
}

}  // namespace sskp
