#include "sskp/agent.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "sskp/csv.hpp"
#include "sskp/errors.hpp"

namespace sskp {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    storage_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::add(SkillTransition t) {
    if (storage_.size() < capacity_) {
        storage_.push_back(std::move(t));
    } else {
        storage_[next_] = std::move(t);
        next_ = (next_ + 1) % capacity_;
    }
}

void SacConfig::validate() const {
    if (gamma <= 0.0 || gamma >= 1.0) throw ConfigError("sac.gamma must be in (0, 1)");
    if (alpha < 0.0) throw ConfigError("sac.alpha must be >= 0");
    if (polyak_tau <= 0.0 || polyak_tau > 1.0) throw ConfigError("sac.polyak_tau must be in (0, 1]");
    if (learning_rate <= 0.0) throw ConfigError("sac.learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("sac.batch_size must be >= 1");
    if (buffer_capacity < 1) throw ConfigError("sac.buffer_capacity must be >= 1");
    if (warmup_steps < 0) throw ConfigError("sac.warmup_steps must be >= 0");
    if (updates_per_skill_step < 0) throw ConfigError("sac.updates_per_skill_step must be >= 0");
}

SkillPolicy make_skill_policy(int state_dim, int skill_dim, const SacConfig& config, Rng& rng) {
    SkillPolicy p;
    p.state_dim = state_dim;
    p.skill_dim = skill_dim;

    std::vector<int> actor_sizes{state_dim};
    for (int h : config.actor_hidden) actor_sizes.push_back(h);
    actor_sizes.push_back(2 * skill_dim);
    Rng actor_rng = rng.split(1);
    p.actor = Mlp::make(actor_sizes, Activation::Tanh, Head::Gaussian, actor_rng);

    std::vector<int> critic_sizes{state_dim + skill_dim};
    for (int h : config.critic_hidden) critic_sizes.push_back(h);
    critic_sizes.push_back(1);
    Rng c1_rng = rng.split(2);
    Rng c2_rng = rng.split(3);
    p.critic1 = Mlp::make(critic_sizes, Activation::Tanh, Head::Identity, c1_rng);
    p.critic2 = Mlp::make(critic_sizes, Activation::Tanh, Head::Identity, c2_rng);
    p.target1 = p.critic1;
    p.target2 = p.critic2;
    return p;
}

bool initialize_actor_from_prior(SkillPolicy& policy, const SkillModel& skill_model) {
    const Mlp& prior = skill_model.prior;
    if (policy.actor.layer_sizes() != prior.layer_sizes() ||
        policy.actor.activation() != prior.activation() || policy.actor.head() != prior.head())
        return false;
    policy.actor = prior;
    return true;
}

DiagGaussian policy_distribution(const SkillPolicy& policy, const State& state) {
    return Mlp::gaussian_from_output(policy.actor.forward_one(state));
}

SkillProposal policy_proposal(const SkillPolicy& policy) {
    return [&policy](const State& s) { return policy_distribution(policy, s); };
}

void save_policy(const SkillPolicy& policy, const std::string& path) {
    nlohmann::json j = {{"version", 1},
                        {"type", "skill_policy"},
                        {"state_dim", policy.state_dim},
                        {"skill_dim", policy.skill_dim},
                        {"actor", policy.actor.to_json()},
                        {"critic1", policy.critic1.to_json()},
                        {"critic2", policy.critic2.to_json()},
                        {"target1", policy.target1.to_json()},
                        {"target2", policy.target2.to_json()}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_policy: cannot open " + path);
    out << j.dump() << "\n";
}

SkillPolicy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("load_policy: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("type", "") != "skill_policy")
        throw std::runtime_error("load_policy: not a policy checkpoint: " + path);
    SkillPolicy p;
    p.state_dim = j.at("state_dim").get<int>();
    p.skill_dim = j.at("skill_dim").get<int>();
    p.actor = Mlp::from_json(j.at("actor"));
    p.critic1 = Mlp::from_json(j.at("critic1"));
    p.critic2 = Mlp::from_json(j.at("critic2"));
    p.target1 = Mlp::from_json(j.at("target1"));
    p.target2 = Mlp::from_json(j.at("target2"));
    return p;
}

std::string run_mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::SSkP: return "SSkP";
        case RunMode::NoPredictor: return "SSkP-w/o-RP";
        case RunMode::NoPlanning: return "SSkP-NP";
    }
    throw std::logic_error("run_mode_name: unknown mode");
}

RunMode run_mode_from_name(const std::string& name) {
    if (name == "SSkP") return RunMode::SSkP;
    if (name == "SSkP-w/o-RP") return RunMode::NoPredictor;
    if (name == "SSkP-NP") return RunMode::NoPlanning;
    throw ConfigError("unknown run mode '" + name + "' (expected SSkP, SSkP-NP, SSkP-w/o-RP)");
}

Skill select_skill(RunMode mode, const SkillPolicy& policy, const RiskPredictor* predictor,
                   const State& state, const PlannerConfig& config, Rng& rng) {
    switch (mode) {
        case RunMode::NoPredictor:
            return policy_distribution(policy, state).sample(rng);
        case RunMode::NoPlanning: {
            if (!predictor)
                throw MissingArtifactError("select_skill: SSkP-NP requires a risk predictor");
            DiagGaussian dist = policy_distribution(policy, state);
            Eigen::MatrixXd candidates = dist.sample_many(config.n_samples, rng);
            Eigen::VectorXd risk = predict_risk_batch(*predictor, state, candidates);
            if (!risk.allFinite())
                throw NumericalError("select_skill: non-finite risk scores");
            Eigen::Index best = 0;
            risk.minCoeff(&best);  // first minimum: ties broken by ascending index
            return candidates.col(best);
        }
        case RunMode::SSkP:
            if (!predictor)
                throw MissingArtifactError("select_skill: SSkP requires a risk predictor");
            return risk_planning(policy_proposal(policy), *predictor, state, config, rng);
    }
    throw std::logic_error("select_skill: unknown mode");
}

ExecutionResult execute_skill(Env& env, const SkillModel& model, const Skill& skill,
                              const State& current_state, int max_steps) {
    if (max_steps < 1 || max_steps > model.horizon)
        throw std::invalid_argument("execute_skill: max_steps must be in [1, horizon]");

    const std::vector<Action> actions = decode(model, skill);
    ExecutionResult out;
    out.transition.s = current_state;
    out.transition.z = skill;

    State reached = current_state;
    for (int h = 0; h < max_steps; ++h) {
        const StepResult r = env.step(actions[h]);
        out.transition.cum_reward += r.reward;
        ++out.transition.steps_executed;
        reached = r.next_state;
        const bool violated_now = r.cost > 0.0;
        if (violated_now) out.transition.violated = true;
        if (r.terminated || r.truncated || violated_now) {
            out.transition.terminal = r.terminated || violated_now;
            out.episode_done = true;
            break;
        }
        if (h + 1 < max_steps) out.interior_states.push_back(reached);
    }
    out.transition.s_next = reached;
    return out;
}

ExecutionResult execute_skill(Env& env, const SkillModel& model, const Skill& skill,
                              const State& current_state) {
    return execute_skill(env, model, skill, current_state, model.horizon);
}

std::vector<DecisionPair> collect_decision_pairs(const State& s_t, const Skill& z_t,
                                                 const std::vector<State>& interior_states,
                                                 const SkillModel& model, Rng& rng) {
    std::vector<DecisionPair> out;
    out.reserve(1 + interior_states.size());
    out.push_back({s_t, z_t});
    for (const State& s : interior_states)
        out.push_back({s, skill_prior(model, s).sample(rng)});
    return out;
}

BatchGaussian prior_batch(const SkillModel& model) {
    return [&model](const Eigen::MatrixXd& states, Eigen::MatrixXd& mean, Eigen::MatrixXd& var) {
        const Eigen::MatrixXd out = model.prior.forward(states);
        const int z = model.skill_dim;
        mean = out.topRows(z);
        var = out.bottomRows(z).array().exp().matrix();
    };
}

BatchGaussian standard_normal_batch(int skill_dim) {
    return [skill_dim](const Eigen::MatrixXd& states, Eigen::MatrixXd& mean,
                       Eigen::MatrixXd& var) {
        mean = Eigen::MatrixXd::Zero(skill_dim, states.cols());
        var = Eigen::MatrixXd::Ones(skill_dim, states.cols());
    };
}

SacBatch sample_batch(const ReplayBuffer& buffer, int batch_size, Rng& rng) {
    if (buffer.size() == 0) throw std::invalid_argument("sample_batch: empty buffer");
    const SkillTransition& first = buffer[0];
    SacBatch b;
    b.states.resize(first.s.size(), batch_size);
    b.skills.resize(first.z.size(), batch_size);
    b.rewards.resize(batch_size);
    b.next_states.resize(first.s_next.size(), batch_size);
    b.terminal.resize(batch_size);
    b.steps.resize(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        const SkillTransition& t = buffer[rng.uniform_index(buffer.size())];
        b.states.col(i) = t.s;
        b.skills.col(i) = t.z;
        b.rewards(i) = t.cum_reward;
        b.next_states.col(i) = t.s_next;
        b.terminal(i) = t.terminal ? 1.0 : 0.0;
        b.steps(i) = static_cast<double>(t.steps_executed);
    }
    return b;
}

Eigen::VectorXd kl_columns(const Eigen::MatrixXd& mean_p, const Eigen::MatrixXd& logvar_p,
                           const Eigen::MatrixXd& mean_q, const Eigen::MatrixXd& var_q) {
    const Eigen::ArrayXXd var_p = logvar_p.array().exp();
    const Eigen::ArrayXXd diff = (mean_p - mean_q).array();
    const Eigen::ArrayXXd terms = 0.5 * (var_q.array().log() - logvar_p.array()) +
                                  (var_p + diff.square()) / (2.0 * var_q.array()) - 0.5;
    return terms.colwise().sum().transpose();
}

double critic_loss_and_grads(const SkillPolicy& policy, const BatchGaussian& prior,
                             const SacBatch& batch, const Eigen::MatrixXd& next_noise,
                             const SacConfig& config, Mlp::Grads& g1, Mlp::Grads& g2) {
    const Eigen::Index B = batch.states.cols();
    const int z = policy.skill_dim;

    // Target value (no gradients flow here).
    const Eigen::MatrixXd actor_out = policy.actor.forward(batch.next_states);
    const Eigen::MatrixXd mu_p = actor_out.topRows(z);
    const Eigen::MatrixXd lv_p = actor_out.bottomRows(z);
    const Eigen::MatrixXd z_next =
        mu_p + ((lv_p.array() / 2.0).exp() * next_noise.array()).matrix();

    Eigen::MatrixXd next_in(policy.state_dim + z, B);
    next_in.topRows(policy.state_dim) = batch.next_states;
    next_in.bottomRows(z) = z_next;
    const Eigen::RowVectorXd q1t = policy.target1.forward(next_in).row(0);
    const Eigen::RowVectorXd q2t = policy.target2.forward(next_in).row(0);

    Eigen::MatrixXd mu_q, var_q;
    prior(batch.next_states, mu_q, var_q);
    const Eigen::VectorXd kl = kl_columns(mu_p, lv_p, mu_q, var_q);

    Eigen::VectorXd y(B);
    for (Eigen::Index i = 0; i < B; ++i) {
        const double boot = std::min(q1t(i), q2t(i)) - config.alpha * kl(i);
        y(i) = batch.rewards(i) +
               std::pow(config.gamma, batch.steps(i)) * (1.0 - batch.terminal(i)) * boot;
    }

    Eigen::MatrixXd in(policy.state_dim + z, B);
    in.topRows(policy.state_dim) = batch.states;
    in.bottomRows(z) = batch.skills;

    Mlp::Cache c1, c2;
    const Eigen::VectorXd q1 = policy.critic1.forward_cached(in, c1).row(0).transpose();
    const Eigen::VectorXd q2 = policy.critic2.forward_cached(in, c2).row(0).transpose();
    const Eigen::VectorXd e1 = q1 - y;
    const Eigen::VectorXd e2 = q2 - y;
    const double loss = (e1.squaredNorm() + e2.squaredNorm()) / static_cast<double>(B);

    const Eigen::MatrixXd up1 = (2.0 / static_cast<double>(B)) * e1.transpose();
    const Eigen::MatrixXd up2 = (2.0 / static_cast<double>(B)) * e2.transpose();
    policy.critic1.backward(c1, up1, g1);
    policy.critic2.backward(c2, up2, g2);
    return loss;
}

double actor_loss_and_grads(const SkillPolicy& policy, const BatchGaussian& prior,
                            const Eigen::MatrixXd& states, const Eigen::MatrixXd& noise,
                            const SacConfig& config, Mlp::Grads& actor_grads) {
    const Eigen::Index B = states.cols();
    const int z = policy.skill_dim;
    const double invB = 1.0 / static_cast<double>(B);

    Mlp::Cache actor_cache;
    const Eigen::MatrixXd actor_out = policy.actor.forward_cached(states, actor_cache);
    const Eigen::MatrixXd mu = actor_out.topRows(z);
    const Eigen::MatrixXd lv = actor_out.bottomRows(z);
    const Eigen::ArrayXXd sigma = (lv.array() / 2.0).exp();
    const Eigen::MatrixXd zs = mu + (sigma * noise.array()).matrix();

    Eigen::MatrixXd in(policy.state_dim + z, B);
    in.topRows(policy.state_dim) = states;
    in.bottomRows(z) = zs;

    Mlp::Cache c1, c2;
    const Eigen::RowVectorXd q1 = policy.critic1.forward_cached(in, c1).row(0);
    const Eigen::RowVectorXd q2 = policy.critic2.forward_cached(in, c2).row(0);

    Eigen::MatrixXd mu_q, var_q;
    prior(states, mu_q, var_q);
    const Eigen::VectorXd kl = kl_columns(mu, lv, mu_q, var_q);

    double loss = 0.0;
    Eigen::MatrixXd up1 = Eigen::MatrixXd::Zero(1, B);
    Eigen::MatrixXd up2 = Eigen::MatrixXd::Zero(1, B);
    for (Eigen::Index i = 0; i < B; ++i) {
        loss += config.alpha * kl(i) - std::min(q1(i), q2(i));
        (q1(i) <= q2(i) ? up1(0, i) : up2(0, i)) = -invB;
    }
    loss *= invB;

    // Q-term gradient through the reparameterized skill.
    Mlp::Grads scratch1 = policy.critic1.zero_grads();
    Mlp::Grads scratch2 = policy.critic2.zero_grads();
    const Eigen::MatrixXd din1 = policy.critic1.backward(c1, up1, scratch1);
    const Eigen::MatrixXd din2 = policy.critic2.backward(c2, up2, scratch2);
    const Eigen::MatrixXd dz = din1.bottomRows(z) + din2.bottomRows(z);

    Eigen::MatrixXd d_mu = dz + (invB * config.alpha) *
                                    ((mu - mu_q).array() / var_q.array()).matrix();
    Eigen::MatrixXd d_lv =
        (dz.array() * noise.array() * sigma * 0.5).matrix() +
        (invB * config.alpha) *
            (-0.5 + lv.array().exp() / (2.0 * var_q.array())).matrix();

    Eigen::MatrixXd upstream(2 * z, B);
    upstream.topRows(z) = d_mu;
    upstream.bottomRows(z) = d_lv;
    policy.actor.backward(actor_cache, upstream, actor_grads);
    return loss;
}

void polyak_update(Mlp& target, const Mlp& source, double tau) {
    const Eigen::VectorXd t = target.flatten_parameters();
    const Eigen::VectorXd s = source.flatten_parameters();
    if (t.size() != s.size()) throw std::invalid_argument("polyak_update: parameter mismatch");
    target.set_parameters((1.0 - tau) * t + tau * s);
}

SacLosses sac_update(SkillPolicy& policy, SacOptimizers& optimizers, const ReplayBuffer& buffer,
                     const BatchGaussian& prior, const SacConfig& config, Rng& rng) {
    if (buffer.size() < static_cast<std::size_t>(config.batch_size))
        throw std::invalid_argument("sac_update: buffer smaller than batch size");

    SacLosses losses;
    const SacBatch batch = sample_batch(buffer, config.batch_size, rng);
    const Eigen::MatrixXd next_noise = rng.normal_matrix(policy.skill_dim, config.batch_size);

    Mlp::Grads g1 = policy.critic1.zero_grads();
    Mlp::Grads g2 = policy.critic2.zero_grads();
    losses.critic = critic_loss_and_grads(policy, prior, batch, next_noise, config, g1, g2);
    optimizers.critic1.step(policy.critic1, g1);
    optimizers.critic2.step(policy.critic2, g2);

    const Eigen::MatrixXd noise = rng.normal_matrix(policy.skill_dim, config.batch_size);
    Mlp::Grads ga = policy.actor.zero_grads();
    losses.actor = actor_loss_and_grads(policy, prior, batch.states, noise, config, ga);
    optimizers.actor.step(policy.actor, ga);

    polyak_update(policy.target1, policy.critic1, config.polyak_tau);
    polyak_update(policy.target2, policy.critic2, config.polyak_tau);
    return losses;
}

void RunConfig::validate() const {
    if (total_timesteps < 1) throw ConfigError("run.total_timesteps must be >= 1");
    if (predictor_update_steps < 0) throw ConfigError("run.predictor_update_steps must be >= 0");
    if (predictor_batch_size < 2) throw ConfigError("run.predictor_batch_size must be >= 2");
    if (predictor_learning_rate <= 0.0)
        throw ConfigError("run.predictor_learning_rate must be > 0");
    if (checkpoint_every < 1) throw ConfigError("run.checkpoint_every must be >= 1");
    planner.validate();
    sac.validate();
}

nlohmann::json run_config_json(const RunConfig& c) {
    return {{"env", c.env_name},
            {"mode", run_mode_name(c.mode)},
            {"total_timesteps", c.total_timesteps},
            {"seed", c.seed},
            {"planner",
             {{"n_samples", c.planner.n_samples},
              {"top_k", c.planner.top_k},
              {"n_iterations", c.planner.n_iterations},
              {"variance_floor", c.planner.variance_floor},
              {"init_from_proposal_params", c.planner.init_from_proposal_params}}},
            {"sac",
             {{"gamma", c.sac.gamma},
              {"alpha", c.sac.alpha},
              {"polyak_tau", c.sac.polyak_tau},
              {"learning_rate", c.sac.learning_rate},
              {"batch_size", c.sac.batch_size},
              {"buffer_capacity", c.sac.buffer_capacity},
              {"warmup_steps", c.sac.warmup_steps},
              {"updates_per_skill_step", c.sac.updates_per_skill_step},
              {"actor_hidden", c.sac.actor_hidden},
              {"critic_hidden", c.sac.critic_hidden}}},
            {"predictor_update_steps", c.predictor_update_steps},
            {"predictor_batch_size", c.predictor_batch_size},
            {"predictor_learning_rate", c.predictor_learning_rate},
            {"checkpoint_every", c.checkpoint_every}};
}

OnlineResult train_online(const RunConfig& config, const SkillModel& skill_model,
                          const RiskPredictor* offline_predictor, const PUDataset* offline_pu,
                          Rng& rng) {
    config.validate();
    const auto wall_start = std::chrono::steady_clock::now();

    auto env = make_env(config.env_name);
    const EnvSpec& spec = env->spec();
    if (spec.state_dim != skill_model.state_dim || spec.action_dim != skill_model.action_dim)
        throw ConfigError("train_online: skill model dims do not match env '" + config.env_name +
                          "'");

    const bool uses_predictor = config.mode != RunMode::NoPredictor;
    RiskPredictor predictor;
    PUDataset pu;
    if (uses_predictor) {
        if (!offline_predictor || !offline_pu)
            throw MissingArtifactError("train_online: mode " + run_mode_name(config.mode) +
                                       " requires a risk predictor and PU dataset");
        if (offline_predictor->state_dim != spec.state_dim ||
            offline_predictor->skill_dim != skill_model.skill_dim)
            throw ConfigError("train_online: risk predictor dims do not match env/skill model");
        predictor = *offline_predictor;
        pu = *offline_pu;
    }

    Rng policy_rng = rng.split(1);
    Rng env_rng = rng.split(2);
    Rng select_rng = rng.split(3);
    Rng sac_rng = rng.split(4);
    Rng pair_rng = rng.split(5);
    Rng pred_rng = rng.split(6);

    SkillPolicy policy =
        make_skill_policy(spec.state_dim, skill_model.skill_dim, config.sac, policy_rng);
    initialize_actor_from_prior(policy, skill_model);
    SacOptimizers sac_opt(policy, config.sac.learning_rate);
    Adam predictor_opt;
    if (uses_predictor) predictor_opt = Adam(predictor.net, config.predictor_learning_rate);
    ReplayBuffer buffer(config.sac.buffer_capacity);
    const BatchGaussian prior = prior_batch(skill_model);

    const bool to_disk = !config.out_dir.empty();
    std::ofstream csv;
    if (to_disk) {
        std::filesystem::create_directories(config.out_dir);
        csv.open(config.out_dir + "/metrics.csv");
        if (!csv) throw std::runtime_error("train_online: cannot open metrics.csv in " +
                                           config.out_dir);
        csv << "env_step,episode,episode_reward,episode_len,violated,cum_violations\n";
    }

    OnlineResult result;
    long long total_steps = 0;
    long long episode = 0;
    long long next_checkpoint = config.checkpoint_every;
    int cum_violations = 0;
    double episode_reward = 0.0;
    long long episode_len = 0;
    bool episode_violated = false;
    State state = env->reset(env_rng);

    auto log_episode = [&]() {
        ++episode;
        cum_violations += episode_violated ? 1 : 0;
        result.log.episodes.push_back(
            {total_steps, episode_reward, episode_violated ? 1 : 0});
        if (to_disk)
            csv << total_steps << "," << episode << "," << csv_num(episode_reward) << ","
                << episode_len << "," << (episode_violated ? 1 : 0) << "," << cum_violations
                << "\n";
        episode_reward = 0.0;
        episode_len = 0;
        episode_violated = false;
    };

    auto checkpoint = [&](long long step_tag) {
        if (!to_disk) return;
        const std::string tag = std::to_string(step_tag);
        save_policy(policy, config.out_dir + "/policy_" + tag + ".json");
        if (uses_predictor)
            save_predictor(predictor, config.out_dir + "/predictor_" + tag + ".json");
    };

    while (total_steps < config.total_timesteps) {
        const Skill z = select_skill(config.mode, policy, uses_predictor ? &predictor : nullptr,
                                     state, config.planner, select_rng);
        const int remaining = static_cast<int>(
            std::min<long long>(skill_model.horizon, config.total_timesteps - total_steps));
        ExecutionResult exec = execute_skill(*env, skill_model, z, state, remaining);

        total_steps += exec.transition.steps_executed;
        episode_reward += exec.transition.cum_reward;
        episode_len += exec.transition.steps_executed;
        episode_violated = episode_violated || exec.transition.violated;

        if (uses_predictor) {
            auto pairs = collect_decision_pairs(state, z, exec.interior_states, skill_model,
                                                pair_rng);
            auto& dst = exec.transition.violated ? pu.positives : pu.unlabeled;
            for (auto& p : pairs) dst.push_back(std::move(p));
        }

        state = exec.transition.s_next;
        buffer.add(std::move(exec.transition));

        if (total_steps >= config.sac.warmup_steps &&
            buffer.size() >= static_cast<std::size_t>(config.sac.batch_size)) {
            for (int u = 0; u < config.sac.updates_per_skill_step; ++u)
                sac_update(policy, sac_opt, buffer, prior, config.sac, sac_rng);
        }

        const bool budget_exhausted = total_steps >= config.total_timesteps;
        if (exec.episode_done || budget_exhausted) {
            log_episode();
            if (uses_predictor && config.predictor_update_steps > 0 && !pu.positives.empty() &&
                !pu.unlabeled.empty()) {
                predictor.pu.lambda =
                    estimate_class_prior(pu, predictor.pu.lambda_min, predictor.pu.lambda_max);
                update_predictor(predictor, pu, predictor_opt, config.predictor_update_steps,
                                 config.predictor_batch_size, pred_rng);
            }
            if (!budget_exhausted) state = env->reset(env_rng);
        }

        while (total_steps >= next_checkpoint && next_checkpoint <= config.total_timesteps) {
            checkpoint(next_checkpoint);
            next_checkpoint += config.checkpoint_every;
        }
    }

    result.total_steps = total_steps;
    result.episodes = episode;
    result.violations = cum_violations;
    result.ptr_value = ptr(result.log, config.total_timesteps);
    result.ptr_over_v = ptr_over_violations(result.log, config.total_timesteps);

    if (to_disk) {
        csv.close();
        result.metrics_csv_path = config.out_dir + "/metrics.csv";
        save_policy(policy, config.out_dir + "/policy_final.json");
        if (uses_predictor) {
            save_predictor(predictor, config.out_dir + "/predictor_final.json");
            save_pu_dataset(pu, config.out_dir + "/pu_online.jsonl");
        }
        const double wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
        nlohmann::json summary = {{"env", config.env_name},
                                  {"mode", run_mode_name(config.mode)},
                                  {"seed", config.seed},
                                  {"total_timesteps", config.total_timesteps},
                                  {"episodes", result.episodes},
                                  {"violations", result.violations},
                                  {"ptr", result.ptr_value},
                                  {"ptr_over_v", result.ptr_over_v.value},
                                  {"ptr_over_v_times_1e3", result.ptr_over_v.value * 1e3},
                                  {"zero_violations", result.ptr_over_v.zero_violations},
                                  {"wall_time_seconds", wall_seconds},
                                  {"config", run_config_json(config)}};
        std::ofstream summary_out(config.out_dir + "/summary.json");
        if (!summary_out)
            throw std::runtime_error("train_online: cannot open summary.json in " +
                                     config.out_dir);
        summary_out << summary.dump(2) << "\n";
    }
    return result;
}

}  // namespace sskp
