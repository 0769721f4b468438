#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sskp/env.hpp"
#include "sskp/metrics.hpp"
#include "sskp/mlp.hpp"
#include "sskp/planner.hpp"
#include "sskp/risk.hpp"
#include "sskp/rng.hpp"
#include "sskp/skills.hpp"

#include "json.hpp"

namespace sskp {

// One executed skill: H (or fewer, on early stop) primitive steps collapsed
// into a single transition. `terminal` marks violation or goal termination
// (no bootstrapping); truncation leaves it false.
struct SkillTransition {
    State s;
    Skill z;
    double cum_reward = 0.0;  // undiscounted sum over executed steps
    State s_next;
    bool violated = false;
    bool terminal = false;
    int steps_executed = 0;
};

class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity);

    void add(SkillTransition t);  // FIFO eviction once full
    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }
    const SkillTransition& operator[](std::size_t i) const { return storage_[i]; }

  private:
    std::vector<SkillTransition> storage_;
    std::size_t capacity_;
    std::size_t next_ = 0;
};

struct SacConfig {
    double gamma = 0.99;
    double alpha = 0.1;  // KL regularizer weight (fixed, not auto-tuned)
    double polyak_tau = 0.005;
    double learning_rate = 3e-4;
    int batch_size = 256;
    int buffer_capacity = 100000;
    int warmup_steps = 1000;  // env steps before updates start
    int updates_per_skill_step = 1;
    std::vector<int> actor_hidden{64, 64};
    std::vector<int> critic_hidden{64, 64};

    void validate() const;
};

// Skill policy with twin critics and their Polyak targets.
struct SkillPolicy {
    int state_dim = 0;
    int skill_dim = 0;
    Mlp actor;    // state -> Gaussian over skills
    Mlp critic1;  // [state; skill] -> value
    Mlp critic2;
    Mlp target1;
    Mlp target2;
};

SkillPolicy make_skill_policy(int state_dim, int skill_dim, const SacConfig& config, Rng& rng);

// Copies the skill prior's weights into the actor when the two architectures
// match, so the initial policy proposes demonstration-like skills (the KL
// regularizer then keeps it anchored). Returns whether the copy happened.
bool initialize_actor_from_prior(SkillPolicy& policy, const SkillModel& skill_model);

DiagGaussian policy_distribution(const SkillPolicy& policy, const State& state);
SkillProposal policy_proposal(const SkillPolicy& policy);

void save_policy(const SkillPolicy& policy, const std::string& path);
SkillPolicy load_policy(const std::string& path);

enum class RunMode { SSkP, NoPredictor, NoPlanning };
std::string run_mode_name(RunMode mode);        // "SSkP", "SSkP-w/o-RP", "SSkP-NP"
RunMode run_mode_from_name(const std::string& name);

// Mode dispatch: SSkP = full risk planning; NoPlanning = best of n_samples policy
// draws by predicted risk, single pass; NoPredictor = one policy draw.
Skill select_skill(RunMode mode, const SkillPolicy& policy, const RiskPredictor* predictor,
                   const State& state, const PlannerConfig& config, Rng& rng);

struct ExecutionResult {
    SkillTransition transition;
    std::vector<State> interior_states;  // states after steps 1..k-1 (excludes s_next)
    bool episode_done = false;           // env terminated or truncated
};

// Decodes the skill and executes up to max_steps of its actions, stopping early
// on violation / termination / truncation.
ExecutionResult execute_skill(Env& env, const SkillModel& model, const Skill& skill,
                              const State& current_state, int max_steps);
ExecutionResult execute_skill(Env& env, const SkillModel& model, const Skill& skill,
                              const State& current_state);

// PU examples from one executed skill: (s_t, z_t) plus one prior draw per
// interior state.
std::vector<DecisionPair> collect_decision_pairs(const State& s_t, const Skill& z_t,
                                                 const std::vector<State>& interior_states,
                                                 const SkillModel& model, Rng& rng);

// Batched diagonal Gaussian per state column (mean, variance); used for the
// KL target distribution q_psi.
using BatchGaussian =
    std::function<void(const Eigen::MatrixXd& states, Eigen::MatrixXd& mean,
                       Eigen::MatrixXd& var)>;
BatchGaussian prior_batch(const SkillModel& model);
BatchGaussian standard_normal_batch(int skill_dim);

struct SacBatch {
    Eigen::MatrixXd states;       // state_dim x B
    Eigen::MatrixXd skills;       // skill_dim x B
    Eigen::VectorXd rewards;      // B
    Eigen::MatrixXd next_states;  // state_dim x B
    Eigen::VectorXd terminal;     // B, 1 = no bootstrap
    Eigen::VectorXd steps;        // B, steps executed per transition
};
SacBatch sample_batch(const ReplayBuffer& buffer, int batch_size, Rng& rng);

// KL(N(mean_p, e^logvar_p) || N(mean_q, var_q)) per column.
Eigen::VectorXd kl_columns(const Eigen::MatrixXd& mean_p, const Eigen::MatrixXd& logvar_p,
                           const Eigen::MatrixXd& mean_q, const Eigen::MatrixXd& var_q);

// Twin-critic regression to the KL-regularized soft target
//   y = r + gamma^steps * (1 - terminal) * (min targetQ(s', z') - alpha * KL(s'))
// with z' reparameterized from the actor using next_noise. Loss is the sum of
// the two mean squared errors; gradients accumulate into g1/g2.
double critic_loss_and_grads(const SkillPolicy& policy, const BatchGaussian& prior,
                             const SacBatch& batch, const Eigen::MatrixXd& next_noise,
                             const SacConfig& config, Mlp::Grads& g1, Mlp::Grads& g2);

// Actor loss mean_b[ alpha * KL(pi(.|s_b) || q(.|s_b)) - min Q(s_b, z_b) ] with
// z_b reparameterized using noise; gradients accumulate into actor_grads.
double actor_loss_and_grads(const SkillPolicy& policy, const BatchGaussian& prior,
                            const Eigen::MatrixXd& states, const Eigen::MatrixXd& noise,
                            const SacConfig& config, Mlp::Grads& actor_grads);

void polyak_update(Mlp& target, const Mlp& source, double tau);

struct SacOptimizers {
    Adam actor;
    Adam critic1;
    Adam critic2;
    SacOptimizers(const SkillPolicy& policy, double lr)
        : actor(policy.actor, lr), critic1(policy.critic1, lr), critic2(policy.critic2, lr) {}
};

struct SacLosses {
    double critic = 0.0;
    double actor = 0.0;
};

// One gradient step on the critics and the actor plus Polyak target updates.
SacLosses sac_update(SkillPolicy& policy, SacOptimizers& optimizers, const ReplayBuffer& buffer,
                     const BatchGaussian& prior, const SacConfig& config, Rng& rng);

struct RunConfig {
    std::string env_name = "hazard_world_2d";
    RunMode mode = RunMode::SSkP;
    long long total_timesteps = 50000;
    std::uint64_t seed = 0;  // root seed; stages derive their own streams
    PlannerConfig planner;
    SacConfig sac;
    int predictor_update_steps = 64;  // minibatches per episode-end update
    int predictor_batch_size = 256;
    double predictor_learning_rate = 1e-3;
    long long checkpoint_every = 10000;
    std::string out_dir;  // empty = keep everything in memory

    void validate() const;
};

nlohmann::json run_config_json(const RunConfig& config);

struct OnlineResult {
    RunLog log;
    long long total_steps = 0;
    long long episodes = 0;
    int violations = 0;
    double ptr_value = 0.0;
    PtrOverViolations ptr_over_v;
    std::string metrics_csv_path;  // set when out_dir is non-empty
};

// Online safe RL: per skill step select -> execute -> store -> route PU pairs;
// SAC updates each skill step after warmup; predictor PU update at episode end.
// `offline_predictor`/`offline_pu` may be null only in NoPredictor mode.
OnlineResult train_online(const RunConfig& config, const SkillModel& skill_model,
                          const RiskPredictor* offline_predictor, const PUDataset* offline_pu,
                          Rng& rng);

}  // namespace sskp
