#pragma once

#include <string>
#include <vector>

#include "sskp/demo.hpp"
#include "sskp/env.hpp"
#include "sskp/gaussian.hpp"
#include "sskp/mlp.hpp"
#include "sskp/rng.hpp"

namespace sskp {

using Skill = Eigen::VectorXd;

struct SkillModelConfig {
    int skill_dim = 10;
    int horizon = 10;
    std::vector<int> hidden{64, 64};
    double beta = 5e-4;        // weight of KL(posterior || N(0, I))
    double prior_weight = 1.0; // weight of KL(stop-grad posterior || prior)
    double learning_rate = 1e-3;
    int epochs = 120;
    int batch_size = 128;
};

// Latent skill model: encoder over flattened H-step action sequences,
// decoder back to the sequence, and a state-conditioned prior. All three
// share skill_dim / horizon / action bounds.
struct SkillModel {
    int skill_dim = 0;
    int horizon = 0;
    int action_dim = 0;
    int state_dim = 0;
    Eigen::VectorXd action_low;
    Eigen::VectorXd action_high;
    Mlp encoder;  // H*action_dim -> 2*skill_dim (Gaussian head)
    Mlp decoder;  // skill_dim -> H*action_dim
    Mlp prior;    // state_dim -> 2*skill_dim (Gaussian head)
};

SkillModel make_skill_model(const EnvSpec& env_spec, const SkillModelConfig& config, Rng& rng);

// Posterior over skills for a sequence of exactly `horizon` actions.
DiagGaussian encode(const SkillModel& model, const std::vector<Action>& sequence);
DiagGaussian encode_flat(const SkillModel& model, const Eigen::VectorXd& actions_flat);

// Deterministic decoding; every action is clamped to the environment bounds.
std::vector<Action> decode(const SkillModel& model, const Skill& skill);
Eigen::VectorXd decode_flat(const SkillModel& model, const Skill& skill);

// The encoder and decoder operate on actions mapped to [-1, 1] by the stored
// action bounds (raw action ranges are often far from unit scale, which
// starves the latent of signal). These expose that mapping for callers that
// feed the encoder directly; columns of the matrix form are flattened windows.
Eigen::VectorXd normalize_actions_flat(const SkillModel& model, const Eigen::VectorXd& flat);
Eigen::MatrixXd normalize_actions_flat(const SkillModel& model, const Eigen::MatrixXd& flat);

DiagGaussian skill_prior(const SkillModel& model, const State& state);

// One training example: the window's start state and its flattened actions.
struct SkillWindow {
    State state;
    Eigen::VectorXd actions_flat;
};

// Overlapping windows: every in-trajectory index t with t + horizon <= length,
// exactly once, in trajectory order.
std::vector<SkillWindow> extract_windows(const DemoDataset& demos, int horizon);

struct ElboTerms {
    double recon = 0.0;     // mean squared reconstruction error (normalized action units)
    double kl = 0.0;        // KL(posterior || N(0, I)), mean over batch
    double prior_kl = 0.0;  // KL(stop-grad posterior || prior), mean over batch

    double total(double beta, double prior_weight) const {
        return recon + beta * kl + prior_weight * prior_kl;
    }
};

// Training objective on one minibatch with an explicit reparameterization
// noise matrix (skill_dim x batch); gradients accumulate into the three nets'
// grad buffers. The prior term does not backpropagate into the encoder.
ElboTerms elbo_loss_and_grads(const SkillModel& model, const Eigen::MatrixXd& states,
                              const Eigen::MatrixXd& actions, const Eigen::MatrixXd& noise,
                              const SkillModelConfig& config, Mlp::Grads& enc_grads,
                              Mlp::Grads& dec_grads, Mlp::Grads& prior_grads);

ElboTerms elbo_loss(const SkillModel& model, const Eigen::MatrixXd& states,
                    const Eigen::MatrixXd& actions, const Eigen::MatrixXd& noise,
                    const SkillModelConfig& config);

struct SkillTrainLog {
    std::vector<double> recon;     // per-epoch means
    std::vector<double> kl;
    std::vector<double> prior_kl;
};

SkillModel train_skill_model(const DemoDataset& demos, const EnvSpec& env_spec,
                             const SkillModelConfig& config, Rng& rng,
                             SkillTrainLog* log = nullptr);

// 1 - SSE / total variance of decode(encode-mean(.)) over the given windows.
double explained_variance(const SkillModel& model, const std::vector<SkillWindow>& windows);

void save_skill_model(const SkillModel& model, const std::string& path);
SkillModel load_skill_model(const std::string& path);

}  // namespace sskp
