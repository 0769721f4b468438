#pragma once

#include <string>
#include <vector>

#include "sskp/demo.hpp"
#include "sskp/mlp.hpp"
#include "sskp/skills.hpp"

namespace sskp {

struct DecisionPair {
    State state;
    Skill skill;
};

// Positive set D^p (decisions followed by a violation within the horizon) and
// unlabeled set D^u (everything else).
struct PUDataset {
    std::vector<DecisionPair> positives;
    std::vector<DecisionPair> unlabeled;

    std::size_t size() const { return positives.size() + unlabeled.size(); }
};

struct PuConfig {
    double lambda = 0.1;  // positive class prior, in (0, 1)
    double xi = 0.0;      // non-negativity slack, >= 0
    double lambda_min = 0.02;
    double lambda_max = 0.5;
};

// Binary skill risk classifier over (state, skill) inputs with a sigmoid
// output head; predictions are always strictly inside (0, 1).
struct RiskPredictor {
    int state_dim = 0;
    int skill_dim = 0;
    Mlp net;
    PuConfig pu;
};

RiskPredictor make_risk_predictor(int state_dim, int skill_dim, const std::vector<int>& hidden,
                                  Rng& rng);

// One pair per demonstration step. The pair's skill is the encoder mean of the
// H-step action window when the window fits, else a sample from the prior at
// that state. A pair is positive iff a violation occurs within steps
// t .. t + H - 1 of the trajectory.
PUDataset assemble_pu_data(const DemoDataset& demos, const SkillModel& skill_model, int horizon,
                           Rng& rng);

double predict_risk(const RiskPredictor& predictor, const State& state, const Skill& skill);

// Risk of many candidate skills (columns) at one state.
Eigen::VectorXd predict_risk_batch(const RiskPredictor& predictor, const State& state,
                                   const Eigen::MatrixXd& skills);

// Inputs stacked as [state; skill] columns, ready for the predictor net.
Eigen::MatrixXd pair_inputs(const RiskPredictor& predictor, const std::vector<DecisionPair>& pairs,
                            const std::vector<std::size_t>& indices);
Eigen::MatrixXd pair_inputs(const RiskPredictor& predictor, const std::vector<DecisionPair>& pairs);

// L1 = -mean log P(c=1 | s, z) over a batch of positives.
double positive_loss(const RiskPredictor& predictor, const Eigen::MatrixXd& inputs);

// L0 = -mean log(1 - P(c=1 | s, z)) over a batch.
double negative_loss(const RiskPredictor& predictor, const Eigen::MatrixXd& inputs);

// Non-negative PU loss:
//   lambda * L1(D^p) + max(-xi, L0(D^u) - lambda * L0(D^p)).
// When the inner estimate falls below -xi the second term is clamped and
// contributes no gradient; only the positive term backpropagates.
double pu_loss(const RiskPredictor& predictor, const Eigen::MatrixXd& positive_inputs,
               const Eigen::MatrixXd& unlabeled_inputs);

double pu_loss_and_grads(const RiskPredictor& predictor, const Eigen::MatrixXd& positive_inputs,
                         const Eigen::MatrixXd& unlabeled_inputs, Mlp::Grads& grads);

// Observed positive fraction clamped to [lambda_min, lambda_max].
double estimate_class_prior(const PUDataset& dataset, double lambda_min = 0.02,
                            double lambda_max = 0.5);

// n_steps minibatch updates; positives and unlabeled sampled independently
// with replacement, batch_size/2 each. Returns the final minibatch loss.
double update_predictor(RiskPredictor& predictor, const PUDataset& dataset, Adam& optimizer,
                        int n_steps, int batch_size, Rng& rng);

void save_predictor(const RiskPredictor& predictor, const std::string& path);
RiskPredictor load_predictor(const std::string& path);

// JSON-lines of (state, skill, label in {p, u}) with a header line.
void save_pu_dataset(const PUDataset& dataset, const std::string& path);
PUDataset load_pu_dataset(const std::string& path);

}  // namespace sskp
