#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sskp/env.hpp"
#include "sskp/gaussian.hpp"
#include "sskp/risk.hpp"
#include "sskp/rng.hpp"
#include "sskp/skills.hpp"

namespace sskp {

struct PlannerConfig {
    int n_samples = 512;  // N_s
    int top_k = 64;       // k
    int n_iterations = 6;  // N_p
    double variance_floor = 1e-4;
    // When true, initialize the search distribution directly from the proposal's
    // (mean, variance) instead of refitting moments over n_samples proposal draws.
    bool init_from_proposal_params = false;

    void validate() const;
};

// Anything that maps a state to a diagonal-Gaussian skill distribution:
// the skill policy, or the skill prior.
using SkillProposal = std::function<DiagGaussian(const State&)>;

// Scores a batch of candidate skills (columns) for one state; higher = riskier.
using RiskScorer = std::function<Eigen::VectorXd(const State&, const Eigen::MatrixXd&)>;

SkillProposal standard_normal_proposal(int skill_dim);
SkillProposal prior_proposal(const SkillModel& model);
RiskScorer predictor_scorer(const RiskPredictor& predictor);

// Mean / population variance of the columns, variance floored per dimension.
DiagGaussian refit_distribution(const Eigen::MatrixXd& skills, double variance_floor);
DiagGaussian refit_distribution(const std::vector<Skill>& skills, double variance_floor);

// Indices of the k lowest scores, ties broken by ascending index.
std::vector<Eigen::Index> top_k_indices(const Eigen::VectorXd& scores, int k);

// Iterative refit toward low predicted risk. If mean_risk_trace is non-null it
// receives the average candidate risk per iteration, including one extra scoring
// pass on the final distribution (n_iterations + 1 entries).
DiagGaussian plan_distribution(const RiskScorer& scorer, const SkillProposal& proposal,
                               const State& state, const PlannerConfig& config, Rng& rng,
                               std::vector<double>* mean_risk_trace = nullptr);

// Full planning step: returns one skill sampled from the final distribution.
Skill risk_planning(const SkillProposal& policy, const RiskScorer& scorer, const State& state,
                    const PlannerConfig& config, Rng& rng);
Skill risk_planning(const SkillProposal& policy, const RiskPredictor& predictor,
                    const State& state, const PlannerConfig& config, Rng& rng);

struct DiagnosticsRow {
    int iteration = 0;
    double mean_delta_p = 0.0;  // across states, mean of p̄_i − p̄_0
    double std_delta_p = 0.0;   // across states, population std of the same
};

std::vector<DiagnosticsRow> planning_diagnostics(const RiskPredictor& predictor,
                                                 const std::vector<State>& states,
                                                 const SkillProposal& proposal,
                                                 const PlannerConfig& config, Rng& rng);

void write_diagnostics_csv(const std::vector<DiagnosticsRow>& rows, const std::string& path);

}  // namespace sskp
