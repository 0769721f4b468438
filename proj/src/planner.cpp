#include "sskp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sskp/csv.hpp"
#include "sskp/errors.hpp"

namespace sskp {

void PlannerConfig::validate() const {
    if (n_samples < 1) throw ConfigError("planner.n_samples must be >= 1");
    if (top_k < 1 || top_k > n_samples)
        throw ConfigError("planner.top_k must satisfy 1 <= k <= n_samples");
    if (n_iterations < 1) throw ConfigError("planner.n_iterations must be >= 1");
    if (variance_floor <= 0.0) throw ConfigError("planner.variance_floor must be > 0");
}

SkillProposal standard_normal_proposal(int skill_dim) {
    return [skill_dim](const State&) {
        return DiagGaussian{Eigen::VectorXd::Zero(skill_dim), Eigen::VectorXd::Ones(skill_dim)};
    };
}

SkillProposal prior_proposal(const SkillModel& model) {
    return [&model](const State& s) { return skill_prior(model, s); };
}

RiskScorer predictor_scorer(const RiskPredictor& predictor) {
    return [&predictor](const State& s, const Eigen::MatrixXd& skills) {
        return predict_risk_batch(predictor, s, skills);
    };
}

DiagGaussian refit_distribution(const Eigen::MatrixXd& skills, double variance_floor) {
    if (skills.cols() == 0) throw std::invalid_argument("refit_distribution: empty skill set");
    DiagGaussian out;
    out.mean = skills.rowwise().mean();
    out.var = (skills.colwise() - out.mean).array().square().rowwise().mean().matrix();
    out.var = out.var.cwiseMax(variance_floor);
    return out;
}

DiagGaussian refit_distribution(const std::vector<Skill>& skills, double variance_floor) {
    if (skills.empty()) throw std::invalid_argument("refit_distribution: empty skill set");
    Eigen::MatrixXd m(skills.front().size(), skills.size());
    for (std::size_t i = 0; i < skills.size(); ++i) {
        if (skills[i].size() != m.rows())
            throw std::invalid_argument("refit_distribution: skills of unequal dimension");
        m.col(i) = skills[i];
    }
    return refit_distribution(m, variance_floor);
}

std::vector<Eigen::Index> top_k_indices(const Eigen::VectorXd& scores, int k) {
    if (k < 1 || k > scores.size())
        throw std::invalid_argument("top_k_indices: k out of range");
    std::vector<Eigen::Index> order(scores.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&scores](Eigen::Index a, Eigen::Index b) { return scores(a) < scores(b); });
    order.resize(k);
    return order;
}

namespace {

Eigen::VectorXd score_batch(const RiskScorer& scorer, const State& state,
                            const Eigen::MatrixXd& skills) {
    Eigen::VectorXd scores = scorer(state, skills);
    if (scores.size() != skills.cols())
        throw std::logic_error("risk scorer returned wrong number of scores");
    if (!scores.allFinite()) throw NumericalError("risk planning: non-finite risk scores");
    return scores;
}

}  // namespace

DiagGaussian plan_distribution(const RiskScorer& scorer, const SkillProposal& proposal,
                               const State& state, const PlannerConfig& config, Rng& rng,
                               std::vector<double>* mean_risk_trace) {
    config.validate();

    DiagGaussian dist = proposal(state);
    if (!config.init_from_proposal_params) {
        Eigen::MatrixXd init_samples = dist.sample_many(config.n_samples, rng);
        dist = refit_distribution(init_samples, config.variance_floor);
    } else {
        dist.var = dist.var.cwiseMax(config.variance_floor);
    }

    if (mean_risk_trace) mean_risk_trace->clear();
    for (int iter = 0; iter < config.n_iterations; ++iter) {
        Eigen::MatrixXd candidates = dist.sample_many(config.n_samples, rng);
        Eigen::VectorXd scores = score_batch(scorer, state, candidates);
        if (mean_risk_trace) mean_risk_trace->push_back(scores.mean());

        std::vector<Eigen::Index> elite = top_k_indices(scores, config.top_k);
        Eigen::MatrixXd elites(candidates.rows(), config.top_k);
        for (int j = 0; j < config.top_k; ++j) elites.col(j) = candidates.col(elite[j]);
        dist = refit_distribution(elites, config.variance_floor);
    }

    if (mean_risk_trace) {
        Eigen::MatrixXd final_samples = dist.sample_many(config.n_samples, rng);
        mean_risk_trace->push_back(score_batch(scorer, state, final_samples).mean());
    }
    return dist;
}

Skill risk_planning(const SkillProposal& policy, const RiskScorer& scorer, const State& state,
                    const PlannerConfig& config, Rng& rng) {
    DiagGaussian dist = plan_distribution(scorer, policy, state, config, rng);
    return dist.sample(rng);
}

Skill risk_planning(const SkillProposal& policy, const RiskPredictor& predictor,
                    const State& state, const PlannerConfig& config, Rng& rng) {
    return risk_planning(policy, predictor_scorer(predictor), state, config, rng);
}

std::vector<DiagnosticsRow> planning_diagnostics(const RiskPredictor& predictor,
                                                 const std::vector<State>& states,
                                                 const SkillProposal& proposal,
                                                 const PlannerConfig& config, Rng& rng) {
    if (states.empty()) throw std::invalid_argument("planning_diagnostics: no states");
    config.validate();

    const RiskScorer scorer = predictor_scorer(predictor);
    const int n_rows = config.n_iterations + 1;
    // delta(i, s) = p̄_i − p̄_0 for state s.
    Eigen::MatrixXd delta(n_rows, states.size());
    for (std::size_t s = 0; s < states.size(); ++s) {
        Rng state_rng = rng.split(s);
        std::vector<double> trace;
        plan_distribution(scorer, proposal, states[s], config, state_rng, &trace);
        for (int i = 0; i < n_rows; ++i) delta(i, s) = trace[i] - trace[0];
    }

    std::vector<DiagnosticsRow> rows(n_rows);
    for (int i = 0; i < n_rows; ++i) {
        rows[i].iteration = i;
        rows[i].mean_delta_p = delta.row(i).mean();
        rows[i].std_delta_p =
            std::sqrt((delta.row(i).array() - rows[i].mean_delta_p).square().mean());
    }
    return rows;
}

void write_diagnostics_csv(const std::vector<DiagnosticsRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_diagnostics_csv: cannot open " + path);
    out << "iteration,mean_delta_p,std_delta_p\n";
    for (const auto& r : rows)
        out << r.iteration << "," << csv_num(r.mean_delta_p) << "," << csv_num(r.std_delta_p)
            << "\n";
}

}  // namespace sskp
