#include "sskp/risk.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "sskp/errors.hpp"

#include "json.hpp"

namespace sskp {

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kProbEps = 1e-12;

}  // namespace

RiskPredictor make_risk_predictor(int state_dim, int skill_dim, const std::vector<int>& hidden,
                                  Rng& rng) {
    RiskPredictor p;
    p.state_dim = state_dim;
    p.skill_dim = skill_dim;
    std::vector<int> sizes{state_dim + skill_dim};
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(1);
    p.net = Mlp::make(sizes, Activation::Tanh, Head::Sigmoid, rng);
    return p;
}

PUDataset assemble_pu_data(const DemoDataset& demos, const SkillModel& skill_model, int horizon,
                           Rng& rng) {
    if (demos.trajectories.empty())
        throw std::invalid_argument("assemble_pu_data: empty demonstration dataset");

    PUDataset out;
    for (std::size_t k = 0; k < demos.trajectories.size(); ++k) {
        const Trajectory& traj = demos.trajectories[k];
        const int len = traj.length();
        Rng traj_rng = rng.split(k);

        // Encoder means for every full window, batched.
        const int n_windows = std::max(0, len - horizon + 1);
        Eigen::MatrixXd window_means;
        if (n_windows > 0) {
            Eigen::MatrixXd flat(horizon * skill_model.action_dim, n_windows);
            for (int t = 0; t < n_windows; ++t)
                for (int h = 0; h < horizon; ++h)
                    flat.col(t).segment(h * skill_model.action_dim, skill_model.action_dim) =
                        traj.actions[t + h];
            window_means = skill_model.encoder.forward(normalize_actions_flat(skill_model, flat))
                               .topRows(skill_model.skill_dim);
        }

        for (int t = 0; t < len; ++t) {
            DecisionPair pair;
            pair.state = traj.states[t];
            if (t < n_windows) {
                pair.skill = window_means.col(t);
            } else {
                pair.skill = skill_prior(skill_model, traj.states[t]).sample(traj_rng);
            }

            // Positive iff a violation happens within steps t .. t + H - 1.
            bool positive = false;
            const int window_end = std::min(t + horizon - 1, len - 1);
            for (int j = t; j <= window_end; ++j) {
                if (traj.costs[j] > 0.0) {
                    positive = true;
                    break;
                }
            }
            (positive ? out.positives : out.unlabeled).push_back(std::move(pair));
        }
    }
    return out;
}

Eigen::MatrixXd pair_inputs(const RiskPredictor& predictor, const std::vector<DecisionPair>& pairs,
                            const std::vector<std::size_t>& indices) {
    Eigen::MatrixXd inputs(predictor.state_dim + predictor.skill_dim, indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const DecisionPair& p = pairs[indices[i]];
        inputs.col(i).head(predictor.state_dim) = p.state;
        inputs.col(i).tail(predictor.skill_dim) = p.skill;
    }
    return inputs;
}

Eigen::MatrixXd pair_inputs(const RiskPredictor& predictor,
                            const std::vector<DecisionPair>& pairs) {
    std::vector<std::size_t> all(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) all[i] = i;
    return pair_inputs(predictor, pairs, all);
}

double predict_risk(const RiskPredictor& predictor, const State& state, const Skill& skill) {
    Eigen::VectorXd input(predictor.state_dim + predictor.skill_dim);
    input.head(predictor.state_dim) = state;
    input.tail(predictor.skill_dim) = skill;
    const double p = predictor.net.forward_one(input)(0);
    return std::min(std::max(p, kProbEps), 1.0 - kProbEps);
}

Eigen::VectorXd predict_risk_batch(const RiskPredictor& predictor, const State& state,
                                   const Eigen::MatrixXd& skills) {
    Eigen::MatrixXd inputs(predictor.state_dim + predictor.skill_dim, skills.cols());
    inputs.topRows(predictor.state_dim).colwise() = state;
    inputs.bottomRows(predictor.skill_dim) = skills;
    Eigen::VectorXd p = predictor.net.forward(inputs).row(0).transpose();
    return p.cwiseMax(kProbEps).cwiseMin(1.0 - kProbEps);
}

namespace {

// Mean losses from the pre-sigmoid logits:
//   L1 = mean softplus(-x) = -mean log P
//   L0 = mean softplus(x)  = -mean log(1 - P)
double l1_from_logits(const Eigen::MatrixXd& logits) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < logits.cols(); ++i) sum += softplus(-logits(0, i));
    return sum / static_cast<double>(logits.cols());
}

double l0_from_logits(const Eigen::MatrixXd& logits) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < logits.cols(); ++i) sum += softplus(logits(0, i));
    return sum / static_cast<double>(logits.cols());
}

Eigen::MatrixXd forward_logits(const RiskPredictor& predictor, const Eigen::MatrixXd& inputs,
                               Mlp::Cache& cache) {
    predictor.net.forward_cached(inputs, cache);
    return cache.pre.back();
}

}  // namespace

double positive_loss(const RiskPredictor& predictor, const Eigen::MatrixXd& inputs) {
    if (inputs.cols() == 0) throw std::invalid_argument("positive_loss: empty batch");
    Mlp::Cache cache;
    return l1_from_logits(forward_logits(predictor, inputs, cache));
}

double negative_loss(const RiskPredictor& predictor, const Eigen::MatrixXd& inputs) {
    if (inputs.cols() == 0) throw std::invalid_argument("negative_loss: empty batch");
    Mlp::Cache cache;
    return l0_from_logits(forward_logits(predictor, inputs, cache));
}

double pu_loss(const RiskPredictor& predictor, const Eigen::MatrixXd& positive_inputs,
               const Eigen::MatrixXd& unlabeled_inputs) {
    if (positive_inputs.cols() == 0 || unlabeled_inputs.cols() == 0)
        throw std::invalid_argument("pu_loss: empty batch");
    const double l1_p = positive_loss(predictor, positive_inputs);
    const double l0_p = negative_loss(predictor, positive_inputs);
    const double l0_u = negative_loss(predictor, unlabeled_inputs);
    const double lambda = predictor.pu.lambda;
    return lambda * l1_p + std::max(-predictor.pu.xi, l0_u - lambda * l0_p);
}

double pu_loss_and_grads(const RiskPredictor& predictor, const Eigen::MatrixXd& positive_inputs,
                         const Eigen::MatrixXd& unlabeled_inputs, Mlp::Grads& grads) {
    if (positive_inputs.cols() == 0 || unlabeled_inputs.cols() == 0)
        throw std::invalid_argument("pu_loss_and_grads: empty batch");

    const double lambda = predictor.pu.lambda;
    const double np = static_cast<double>(positive_inputs.cols());
    const double nu = static_cast<double>(unlabeled_inputs.cols());

    Mlp::Cache cache_p, cache_u;
    Eigen::MatrixXd logits_p = forward_logits(predictor, positive_inputs, cache_p);
    Eigen::MatrixXd logits_u = forward_logits(predictor, unlabeled_inputs, cache_u);

    const double l1_p = l1_from_logits(logits_p);
    const double l0_p = l0_from_logits(logits_p);
    const double l0_u = l0_from_logits(logits_u);
    const double inner = l0_u - lambda * l0_p;
    const bool clamped = inner < -predictor.pu.xi;
    const double loss = lambda * l1_p + std::max(-predictor.pu.xi, inner);

    // Gradients wrt the logits:
    //   dL1/dx = -(1 - P)/n,  dL0/dx = P/n.
    Eigen::MatrixXd d_logits_p(1, logits_p.cols());
    for (Eigen::Index i = 0; i < logits_p.cols(); ++i) {
        const double p = sigmoid(logits_p(0, i));
        double g = lambda * (-(1.0 - p) / np);
        if (!clamped) g -= lambda * (p / np);
        d_logits_p(0, i) = g;
    }
    predictor.net.backward_from_preactivation(cache_p, d_logits_p, grads);

    if (!clamped) {
        Eigen::MatrixXd d_logits_u(1, logits_u.cols());
        for (Eigen::Index i = 0; i < logits_u.cols(); ++i)
            d_logits_u(0, i) = sigmoid(logits_u(0, i)) / nu;
        predictor.net.backward_from_preactivation(cache_u, d_logits_u, grads);
    }
    return loss;
}

double estimate_class_prior(const PUDataset& dataset, double lambda_min, double lambda_max) {
    if (dataset.positives.empty())
        throw std::invalid_argument("estimate_class_prior: no positive examples");
    const double fraction = static_cast<double>(dataset.positives.size()) /
                            static_cast<double>(dataset.size());
    return std::min(std::max(fraction, lambda_min), lambda_max);
}

double update_predictor(RiskPredictor& predictor, const PUDataset& dataset, Adam& optimizer,
                        int n_steps, int batch_size, Rng& rng) {
    if (dataset.positives.empty() || dataset.unlabeled.empty())
        throw std::invalid_argument("update_predictor: need positives and unlabeled examples");

    const int half = std::max(1, batch_size / 2);
    double loss = 0.0;
    for (int step = 0; step < n_steps; ++step) {
        std::vector<std::size_t> pos_idx(half), unl_idx(half);
        for (int i = 0; i < half; ++i) pos_idx[i] = rng.uniform_index(dataset.positives.size());
        for (int i = 0; i < half; ++i) unl_idx[i] = rng.uniform_index(dataset.unlabeled.size());

        Eigen::MatrixXd pos_in = pair_inputs(predictor, dataset.positives, pos_idx);
        Eigen::MatrixXd unl_in = pair_inputs(predictor, dataset.unlabeled, unl_idx);

        Mlp::Grads grads = predictor.net.zero_grads();
        loss = pu_loss_and_grads(predictor, pos_in, unl_in, grads);
        if (!std::isfinite(loss)) throw NumericalError("update_predictor: non-finite PU loss");
        optimizer.step(predictor.net, grads);
    }
    return loss;
}

void save_predictor(const RiskPredictor& predictor, const std::string& path) {
    nlohmann::json j = {{"version", 1},
                        {"type", "risk_predictor"},
                        {"state_dim", predictor.state_dim},
                        {"skill_dim", predictor.skill_dim},
                        {"lambda", predictor.pu.lambda},
                        {"xi", predictor.pu.xi},
                        {"lambda_min", predictor.pu.lambda_min},
                        {"lambda_max", predictor.pu.lambda_max},
                        {"net", predictor.net.to_json()}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_predictor: cannot open " + path);
    out << j.dump() << "\n";
}

RiskPredictor load_predictor(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("load_predictor: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("type", "") != "risk_predictor")
        throw std::runtime_error("load_predictor: not a risk predictor checkpoint: " + path);
    RiskPredictor p;
    p.state_dim = j.at("state_dim").get<int>();
    p.skill_dim = j.at("skill_dim").get<int>();
    p.pu.lambda = j.at("lambda").get<double>();
    p.pu.xi = j.at("xi").get<double>();
    p.pu.lambda_min = j.at("lambda_min").get<double>();
    p.pu.lambda_max = j.at("lambda_max").get<double>();
    p.net = Mlp::from_json(j.at("net"));
    return p;
}

void save_pu_dataset(const PUDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_pu_dataset: cannot open " + path);
    nlohmann::json header = {{"type", "pu_dataset"},
                             {"n_positive", dataset.positives.size()},
                             {"n_unlabeled", dataset.unlabeled.size()}};
    out << header.dump() << "\n";
    auto dump_pairs = [&](const std::vector<DecisionPair>& pairs, const char* label) {
        for (const auto& p : pairs) {
            nlohmann::json line = {
                {"state", std::vector<double>(p.state.data(), p.state.data() + p.state.size())},
                {"skill", std::vector<double>(p.skill.data(), p.skill.data() + p.skill.size())},
                {"label", label}};
            out << line.dump() << "\n";
        }
    };
    dump_pairs(dataset.positives, "p");
    dump_pairs(dataset.unlabeled, "u");
}

PUDataset load_pu_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("load_pu_dataset: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_pu_dataset: empty file " + path);
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("type", "") != "pu_dataset")
        throw std::runtime_error("load_pu_dataset: missing header in " + path);

    PUDataset out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        DecisionPair pair;
        auto sv = j.at("state").get<std::vector<double>>();
        auto zv = j.at("skill").get<std::vector<double>>();
        pair.state = Eigen::Map<Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
        pair.skill = Eigen::Map<Eigen::VectorXd>(zv.data(), static_cast<Eigen::Index>(zv.size()));
        const std::string label = j.at("label").get<std::string>();
        if (label == "p") out.positives.push_back(std::move(pair));
        else if (label == "u") out.unlabeled.push_back(std::move(pair));
        else throw std::runtime_error("load_pu_dataset: unknown label '" + label + "'");
    }
    return out;
}

}  // namespace sskp
