#include "sskp/skills.hpp"

#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sskp/errors.hpp"

#include "json.hpp"

namespace sskp {

SkillModel make_skill_model(const EnvSpec& env_spec, const SkillModelConfig& config, Rng& rng) {
    SkillModel m;
    m.skill_dim = config.skill_dim;
    m.horizon = config.horizon;
    m.action_dim = env_spec.action_dim;
    m.state_dim = env_spec.state_dim;
    m.action_low = env_spec.action_low;
    m.action_high = env_spec.action_high;

    const int seq_dim = m.horizon * m.action_dim;
    std::vector<int> enc_sizes{seq_dim};
    std::vector<int> dec_sizes{m.skill_dim};
    std::vector<int> prior_sizes{m.state_dim};
    for (int h : config.hidden) {
        enc_sizes.push_back(h);
        dec_sizes.push_back(h);
        prior_sizes.push_back(h);
    }
    enc_sizes.push_back(2 * m.skill_dim);
    dec_sizes.push_back(seq_dim);
    prior_sizes.push_back(2 * m.skill_dim);

    Rng enc_rng = rng.split(1), dec_rng = rng.split(2), prior_rng = rng.split(3);
    m.encoder = Mlp::make(enc_sizes, Activation::Tanh, Head::Gaussian, enc_rng);
    m.decoder = Mlp::make(dec_sizes, Activation::Tanh, Head::Identity, dec_rng);
    m.prior = Mlp::make(prior_sizes, Activation::Tanh, Head::Gaussian, prior_rng);
    return m;
}

DiagGaussian encode(const SkillModel& model, const std::vector<Action>& sequence) {
    if (static_cast<int>(sequence.size()) != model.horizon)
        throw std::invalid_argument("encode: sequence length must equal the skill horizon");
    Eigen::VectorXd flat(model.horizon * model.action_dim);
    for (int t = 0; t < model.horizon; ++t) {
        if (sequence[t].size() != model.action_dim)
            throw std::invalid_argument("encode: action dimension mismatch");
        flat.segment(t * model.action_dim, model.action_dim) = sequence[t];
    }
    return encode_flat(model, flat);
}

namespace {

// Per-element midpoints and half-ranges of a flattened action window.
void action_scaling(const SkillModel& m, Eigen::VectorXd& mid, Eigen::VectorXd& half) {
    const int seq_dim = m.horizon * m.action_dim;
    mid.resize(seq_dim);
    half.resize(seq_dim);
    for (int t = 0; t < m.horizon; ++t) {
        mid.segment(t * m.action_dim, m.action_dim) = 0.5 * (m.action_high + m.action_low);
        half.segment(t * m.action_dim, m.action_dim) = 0.5 * (m.action_high - m.action_low);
    }
}

}  // namespace

Eigen::VectorXd normalize_actions_flat(const SkillModel& model, const Eigen::VectorXd& flat) {
    Eigen::VectorXd mid, half;
    action_scaling(model, mid, half);
    return (flat - mid).cwiseQuotient(half);
}

Eigen::MatrixXd normalize_actions_flat(const SkillModel& model, const Eigen::MatrixXd& flat) {
    Eigen::VectorXd mid, half;
    action_scaling(model, mid, half);
    Eigen::MatrixXd out = flat.colwise() - mid;
    out.array().colwise() /= half.array();
    return out;
}

DiagGaussian encode_flat(const SkillModel& model, const Eigen::VectorXd& actions_flat) {
    return Mlp::gaussian_from_output(
        model.encoder.forward_one(normalize_actions_flat(model, actions_flat)));
}

Eigen::VectorXd decode_flat(const SkillModel& model, const Skill& skill) {
    if (skill.size() != model.skill_dim)
        throw std::invalid_argument("decode: skill dimension mismatch");
    Eigen::VectorXd mid, half;
    action_scaling(model, mid, half);
    Eigen::VectorXd flat = mid + half.cwiseProduct(model.decoder.forward_one(skill));
    for (int t = 0; t < model.horizon; ++t) {
        flat.segment(t * model.action_dim, model.action_dim) =
            flat.segment(t * model.action_dim, model.action_dim)
                .cwiseMax(model.action_low)
                .cwiseMin(model.action_high);
    }
    return flat;
}

std::vector<Action> decode(const SkillModel& model, const Skill& skill) {
    Eigen::VectorXd flat = decode_flat(model, skill);
    std::vector<Action> seq;
    seq.reserve(model.horizon);
    for (int t = 0; t < model.horizon; ++t)
        seq.push_back(flat.segment(t * model.action_dim, model.action_dim));
    return seq;
}

DiagGaussian skill_prior(const SkillModel& model, const State& state) {
    if (state.size() != model.state_dim)
        throw std::invalid_argument("skill_prior: state dimension mismatch");
    return Mlp::gaussian_from_output(model.prior.forward_one(state));
}

std::vector<SkillWindow> extract_windows(const DemoDataset& demos, int horizon) {
    std::vector<SkillWindow> windows;
    for (const auto& traj : demos.trajectories) {
        const int len = traj.length();
        const int action_dim = len > 0 ? static_cast<int>(traj.actions[0].size()) : 0;
        for (int t = 0; t + horizon <= len; ++t) {
            SkillWindow w;
            w.state = traj.states[t];
            w.actions_flat.resize(horizon * action_dim);
            for (int k = 0; k < horizon; ++k)
                w.actions_flat.segment(k * action_dim, action_dim) = traj.actions[t + k];
            windows.push_back(std::move(w));
        }
    }
    return windows;
}

ElboTerms elbo_loss_and_grads(const SkillModel& model, const Eigen::MatrixXd& states,
                              const Eigen::MatrixXd& actions, const Eigen::MatrixXd& noise,
                              const SkillModelConfig& config, Mlp::Grads& enc_grads,
                              Mlp::Grads& dec_grads, Mlp::Grads& prior_grads) {
    const int batch = static_cast<int>(actions.cols());
    const int zdim = model.skill_dim;
    const int seq_dim = model.horizon * model.action_dim;
    const double inv_b = 1.0 / static_cast<double>(batch);

    // Both the encoder input and the reconstruction target live in the
    // bound-normalized action space.
    const Eigen::MatrixXd actions_norm = normalize_actions_flat(model, actions);

    Mlp::Cache enc_cache, dec_cache, prior_cache;
    Eigen::MatrixXd enc_out = model.encoder.forward_cached(actions_norm, enc_cache);
    Eigen::MatrixXd mu_e = enc_out.topRows(zdim);
    Eigen::MatrixXd lv_e = enc_out.bottomRows(zdim);
    Eigen::MatrixXd sigma_e = (0.5 * lv_e.array()).exp().matrix();

    // Reparameterized sample through the decoder.
    Eigen::MatrixXd z = mu_e + sigma_e.cwiseProduct(noise);
    Eigen::MatrixXd recon_out = model.decoder.forward_cached(z, dec_cache);
    Eigen::MatrixXd resid = recon_out - actions_norm;

    Eigen::MatrixXd prior_out = model.prior.forward_cached(states, prior_cache);
    Eigen::MatrixXd mu_p = prior_out.topRows(zdim);
    Eigen::MatrixXd lv_p = prior_out.bottomRows(zdim);

    ElboTerms terms;
    terms.recon = resid.squaredNorm() / static_cast<double>(batch * seq_dim);
    terms.kl = 0.5 * inv_b *
               (mu_e.array().square() + lv_e.array().exp() - lv_e.array() - 1.0).sum();
    // Prior matching: KL(posterior || prior), posterior treated as a constant,
    // so the prior is fit to cover the per-window posteriors at each state.
    Eigen::ArrayXXd var_e = lv_e.array().exp();
    Eigen::ArrayXXd var_p = lv_p.array().exp();
    Eigen::ArrayXXd mean_diff = (mu_p - mu_e).array();
    terms.prior_kl = 0.5 * inv_b *
                     ((lv_p.array() - lv_e.array()) +
                      (var_e + mean_diff.square()) / var_p - 1.0)
                         .sum();

    // Decoder backward: d recon / d recon_out.
    Eigen::MatrixXd d_recon_out = resid * (2.0 / static_cast<double>(batch * seq_dim));
    Eigen::MatrixXd dz = model.decoder.backward(dec_cache, d_recon_out, dec_grads);

    // Through the reparameterization into the encoder head, plus the KL term.
    Eigen::MatrixXd d_mu_e = dz + (config.beta * inv_b) * mu_e;
    Eigen::MatrixXd d_lv_e =
        0.5 * dz.cwiseProduct(sigma_e).cwiseProduct(noise) +
        (config.beta * inv_b * 0.5) * (lv_e.array().exp() - 1.0).matrix();
    Eigen::MatrixXd enc_upstream(2 * zdim, batch);
    enc_upstream.topRows(zdim) = d_mu_e;
    enc_upstream.bottomRows(zdim) = d_lv_e;
    model.encoder.backward(enc_cache, enc_upstream, enc_grads);

    // Prior-matching term backward (prior net only).
    Eigen::MatrixXd d_mu_p = (config.prior_weight * inv_b) * (mean_diff / var_p).matrix();
    Eigen::MatrixXd d_lv_p = (config.prior_weight * inv_b * 0.5) *
                             (1.0 - (var_e + mean_diff.square()) / var_p).matrix();
    Eigen::MatrixXd prior_upstream(2 * zdim, batch);
    prior_upstream.topRows(zdim) = d_mu_p;
    prior_upstream.bottomRows(zdim) = d_lv_p;
    model.prior.backward(prior_cache, prior_upstream, prior_grads);

    return terms;
}

ElboTerms elbo_loss(const SkillModel& model, const Eigen::MatrixXd& states,
                    const Eigen::MatrixXd& actions, const Eigen::MatrixXd& noise,
                    const SkillModelConfig& config) {
    Mlp::Grads eg = model.encoder.zero_grads();
    Mlp::Grads dg = model.decoder.zero_grads();
    Mlp::Grads pg = model.prior.zero_grads();
    return elbo_loss_and_grads(model, states, actions, noise, config, eg, dg, pg);
}

SkillModel train_skill_model(const DemoDataset& demos, const EnvSpec& env_spec,
                             const SkillModelConfig& config, Rng& rng, SkillTrainLog* log) {
    std::vector<SkillWindow> windows = extract_windows(demos, config.horizon);
    if (windows.empty())
        throw std::runtime_error("train_skill_model: no usable windows (all trajectories "
                                 "shorter than the horizon)");

    Rng init_rng = rng.split(1);
    Rng train_rng = rng.split(2);
    SkillModel model = make_skill_model(env_spec, config, init_rng);

    Adam enc_opt(model.encoder, config.learning_rate);
    Adam dec_opt(model.decoder, config.learning_rate);
    Adam prior_opt(model.prior, config.learning_rate);

    const int n = static_cast<int>(windows.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        train_rng.shuffle(order);
        double recon_sum = 0.0, kl_sum = 0.0, prior_sum = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += config.batch_size) {
            const int b = std::min(config.batch_size, n - start);
            Eigen::MatrixXd states(model.state_dim, b);
            Eigen::MatrixXd actions(model.horizon * model.action_dim, b);
            for (int i = 0; i < b; ++i) {
                const SkillWindow& w = windows[order[start + i]];
                states.col(i) = w.state;
                actions.col(i) = w.actions_flat;
            }
            Eigen::MatrixXd noise = train_rng.normal_matrix(model.skill_dim, b);

            Mlp::Grads eg = model.encoder.zero_grads();
            Mlp::Grads dg = model.decoder.zero_grads();
            Mlp::Grads pg = model.prior.zero_grads();
            ElboTerms terms =
                elbo_loss_and_grads(model, states, actions, noise, config, eg, dg, pg);
            enc_opt.step(model.encoder, eg);
            dec_opt.step(model.decoder, dg);
            prior_opt.step(model.prior, pg);

            recon_sum += terms.recon;
            kl_sum += terms.kl;
            prior_sum += terms.prior_kl;
            ++batches;
        }
        if (log) {
            log->recon.push_back(recon_sum / batches);
            log->kl.push_back(kl_sum / batches);
            log->prior_kl.push_back(prior_sum / batches);
        }
    }
    return model;
}

double explained_variance(const SkillModel& model, const std::vector<SkillWindow>& windows) {
    if (windows.empty()) throw std::invalid_argument("explained_variance: empty window set");
    const int seq_dim = model.horizon * model.action_dim;
    const int n = static_cast<int>(windows.size());

    Eigen::MatrixXd targets(seq_dim, n);
    for (int i = 0; i < n; ++i) targets.col(i) = windows[i].actions_flat;

    Eigen::MatrixXd recon(seq_dim, n);
    for (int i = 0; i < n; ++i) {
        DiagGaussian posterior = encode_flat(model, windows[i].actions_flat);
        recon.col(i) = decode_flat(model, posterior.mean);
    }

    Eigen::VectorXd mean = targets.rowwise().mean();
    const double total_var = (targets.colwise() - mean).squaredNorm();
    const double sse = (recon - targets).squaredNorm();
    if (total_var <= 0.0) return 0.0;
    return 1.0 - sse / total_var;
}

void save_skill_model(const SkillModel& model, const std::string& path) {
    nlohmann::json j = {
        {"version", 1},
        {"type", "skill_model"},
        {"skill_dim", model.skill_dim},
        {"horizon", model.horizon},
        {"action_dim", model.action_dim},
        {"state_dim", model.state_dim},
        {"action_low", std::vector<double>(model.action_low.data(),
                                           model.action_low.data() + model.action_low.size())},
        {"action_high", std::vector<double>(model.action_high.data(),
                                            model.action_high.data() + model.action_high.size())},
        {"encoder", model.encoder.to_json()},
        {"decoder", model.decoder.to_json()},
        {"prior", model.prior.to_json()},
    };
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_skill_model: cannot open " + path);
    out << j.dump() << "\n";
}

SkillModel load_skill_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("load_skill_model: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("type", "") != "skill_model")
        throw std::runtime_error("load_skill_model: not a skill model checkpoint: " + path);
    SkillModel m;
    m.skill_dim = j.at("skill_dim").get<int>();
    m.horizon = j.at("horizon").get<int>();
    m.action_dim = j.at("action_dim").get<int>();
    m.state_dim = j.at("state_dim").get<int>();
    auto lo = j.at("action_low").get<std::vector<double>>();
    auto hi = j.at("action_high").get<std::vector<double>>();
    m.action_low = Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    m.action_high = Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    m.encoder = Mlp::from_json(j.at("encoder"));
    m.decoder = Mlp::from_json(j.at("decoder"));
    m.prior = Mlp::from_json(j.at("prior"));
    return m;
}

}  // namespace sskp
