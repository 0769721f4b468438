#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sskp/demo.hpp"
#include "sskp/env.hpp"
#include "sskp/skills.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

using namespace sskp;

namespace {

SkillModelConfig tiny_config() {
    SkillModelConfig c;
    c.skill_dim = 3;
    c.horizon = 4;
    c.hidden = {16};
    c.epochs = 15;
    c.batch_size = 32;
    return c;
}

DemoDataset make_demos(int n, std::uint64_t seed) {
    HazardWorld2D env;
    auto controller = make_scripted_controller(env, 0.05);
    return generate_demonstrations(env, controller, "scripted", n, seed);
}

Eigen::VectorXd flatten_all(const SkillModel& m) {
    Eigen::VectorXd e = m.encoder.flatten_parameters();
    Eigen::VectorXd d = m.decoder.flatten_parameters();
    Eigen::VectorXd p = m.prior.flatten_parameters();
    Eigen::VectorXd out(e.size() + d.size() + p.size());
    out << e, d, p;
    return out;
}

}  // namespace

TEST_CASE("window extraction counts L - H + 1 per trajectory") {
    DemoDataset demos;
    demos.env_name = "hazard_world_2d";

    auto synth = [](int len) {
        Trajectory t;
        for (int i = 0; i <= len; ++i) {
            State s(2);
            s << i, -i;
            t.states.push_back(s);
        }
        for (int i = 0; i < len; ++i) {
            Action a(2);
            a << 0.01 * i, -0.01 * i;
            t.actions.push_back(a);
            t.rewards.push_back(0.0);
            t.costs.push_back(0.0);
        }
        return t;
    };

    demos.trajectories.push_back(synth(12));
    auto w = extract_windows(demos, 10);
    CHECK(w.size() == 3);  // 12 - 10 + 1

    demos.trajectories.push_back(synth(9));   // shorter than H: no windows
    demos.trajectories.push_back(synth(10));  // exactly H: one window
    w = extract_windows(demos, 10);
    CHECK(w.size() == 4);

    // Window k starts at state index k and stacks H consecutive actions.
    const auto& first = w[0];
    CHECK(first.state(0) == 0.0);
    REQUIRE(first.actions_flat.size() == 20);
    CHECK(first.actions_flat(0) == doctest::Approx(0.0));
    CHECK(first.actions_flat(2) == doctest::Approx(0.01));  // second action, first dim
    const auto& second = w[1];
    CHECK(second.state(0) == 1.0);
    CHECK(second.actions_flat(0) == doctest::Approx(0.01));
}

TEST_CASE("encode rejects sequences of the wrong length") {
    Rng rng(1);
    HazardWorld2D env;
    SkillModel model = make_skill_model(env.spec(), tiny_config(), rng);

    std::vector<Action> seq(3, Action::Zero(2));  // horizon is 4
    CHECK_THROWS(encode(model, seq));
    seq.push_back(Action::Zero(2));
    CHECK_NOTHROW(encode(model, seq));
}

TEST_CASE("decode clamps every action to the environment bounds") {
    Rng rng(2);
    HazardWorld2D env;
    SkillModel model = make_skill_model(env.spec(), tiny_config(), rng);

    for (int i = 0; i < 20; ++i) {
        Skill z = rng.normal_vector(3) * 4.0;
        auto actions = decode(model, z);
        REQUIRE(actions.size() == 4);
        for (const auto& a : actions) {
            CHECK(a.cwiseAbs().maxCoeff() <= 0.1 + 1e-15);
        }
    }
}

TEST_CASE("zeroed encoder yields a standard normal posterior") {
    Rng rng(3);
    HazardWorld2D env;
    SkillModel model = make_skill_model(env.spec(), tiny_config(), rng);
    model.encoder.set_parameters(Eigen::VectorXd::Zero(model.encoder.parameter_count()));

    DiagGaussian g = encode_flat(model, Eigen::VectorXd::Constant(8, 0.05));
    CHECK(g.mean.cwiseAbs().maxCoeff() == 0.0);
    CHECK((g.var.array() - 1.0).abs().maxCoeff() == 0.0);  // exp(0)
}

TEST_CASE("elbo gradients match finite differences on all three nets") {
    HazardWorld2D env;
    SkillModelConfig cfg;
    cfg.skill_dim = 2;
    cfg.horizon = 3;
    cfg.hidden = {5};
    cfg.beta = 0.1;
    cfg.prior_weight = 0.7;

    for (int inst = 0; inst < 5; ++inst) {
        Rng rng(500 + inst);
        SkillModel model = make_skill_model(env.spec(), cfg, rng);

        const int batch = 4;
        Eigen::MatrixXd states = rng.normal_matrix(2, batch) * 0.5;
        Eigen::MatrixXd actions = rng.normal_matrix(6, batch) * 0.05;
        Eigen::MatrixXd noise = rng.normal_matrix(2, batch);

        Mlp::Grads ge = model.encoder.zero_grads();
        Mlp::Grads gd = model.decoder.zero_grads();
        Mlp::Grads gp = model.prior.zero_grads();
        elbo_loss_and_grads(model, states, actions, noise, cfg, ge, gd, gp);

        // Per-net objectives: the prior-matching term treats the posterior as a
        // constant, so the encoder's differentiated objective excludes it, and
        // the prior net only sees the (weighted) matching term.
        auto terms = [&]() { return elbo_loss(model, states, actions, noise, cfg); };
        auto encoder_loss = [&]() {
            ElboTerms t = terms();
            return t.recon + cfg.beta * t.kl;
        };
        auto decoder_loss = [&]() { return terms().recon; };
        auto prior_loss = [&]() { return cfg.prior_weight * terms().prior_kl; };

        auto check_net = [&](Mlp& net, const Mlp::Grads& g, const std::function<double()>& loss) {
            Eigen::VectorXd p = net.flatten_parameters();
            const double h = 1e-5;
            Eigen::Index at = 0;
            for (int l = 0; l < net.num_layers(); ++l) {
                auto probe = [&](double analytic) {
                    Eigen::VectorXd q = p;
                    q(at) = p(at) + h;
                    net.set_parameters(q);
                    const double up = loss();
                    q(at) = p(at) - h;
                    net.set_parameters(q);
                    const double dn = loss();
                    net.set_parameters(p);
                    const double fd = (up - dn) / (2.0 * h);
                    CHECK(std::abs(analytic - fd) <=
                          1e-4 * std::max({1.0, std::abs(analytic), std::abs(fd)}));
                };
                for (Eigen::Index i = 0; i < g.w[l].rows(); ++i)
                    for (Eigen::Index j = 0; j < g.w[l].cols(); ++j) {
                        probe(g.w[l](i, j));
                        ++at;
                    }
                for (Eigen::Index i = 0; i < g.b[l].size(); ++i) {
                    probe(g.b[l](i));
                    ++at;
                }
            }
        };

        check_net(model.encoder, ge, encoder_loss);
        check_net(model.decoder, gd, decoder_loss);
        check_net(model.prior, gp, prior_loss);
    }
}

TEST_CASE("prior term does not backpropagate into the encoder") {
    HazardWorld2D env;
    SkillModelConfig cfg;
    cfg.skill_dim = 2;
    cfg.horizon = 3;
    cfg.hidden = {5};
    cfg.beta = 0.0;
    cfg.prior_weight = 1.0;

    Rng rng(9);
    SkillModel model = make_skill_model(env.spec(), cfg, rng);
    // Kill the decoder so recon contributes no encoder gradient either.
    model.decoder.set_parameters(Eigen::VectorXd::Zero(model.decoder.parameter_count()));

    Eigen::MatrixXd states = rng.normal_matrix(2, 3);
    Eigen::MatrixXd actions = Eigen::MatrixXd::Zero(6, 3);  // zero targets: recon grad dies with the decoder
    Eigen::MatrixXd noise = rng.normal_matrix(2, 3);

    Mlp::Grads ge = model.encoder.zero_grads();
    Mlp::Grads gd = model.decoder.zero_grads();
    Mlp::Grads gp = model.prior.zero_grads();
    elbo_loss_and_grads(model, states, actions, noise, cfg, ge, gd, gp);

    double enc_grad_norm = 0.0;
    for (const auto& w : ge.w) enc_grad_norm += w.squaredNorm();
    for (const auto& b : ge.b) enc_grad_norm += b.squaredNorm();
    CHECK(enc_grad_norm == doctest::Approx(0.0));

    double prior_grad_norm = 0.0;
    for (const auto& w : gp.w) prior_grad_norm += w.squaredNorm();
    CHECK(prior_grad_norm > 0.0);
}

TEST_CASE("training reduces reconstruction error and the prior fits the posterior") {
    DemoDataset demos = make_demos(60, 21);
    HazardWorld2D env;
    SkillModelConfig cfg = tiny_config();

    Rng rng(4);
    SkillTrainLog log;
    SkillModel model = train_skill_model(demos, env.spec(), cfg, rng, &log);

    REQUIRE(log.recon.size() == static_cast<std::size_t>(cfg.epochs));
    CHECK(log.recon.back() < log.recon.front());
    CHECK(model.encoder.parameters_finite());
    CHECK(model.decoder.parameters_finite());
    CHECK(model.prior.parameters_finite());

    // The trained state-conditioned prior explains the final posteriors far
    // better than an uninformed standard-normal prior does.
    const auto windows = extract_windows(demos, cfg.horizon);
    DiagGaussian standard{Eigen::VectorXd::Zero(cfg.skill_dim),
                          Eigen::VectorXd::Ones(cfg.skill_dim)};
    double trained = 0.0, uninformed = 0.0;
    for (const auto& w : windows) {
        const DiagGaussian posterior = encode_flat(model, w.actions_flat);
        trained += kl_divergence(posterior, skill_prior(model, w.state));
        uninformed += kl_divergence(posterior, standard);
    }
    CHECK(trained < uninformed);
}

TEST_CASE("training is deterministic given the seed") {
    DemoDataset demos = make_demos(30, 22);
    HazardWorld2D env;
    SkillModelConfig cfg = tiny_config();
    cfg.epochs = 5;

    Rng r1(7), r2(7);
    SkillModel a = train_skill_model(demos, env.spec(), cfg, r1);
    SkillModel b = train_skill_model(demos, env.spec(), cfg, r2);
    CHECK((flatten_all(a) - flatten_all(b)).cwiseAbs().maxCoeff() == 0.0);

    Rng r3(8);
    SkillModel c = train_skill_model(demos, env.spec(), cfg, r3);
    CHECK((flatten_all(a) - flatten_all(c)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("distinct action sequences map to distinct posterior means after training") {
    DemoDataset demos = make_demos(60, 23);
    HazardWorld2D env;
    Rng rng(5);
    SkillModel model = train_skill_model(demos, env.spec(), tiny_config(), rng);

    auto windows = extract_windows(demos, 4);
    REQUIRE(windows.size() >= 2);
    DiagGaussian a = encode_flat(model, windows.front().actions_flat);
    DiagGaussian b = encode_flat(model, windows.back().actions_flat);
    CHECK((a.mean - b.mean).norm() > 1e-8);
}

TEST_CASE("explained_variance matches an independent recomputation") {
    DemoDataset demos = make_demos(40, 24);
    HazardWorld2D env;
    Rng rng(6);
    SkillModel model = train_skill_model(demos, env.spec(), tiny_config(), rng);

    auto windows = extract_windows(demos, 4);
    REQUIRE(!windows.empty());
    const double got = explained_variance(model, windows);

    // Independent path: accumulate SSE and total variance per scalar entry.
    Eigen::VectorXd all_mean = Eigen::VectorXd::Zero(8);
    for (const auto& w : windows) all_mean += w.actions_flat;
    all_mean /= static_cast<double>(windows.size());

    double sse = 0.0, tot = 0.0;
    for (const auto& w : windows) {
        DiagGaussian post = encode_flat(model, w.actions_flat);
        Eigen::VectorXd rec = decode_flat(model, post.mean);
        sse += (rec - w.actions_flat).squaredNorm();
        tot += (w.actions_flat - all_mean).squaredNorm();
    }
    CHECK(got == doctest::Approx(1.0 - sse / tot).epsilon(1e-10));
}

TEST_CASE("save/load round trip preserves the model") {
    HazardWorld2D env;
    Rng rng(7);
    SkillModel model = make_skill_model(env.spec(), tiny_config(), rng);

    const std::string path = "test_skill_model_roundtrip.json";
    save_skill_model(model, path);
    SkillModel back = load_skill_model(path);
    std::remove(path.c_str());

    CHECK(back.skill_dim == model.skill_dim);
    CHECK(back.horizon == model.horizon);
    CHECK(back.action_dim == model.action_dim);
    CHECK(back.state_dim == model.state_dim);
    CHECK((flatten_all(back) - flatten_all(model)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.action_low - model.action_low).cwiseAbs().maxCoeff() == 0.0);
}
