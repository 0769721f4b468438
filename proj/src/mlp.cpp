#include "sskp/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "sskp/errors.hpp"

namespace sskp {

std::string activation_name(Activation a) {
    return a == Activation::Tanh ? "tanh" : "relu";
}

Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw std::invalid_argument("unknown activation: " + name);
}

std::string head_name(Head h) {
    switch (h) {
        case Head::Identity: return "identity";
        case Head::Sigmoid: return "sigmoid";
        case Head::Gaussian: return "gaussian";
    }
    return "identity";
}

Head head_from_name(const std::string& name) {
    if (name == "identity") return Head::Identity;
    if (name == "sigmoid") return Head::Sigmoid;
    if (name == "gaussian") return Head::Gaussian;
    throw std::invalid_argument("unknown head: " + name);
}

namespace {

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& z, Activation act) {
    if (act == Activation::Tanh) return z.array().tanh();
    return z.cwiseMax(0.0);
}

// Derivative of the activation given the pre-activation values.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& z, Activation act) {
    if (act == Activation::Tanh) {
        Eigen::ArrayXXd t = z.array().tanh();
        return (1.0 - t.square()).matrix();
    }
    return (z.array() > 0.0).cast<double>().matrix();
}

Eigen::MatrixXd apply_head(const Eigen::MatrixXd& out, Head head) {
    switch (head) {
        case Head::Identity:
            return out;
        case Head::Sigmoid:
            return (1.0 / (1.0 + (-out.array()).exp())).matrix();
        case Head::Gaussian: {
            Eigen::MatrixXd y = out;
            const int half = static_cast<int>(out.rows()) / 2;
            y.bottomRows(half) =
                y.bottomRows(half).cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
            return y;
        }
    }
    return out;
}

}  // namespace

Mlp Mlp::make(std::vector<int> layer_sizes, Activation activation, Head head, Rng& rng) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("Mlp::make: need at least two layer sizes");
    for (int s : layer_sizes)
        if (s < 1) throw std::invalid_argument("Mlp::make: layer sizes must be >= 1");
    if (head == Head::Gaussian && layer_sizes.back() % 2 != 0)
        throw std::invalid_argument("Mlp::make: Gaussian head needs an even output size");

    Mlp net;
    net.layer_sizes_ = std::move(layer_sizes);
    net.activation_ = activation;
    net.head_ = head;
    for (std::size_t l = 0; l + 1 < net.layer_sizes_.size(); ++l) {
        const int fan_in = net.layer_sizes_[l];
        const int fan_out = net.layer_sizes_[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Eigen::MatrixXd w(fan_out, fan_in);
        Eigen::VectorXd b(fan_out);
        for (int i = 0; i < fan_out; ++i) {
            for (int j = 0; j < fan_in; ++j) w(i, j) = rng.uniform(-bound, bound);
            b(i) = rng.uniform(-bound, bound);
        }
        net.weights_.push_back(std::move(w));
        net.biases_.push_back(std::move(b));
    }
    return net;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != input_dim())
        throw std::invalid_argument("Mlp::forward: input dimension mismatch");
    Eigen::MatrixXd x = inputs;
    for (int l = 0; l < num_layers(); ++l) {
        Eigen::MatrixXd z = (weights_[l] * x).colwise() + biases_[l];
        x = (l + 1 < num_layers()) ? apply_activation(z, activation_) : z;
    }
    return apply_head(x, head_);
}

Eigen::VectorXd Mlp::forward_one(const Eigen::VectorXd& input) const {
    return forward(input);
}

Eigen::MatrixXd Mlp::forward_cached(const Eigen::MatrixXd& inputs, Cache& cache) const {
    if (inputs.rows() != input_dim())
        throw std::invalid_argument("Mlp::forward_cached: input dimension mismatch");
    cache.input = inputs;
    cache.pre.assign(num_layers(), {});
    cache.post.assign(num_layers(), {});
    Eigen::MatrixXd x = inputs;
    for (int l = 0; l < num_layers(); ++l) {
        cache.pre[l] = (weights_[l] * x).colwise() + biases_[l];
        if (l + 1 < num_layers()) {
            cache.post[l] = apply_activation(cache.pre[l], activation_);
            x = cache.post[l];
        } else {
            x = cache.pre[l];
        }
    }
    cache.valid = true;
    return apply_head(x, head_);
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& upstream,
                              Grads& grads) const {
    if (!cache.valid) throw std::logic_error("Mlp::backward called without a forward pass");
    if (upstream.rows() != output_dim() || upstream.cols() != cache.input.cols())
        throw std::invalid_argument("Mlp::backward: upstream shape mismatch");

    // Head backward: gradient wrt the final affine output.
    Eigen::MatrixXd delta;
    const Eigen::MatrixXd& last_pre = cache.pre.back();
    switch (head_) {
        case Head::Identity:
            delta = upstream;
            break;
        case Head::Sigmoid: {
            Eigen::ArrayXXd s = 1.0 / (1.0 + (-last_pre.array()).exp());
            delta = (upstream.array() * s * (1.0 - s)).matrix();
            break;
        }
        case Head::Gaussian: {
            delta = upstream;
            const int half = static_cast<int>(upstream.rows()) / 2;
            // Clamped log-variance entries pass no gradient.
            Eigen::ArrayXXd lv = last_pre.bottomRows(half).array();
            Eigen::ArrayXXd open = ((lv > kLogVarMin) && (lv < kLogVarMax)).cast<double>();
            delta.bottomRows(half) = (delta.bottomRows(half).array() * open).matrix();
            break;
        }
    }

    return backward_from_preactivation(cache, delta, grads);
}

Eigen::MatrixXd Mlp::backward_from_preactivation(const Cache& cache,
                                                 const Eigen::MatrixXd& upstream,
                                                 Grads& grads) const {
    if (!cache.valid) throw std::logic_error("Mlp::backward called without a forward pass");
    Eigen::MatrixXd delta = upstream;
    for (int l = num_layers() - 1; l >= 0; --l) {
        const Eigen::MatrixXd& layer_in = (l == 0) ? cache.input : cache.post[l - 1];
        grads.w[l].noalias() += delta * layer_in.transpose();
        grads.b[l] += delta.rowwise().sum();
        Eigen::MatrixXd dx = weights_[l].transpose() * delta;
        if (l == 0) return dx;
        delta = dx.cwiseProduct(activation_grad(cache.pre[l - 1], activation_));
    }
    return {};  // unreachable
}

void Mlp::Grads::add(const Grads& other) {
    for (std::size_t l = 0; l < w.size(); ++l) {
        w[l] += other.w[l];
        b[l] += other.b[l];
    }
}

void Mlp::Grads::scale(double factor) {
    for (std::size_t l = 0; l < w.size(); ++l) {
        w[l] *= factor;
        b[l] *= factor;
    }
}

bool Mlp::Grads::finite() const {
    for (std::size_t l = 0; l < w.size(); ++l) {
        if (!w[l].allFinite() || !b[l].allFinite()) return false;
    }
    return true;
}

Mlp::Grads Mlp::zero_grads() const {
    Grads g;
    for (int l = 0; l < num_layers(); ++l) {
        g.w.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
        g.b.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
    }
    return g;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (int l = 0; l < num_layers(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
}

Eigen::VectorXd Mlp::flatten_parameters() const {
    Eigen::VectorXd flat(parameter_count());
    Eigen::Index at = 0;
    for (int l = 0; l < num_layers(); ++l) {
        for (Eigen::Index i = 0; i < weights_[l].rows(); ++i)
            for (Eigen::Index j = 0; j < weights_[l].cols(); ++j) flat(at++) = weights_[l](i, j);
        for (Eigen::Index i = 0; i < biases_[l].size(); ++i) flat(at++) = biases_[l](i);
    }
    return flat;
}

void Mlp::set_parameters(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count())
        throw std::invalid_argument("Mlp::set_parameters: size mismatch");
    Eigen::Index at = 0;
    for (int l = 0; l < num_layers(); ++l) {
        for (Eigen::Index i = 0; i < weights_[l].rows(); ++i)
            for (Eigen::Index j = 0; j < weights_[l].cols(); ++j) weights_[l](i, j) = flat(at++);
        for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l](i) = flat(at++);
    }
}

bool Mlp::parameters_finite() const {
    for (int l = 0; l < num_layers(); ++l)
        if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
    return true;
}

nlohmann::json Mlp::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["layer_sizes"] = layer_sizes_;
    j["activation"] = activation_name(activation_);
    j["head"] = head_name(head_);
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (int l = 0; l < num_layers(); ++l) {
        std::vector<double> w(weights_[l].size());
        Eigen::Index at = 0;
        for (Eigen::Index i = 0; i < weights_[l].rows(); ++i)
            for (Eigen::Index jj = 0; jj < weights_[l].cols(); ++jj) w[at++] = weights_[l](i, jj);
        weights.push_back(w);
        biases.push_back(std::vector<double>(biases_[l].data(), biases_[l].data() + biases_[l].size()));
    }
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);
    return j;
}

Mlp Mlp::from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != 1)
        throw std::invalid_argument("Mlp::from_json: unsupported checkpoint version");
    Mlp net;
    net.layer_sizes_ = j.at("layer_sizes").get<std::vector<int>>();
    net.activation_ = activation_from_name(j.at("activation").get<std::string>());
    net.head_ = head_from_name(j.at("head").get<std::string>());
    const auto& jw = j.at("weights");
    const auto& jb = j.at("biases");
    for (std::size_t l = 0; l + 1 < net.layer_sizes_.size(); ++l) {
        const int rows = net.layer_sizes_[l + 1];
        const int cols = net.layer_sizes_[l];
        auto wv = jw.at(l).get<std::vector<double>>();
        auto bv = jb.at(l).get<std::vector<double>>();
        if (static_cast<int>(wv.size()) != rows * cols || static_cast<int>(bv.size()) != rows)
            throw std::invalid_argument("Mlp::from_json: parameter shape mismatch");
        Eigen::MatrixXd w(rows, cols);
        std::size_t at = 0;
        for (int i = 0; i < rows; ++i)
            for (int c = 0; c < cols; ++c) w(i, c) = wv[at++];
        net.weights_.push_back(std::move(w));
        net.biases_.push_back(Eigen::Map<Eigen::VectorXd>(bv.data(), rows));
    }
    return net;
}

DiagGaussian Mlp::gaussian_from_output(const Eigen::VectorXd& head_out) {
    const int half = static_cast<int>(head_out.size()) / 2;
    DiagGaussian g;
    g.mean = head_out.head(half);
    g.var = head_out.tail(half).array().exp();
    return g;
}

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (int l = 0; l < net.num_layers(); ++l) {
        mw_.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
        vw_.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
        mb_.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
        vb_.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
    }
}

void Adam::step(Mlp& net, const Mlp::Grads& grads) {
    if (!grads.finite()) throw NumericalError("Adam::step: non-finite gradients");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    for (int l = 0; l < net.num_layers(); ++l) {
        mw_[l] = beta1_ * mw_[l] + (1.0 - beta1_) * grads.w[l];
        vw_[l] = beta2_ * vw_[l] + (1.0 - beta2_) * grads.w[l].cwiseProduct(grads.w[l]);
        mb_[l] = beta1_ * mb_[l] + (1.0 - beta1_) * grads.b[l];
        vb_[l] = beta2_ * vb_[l] + (1.0 - beta2_) * grads.b[l].cwiseProduct(grads.b[l]);

        Eigen::ArrayXXd mw_hat = mw_[l].array() / bc1;
        Eigen::ArrayXXd vw_hat = vw_[l].array() / bc2;
        net.mutable_weights()[l].array() -= lr_ * mw_hat / (vw_hat.sqrt() + eps_);

        Eigen::ArrayXd mb_hat = mb_[l].array() / bc1;
        Eigen::ArrayXd vb_hat = vb_[l].array() / bc2;
        net.mutable_biases()[l].array() -= lr_ * mb_hat / (vb_hat.sqrt() + eps_);
    }
}

}  // namespace sskp
