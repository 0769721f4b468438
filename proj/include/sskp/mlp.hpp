#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "sskp/gaussian.hpp"
#include "sskp/rng.hpp"

#include "json.hpp"

namespace sskp {

enum class Activation { Tanh, Relu };
enum class Head { Identity, Sigmoid, Gaussian };

// Log-variance clamp for Gaussian heads.
constexpr double kLogVarMin = -8.0;
constexpr double kLogVarMax = 4.0;

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);
std::string head_name(Head h);
Head head_from_name(const std::string& name);

// Fully-connected net operating on column-sample batches. The output layer is
// affine; the head then applies identity, sigmoid, or (for Gaussian heads over
// a d-dim latent with 2d outputs) clamps the log-variance half.
class Mlp {
public:
    struct Grads {
        std::vector<Eigen::MatrixXd> w;
        std::vector<Eigen::VectorXd> b;

        void add(const Grads& other);
        void scale(double factor);
        bool finite() const;
    };

    // Forward intermediates kept for backward.
    struct Cache {
        Eigen::MatrixXd input;
        std::vector<Eigen::MatrixXd> pre;   // pre-activation per layer
        std::vector<Eigen::MatrixXd> post;  // post-activation per hidden layer
        bool valid = false;
    };

    Mlp() = default;

    // Uniform fan-in init, range +-1/sqrt(fan_in).
    static Mlp make(std::vector<int> layer_sizes, Activation activation, Head head, Rng& rng);

    int input_dim() const { return layer_sizes_.front(); }
    int output_dim() const { return layer_sizes_.back(); }
    int num_layers() const { return static_cast<int>(weights_.size()); }
    const std::vector<int>& layer_sizes() const { return layer_sizes_; }
    Activation activation() const { return activation_; }
    Head head() const { return head_; }

    const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
    const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

    // Columns are samples; output is output_dim x batch.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
    Eigen::VectorXd forward_one(const Eigen::VectorXd& input) const;

    Eigen::MatrixXd forward_cached(const Eigen::MatrixXd& inputs, Cache& cache) const;

    // Backpropagates `upstream` (gradient wrt head output, output_dim x batch),
    // accumulates parameter gradients into `grads`, and returns the gradient
    // wrt the inputs (input_dim x batch). Requires a valid cache.
    Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& upstream, Grads& grads) const;

    // Same, but `upstream` is the gradient wrt the final affine output, before
    // the head. Lets losses that work on logits stay numerically stable.
    Eigen::MatrixXd backward_from_preactivation(const Cache& cache, const Eigen::MatrixXd& upstream,
                                                Grads& grads) const;

    Grads zero_grads() const;

    std::size_t parameter_count() const;
    // Flat row-major views of all parameters; used by Adam-free tooling and
    // the finite-difference tests.
    Eigen::VectorXd flatten_parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);

    bool parameters_finite() const;

    nlohmann::json to_json() const;
    static Mlp from_json(const nlohmann::json& j);

    // Interprets a Gaussian-head output column as a distribution.
    static DiagGaussian gaussian_from_output(const Eigen::VectorXd& head_out);

    // Mutable access for the optimizer.
    std::vector<Eigen::MatrixXd>& mutable_weights() { return weights_; }
    std::vector<Eigen::VectorXd>& mutable_biases() { return biases_; }

private:
    std::vector<int> layer_sizes_;
    Activation activation_ = Activation::Tanh;
    Head head_ = Head::Identity;
    std::vector<Eigen::MatrixXd> weights_;  // [l]: sizes[l+1] x sizes[l]
    std::vector<Eigen::VectorXd> biases_;
};

// Bias-corrected adaptive-moment optimizer over one net's parameters.
class Adam {
public:
    Adam() = default;
    Adam(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    // Applies one update in place. Throws NumericalError on non-finite
    // gradients; the parameters are left untouched in that case.
    void step(Mlp& net, const Mlp::Grads& grads);

    std::int64_t step_count() const { return step_count_; }
    double learning_rate() const { return lr_; }

private:
    double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::int64_t step_count_ = 0;
    std::vector<Eigen::MatrixXd> mw_, vw_;
    std::vector<Eigen::VectorXd> mb_, vb_;
};

}  // namespace sskp
