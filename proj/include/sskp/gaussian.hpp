#pragma once

#include <Eigen/Core>

#include <stdexcept>

#include "sskp/rng.hpp"

namespace sskp {

// Diagonal Gaussian: per-dimension mean and strictly positive variance.
// Proposal distribution of the planner and output of every Gaussian net head.
struct DiagGaussian {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;

    int dim() const { return static_cast<int>(mean.size()); }

    Eigen::VectorXd stddev() const { return var.cwiseSqrt(); }

    Eigen::VectorXd sample(Rng& rng) const {
        return mean + stddev().cwiseProduct(rng.normal_vector(dim()));
    }

    // dim x n matrix of samples, one per column.
    Eigen::MatrixXd sample_many(int n, Rng& rng) const {
        Eigen::MatrixXd eps = rng.normal_matrix(dim(), n);
        return (stddev().asDiagonal() * eps).colwise() + mean;
    }
};

// KL(p || q) between diagonal Gaussians:
//   sum_d [ log(sigma_q/sigma_p) + (sigma_p^2 + (mu_p - mu_q)^2) / (2 sigma_q^2) - 1/2 ]
inline double kl_divergence(const DiagGaussian& p, const DiagGaussian& q) {
    if (p.dim() != q.dim()) throw std::invalid_argument("kl_divergence: dimension mismatch");
    double kl = 0.0;
    for (int d = 0; d < p.dim(); ++d) {
        const double diff = p.mean(d) - q.mean(d);
        kl += 0.5 * (std::log(q.var(d) / p.var(d)) + (p.var(d) + diff * diff) / q.var(d) - 1.0);
    }
    return kl;
}

}  // namespace sskp
