#pragma once

#include "ldmt/autograd.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ldmt {

using ad::Mat;
using Rng = std::mt19937_64;

Mat randn(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// Independent generator for stream `stream` of a base seed (splitmix64 mix).
Rng derive_rng(uint64_t seed, uint64_t stream);

// Keeps large tensor buffers off mmap/munmap churn (glibc); no-op elsewhere.
void configure_allocator();

// Named trainable tensor, the unit of checkpointing and optimization.
struct Parameter {
    std::string name;
    ad::NodePtr node;
};

class Linear {
public:
    Linear() = default;
    Linear(std::string name, Eigen::Index in, Eigen::Index out, Rng& rng);

    ad::Var operator()(const ad::Var& x) const;
    void collect(std::vector<Parameter>& out) const;
    Eigen::Index in_features() const { return w_->value.rows(); }
    Eigen::Index out_features() const { return w_->value.cols(); }

private:
    std::string name_;
    ad::NodePtr w_;
    ad::NodePtr b_;
};

// Adam over an explicit parameter list. Moment buffers are keyed by position.
class Adam {
public:
    explicit Adam(std::vector<ad::NodePtr> params, double lr = 1e-3, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void step(const ad::Gradients& grads);
    void set_lr(double lr) { lr_ = lr; }

private:
    std::vector<ad::NodePtr> params_;
    std::vector<Mat> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

// Exponential moving average smoothing of a loss trace.
std::vector<double> smooth_trace(const std::vector<double>& trace, size_t window);

}  // namespace ldmt
