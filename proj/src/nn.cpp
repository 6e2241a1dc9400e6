#include "ldmt/nn.hpp"

#include <cmath>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace ldmt {

Mat randn(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = n(rng);
    }
    return m;
}

void configure_allocator() {
#ifdef __GLIBC__
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 128 << 20);
#endif
}

Rng derive_rng(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
}

Linear::Linear(std::string name, Eigen::Index in, Eigen::Index out, Rng& rng)
    : name_(std::move(name)) {
    // He-style scaling keeps SiLU activations at unit order.
    w_ = ad::make_param(randn(in, out, rng) * std::sqrt(1.0 / static_cast<double>(in)));
    b_ = ad::make_param(Mat::Zero(1, out));
}

ad::Var Linear::operator()(const ad::Var& x) const {
    return ad::affine(x, ad::leaf(w_), ad::leaf(b_));
}

void Linear::collect(std::vector<Parameter>& out) const {
    out.push_back({name_ + ".weight", w_});
    out.push_back({name_ + ".bias", b_});
}

Adam::Adam(std::vector<ad::NodePtr> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
}

void Adam::step(const ad::Gradients& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        if (!grads.has(params_[i])) {
            continue;
        }
        const Mat g = grads.of(params_[i]);
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
        params_[i]->value.array() -=
            lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
}

std::vector<double> smooth_trace(const std::vector<double>& trace, size_t window) {
    std::vector<double> out;
    out.reserve(trace.size());
    if (trace.empty()) {
        return out;
    }
    const double a = 2.0 / (static_cast<double>(window) + 1.0);
    double s = trace.front();
    for (double v : trace) {
        s = a * v + (1.0 - a) * s;
        out.push_back(s);
    }
    return out;
}

}  // namespace ldmt
