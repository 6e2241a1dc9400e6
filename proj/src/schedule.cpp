#include "ldmt/schedule.hpp"

#include "ldmt/error.hpp"

#include <cmath>

namespace ldmt {

NoiseSchedule::NoiseSchedule(std::vector<double> alphas) : alphas_(std::move(alphas)) {
    if (alphas_.empty()) {
        throw ConfigError("noise schedule needs at least one step");
    }
    double prod = 1.0;
    alpha_bars_.reserve(alphas_.size());
    for (double a : alphas_) {
        if (!(a > 0.0 && a <= 1.0)) {
            throw ConfigError("schedule alphas must lie in (0, 1]");
        }
        prod *= a;
        alpha_bars_.push_back(prod);
    }
}

double NoiseSchedule::alpha(int t) const {
    if (t < 1 || t > horizon()) {
        throw DomainError("time step " + std::to_string(t) + " outside [1, " + std::to_string(horizon()) + "]");
    }
    return alphas_[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t == 0) {
        return 1.0;
    }
    if (t < 0 || t > horizon()) {
        throw DomainError("time step " + std::to_string(t) + " outside [1, " + std::to_string(horizon()) + "]");
    }
    return alpha_bars_[static_cast<size_t>(t - 1)];
}

NoiseSchedule build_schedule(int T, const std::string& kind) {
    if (T < 1) {
        throw ConfigError("schedule horizon must be positive, got " + std::to_string(T));
    }
    std::vector<double> alphas(static_cast<size_t>(T));
    auto frac = [T](int i) { return T == 1 ? 0.0 : static_cast<double>(i) / (T - 1); };
    if (kind == "linear") {
        for (int i = 0; i < T; ++i) {
            alphas[static_cast<size_t>(i)] = 1.0 - (1e-4 + (2e-2 - 1e-4) * frac(i));
        }
    } else if (kind == "scaled-linear") {
        const double lo = std::sqrt(8.5e-4), hi = std::sqrt(1.2e-2);
        for (int i = 0; i < T; ++i) {
            const double b = lo + (hi - lo) * frac(i);
            alphas[static_cast<size_t>(i)] = 1.0 - b * b;
        }
    } else if (kind == "cosine") {
        const double s = 0.008;
        auto f = [&](double t) {
            const double c = std::cos((t / T + s) / (1 + s) * M_PI / 2);
            return c * c;
        };
        for (int i = 0; i < T; ++i) {
            const double beta = std::min(1.0 - f(i + 1) / f(i), 0.999);
            alphas[static_cast<size_t>(i)] = 1.0 - beta;
        }
    } else {
        throw ConfigError("unsupported schedule family '" + kind + "'");
    }
    return NoiseSchedule(std::move(alphas));
}

ad::Mat diffuse_closed_form(const ad::Mat& z0, double alpha_bar, const ad::Mat& noise) {
    if (z0.rows() != noise.rows() || z0.cols() != noise.cols()) {
        throw DomainError("noise shape does not match latent shape");
    }
    return std::sqrt(alpha_bar) * z0 + std::sqrt(1.0 - alpha_bar) * noise;
}

ForwardSample forward_diffuse(const ad::Mat& z0, int t, const ad::Mat& noise, const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.horizon()) {
        throw DomainError("forward_diffuse: time step out of range");
    }
    return {t, noise, diffuse_closed_form(z0, schedule.alpha_bar(t), noise)};
}

ad::Var forward_diffuse(const ad::Var& z0, const std::vector<int>& t, const ad::Mat& noise,
                        const NoiseSchedule& schedule) {
    if (static_cast<Eigen::Index>(t.size()) != z0.rows()) {
        throw DomainError("forward_diffuse: one time step per row required");
    }
    if (z0.rows() != noise.rows() || z0.cols() != noise.cols()) {
        throw DomainError("noise shape does not match latent shape");
    }
    ad::Mat signal(z0.rows(), z0.cols());
    ad::Mat offset(z0.rows(), z0.cols());
    for (Eigen::Index i = 0; i < z0.rows(); ++i) {
        const double ab = schedule.alpha_bar(t[static_cast<size_t>(i)]);
        signal.row(i).setConstant(std::sqrt(ab));
        offset.row(i) = std::sqrt(1.0 - ab) * noise.row(i);
    }
    return ad::add_const(ad::mul_const(z0, signal), offset);
}

}  // namespace ldmt
