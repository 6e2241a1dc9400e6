#pragma once

#include "ldmt/autograd.hpp"

#include <string>
#include <vector>

namespace ldmt {

// Diffusion noise schedule. Time steps are 1-based: t in [1, T].
class NoiseSchedule {
public:
    NoiseSchedule() = default;
    // Builds from per-step alphas; alpha_bars are their cumulative products.
    explicit NoiseSchedule(std::vector<double> alphas);

    int horizon() const { return static_cast<int>(alphas_.size()); }
    double alpha(int t) const;
    // alpha_bar(0) is 1 by convention (clean latent).
    double alpha_bar(int t) const;
    const std::vector<double>& alphas() const { return alphas_; }
    const std::vector<double>& alpha_bars() const { return alpha_bars_; }

private:
    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;
};

// Supported families: "linear" (DDPM beta ramp 1e-4..2e-2, default),
// "scaled-linear" (sqrt-space ramp 8.5e-4..1.2e-2), "cosine".
NoiseSchedule build_schedule(int T, const std::string& kind = "linear");

struct ForwardSample {
    int t = 0;
    ad::Mat noise;
    ad::Mat z_t;
};

// z_t = sqrt(abar) z0 + sqrt(1 - abar) noise for an explicit abar.
ad::Mat diffuse_closed_form(const ad::Mat& z0, double alpha_bar, const ad::Mat& noise);
ForwardSample forward_diffuse(const ad::Mat& z0, int t, const ad::Mat& noise, const NoiseSchedule& schedule);
// Differentiable variant; `t` may differ per row.
ad::Var forward_diffuse(const ad::Var& z0, const std::vector<int>& t, const ad::Mat& noise,
                        const NoiseSchedule& schedule);

}  // namespace ldmt
