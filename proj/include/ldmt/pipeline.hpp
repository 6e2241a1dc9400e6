#pragma once

#include "ldmt/model.hpp"

#include <vector>

namespace ldmt {

struct GenerationConfig {
    double strength = 0.7;
    int steps = 100;
    double guidance = 7.5;
    uint64_t seed = 0;
};

// Descending time grid t_start = g_0 > g_1 > ... > g_n = 0 with at most
// `steps` transitions spaced evenly over [0, t_start].
std::vector<int> denoising_timesteps(int t_start, int steps);

// Start step of the variation pipeline: round(strength * T).
int variation_start(double strength, int horizon);

// Classifier-free guided prediction null + g (cond - null). g = 1 and g = 0
// evaluate only the conditional or only the null branch.
ad::Var guided_noise(const ToyLDM& model, const ad::Var& z_t, int t, const Condition& cond, double guidance);

// Deterministic DDIM update from step t to t_prev (t_prev = 0 yields the
// predicted clean latent).
ad::Var denoise_step(const ToyLDM& model, const ad::Var& z_t, int t, int t_prev, const Condition& cond,
                     double guidance);
Mat denoise_step(const Mat& z_t, int t, const Condition& cond, double guidance, const ToyLDM& model);

// Differentiable variation chain: encode, diffuse to grid.front() with the
// given noise, run every transition of `grid`, decode.
ad::Var variation_graph(const ToyLDM& model, const ad::Var& images, const Mat& noise, const std::vector<int>& grid,
                        const Condition& cond, double guidance);

// Per-image starting noise, independent of batch composition.
Mat pipeline_noise(const ToyLDM& model, uint64_t seed, size_t first_index, size_t count);

Image run_variation(const Image& image, const Condition& cond, double strength, int steps, double guidance,
                    const ToyLDM& model, uint64_t seed = 0);
std::vector<Image> run_variation_batch(const std::vector<Image>& images, const Condition& cond,
                                       const GenerationConfig& cfg, const ToyLDM& model);

// Repaint-style inpainting from pure noise at t = T: after each step the unmasked latent
// region is replaced by the original diffused to the new step.
Image run_inpainting(const Image& image, const Condition& cond, int steps, double guidance, const ToyLDM& model,
                     uint64_t seed = 0);
std::vector<Image> run_inpainting_batch(const std::vector<Image>& images, const Condition& cond,
                                        const GenerationConfig& cfg, const ToyLDM& model);

// Sampling from pure noise.
std::vector<Image> generate(const ToyLDM& model, const Condition& cond, size_t count, int steps, double guidance,
                            uint64_t seed);

// Left/right half masks and centered square masks for the toy resolution.
std::vector<double> half_mask(int height, int width);
std::vector<double> center_mask(int height, int width, int size);

}  // namespace ldmt
