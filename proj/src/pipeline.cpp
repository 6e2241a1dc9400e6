#include "ldmt/pipeline.hpp"

#include "ldmt/error.hpp"

#include <algorithm>
#include <cmath>

namespace ldmt {

std::vector<int> denoising_timesteps(int t_start, int steps) {
    if (steps < 1) {
        throw ConfigError("denoising steps must be positive");
    }
    if (t_start < 0) {
        throw DomainError("negative start step");
    }
    if (t_start == 0) {
        return {0};
    }
    const int n = std::min(steps, t_start);
    std::vector<int> grid;
    grid.reserve(static_cast<size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        grid.push_back(static_cast<int>(std::lround(static_cast<double>(t_start) * (n - k) / n)));
    }
    return grid;
}

int variation_start(double strength, int horizon) {
    if (!(strength >= 0.0 && strength <= 1.0)) {
        throw ConfigError("strength must lie in [0, 1]");
    }
    return static_cast<int>(std::lround(strength * horizon));
}

ad::Var guided_noise(const ToyLDM& model, const ad::Var& z_t, int t, const Condition& cond, double guidance) {
    if (guidance < 0.0) {
        throw ConfigError("guidance must be nonnegative");
    }
    const std::vector<int> ts(static_cast<size_t>(z_t.rows()), t);
    if (guidance == 1.0 || cond.kind == Condition::Kind::Null) {
        return model.predict_noise(z_t, ts, cond);
    }
    auto uncond = model.predict_noise(z_t, ts, Condition::null());
    if (guidance == 0.0) {
        return uncond;
    }
    auto c = model.predict_noise(z_t, ts, cond);
    return ad::add(uncond, ad::scale(ad::sub(c, uncond), guidance));
}

ad::Var denoise_step(const ToyLDM& model, const ad::Var& z_t, int t, int t_prev, const Condition& cond,
                     double guidance) {
    if (t < 1 || t > model.horizon() || t_prev < 0 || t_prev >= t) {
        throw DomainError("denoise_step: invalid step " + std::to_string(t) + " -> " + std::to_string(t_prev));
    }
    const double ab = model.schedule().alpha_bar(t);
    const double ab_prev = model.schedule().alpha_bar(t_prev);
    auto eps = guided_noise(model, z_t, t, cond, guidance);
    auto x0 = ad::scale(ad::sub(z_t, ad::scale(eps, std::sqrt(1.0 - ab))), 1.0 / std::sqrt(ab));
    if (t_prev == 0) {
        return x0;
    }
    return ad::add(ad::scale(x0, std::sqrt(ab_prev)), ad::scale(eps, std::sqrt(1.0 - ab_prev)));
}

Mat denoise_step(const Mat& z_t, int t, const Condition& cond, double guidance, const ToyLDM& model) {
    return denoise_step(model, ad::leaf(z_t), t, t - 1, cond, guidance).value();
}

ad::Var variation_graph(const ToyLDM& model, const ad::Var& images, const Mat& noise, const std::vector<int>& grid,
                        const Condition& cond, double guidance) {
    if (grid.empty()) {
        throw ConfigError("empty time grid");
    }
    auto z = model.codec().encode(images);
    if (grid.front() > 0) {
        const std::vector<int> ts(static_cast<size_t>(z.rows()), grid.front());
        z = forward_diffuse(z, ts, noise, model.schedule());
    }
    for (size_t k = 0; k + 1 < grid.size(); ++k) {
        z = denoise_step(model, z, grid[k], grid[k + 1], cond, guidance);
    }
    return model.codec().decode(z);
}

Mat pipeline_noise(const ToyLDM& model, uint64_t seed, size_t first_index, size_t count) {
    const Eigen::Index d = model.codec().latent_dim();
    Mat noise(static_cast<Eigen::Index>(count), d);
    for (size_t i = 0; i < count; ++i) {
        Rng rng = derive_rng(seed, first_index + i);
        noise.row(static_cast<Eigen::Index>(i)) = randn(1, d, rng);
    }
    return noise;
}

namespace {

void require_trained(const ToyLDM& model) {
    if (!model.trained()) {
        throw StateError("pipeline invoked on an untrained model");
    }
}

}  // namespace

std::vector<Image> run_variation_batch(const std::vector<Image>& images, const Condition& cond,
                                       const GenerationConfig& cfg, const ToyLDM& model) {
    require_trained(model);
    if (images.empty()) {
        return {};
    }
    const auto shape = model.codec().image_shape();
    const Mat x = stack_rows(images);
    const auto grid = denoising_timesteps(variation_start(cfg.strength, model.horizon()), cfg.steps);
    const Mat noise = pipeline_noise(model, cfg.seed, 0, images.size());
    // Same arithmetic as variation_graph, but each step's graph is dropped
    // as soon as its value exists.
    Mat z = model.codec().encode(ad::leaf(x)).value();
    if (grid.front() > 0) {
        const std::vector<int> ts(static_cast<size_t>(z.rows()), grid.front());
        z = forward_diffuse(ad::leaf(z), ts, noise, model.schedule()).value();
    }
    for (size_t k = 0; k + 1 < grid.size(); ++k) {
        z = denoise_step(model, ad::leaf(z), grid[k], grid[k + 1], cond, cfg.guidance).value();
    }
    const Mat out = model.codec().decode(ad::leaf(z)).value();
    return unstack_rows(out, shape.height, shape.width, shape.channels);
}

Image run_variation(const Image& image, const Condition& cond, double strength, int steps, double guidance,
                    const ToyLDM& model, uint64_t seed) {
    if (!(strength > 0.0 && strength <= 1.0) && strength != 0.0) {
        throw ConfigError("strength must lie in (0, 1]");
    }
    GenerationConfig cfg{strength, steps, guidance, seed};
    return run_variation_batch({image}, cond, cfg, model).front();
}

std::vector<Image> run_inpainting_batch(const std::vector<Image>& images, const Condition& cond,
                                        const GenerationConfig& cfg, const ToyLDM& model) {
    if (!cond.mask) {
        throw DomainError("inpainting requires a mask");
    }
    require_trained(model);
    if (images.empty()) {
        return {};
    }
    const auto shape = model.codec().image_shape();
    const Mat m1 = model.codec().latent_mask(*cond.mask);
    const Mat x = stack_rows(images);
    const Eigen::Index b = x.rows();
    const Mat mask = m1.replicate(b, 1);
    const Mat keep = Mat::Ones(b, m1.cols()) - mask;
    const Mat z0 = encode_images(model, x);
    const Mat noise = pipeline_noise(model, cfg.seed, 0, images.size());
    const auto grid = denoising_timesteps(model.horizon(), cfg.steps);
    const auto& sched = model.schedule();

    // Start from pure noise, as unconditional sampling does.
    Mat z = noise;
    for (size_t k = 0; k + 1 < grid.size(); ++k) {
        const Mat gen = denoise_step(model, ad::leaf(z), grid[k], grid[k + 1], cond, cfg.guidance).value();
        const Mat known = grid[k + 1] == 0 ? z0 : diffuse_closed_form(z0, sched.alpha_bar(grid[k + 1]), noise);
        z = mask.cwiseProduct(gen) + keep.cwiseProduct(known);
    }
    const Mat out = decode_latents(model, z);
    return unstack_rows(out, shape.height, shape.width, shape.channels);
}

Image run_inpainting(const Image& image, const Condition& cond, int steps, double guidance, const ToyLDM& model,
                     uint64_t seed) {
    GenerationConfig cfg{1.0, steps, guidance, seed};
    return run_inpainting_batch({image}, cond, cfg, model).front();
}

std::vector<Image> generate(const ToyLDM& model, const Condition& cond, size_t count, int steps, double guidance,
                            uint64_t seed) {
    require_trained(model);
    if (count == 0) {
        return {};
    }
    const auto shape = model.codec().image_shape();
    Mat z = pipeline_noise(model, seed, 0, count);
    const auto grid = denoising_timesteps(model.horizon(), steps);
    for (size_t k = 0; k + 1 < grid.size(); ++k) {
        z = denoise_step(model, ad::leaf(z), grid[k], grid[k + 1], cond, guidance).value();
    }
    return unstack_rows(decode_latents(model, z), shape.height, shape.width, shape.channels);
}

std::vector<double> half_mask(int height, int width) {
    std::vector<double> m(static_cast<size_t>(height) * width, 0.0);
    for (int y = 0; y < height; ++y) {
        for (int x = width / 2; x < width; ++x) {
            m[static_cast<size_t>(y) * width + x] = 1.0;
        }
    }
    return m;
}

std::vector<double> center_mask(int height, int width, int size) {
    std::vector<double> m(static_cast<size_t>(height) * width, 0.0);
    const int y0 = (height - size) / 2, x0 = (width - size) / 2;
    for (int y = y0; y < y0 + size; ++y) {
        for (int x = x0; x < x0 + size; ++x) {
            m[static_cast<size_t>(y) * width + x] = 1.0;
        }
    }
    return m;
}

}  // namespace ldmt
