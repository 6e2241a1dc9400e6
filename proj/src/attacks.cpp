#include "ldmt/attacks.hpp"

#include "ldmt/error.hpp"

#include <algorithm>
#include <cmath>

namespace ldmt {

void AttackBudget::validate() const {
    if (!(epsilon > 0.0) || !(step_size > 0.0) || step_size > epsilon) {
        throw ConfigError("attack budget requires 0 < step_size <= epsilon");
    }
    if (iterations < 0) {
        throw ConfigError("attack iterations must be nonnegative");
    }
}

void TimeStepRange::validate(int horizon) const {
    if (a < 0 || b > horizon || a >= b) {
        throw ConfigError("time-step range (" + std::to_string(a) + ", " + std::to_string(b) +
                          "] is empty or outside [1, " + std::to_string(horizon) + "]");
    }
}

std::string TimeStepRange::label() const { return "(" + std::to_string(a) + "," + std::to_string(b) + "]"; }

std::string to_string(AttackMethod m) {
    switch (m) {
        case AttackMethod::AdvDM: return "advdm";
        case AttackMethod::Encoder: return "encoder";
        case AttackMethod::Chain: return "chain";
        case AttackMethod::Mist: return "mist";
        case AttackMethod::SDS: return "sds";
    }
    return "unknown";
}

AttackMethod attack_method_from_string(const std::string& s) {
    for (auto m : {AttackMethod::AdvDM, AttackMethod::Encoder, AttackMethod::Chain, AttackMethod::Mist,
                   AttackMethod::SDS}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    throw ConfigError("unknown attack method '" + s + "'");
}

Image AdversarialExample::adversarial() const {
    Image out = original;
    for (size_t i = 0; i < out.size(); ++i) {
        out.pixels[i] += delta.pixels[i];
    }
    return out;
}

Mat sign_of(const Mat& g) {
    return g.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Mat project_budget(const Mat& original, const Mat& candidate, double epsilon) {
    Mat out(candidate.rows(), candidate.cols());
    for (Eigen::Index i = 0; i < candidate.size(); ++i) {
        const double o = original.data()[i];
        double x = std::clamp(o + std::clamp(candidate.data()[i] - o, -epsilon, epsilon), 0.0, 1.0);
        // Rounding in o + d can leave the stored difference an ulp outside
        // the ball or the box; step toward the original until both hold.
        for (;;) {
            const double d = x - o;
            const double back = o + d;
            if (std::abs(d) <= epsilon && back >= 0.0 && back <= 1.0) {
                break;
            }
            x = std::nextafter(x, o);
        }
        out.data()[i] = x;
    }
    return out;
}

Mat pgd_ascend(const Mat& current, const Mat& gradient, const Mat& original, const AttackBudget& budget) {
    if (current.rows() != gradient.rows() || current.cols() != gradient.cols() || current.rows() != original.rows() ||
        current.cols() != original.cols()) {
        throw DomainError("pgd_ascend: shape mismatch");
    }
    return project_budget(original, current + budget.step_size * sign_of(gradient), budget.epsilon);
}

namespace {

std::vector<double> row_losses(const Mat& residual) {
    std::vector<double> out(static_cast<size_t>(residual.rows()));
    for (Eigen::Index i = 0; i < residual.rows(); ++i) {
        out[static_cast<size_t>(i)] = residual.row(i).squaredNorm();
    }
    return out;
}

}  // namespace

LossAndGrad advdm_gradient(const ToyLDM& model, const Mat& x, const std::vector<int>& t, const Mat& noise,
                           const Condition& cond) {
    auto xv = ad::leaf(x);
    auto z_t = forward_diffuse(model.codec().encode(xv), t, noise, model.schedule());
    auto residual = ad::sub(model.predict_noise(z_t, t, cond), ad::leaf(noise));
    auto loss = ad::sum_squares(residual);
    auto grads = ad::backward(loss, {xv.node()});
    return {loss.scalar(), grads.of(xv), row_losses(residual.value())};
}

LossAndGrad encoder_distance_gradient(const ToyLDM& model, const Mat& x, const Mat& target_latent) {
    auto xv = ad::leaf(x);
    auto diff = ad::sub(model.codec().encode(xv), ad::leaf(target_latent));
    auto loss = ad::sum_squares(diff);
    auto grads = ad::backward(loss, {xv.node()});
    return {loss.scalar(), grads.of(xv), row_losses(diff.value())};
}

LossAndGrad sds_direction(const ToyLDM& model, const Mat& x, const std::vector<int>& t, const Mat& noise,
                          const Condition& cond) {
    auto xv = ad::leaf(x);
    auto z_t = forward_diffuse(model.codec().encode(xv), t, noise, model.schedule());
    const Mat residual = model.predict_noise(ad::detach(z_t), t, cond).value() - noise;
    // d/dx <z_t(x), r> with r held constant = (dz_t/dx)^T r.
    auto surrogate = ad::sum(ad::mul_const(z_t, residual));
    auto grads = ad::backward(surrogate, {xv.node()});
    auto rows = row_losses(residual);
    double total = 0.0;
    for (double r : rows) total += r;
    return {total, grads.of(xv), rows};
}

LossAndGrad chain_gradient(const ToyLDM& model, const Mat& x, const Mat& target, const Mat& noise,
                           const std::vector<int>& grid, const Condition& cond, double guidance) {
    auto xv = ad::leaf(x);
    auto out = variation_graph(model, xv, noise, grid, cond, guidance);
    auto diff = ad::sub(out, ad::leaf(target));
    auto loss = ad::sum_squares(diff);
    auto grads = ad::backward(loss, {xv.node()});
    return {loss.scalar(), grads.of(xv), row_losses(diff.value())};
}

std::vector<int> chain_grid(const ToyLDM& model, const ChainConfig& cfg) {
    if (cfg.depth < 1) {
        throw ConfigError("chain depth must be positive");
    }
    if (cfg.depth > cfg.max_depth) {
        throw ResourceError("chain depth " + std::to_string(cfg.depth) + " exceeds the configured guard of " +
                            std::to_string(cfg.max_depth) + " steps");
    }
    const auto full = denoising_timesteps(variation_start(cfg.strength, model.horizon()), cfg.steps);
    const size_t keep = std::min(full.size(), static_cast<size_t>(cfg.depth) + 1);
    return {full.end() - static_cast<std::ptrdiff_t>(keep), full.end()};
}

std::vector<int> draw_time_steps(const TimeStepRange& range, size_t rows, Rng& rng) {
    std::uniform_int_distribution<int> d(range.a + 1, range.b);
    std::vector<int> t(rows);
    for (auto& v : t) {
        v = d(rng);
    }
    return t;
}

namespace {

enum class Direction { Ascend, Descend };

struct StepResult {
    Mat grad;  // direction to ascend (or descend)
    std::vector<double> row_loss;
    std::vector<int> drawn_t;
};

using StepFn = std::function<StepResult(const Mat& current, Rng& rng)>;

std::vector<AdversarialExample> run_pgd(const std::vector<Image>& images, const AttackBudget& budget, uint64_t seed,
                                        AttackMethod method, const AttackOptions& opts,
                                        std::optional<TimeStepRange> range, Direction dir, const StepFn& step,
                                        const std::function<std::vector<double>(const Mat&)>& final_loss) {
    budget.validate();
    std::vector<AdversarialExample> out(images.size());
    if (images.empty()) {
        return out;
    }
    const Mat original = stack_rows(images);
    Mat current = original;
    Rng rng(seed);
    for (size_t i = 0; i < images.size(); ++i) {
        out[i].original = images[i];
        out[i].method = method;
        out[i].budget = budget;
        out[i].surrogate_id = opts.surrogate_id;
        out[i].range = range;
        out[i].seed = seed;
    }
    for (int it = 0; it < budget.iterations; ++it) {
        StepResult s = step(current, rng);
        for (size_t i = 0; i < images.size(); ++i) {
            out[i].loss_trace.push_back(s.row_loss[i]);
            if (!s.drawn_t.empty()) {
                out[i].drawn_t.push_back(s.drawn_t[i]);
            }
        }
        const Mat direction = dir == Direction::Ascend ? s.grad : Mat(-s.grad);
        current = pgd_ascend(current, direction, original, budget);
        if (opts.observer) {
            opts.observer(original, current, it);
        }
    }
    if (final_loss) {
        const auto last = final_loss(current);
        for (size_t i = 0; i < images.size(); ++i) {
            out[i].loss_trace.push_back(last[i]);
        }
    }
    const auto& shape = images.front();
    for (size_t i = 0; i < images.size(); ++i) {
        const Eigen::Index r = static_cast<Eigen::Index>(i);
        out[i].delta = Image::from_row(current.row(r) - original.row(r), shape.height, shape.width, shape.channels);
    }
    return out;
}

void check_images(const std::vector<Image>& images, const ToyLDM& model) {
    const auto shape = model.codec().image_shape();
    for (const auto& im : images) {
        if (im.height != shape.height || im.width != shape.width || im.channels != shape.channels) {
            throw DomainError("image shape does not match the model");
        }
    }
}

Mat target_latents(const ToyLDM& model, const TargetSpec& target, size_t rows, const std::vector<Image>& images) {
    if (!images.empty() && !target.target_image.same_shape(images.front())) {
        throw DomainError("target image shape differs from the attacked images");
    }
    const Mat z = encode_images(model, target.target_image.row());
    return z.replicate(static_cast<Eigen::Index>(rows), 1);
}

// Averages `mc` AdvDM gradients at fresh draws.
StepResult advdm_step(const ToyLDM& model, const Mat& x, const TimeStepRange& range, const AttackOptions& opts,
                      Rng& rng, bool sds) {
    StepResult s;
    const int mc = std::max(1, opts.mc_samples);
    s.grad = Mat::Zero(x.rows(), x.cols());
    s.row_loss.assign(static_cast<size_t>(x.rows()), 0.0);
    for (int k = 0; k < mc; ++k) {
        const auto t = draw_time_steps(range, static_cast<size_t>(x.rows()), rng);
        const Mat noise = randn(x.rows(), model.codec().latent_dim(), rng);
        const auto lg = sds ? sds_direction(model, x, t, noise, opts.condition)
                            : advdm_gradient(model, x, t, noise, opts.condition);
        if (mc == 1) {
            s.grad = lg.grad;
        } else {
            s.grad += lg.grad / mc;
        }
        for (size_t i = 0; i < s.row_loss.size(); ++i) {
            s.row_loss[i] += lg.rows[i] / mc;
        }
        if (k == 0) {
            s.drawn_t = t;
        }
    }
    return s;
}

}  // namespace

std::vector<AdversarialExample> advdm_attack(const std::vector<Image>& images, const ToyLDM& model,
                                             const TimeStepRange& range, const AttackBudget& budget, uint64_t seed,
                                             const AttackOptions& opts) {
    range.validate(model.horizon());
    check_images(images, model);
    auto step = [&](const Mat& x, Rng& rng) { return advdm_step(model, x, range, opts, rng, false); };
    return run_pgd(images, budget, seed, AttackMethod::AdvDM, opts, range, Direction::Ascend, step, {});
}

std::vector<AdversarialExample> sds_attack(const std::vector<Image>& images, const ToyLDM& model,
                                           const TimeStepRange& range, const AttackBudget& budget, uint64_t seed,
                                           const AttackOptions& opts) {
    range.validate(model.horizon());
    check_images(images, model);
    auto step = [&](const Mat& x, Rng& rng) { return advdm_step(model, x, range, opts, rng, true); };
    return run_pgd(images, budget, seed, AttackMethod::SDS, opts, range, Direction::Descend, step, {});
}

std::vector<AdversarialExample> encoder_attack(const std::vector<Image>& images, const ToyLDM& model,
                                               const TargetSpec& target, const AttackBudget& budget, uint64_t seed,
                                               const AttackOptions& opts) {
    check_images(images, model);
    const Mat zt = target_latents(model, target, images.size(), images);
    auto step = [&](const Mat& x, Rng&) {
        auto lg = encoder_distance_gradient(model, x, zt);
        return StepResult{std::move(lg.grad), std::move(lg.rows), {}};
    };
    auto final_loss = [&](const Mat& x) { return encoder_distance_gradient(model, x, zt).rows; };
    return run_pgd(images, budget, seed, AttackMethod::Encoder, opts, std::nullopt, Direction::Descend, step,
                   final_loss);
}

std::vector<AdversarialExample> mist_attack(const std::vector<Image>& images, const ToyLDM& model,
                                            const TargetSpec& target, const FusedLossConfig& fused,
                                            const AttackBudget& budget, uint64_t seed, const AttackOptions& opts) {
    if (!(fused.fuse_weight >= 0.0)) {
        throw ConfigError("fuse weight must be nonnegative");
    }
    fused.range.validate(model.horizon());
    check_images(images, model);
    const Mat zt = target_latents(model, target, images.size(), images);
    const double w = fused.fuse_weight;
    auto step = [&](const Mat& x, Rng& rng) {
        auto enc = encoder_distance_gradient(model, x, zt);
        StepResult s;
        // Ascend on w * advdm - encoder distance.
        s.grad = -enc.grad;
        s.row_loss = enc.rows;
        for (auto& v : s.row_loss) v = -v;
        if (w != 0.0) {
            StepResult a = advdm_step(model, x, fused.range, opts, rng, false);
            s.grad += w * a.grad;
            for (size_t i = 0; i < s.row_loss.size(); ++i) {
                s.row_loss[i] += w * a.row_loss[i];
            }
            s.drawn_t = std::move(a.drawn_t);
        }
        return s;
    };
    return run_pgd(images, budget, seed, AttackMethod::Mist, opts, fused.range, Direction::Ascend, step, {});
}

std::vector<AdversarialExample> chain_attack(const std::vector<Image>& images, const ToyLDM& model,
                                             const TargetSpec& target, const ChainConfig& chain,
                                             const AttackBudget& budget, uint64_t seed, const AttackOptions& opts) {
    check_images(images, model);
    if (!images.empty() && !target.target_image.same_shape(images.front())) {
        throw DomainError("target image shape differs from the attacked images");
    }
    const auto grid = chain_grid(model, chain);
    const Mat targ = target.target_image.row().replicate(static_cast<Eigen::Index>(images.size()), 1);
    const Mat noise = pipeline_noise(model, seed, 0, images.size());
    auto step = [&](const Mat& x, Rng&) {
        auto lg = chain_gradient(model, x, targ, noise, grid, target.condition, chain.guidance);
        return StepResult{std::move(lg.grad), std::move(lg.rows), {}};
    };
    auto final_loss = [&](const Mat& x) {
        return chain_gradient(model, x, targ, noise, grid, target.condition, chain.guidance).rows;
    };
    return run_pgd(images, budget, seed, AttackMethod::Chain, opts, std::nullopt, Direction::Descend, step,
                   final_loss);
}

std::vector<double> heldout_advdm_loss(const ToyLDM& model, const std::vector<Image>& images,
                                       const TimeStepRange& range, int draws, uint64_t seed) {
    range.validate(model.horizon());
    std::vector<double> out(images.size(), 0.0);
    if (images.empty()) {
        return out;
    }
    const Mat x = stack_rows(images);
    Rng rng(seed);
    const double per = 1.0 / (static_cast<double>(draws) * static_cast<double>(model.codec().latent_dim()));
    for (int d = 0; d < draws; ++d) {
        const auto t = draw_time_steps(range, images.size(), rng);
        const Mat noise = randn(x.rows(), model.codec().latent_dim(), rng);
        auto z_t = forward_diffuse(model.codec().encode(ad::leaf(x)), t, noise, model.schedule());
        const Mat residual = model.predict_noise(z_t, t, Condition::null()).value() - noise;
        for (size_t i = 0; i < out.size(); ++i) {
            out[i] += residual.row(static_cast<Eigen::Index>(i)).squaredNorm() * per;
        }
    }
    return out;
}

}  // namespace ldmt
