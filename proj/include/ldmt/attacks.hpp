#pragma once

#include "ldmt/model.hpp"
#include "ldmt/pipeline.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ldmt {

struct AttackBudget {
    double epsilon = 8.0 / 255.0;
    double step_size = 1.0 / 255.0;
    int iterations = 40;

    void validate() const;
};

// Half-open surrogate range (a, b]; t is drawn uniformly from a+1..b.
struct TimeStepRange {
    int a = 0;
    int b = 1000;

    void validate(int horizon) const;
    static TimeStepRange full(int horizon) { return {0, horizon}; }
    bool contains(int t) const { return a < t && t <= b; }
    std::string label() const;
};

struct TargetSpec {
    Image target_image;
    Condition condition;  // chain attacks only
};

struct FusedLossConfig {
    double fuse_weight = 1.0;
    TimeStepRange range;
};

struct ChainConfig {
    int depth = 5;
    int max_depth = 5;  // resource guard
    double strength = 0.7;
    int steps = 100;
    double guidance = 7.5;
};

enum class AttackMethod { AdvDM, Encoder, Chain, Mist, SDS };
std::string to_string(AttackMethod m);
AttackMethod attack_method_from_string(const std::string& s);

struct AdversarialExample {
    Image original;
    Image delta;
    AttackMethod method = AttackMethod::AdvDM;
    AttackBudget budget;
    std::string surrogate_id;
    std::optional<TimeStepRange> range;
    uint64_t seed = 0;
    std::vector<double> loss_trace;  // surrogate objective before each step
    std::vector<int> drawn_t;        // Monte-Carlo time steps, one per iteration

    Image adversarial() const;
};

// Called after every PGD iteration with the current originals, perturbed
// images (B x N) and the iteration index.
using IterationObserver = std::function<void(const Mat& original, const Mat& perturbed, int iteration)>;

struct AttackOptions {
    Condition condition;        // conditioning of the surrogate denoiser
    int mc_samples = 1;         // (t, eps) draws per PGD iteration
    std::string surrogate_id;
    IterationObserver observer;
};

// sign() with sign(0) = 0.
Mat sign_of(const Mat& g);

// One PGD step in the ascent direction: eps-ball clip of the accumulated
// perturbation followed by the [0,1] box clip.
Mat pgd_ascend(const Mat& current, const Mat& gradient, const Mat& original, const AttackBudget& budget);

// Projects `candidate` so that |candidate - original| <= eps and candidate in
// [0,1] hold exactly in floating point for the stored difference.
Mat project_budget(const Mat& original, const Mat& candidate, double epsilon);

// Gradients of the individual surrogate objectives w.r.t. the images. The
// returned loss is the summed objective over rows.
struct LossAndGrad {
    double loss = 0.0;
    Mat grad;
    std::vector<double> rows;  // per-row objective
};
// sum_i ||eps_i - eps_theta(sqrt(abar) E(x_i) + sqrt(1-abar) eps_i, t_i)||^2
LossAndGrad advdm_gradient(const ToyLDM& model, const Mat& x, const std::vector<int>& t, const Mat& noise,
                           const Condition& cond);
// sum_i ||E(x_i) - E(target)||^2
LossAndGrad encoder_distance_gradient(const ToyLDM& model, const Mat& x, const Mat& target_latent);
// Score-distillation direction: (eps_theta - eps) pulled back through the
// forward-diffusion map only. `loss` is the AdvDM loss at the same draw.
LossAndGrad sds_direction(const ToyLDM& model, const Mat& x, const std::vector<int>& t, const Mat& noise,
                          const Condition& cond);
// sum_i ||f_chain(x_i) - target||^2 through the truncated chain.
LossAndGrad chain_gradient(const ToyLDM& model, const Mat& x, const Mat& target, const Mat& noise,
                           const std::vector<int>& grid, const Condition& cond, double guidance);
// Time grid of the last `depth` transitions of the variation pipeline.
std::vector<int> chain_grid(const ToyLDM& model, const ChainConfig& cfg);

// Draws t uniformly from (a, b] for every row.
std::vector<int> draw_time_steps(const TimeStepRange& range, size_t rows, Rng& rng);

// Batched attacks: one adversarial example per input image; all share the
// seed but draw independent Monte-Carlo samples per row.
std::vector<AdversarialExample> advdm_attack(const std::vector<Image>& images, const ToyLDM& model,
                                             const TimeStepRange& range, const AttackBudget& budget, uint64_t seed,
                                             const AttackOptions& opts = {});
std::vector<AdversarialExample> encoder_attack(const std::vector<Image>& images, const ToyLDM& model,
                                               const TargetSpec& target, const AttackBudget& budget, uint64_t seed,
                                               const AttackOptions& opts = {});
std::vector<AdversarialExample> chain_attack(const std::vector<Image>& images, const ToyLDM& model,
                                             const TargetSpec& target, const ChainConfig& chain,
                                             const AttackBudget& budget, uint64_t seed,
                                             const AttackOptions& opts = {});
std::vector<AdversarialExample> mist_attack(const std::vector<Image>& images, const ToyLDM& model,
                                            const TargetSpec& target, const FusedLossConfig& fused,
                                            const AttackBudget& budget, uint64_t seed,
                                            const AttackOptions& opts = {});
std::vector<AdversarialExample> sds_attack(const std::vector<Image>& images, const ToyLDM& model,
                                           const TimeStepRange& range, const AttackBudget& budget, uint64_t seed,
                                           const AttackOptions& opts = {});

// Mean AdvDM loss per element of each image over fixed held-out draws.
std::vector<double> heldout_advdm_loss(const ToyLDM& model, const std::vector<Image>& images,
                                       const TimeStepRange& range, int draws, uint64_t seed);

}  // namespace ldmt
