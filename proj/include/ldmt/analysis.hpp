#pragma once

#include "ldmt/attacks.hpp"
#include "ldmt/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ldmt {

using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Per-time-step losses of the diffusion model viewed as a family of models.

// L(x, eps) = ||eps - eps_theta(sqrt(abar_t) E(x) + sqrt(1 - abar_t) eps, t)||_2
// (not squared) and its gradient w.r.t. the pixels, one row per image. Rows
// with zero loss get a zero gradient.
struct PixelLossGrad {
    std::vector<double> loss;
    Mat grad;
};
PixelLossGrad loss_gradient(const ToyLDM& model, int t, const Mat& x, const Mat& noise,
                            const Condition& cond = Condition::null());

struct SmoothnessProfile {
    std::vector<int> t_grid;
    std::vector<double> values;   // mean gradient norm
    std::vector<double> std_err;
    std::vector<size_t> counts;
};

// Mean ||grad_x L|| over every image and `samples_per_point` noise draws per t.
SmoothnessProfile smoothness_profile(const ToyLDM& model, const std::vector<Image>& images,
                                     const std::vector<int>& t_grid, int samples_per_point, uint64_t seed);

struct GradSimMatrix {
    std::vector<int> t_grid;
    Mat entries;
    size_t pairs = 0;    // (x, draw) pairs averaged per entry
    size_t skipped = 0;  // zero-gradient pairs excluded over all entries
};

// Cosine similarity with the zero-vector convention left to the caller;
// identical inputs give exactly 1.
double cosine_similarity(const Vec& a, const Vec& b);

// Entry (i, j) averages S(L_ti, L_tj) over images and `draws` paired noise
// draws. With `shared_noise` both sides use the same draw; otherwise each
// pair (e1, e2) contributes the mean of both orderings so the matrix is
// exactly symmetric.
GradSimMatrix grad_similarity_matrix(const ToyLDM& model, const std::vector<Image>& images,
                                     const std::vector<int>& t_grid, int draws, uint64_t seed,
                                     bool shared_noise = false);

// ---------------------------------------------------------------------------
// Smoothness constant.

using GradientFn = std::function<Vec(const Vec&)>;

// Empirical sup of ||g(x1) - g(x2)|| / ||x1 - x2|| over `pair_count` pairs:
// x1 cycles through `points`, x2 = x1 + r u with u uniform on the sphere and
// r uniform in (0, radius]. Pair k depends only on (seed, k), so estimates
// for nested pair counts are monotone. A lower estimate of the true constant.
double estimate_beta(const GradientFn& grad, const std::vector<Vec>& points, int pair_count, double pair_radius,
                     uint64_t seed);
// Same for the per-t diffusion loss, one fixed noise draw per base image.
double estimate_beta(const ToyLDM& model, int t, const std::vector<Image>& images, int pair_count,
                     double pair_radius, uint64_t seed);

// ---------------------------------------------------------------------------
// Estimators over loss lists.

double estimate_risk(const std::vector<double>& losses, double threshold);  // Pr(L > threshold)
double empirical_risk(const std::vector<double>& losses);                    // mean L
double effectiveness_alpha(const std::vector<double>& adversarial_losses, double threshold);  // Pr(L <= threshold)

struct RateEstimate {
    double rate = 0.0;
    double radius = 0.0;  // Wilson 95% upper limit minus the rate
    size_t n = 0;
};
double wilson_upper(size_t successes, size_t n, double z = 1.959963984540054);
RateEstimate rate_from_indicators(const std::vector<bool>& indicators);
// Indicator: clean_F <= L1, clean_G <= L2, adv_F > L1 and adv_G > L2.
RateEstimate estimate_transfer_rate(const std::vector<double>& clean_f, const std::vector<double>& clean_g,
                                    const std::vector<double>& adv_f, const std::vector<double>& adv_g, double l1,
                                    double l2);

// Empirical quantile with linear interpolation.
double quantile(std::vector<double> values, double q);

// ---------------------------------------------------------------------------
// Bound.

struct BoundInputs {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma_f = 0.0;
    double gamma_g = 0.0;
    double c_f = 0.0;
    double c_g = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    double s_inf = 1.0;
    double radius = 0.0;
};

struct BoundConstants {
    double c_f = 0.0;
    double c_g = 0.0;
    size_t excluded_f = 0;
    size_t excluded_g = 0;
};

// c_F = min (L1 - L_F - beta r^2/2) / ||grad L_F||,
// c_G = max (L2 - L_G + beta r^2/2) / ||grad L_G||, both over the same set.
BoundConstants bound_constants(const std::vector<double>& loss_f, const std::vector<double>& grad_norm_f,
                               const std::vector<double>& loss_g, const std::vector<double>& grad_norm_g, double beta,
                               double radius, double l1, double l2);

// Lower bound on the transfer probability; the raw value is returned even
// when it is vacuous.
double transfer_bound(const BoundInputs& in);

enum class Verdict { Verified, Vacuous, Violated };
std::string to_string(Verdict v);

struct BoundReport {
    BoundInputs inputs;
    double bound = 0.0;
    RateEstimate rate;
    Verdict verdict = Verdict::Vacuous;
    size_t samples = 0;
    size_t excluded = 0;        // zero-gradient points dropped from c_F, c_G, s_inf
    bool beta_exact = false;    // false when beta is a sampled lower estimate
    std::string domain_note;
};

Verdict bound_verdict(double bound, const RateEstimate& rate);

// A differentiable per-sample loss: sample i may carry its own label/noise.
struct SampleLoss {
    std::function<double(size_t i, const Vec& x)> value;
    std::function<Vec(size_t i, const Vec& x)> gradient;
};

struct BoundConfig {
    double radius = 0.0;            // l2 radius
    double beta = 0.0;
    bool beta_exact = false;
    std::optional<double> l1, l2;   // default: `threshold_quantile` of clean losses
    double threshold_quantile = 0.9;
};

// Assembles every input from the clean/adversarial sample pairs and checks
// the bound against the measured transfer rate.
BoundReport verify_bound(const SampleLoss& f, const SampleLoss& g, const std::vector<Vec>& clean,
                         const std::vector<Vec>& adversarial, const BoundConfig& cfg);

// l-infinity budget to the l2 radius used by the bound.
double linf_to_l2_radius(double epsilon_inf, Eigen::Index pixels);

// f(x) = 0.5 x^T A x + b^T x + c with symmetric A; beta = spectral norm of A.
struct Quadratic {
    Mat a;
    Vec b;
    double c = 0.0;

    double value(const Vec& x) const { return 0.5 * x.dot(a * x) + b.dot(x) + c; }
    Vec gradient(const Vec& x) const { return a * x + b; }
    double beta() const;
};

// Randomized 2-D quadratic surrogate/target pair: x uniform in a disk,
// adversarial examples from one normalized-gradient step on the surrogate,
// exact beta. Configurations with radius <= c_G are redrawn.
struct SyntheticBoundTrial {
    BoundReport report;
    Quadratic f, g;
    int redraws = 0;
};
SyntheticBoundTrial synthetic_quadratic_bound(uint64_t seed, size_t samples);

// ---------------------------------------------------------------------------
// Proof-step checkers.

struct LemmaTrial {
    double dot_y = 0.0, dot_x = 0.0, c = 0.0, cos_xy = 0.0;
};

struct LemmaCheck {
    size_t trials = 0;
    size_t premise_hits = 0;
    size_t violations = 0;
    std::vector<LemmaTrial> violating;  // log of violating trials (first 100)
};

// Random unit x, y, delta with ||delta|| <= epsilon and c in [-epsilon, epsilon]:
// when delta.y <= c - epsilon sqrt(2 - 2 cos<x,y>) holds, delta.x <= c must
// hold. `drop_sqrt_term` checks the weakened premise delta.y <= c instead.
LemmaCheck check_lemma1(size_t trials, int dimension, uint64_t seed, double epsilon = 1.0,
                        bool drop_sqrt_term = false);

struct DifferentiableLoss {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
};

// Counts deltas violating L(x) + d.g -/+ beta |d|^2/2 bracketing L(x + d);
// uses |d|^2 of each sample (the tightest form of the eps^2 bracket).
size_t check_taylor_bounds(const DifferentiableLoss& loss, double beta, const Vec& x,
                           const std::vector<Vec>& deltas);

// ---------------------------------------------------------------------------
// Output helpers.

void write_profile_csv(const SmoothnessProfile& p, const std::filesystem::path& path);
void write_gradsim_csv(const GradSimMatrix& m, const std::filesystem::path& path);
nlohmann::json to_json(const BoundReport& r);

}  // namespace ldmt
