#include "ldmt/analysis.hpp"

#include "ldmt/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace ldmt {

PixelLossGrad loss_gradient(const ToyLDM& model, int t, const Mat& x, const Mat& noise, const Condition& cond) {
    if (t < 1 || t > model.horizon()) {
        throw DomainError("time step " + std::to_string(t) + " outside [1, " + std::to_string(model.horizon()) + "]");
    }
    if (noise.rows() != x.rows() || noise.cols() != model.codec().latent_dim()) {
        throw DomainError("noise shape does not match the latent batch");
    }
    const std::vector<int> ts(static_cast<size_t>(x.rows()), t);
    auto xv = ad::leaf(x);
    auto z_t = forward_diffuse(model.codec().encode(xv), ts, noise, model.schedule());
    auto norms = ad::row_l2_norm(ad::sub(model.predict_noise(z_t, ts, cond), ad::leaf(noise)));
    auto grads = ad::backward(ad::sum(norms), {xv.node()});
    PixelLossGrad out;
    out.loss.assign(norms.value().data(), norms.value().data() + norms.value().size());
    out.grad = grads.of(xv);
    return out;
}

namespace {

// Noise for image i, draw d: independent of batch layout and grid.
Mat draw_noise(const ToyLDM& model, uint64_t seed, size_t images, int draw, uint64_t salt) {
    const Eigen::Index d = model.codec().latent_dim();
    Mat noise(static_cast<Eigen::Index>(images), d);
    for (size_t i = 0; i < images; ++i) {
        Rng rng = derive_rng(seed ^ salt, static_cast<uint64_t>(draw) * 1000003ULL + i);
        noise.row(static_cast<Eigen::Index>(i)) = randn(1, d, rng);
    }
    return noise;
}

void check_grid(const ToyLDM& model, const std::vector<int>& grid) {
    for (int t : grid) {
        if (t < 1 || t > model.horizon()) {
            throw ConfigError("grid step " + std::to_string(t) + " outside [1, " + std::to_string(model.horizon()) +
                              "]");
        }
    }
}

}  // namespace

SmoothnessProfile smoothness_profile(const ToyLDM& model, const std::vector<Image>& images,
                                     const std::vector<int>& t_grid, int samples_per_point, uint64_t seed) {
    if (images.empty()) {
        throw DomainError("smoothness profile needs a nonempty dataset");
    }
    if (samples_per_point < 1) {
        throw ConfigError("samples per point must be positive");
    }
    check_grid(model, t_grid);
    const Mat x = stack_rows(images);
    SmoothnessProfile p;
    p.t_grid = t_grid;
    for (size_t k = 0; k < t_grid.size(); ++k) {
        std::vector<double> norms;
        for (int s = 0; s < samples_per_point; ++s) {
            const Mat noise = draw_noise(model, seed, images.size(), s, 0x5eedULL + static_cast<uint64_t>(t_grid[k]));
            const auto lg = loss_gradient(model, t_grid[k], x, noise);
            for (Eigen::Index r = 0; r < lg.grad.rows(); ++r) {
                norms.push_back(lg.grad.row(r).norm());
            }
        }
        const double n = static_cast<double>(norms.size());
        const double mean = std::accumulate(norms.begin(), norms.end(), 0.0) / n;
        double var = 0.0;
        for (double v : norms) var += (v - mean) * (v - mean);
        var = norms.size() > 1 ? var / (n - 1.0) : 0.0;
        p.values.push_back(mean);
        p.std_err.push_back(std::sqrt(var / n));
        p.counts.push_back(norms.size());
    }
    return p;
}

double cosine_similarity(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw DomainError("cosine of vectors with different sizes");
    }
    if (a == b) {
        return 1.0;
    }
    const double c = a.dot(b) / (a.norm() * b.norm());
    return std::clamp(c, -1.0, 1.0);
}

GradSimMatrix grad_similarity_matrix(const ToyLDM& model, const std::vector<Image>& images,
                                     const std::vector<int>& t_grid, int draws, uint64_t seed, bool shared_noise) {
    if (t_grid.empty()) {
        throw ConfigError("gradient-similarity grid is empty");
    }
    if (images.empty() || draws < 1) {
        throw ConfigError("gradient similarity needs images and at least one draw");
    }
    check_grid(model, t_grid);
    const Mat x = stack_rows(images);
    const size_t n = t_grid.size();
    // grads[side][d][k]: gradient at t_k for noise side (e1 / e2) and draw d.
    std::vector<std::vector<std::vector<Mat>>> grads(2, std::vector<std::vector<Mat>>(static_cast<size_t>(draws)));
    for (int d = 0; d < draws; ++d) {
        const Mat e1 = draw_noise(model, seed, images.size(), d, 0xa11ceULL);
        const Mat e2 = shared_noise ? e1 : draw_noise(model, seed, images.size(), d, 0xb0bULL);
        for (size_t k = 0; k < n; ++k) {
            grads[0][static_cast<size_t>(d)].push_back(loss_gradient(model, t_grid[k], x, e1).grad);
            grads[1][static_cast<size_t>(d)].push_back(
                shared_noise ? grads[0][static_cast<size_t>(d)].back() : loss_gradient(model, t_grid[k], x, e2).grad);
        }
    }
    GradSimMatrix m;
    m.t_grid = t_grid;
    m.entries = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    m.pairs = images.size() * static_cast<size_t>(draws);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i; j < n; ++j) {
            double total = 0.0;
            size_t used = 0;
            for (int d = 0; d < draws; ++d) {
                const auto& gd1 = grads[0][static_cast<size_t>(d)];
                const auto& gd2 = grads[1][static_cast<size_t>(d)];
                for (Eigen::Index r = 0; r < x.rows(); ++r) {
                    const Vec a1 = gd1[i].row(r).transpose(), b2 = gd2[j].row(r).transpose();
                    const Vec a2 = gd2[i].row(r).transpose(), b1 = gd1[j].row(r).transpose();
                    double pair = 0.0;
                    int parts = 0;
                    for (auto [u, v] : {std::pair{&a1, &b2}, std::pair{&a2, &b1}}) {
                        if (u->squaredNorm() == 0.0 || v->squaredNorm() == 0.0) {
                            continue;
                        }
                        pair += cosine_similarity(*u, *v);
                        ++parts;
                        if (shared_noise) break;  // both orderings coincide
                    }
                    if (parts == 0) {
                        ++m.skipped;
                        continue;
                    }
                    total += pair / parts;
                    ++used;
                }
            }
            if (used == 0) {
                throw EstimationError("every gradient pair at (" + std::to_string(t_grid[i]) + ", " +
                                      std::to_string(t_grid[j]) + ") is zero");
            }
            const double v = std::clamp(total / static_cast<double>(used), -1.0, 1.0);
            m.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            m.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }
    return m;
}

namespace {

// grad(k, x): gradient of the loss attached to base point k mod n.
template <class Grad>
double beta_impl(const Grad& grad, const std::vector<Vec>& points, int pair_count, double pair_radius,
                 uint64_t seed) {
    if (pair_count < 1) {
        throw ConfigError("pair_count must be at least 1");
    }
    if (points.empty() || !(pair_radius > 0.0)) {
        throw ConfigError("beta estimation needs points and a positive radius");
    }
    double best = 0.0;
    for (int k = 0; k < pair_count; ++k) {
        const size_t i = static_cast<size_t>(k) % points.size();
        const Vec& x1 = points[i];
        Rng rng = derive_rng(seed, static_cast<uint64_t>(k));
        Vec x2;
        for (;;) {  // resample coincident pairs
            const Vec u = randn(x1.size(), 1, rng).col(0);
            const double un = u.norm();
            const double r = pair_radius * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            if (un == 0.0 || r == 0.0) continue;
            x2 = x1 + (r / un) * u;
            if (x2 != x1) break;
        }
        best = std::max(best, (grad(i, x1) - grad(i, x2)).norm() / (x1 - x2).norm());
    }
    return best;
}

}  // namespace

double estimate_beta(const GradientFn& grad, const std::vector<Vec>& points, int pair_count, double pair_radius,
                     uint64_t seed) {
    return beta_impl([&](size_t, const Vec& x) { return grad(x); }, points, pair_count, pair_radius, seed);
}

double estimate_beta(const ToyLDM& model, int t, const std::vector<Image>& images, int pair_count,
                     double pair_radius, uint64_t seed) {
    if (images.empty()) {
        throw ConfigError("beta estimation needs images");
    }
    std::vector<Vec> points;
    for (const auto& im : images) {
        points.push_back(im.row().transpose());
    }
    // Each base image keeps one fixed noise draw, so L is a function of x alone.
    const Mat noise = draw_noise(model, seed, images.size(), 0, 0xbe7aULL);
    auto grad = [&](size_t i, const Vec& x) {
        return Vec(loss_gradient(model, t, x.transpose(), noise.row(static_cast<Eigen::Index>(i))).grad.transpose());
    };
    return beta_impl(grad, points, pair_count, pair_radius, seed);
}

double estimate_risk(const std::vector<double>& losses, double threshold) {
    if (losses.empty()) {
        throw EstimationError("risk of an empty sample");
    }
    const auto above = std::count_if(losses.begin(), losses.end(), [&](double l) { return l > threshold; });
    return static_cast<double>(above) / static_cast<double>(losses.size());
}

double empirical_risk(const std::vector<double>& losses) {
    if (losses.empty()) {
        throw EstimationError("empirical risk of an empty sample");
    }
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

double effectiveness_alpha(const std::vector<double>& adversarial_losses, double threshold) {
    if (adversarial_losses.empty()) {
        throw EstimationError("effectiveness of an empty set");
    }
    const auto below =
        std::count_if(adversarial_losses.begin(), adversarial_losses.end(), [&](double l) { return l <= threshold; });
    return static_cast<double>(below) / static_cast<double>(adversarial_losses.size());
}

double wilson_upper(size_t successes, size_t n, double z) {
    if (n == 0) {
        throw EstimationError("confidence interval of an empty sample");
    }
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double z2 = z * z;
    const double center = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
    const double half = z / (1.0 + z2 / nn) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    return std::min(1.0, center + half);
}

RateEstimate rate_from_indicators(const std::vector<bool>& indicators) {
    if (indicators.empty()) {
        throw EstimationError("transfer rate of an empty set");
    }
    const size_t hits = static_cast<size_t>(std::count(indicators.begin(), indicators.end(), true));
    RateEstimate r;
    r.n = indicators.size();
    r.rate = static_cast<double>(hits) / static_cast<double>(r.n);
    r.radius = std::max(0.0, wilson_upper(hits, r.n) - r.rate);
    return r;
}

RateEstimate estimate_transfer_rate(const std::vector<double>& clean_f, const std::vector<double>& clean_g,
                                    const std::vector<double>& adv_f, const std::vector<double>& adv_g, double l1,
                                    double l2) {
    const size_t n = clean_f.size();
    if (clean_g.size() != n || adv_f.size() != n || adv_g.size() != n) {
        throw EstimationError("clean and adversarial loss lists differ in length");
    }
    std::vector<bool> ind(n);
    for (size_t i = 0; i < n; ++i) {
        ind[i] = clean_f[i] <= l1 && clean_g[i] <= l2 && adv_f[i] > l1 && adv_g[i] > l2;
    }
    return rate_from_indicators(ind);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw EstimationError("quantile of an empty sample");
    }
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BoundConstants bound_constants(const std::vector<double>& loss_f, const std::vector<double>& grad_norm_f,
                               const std::vector<double>& loss_g, const std::vector<double>& grad_norm_g, double beta,
                               double radius, double l1, double l2) {
    if (loss_f.size() != grad_norm_f.size() || loss_g.size() != grad_norm_g.size()) {
        throw EstimationError("loss and gradient-norm lists differ in length");
    }
    const double slack = beta * radius * radius / 2.0;
    BoundConstants c;
    c.c_f = std::numeric_limits<double>::infinity();
    c.c_g = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < loss_f.size(); ++i) {
        if (grad_norm_f[i] == 0.0) {
            ++c.excluded_f;
            continue;
        }
        c.c_f = std::min(c.c_f, (l1 - loss_f[i] - slack) / grad_norm_f[i]);
    }
    for (size_t i = 0; i < loss_g.size(); ++i) {
        if (grad_norm_g[i] == 0.0) {
            ++c.excluded_g;
            continue;
        }
        c.c_g = std::max(c.c_g, (l2 - loss_g[i] + slack) / grad_norm_g[i]);
    }
    if (!std::isfinite(c.c_f) || !std::isfinite(c.c_g)) {
        throw EstimationError("every evaluated point has a zero gradient");
    }
    return c;
}

double transfer_bound(const BoundInputs& in) {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(in.alpha) || !unit(in.gamma_f) || !unit(in.gamma_g) || !(in.s_inf >= -1.0 && in.s_inf <= 1.0)) {
        throw DomainError("alpha and risks must lie in [0,1], s_inf in [-1,1]");
    }
    const double eps = in.radius;
    if (!(eps > in.c_g)) {
        throw DomainError("radius must exceed c_G for a finite bound");
    }
    const double denom = eps - in.c_g;
    return (1.0 - in.alpha) - (in.gamma_f + in.gamma_g) - (eps * (1.0 + in.alpha) - in.c_f * (1.0 - in.alpha)) / denom -
           eps * (1.0 - in.alpha) / denom * std::sqrt(std::max(0.0, 2.0 - 2.0 * in.s_inf));
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Verified: return "verified";
        case Verdict::Vacuous: return "vacuous";
        case Verdict::Violated: return "violated";
    }
    return "unknown";
}

Verdict bound_verdict(double bound, const RateEstimate& rate) {
    if (bound <= 0.0) {
        return Verdict::Vacuous;
    }
    return rate.rate + rate.radius < bound ? Verdict::Violated : Verdict::Verified;
}

BoundReport verify_bound(const SampleLoss& f, const SampleLoss& g, const std::vector<Vec>& clean,
                         const std::vector<Vec>& adversarial, const BoundConfig& cfg) {
    const size_t n = clean.size();
    if (n == 0 || adversarial.size() != n) {
        throw EstimationError("bound verification needs paired clean/adversarial samples");
    }
    std::vector<double> cf(n), cg(n), af(n), ag(n), nf(n), ng(n);
    double s_inf = 1.0;
    size_t excluded = 0;
    for (size_t i = 0; i < n; ++i) {
        cf[i] = f.value(i, clean[i]);
        cg[i] = g.value(i, clean[i]);
        af[i] = f.value(i, adversarial[i]);
        ag[i] = g.value(i, adversarial[i]);
        const Vec gf = f.gradient(i, clean[i]);
        const Vec gg = g.gradient(i, clean[i]);
        nf[i] = gf.norm();
        ng[i] = gg.norm();
        if (nf[i] == 0.0 || ng[i] == 0.0) {
            ++excluded;
            continue;
        }
        s_inf = std::min(s_inf, cosine_similarity(gf, gg));
    }
    BoundReport rep;
    auto& in = rep.inputs;
    in.l1 = cfg.l1 ? *cfg.l1 : quantile(cf, cfg.threshold_quantile);
    in.l2 = cfg.l2 ? *cfg.l2 : quantile(cg, cfg.threshold_quantile);
    in.beta = cfg.beta;
    in.radius = cfg.radius;
    in.alpha = effectiveness_alpha(af, in.l1);
    in.gamma_f = estimate_risk(cf, in.l1);
    in.gamma_g = estimate_risk(cg, in.l2);
    in.s_inf = s_inf;
    const auto consts = bound_constants(cf, nf, cg, ng, cfg.beta, cfg.radius, in.l1, in.l2);
    in.c_f = consts.c_f;
    in.c_g = consts.c_g;
    rep.samples = n;
    rep.excluded = excluded;
    rep.beta_exact = cfg.beta_exact;
    rep.domain_note = "c_F minimized and c_G maximized over the same evaluation set";
    rep.rate = estimate_transfer_rate(cf, cg, af, ag, in.l1, in.l2);
    if (!(in.radius > in.c_g)) {
        // Outside the bound's domain; report as vacuous rather than fail.
        rep.bound = -std::numeric_limits<double>::infinity();
        rep.verdict = Verdict::Vacuous;
        return rep;
    }
    rep.bound = transfer_bound(in);
    rep.verdict = bound_verdict(rep.bound, rep.rate);
    return rep;
}

double linf_to_l2_radius(double epsilon_inf, Eigen::Index pixels) {
    return epsilon_inf * std::sqrt(static_cast<double>(pixels));
}

double Quadratic::beta() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

Mat random_symmetric(Rng& rng, double scale) {
    Mat a = randn(2, 2, rng) * scale;
    return 0.5 * (a + a.transpose());
}

Vec rotate(const Vec& v, double phi) {
    Vec out(2);
    out << std::cos(phi) * v(0) - std::sin(phi) * v(1), std::sin(phi) * v(0) + std::cos(phi) * v(1);
    return out;
}

}  // namespace

SyntheticBoundTrial synthetic_quadratic_bound(uint64_t seed, size_t samples) {
    if (samples == 0) {
        throw ConfigError("synthetic bound needs samples");
    }
    SyntheticBoundTrial trial;
    for (int attempt = 0;; ++attempt) {
        Rng rng = derive_rng(seed, static_cast<uint64_t>(attempt));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

        Quadratic f, g;
        f.a = random_symmetric(rng, uni(0.0, 0.2));
        g.a = f.a + random_symmetric(rng, uni(0.0, 0.1));
        Vec dir = randn(2, 1, rng).col(0);
        dir /= dir.norm();
        f.b = uni(1.0, 3.0) * dir;
        g.b = uni(0.5, 2.0) * rotate(dir, uni(-0.3, 0.3));
        f.c = uni(-1.0, 1.0);
        g.c = uni(-1.0, 1.0);
        const double disk = uni(0.02, 0.3);
        const double radius = uni(0.3, 2.0);

        std::vector<Vec> clean(samples), adv(samples);
        for (size_t i = 0; i < samples; ++i) {
            const double r = disk * std::sqrt(u(rng)), th = 2.0 * M_PI * u(rng);
            clean[i] = Vec(2);
            clean[i] << r * std::cos(th), r * std::sin(th);
            const Vec gr = f.gradient(clean[i]);
            const double n = gr.norm();
            adv[i] = n > 0.0 ? Vec(clean[i] + (radius / n) * gr) : clean[i];
        }

        std::vector<double> cf(samples), cg(samples), nf(samples);
        for (size_t i = 0; i < samples; ++i) {
            cf[i] = f.value(clean[i]);
            cg[i] = g.value(clean[i]);
            nf[i] = f.gradient(clean[i]).norm();
        }
        const double mean_nf = std::accumulate(nf.begin(), nf.end(), 0.0) / static_cast<double>(samples);
        BoundConfig cfg;
        cfg.radius = radius;
        cfg.beta = std::max(f.beta(), g.beta());
        cfg.beta_exact = true;
        cfg.l1 = quantile(cf, uni(0.95, 1.0)) + uni(0.0, 0.9) * radius * mean_nf;
        cfg.l2 = quantile(cg, uni(0.95, 1.0)) + uni(0.0, 0.1) * radius * g.b.norm();

        SampleLoss sf{[&](size_t, const Vec& x) { return f.value(x); }, [&](size_t, const Vec& x) { return f.gradient(x); }};
        SampleLoss sg{[&](size_t, const Vec& x) { return g.value(x); }, [&](size_t, const Vec& x) { return g.gradient(x); }};
        BoundReport rep = verify_bound(sf, sg, clean, adv, cfg);
        if (!(rep.inputs.radius > rep.inputs.c_g)) {
            continue;  // inadmissible draw
        }
        trial.report = rep;
        trial.f = f;
        trial.g = g;
        trial.redraws = attempt;
        return trial;
    }
}

LemmaCheck check_lemma1(size_t trials, int dimension, uint64_t seed, double epsilon, bool drop_sqrt_term) {
    if (dimension < 2) {
        throw ConfigError("lemma check needs dimension >= 2");
    }
    Rng rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto unit = [&](Vec v) {
        double n = v.norm();
        while (n == 0.0) {
            v = randn(dimension, 1, rng).col(0);
            n = v.norm();
        }
        return Vec(v / n);
    };
    LemmaCheck out;
    out.trials = trials;
    for (size_t k = 0; k < trials; ++k) {
        const Vec x = unit(randn(dimension, 1, rng).col(0));
        // Mix near-parallel and generic pairs so the premise fires often.
        const double spread = std::pow(10.0, -3.0 + 4.0 * u01(rng));
        const Vec y = unit(x + spread * Vec(randn(dimension, 1, rng).col(0)));
        const Vec dir = unit(randn(dimension, 1, rng).col(0));
        const Vec delta = epsilon * std::pow(u01(rng), 1.0 / dimension) * dir;
        const double c = epsilon * (2.0 * u01(rng) - 1.0);
        const double cos_xy = std::clamp(x.dot(y), -1.0, 1.0);
        const double dy = delta.dot(y), dx = delta.dot(x);
        const double rhs = drop_sqrt_term ? c : c - epsilon * std::sqrt(std::max(0.0, 2.0 - 2.0 * cos_xy));
        if (dy > rhs) {
            continue;
        }
        ++out.premise_hits;
        if (dx > c) {
            ++out.violations;
            if (out.violating.size() < 100) {
                out.violating.push_back({dy, dx, c, cos_xy});
            }
        }
    }
    return out;
}

size_t check_taylor_bounds(const DifferentiableLoss& loss, double beta, const Vec& x,
                           const std::vector<Vec>& deltas) {
    const double l0 = loss.value(x);
    const Vec g = loss.gradient(x);
    size_t violations = 0;
    for (const auto& d : deltas) {
        const double lin = l0 + d.dot(g);
        const double rem = beta * d.squaredNorm() / 2.0;
        const double l1 = loss.value(x + d);
        // Rounding slack only; an under-stated beta misses by O(|d|^2).
        const double tol = 1e-12 * (1.0 + std::abs(l0) + std::abs(l1) + std::abs(d.dot(g)));
        if (l1 < lin - rem - tol || l1 > lin + rem + tol) {
            ++violations;
        }
    }
    return violations;
}

void write_profile_csv(const SmoothnessProfile& p, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw ResourceError("cannot write " + path.string());
    os.precision(17);
    os << "t,mean_grad_norm,std_err,count\n";
    for (size_t k = 0; k < p.t_grid.size(); ++k) {
        os << p.t_grid[k] << ',' << p.values[k] << ',' << p.std_err[k] << ',' << p.counts[k] << '\n';
    }
}

void write_gradsim_csv(const GradSimMatrix& m, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw ResourceError("cannot write " + path.string());
    os.precision(17);
    os << "t";
    for (int t : m.t_grid) os << ',' << t;
    os << '\n';
    for (size_t i = 0; i < m.t_grid.size(); ++i) {
        os << m.t_grid[i];
        for (size_t j = 0; j < m.t_grid.size(); ++j) {
            os << ',' << m.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        os << '\n';
    }
}

nlohmann::json to_json(const BoundReport& r) {
    const auto& in = r.inputs;
    return {{"alpha", in.alpha},     {"beta", in.beta},       {"gamma_f", in.gamma_f},
            {"gamma_g", in.gamma_g}, {"c_f", in.c_f},         {"c_g", in.c_g},
            {"l1", in.l1},           {"l2", in.l2},           {"s_inf", in.s_inf},
            {"radius", in.radius},   {"bound", std::isfinite(r.bound) ? nlohmann::json(r.bound) : nlohmann::json()},
            {"rate", r.rate.rate},   {"rate_radius", r.rate.radius}, {"samples", r.samples},
            {"excluded", r.excluded}, {"beta_exact", r.beta_exact}, {"verdict", to_string(r.verdict)},
            {"domain_note", r.domain_note}};
}

}  // namespace ldmt
