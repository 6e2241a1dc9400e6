// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Needs the trained fixture and the ldmt binary.
//
//   acceptance --fixture DIR --cli PATH [--work DIR] [--only N,...]
#include "ldmt/analysis.hpp"
#include "ldmt/attacks.hpp"
#include "ldmt/experiment.hpp"
#include "ldmt/metrics.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

using namespace ldmt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 6) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

struct Ctx {
    fs::path fixture;
    fs::path cli;
    fs::path work;
};

const ToyLDM& trained(const Ctx& c) {
    static const ToyLDM m = load_checkpoint(c.fixture / "model.ckpt");
    return m;
}

const Dataset& dataset(const Ctx& c) {
    static const Dataset d = load_image_dir(c.fixture / "data");
    return d;
}

std::vector<Image> uniform_images(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Image> out;
    for (size_t i = 0; i < n; ++i) {
        Image im(32, 32, 3);
        for (auto& v : im.pixels) v = u(rng);
        out.push_back(std::move(im));
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome pgd_contract(const Ctx& c) {
    const auto& m = trained(c);
    auto imgs = uniform_images(100, 11);
    for (size_t i = 0; i < 100; ++i) imgs.push_back(dataset(c)[i].image);
    const AttackBudget b;
    size_t checks = 0, bad = 0;
    AttackOptions opts;
    opts.observer = [&](const Mat& orig, const Mat& cur, int) {
        ++checks;
        if ((cur - orig).cwiseAbs().maxCoeff() > b.epsilon || cur.minCoeff() < 0.0 || cur.maxCoeff() > 1.0) ++bad;
    };
    const TargetSpec target{periodic_target(), Condition::null()};
    auto final_ok = [&](const std::vector<AdversarialExample>& aes) {
        for (const auto& a : aes) {
            const Image x = a.adversarial();
            for (size_t k = 0; k < x.pixels.size(); ++k) {
                if (std::abs(a.delta.pixels[k]) > b.epsilon || x.pixels[k] < 0.0 || x.pixels[k] > 1.0) ++bad;
            }
        }
    };
    final_ok(advdm_attack(imgs, m, {0, 1000}, b, 1, opts));
    final_ok(advdm_attack(imgs, m, {800, 900}, b, 2, opts));
    final_ok(encoder_attack(imgs, m, target, b, 3, opts));
    final_ok(chain_attack(imgs, m, target, ChainConfig{}, b, 4, opts));
    final_ok(mist_attack(imgs, m, target, {1.0, {0, 1000}}, b, 5, opts));
    final_ok(sds_attack(imgs, m, {0, 1000}, b, 6, opts));
    return {bad == 0 && checks == 6 * static_cast<size_t>(b.iterations),
            "200 images, 5 families, " + std::to_string(checks) + " iteration checks, " + std::to_string(bad) +
                " violations"};
}

Outcome gradient_fd(const Ctx& c) {
    const auto& m = trained(c);
    Rng rng(21);
    std::uniform_int_distribution<int> pick_t(1, m.horizon());
    std::uniform_int_distribution<size_t> pick_img(0, dataset(c).size() - 1);
    std::uniform_int_distribution<Eigen::Index> pick_px(0, 32 * 32 * 3 - 1);
    double worst = 0.0;
    for (int draw = 0; draw < 10; ++draw) {
        const Mat x = dataset(c)[pick_img(rng)].image.row();
        const int t = pick_t(rng);
        const Mat e = randn(1, m.codec().latent_dim(), rng);
        const auto lg = loss_gradient(m, t, x, e);
        for (int k = 0; k < 10; ++k) {
            const Eigen::Index j = pick_px(rng);
            const double h = 1e-4;
            Mat xp = x, xm = x;
            xp(0, j) += h;
            xm(0, j) -= h;
            const double fd = (loss_gradient(m, t, xp, e).loss[0] - loss_gradient(m, t, xm, e).loss[0]) / (2 * h);
            const double rel = std::abs(fd - lg.grad(0, j)) / std::max({std::abs(fd), std::abs(lg.grad(0, j)), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    return {worst < 1e-3, "100 coordinates, max relative error " + fmt(worst, 3)};
}

Outcome synthetic_soundness(const Ctx&) {
    int ok = 0, nonvacuous = 0;
    for (uint64_t s = 0; s < 100; ++s) {
        const auto tr = synthetic_quadratic_bound(s, 10000);
        if (tr.report.verdict != Verdict::Violated) ++ok;
        if (tr.report.verdict == Verdict::Verified) ++nonvacuous;
    }
    return {ok == 100, std::to_string(ok) + "/100 not violated (" + std::to_string(nonvacuous) + " non-vacuous)"};
}

Outcome worked_value(const Ctx&) {
    BoundInputs in;
    in.alpha = 0.1;
    in.gamma_f = 0.05;
    in.gamma_g = 0.05;
    in.radius = 1.0;
    in.c_f = 0.5;
    in.c_g = -1.0;
    in.s_inf = 0.9;
    const double b = transfer_bound(in);
    return {std::abs(b - 0.2737) < 1e-4, "bound " + fmt(b, 12)};
}

Outcome proof_checkers(const Ctx&) {
    const auto lemma = check_lemma1(100000, 8, 1);
    const auto mutated = check_lemma1(100000, 8, 1, 1.0, true);
    Rng rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    size_t exact = 0, understated = 0;
    for (int q = 0; q < 20; ++q) {
        Quadratic f;
        const Mat r = randn(5, 5, rng);
        f.a = 0.5 * (r + r.transpose());
        f.b = randn(5, 1, rng);
        const DifferentiableLoss loss{[&](const Vec& x) { return f.value(x); },
                                      [&](const Vec& x) { return f.gradient(x); }};
        const Vec x = randn(5, 1, rng);
        std::vector<Vec> deltas;
        for (int k = 0; k < 500; ++k) deltas.push_back(Vec(randn(5, 1, rng)) * std::abs(u(rng)));
        exact += check_taylor_bounds(loss, f.beta(), x, deltas);
        understated += check_taylor_bounds(loss, 0.5 * f.beta(), x, deltas);
    }
    const bool pass = lemma.violations == 0 && mutated.violations > 0 && exact == 0 && understated > 0;
    return {pass, "lemma 1e5 trials: " + std::to_string(lemma.violations) + " violations (" +
                      std::to_string(lemma.premise_hits) + " premise hits), mutated " +
                      std::to_string(mutated.violations) + "; taylor exact " + std::to_string(exact) +
                      ", understated " + std::to_string(understated)};
}

Outcome estimator_oracles(const Ctx&) {
    Rng rng(41);
    std::uniform_int_distribution<int> len(1, 40), level(0, 12);
    size_t mismatches = 0;
    for (int list = 0; list < 1000; ++list) {
        const int n = len(rng);
        std::vector<double> cf(n), cg(n), af(n), ag(n);
        for (int i = 0; i < n; ++i) {
            // Coarse grid of eighths: ties with the thresholds are common.
            cf[i] = level(rng) / 8.0;
            cg[i] = level(rng) / 8.0;
            af[i] = level(rng) / 8.0;
            ag[i] = level(rng) / 8.0;
        }
        const double l1 = level(rng) / 8.0, l2 = level(rng) / 8.0;
        int above = 0, below = 0, hits = 0;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            if (cf[i] > l1) ++above;
            if (af[i] <= l1) ++below;
            if (cf[i] <= l1 && cg[i] <= l2 && af[i] > l1 && ag[i] > l2) ++hits;
            sum += cf[i];
        }
        if (estimate_risk(cf, l1) != static_cast<double>(above) / n) ++mismatches;
        if (empirical_risk(cf) != sum / n) ++mismatches;
        if (effectiveness_alpha(af, l1) != static_cast<double>(below) / n) ++mismatches;
        const auto r = estimate_transfer_rate(cf, cg, af, ag, l1, l2);
        if (r.rate != static_cast<double>(hits) / n || r.n != static_cast<size_t>(n)) ++mismatches;
    }
    return {mismatches == 0, "1000 lists, " + std::to_string(mismatches) + " mismatches"};
}

Outcome metric_sanity(const Ctx&) {
    Rng rng(51);
    const Mat x = randn(500, 8, rng);
    const double self = fid_from_features(x, x);

    // Commuting covariances: Tr term reduces to sum (sqrt(a) - sqrt(b))^2.
    const Mat q = Eigen::HouseholderQR<Mat>(randn(6, 6, rng)).householderQ();
    Eigen::VectorXd da(6), db(6);
    da << 0.5, 1.0, 2.0, 3.0, 0.1, 4.0;
    db << 1.5, 0.2, 2.0, 0.7, 0.9, 1.0;
    Gaussian ga{Eigen::VectorXd::Constant(6, 0.3), q * da.asDiagonal() * q.transpose()};
    Gaussian gb{Eigen::VectorXd::LinSpaced(6, -1.0, 1.0), q * db.asDiagonal() * q.transpose()};
    double closed = (ga.mean - gb.mean).squaredNorm();
    for (int i = 0; i < 6; ++i) closed += std::pow(std::sqrt(da(i)) - std::sqrt(db(i)), 2);
    const double fd = frechet_distance(ga, gb);

    const double uniform = inception_score_from_probs(Mat::Constant(50, kToyClasses, 1.0 / kToyClasses));
    double min_is = INFINITY;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        Mat p(20, kToyClasses);
        for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std::pow(u(rng), 1 + k % 7);
        p = p.array().colwise() / p.rowwise().sum().array();
        // Every other draw sits next to the uniform case, where rounding bites.
        if (k % 2) p = (1.0 - 1e-9 * k) * Mat::Constant(20, kToyClasses, 1.0 / kToyClasses) + 1e-9 * k * p;
        min_is = std::min(min_is, inception_score_from_probs(p));
    }
    const bool pass = self < 1e-6 && std::abs(fd - closed) < 1e-4 && std::abs(uniform - 1.0) < 1e-12 && min_is >= 1.0;
    return {pass, "fid(X,X) " + fmt(self, 3) + ", closed form " + fmt(fd, 12) + " vs " + fmt(closed, 12) +
                      ", IS uniform " + fmt(uniform, 15) + ", min IS " + fmt(min_is, 15)};
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (size_t i = 0; i < idx.size();) {
            size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            for (size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

std::pair<double, double> mean_se(const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double s2 = 0;
    for (double x : v) s2 += (x - m) * (x - m);
    return {m, v.size() > 1 ? std::sqrt(s2 / (v.size() - 1) / v.size()) : 0.0};
}

Outcome fold_trend(const Ctx& c) {
    const auto& m = trained(c);
    std::vector<Image> probe;
    for (size_t i = 0; i < 32; ++i) probe.push_back(dataset(c)[i].image);
    std::vector<int> grid;
    for (int t = 25; t <= 1000; t += 50) grid.push_back(t);
    const auto prof = smoothness_profile(m, probe, grid, 16, 0);
    const double rho = spearman(std::vector<double>(grid.begin(), grid.end()), prof.values);
    const bool decreasing = rho <= -0.8;

    // Fold with the smallest mean gradient norm.
    const auto folds = fold_ranges(m.horizon(), 10);
    size_t smoothest = 0;
    double best = INFINITY;
    for (size_t f = 0; f < folds.size(); ++f) {
        double s = 0;
        int n = 0;
        for (size_t i = 0; i < grid.size(); ++i)
            if (folds[f].contains(grid[i])) s += prof.values[i], ++n;
        if (n && s / n < best) best = s / n, smoothest = f;
    }

    ExperimentConfig base;
    base.checkpoint = (c.fixture / "model.ckpt").string();
    base.dataset = (c.fixture / "data").string();
    base.classifier = (c.fixture / "clf.bin").string();
    base.out_dir = (c.work / "folds").string();
    base.images = static_cast<int>(dataset(c).size());
    const Workspace ws = Workspace::open(base);
    std::vector<double> d_unres, d_smooth;
    std::vector<std::vector<double>> d_fold(folds.size());
    for (uint64_t seed : {0ULL, 1ULL, 2ULL}) {
        base.seed = seed;
        const auto g = sweep_ranges(base, 10, ws, 4);
        d_unres.push_back(g.rows.at(0).delta.at("fid"));
        for (size_t f = 0; f < folds.size(); ++f) d_fold[f].push_back(g.rows.at(f + 1).delta.at("fid"));
        d_smooth.push_back(d_fold[smoothest].back());
    }
    const auto [mu, su] = mean_se(d_unres);
    const auto [ms, ss] = mean_se(d_smooth);
    std::ostringstream os;
    os << "profile spearman " << fmt(rho, 3) << " (" << (decreasing ? "decreasing" : "not decreasing")
       << "), smoothest fold " << folds[smoothest].label() << "; dFID fold " << fmt(ms, 4) << " +/- " << fmt(ss, 2)
       << " vs unrestricted " << fmt(mu, 4) << " +/- " << fmt(su, 2) << " (3 seeds, " << base.images << " images)";
    if (decreasing) return {ms > mu, os.str()};
    size_t hi = 0, lo = 0;
    std::vector<std::pair<double, double>> fm;
    for (const auto& v : d_fold) fm.push_back(mean_se(v));
    for (size_t f = 0; f < fm.size(); ++f) {
        if (fm[f].first > fm[hi].first) hi = f;
        if (fm[f].first < fm[lo].first) lo = f;
    }
    const double spread = fm[hi].first - fm[lo].first;
    const double tol = 2 * std::hypot(fm[hi].second, fm[lo].second);
    os << "; fold spread " << fmt(spread, 4) << " vs 2 SE " << fmt(tol, 4);
    return {spread <= tol, os.str()};
}

Outcome reductions(const Ctx& c) {
    const auto& m = trained(c);
    std::vector<Image> imgs;
    for (size_t i = 0; i < 16; ++i) imgs.push_back(dataset(c)[i].image);
    AttackBudget b;
    b.iterations = 10;
    const TargetSpec target{periodic_target(), Condition::null()};
    bool mist_ok = true;
    for (uint64_t seed : {0ULL, 7ULL, 123ULL}) {
        const auto e = encoder_attack(imgs, m, target, b, seed);
        const auto w = mist_attack(imgs, m, target, {0.0, {0, 1000}}, b, seed);
        for (size_t i = 0; i < e.size(); ++i) mist_ok = mist_ok && e[i].delta.pixels == w[i].delta.pixels;
    }

    // Reference unrestricted AdvDM: t ~ U{1..T} per row, no range involved.
    bool full_ok = true;
    for (uint64_t seed : {0ULL, 5ULL}) {
        const auto a = advdm_attack(imgs, m, {0, 1000}, b, seed);
        const Mat orig = stack_rows(imgs);
        Mat cur = orig;
        Rng rng(seed);
        std::uniform_int_distribution<int> td(1, m.horizon());
        for (int it = 0; it < b.iterations; ++it) {
            std::vector<int> t(imgs.size());
            for (auto& v : t) v = td(rng);
            const Mat noise = randn(cur.rows(), m.codec().latent_dim(), rng);
            cur = pgd_ascend(cur, advdm_gradient(m, cur, t, noise, Condition::null()).grad, orig, b);
        }
        for (size_t i = 0; i < imgs.size(); ++i) {
            const Eigen::Index r = static_cast<Eigen::Index>(i);
            const Mat d = cur.row(r) - orig.row(r);
            full_ok = full_ok && std::equal(a[i].delta.pixels.begin(), a[i].delta.pixels.end(), d.data());
        }
    }

    bool folds_ok = true;
    const auto f = fold_ranges(1000, 10);
    folds_ok = f.size() == 10;
    for (int k = 0; k < 10 && folds_ok; ++k) folds_ok = f[k].a == 100 * k && f[k].b == 100 * (k + 1);
    return {mist_ok && full_ok && folds_ok, std::string("mist(w=0)==encoder ") + (mist_ok ? "yes" : "NO") +
                                                ", (0,1000]==unrestricted " + (full_ok ? "yes" : "NO") +
                                                ", fold boundaries " + (folds_ok ? "yes" : "NO")};
}

// --- CLI determinism --------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) s.replace(pos, from.size(), to);
}

void drop_timing(nlohmann::json& j) {
    if (j.is_object()) {
        j.erase("wall_clock_s");
        for (auto& [k, v] : j.items()) drop_timing(v);
    } else if (j.is_array()) {
        for (auto& v : j) drop_timing(v);
    }
}

// Compares every output file of two runs; paths of the run directory are
// normalized and wall-clock fields ignored.
std::vector<std::string> diff_runs(const fs::path& a, const fs::path& b) {
    std::vector<std::string> diffs;
    std::set<std::string> names;
    for (const auto& root : {a, b})
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file() && e.path().filename() != "invocation.json")
                names.insert(fs::relative(e.path(), root).string());
    for (const auto& n : names) {
        if (!fs::exists(a / n) || !fs::exists(b / n)) {
            diffs.push_back(n + " missing");
            continue;
        }
        std::string x = slurp(a / n), y = slurp(b / n);
        const auto ext = fs::path(n).extension();
        if (ext == ".json" || ext == ".jsonl" || ext == ".csv" || ext == ".txt" || ext == ".cfg") {
            replace_all(x, a.string(), "@");
            replace_all(y, b.string(), "@");
        }
        if (ext == ".json" || ext == ".jsonl") {
            std::stringstream sx(x), sy(y);
            std::string lx, ly;
            bool same = true;
            while (true) {
                const bool gx = static_cast<bool>(std::getline(sx, lx));
                const bool gy = static_cast<bool>(std::getline(sy, ly));
                if (gx != gy) same = false;
                if (!gx || !gy) break;
                if (ext == ".jsonl") {
                    auto jx = nlohmann::json::parse(lx), jy = nlohmann::json::parse(ly);
                    drop_timing(jx);
                    drop_timing(jy);
                    same = same && jx == jy;
                }
            }
            if (ext == ".json") {
                auto jx = nlohmann::json::parse(x), jy = nlohmann::json::parse(y);
                drop_timing(jx);
                drop_timing(jy);
                same = jx == jy;
            }
            if (!same) diffs.push_back(n);
        } else if (x != y) {
            diffs.push_back(n);
        }
    }
    return diffs;
}

Outcome cli_determinism(const Ctx& c) {
    const fs::path root = c.work / "cli";
    fs::remove_all(root);
    const fs::path A = root / "a", B = root / "b";
    fs::create_directories(A);
    fs::create_directories(B);
    auto run = [&](const std::string& args) {
        const std::string cmd = "\"" + c.cli.string() + "\" " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    const std::string data = (A / "data").string(), ckpt = (A / "train" / "model.ckpt").string();
    const std::string clf = (A / "train" / "clf.bin").string();
    const fs::path cfg = root / "cell.cfg";
    {
        ExperimentConfig e;
        e.checkpoint = ckpt;
        e.dataset = data;
        e.classifier = clf;
        e.images = 4;
        e.steps = 10;
        e.attack = "advdm";
        e.budget.iterations = 3;
        e.range = {800, 900};
        e.save(cfg);
    }
    const std::string cf = " --config " + cfg.string();
    // name, arguments without --out, output is a file inside the directory
    struct Cmd {
        std::string name, args, out_file;
    };
    const std::vector<Cmd> cmds = {
        {"make-dataset", "make-dataset --count 24 --seed 3", ""},
        {"train", "train --data " + data + " --steps 30 --codec-steps 20 --classifier-steps 50 --classifier-out " + clf,
         "model.ckpt"},
        {"attack", "attack --checkpoint " + ckpt + " --data " + data + " --images 3 --iters 3 --method mist", ""},
        {"generate", "generate --checkpoint " + ckpt + " --input " + data + " --steps 10", ""},
        {"generate-inpainting", "generate --checkpoint " + ckpt + " --input " + data + " --steps 10 --pipeline inpainting", ""},
        {"evaluate", "evaluate" + cf, ""},
        {"profile-smoothness", "profile-smoothness --checkpoint " + ckpt + " --data " + data +
                                   " --images 2 --samples 4 --points 5", ""},
        {"grad-sim", "grad-sim --checkpoint " + ckpt + " --data " + data + " --images 2 --draws 2 --points 4", ""},
        {"bound", "bound --trials 3 --samples 500", ""},
        {"bound-toy", "bound --checkpoint " + ckpt + " --data " + data + " --images 4 --beta-pairs 20", ""},
        {"defend", "defend --input " + data + " --kind tvm --iters 5", ""},
        {"textual-inversion", "textual-inversion --checkpoint " + ckpt + " --group-dir " + data +
                                  " --steps 20 --generate 2", ""},
        {"sweep-ranges", "sweep-ranges --folds 2" + cf, ""},
        {"narrowband", "narrowband --centers 500,1000" + cf, ""},
        {"iter-ablation", "iter-ablation --steps 0,2" + cf, ""},
    };
    std::vector<std::string> failures;
    for (const auto& cmd : cmds) {
        const fs::path a = cmd.name == "make-dataset" ? A / "data" : cmd.name == "train" ? A / "train" : A / cmd.name;
        const fs::path b = B / a.filename();
        const fs::path a_out = cmd.out_file.empty() ? a : a / cmd.out_file;
        const fs::path b_out = cmd.out_file.empty() ? b : b / cmd.out_file;
        if (!run(cmd.args + " --out " + a_out.string())) {
            failures.push_back(cmd.name + " failed");
            continue;
        }
        if (!run("rerun " + a.string() + " --out " + b_out.string())) {
            failures.push_back(cmd.name + " rerun failed");
            continue;
        }
        for (const auto& d : diff_runs(a, b)) failures.push_back(cmd.name + ": " + d);
    }
    // report over the sweep store (it holds the benign run)
    if (run("report --runs " + (A / "sweep-ranges").string() + " --out " + (A / "report").string()) &&
        run("rerun " + (A / "report").string() + " --out " + (B / "report").string())) {
        for (const auto& d : diff_runs(A / "report", B / "report")) failures.push_back("report: " + d);
    } else {
        failures.push_back("report failed");
    }
    std::string detail = std::to_string(cmds.size() + 1) + " commands re-run from invocation.json";
    if (!failures.empty()) {
        detail += "; differences:";
        for (size_t i = 0; i < std::min<size_t>(failures.size(), 8); ++i) detail += " [" + failures[i] + "]";
    }
    return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    configure_allocator();
    CLI::App app{"acceptance criteria"};
    Ctx ctx;
    std::string only;
    app.add_option("--fixture", ctx.fixture)->required();
    app.add_option("--cli", ctx.cli)->required();
    app.add_option("--work", ctx.work);
    app.add_option("--only", only, "comma-separated criterion numbers");
    CLI11_PARSE(app, argc, argv);
    if (ctx.work.empty()) ctx.work = fs::temp_directory_path() / "ldmt_acceptance";
    ctx.fixture = fs::absolute(ctx.fixture);
    ctx.work = fs::absolute(ctx.work);
    fs::create_directories(ctx.work);

    std::set<int> selected;
    {
        std::stringstream ss(only);
        for (std::string tok; std::getline(ss, tok, ',');)
            if (!tok.empty()) selected.insert(std::stoi(tok));
    }

    using Fn = Outcome (*)(const Ctx&);
    const std::vector<std::tuple<int, std::string, Fn>> criteria = {
        {1, "PGD budget and box after every iteration", pgd_contract},
        {2, "loss gradient vs central differences", gradient_fd},
        {3, "bound soundness on synthetic quadratics", synthetic_soundness},
        {4, "bound arithmetic worked value", worked_value},
        {5, "lemma and Taylor checkers", proof_checkers},
        {6, "estimators vs brute force", estimator_oracles},
        {7, "metric sanity", metric_sanity},
        {8, "smoothest fold vs unrestricted AdvDM", fold_trend},
        {9, "reduction identities", reductions},
        {10, "CLI rerun determinism", cli_determinism},
    };
    int failed = 0;
    for (const auto& [id, name, fn] : criteria) {
        if (!selected.empty() && !selected.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << " ("
                  << fmt(secs, 3) << " s)" << std::endl;
    }
    return failed ? 1 : 0;
}
