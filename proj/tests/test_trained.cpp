// Checks against the trained fixture (dataset, checkpoint, classifier) built
// by the ctest setup step.
#include "doctest.h"
#include "helpers.hpp"

#include "ldmt/analysis.hpp"
#include "ldmt/attacks.hpp"
#include "ldmt/error.hpp"
#include "ldmt/experiment.hpp"
#include "ldmt/finetune.hpp"
#include "ldmt/metrics.hpp"

#include <fstream>

using namespace ldmt;
using namespace ldmt::test;

namespace {

struct Fixture {
    ToyLDM model;
    Dataset data;
    ToyClassifier clf;
};

const Fixture& fixture() {
    static const Fixture f{load_checkpoint(fixture_dir() / "model.ckpt"), load_image_dir(fixture_dir() / "data"),
                           ToyClassifier::load(fixture_dir() / "clf.bin")};
    return f;
}

std::vector<Image> first_images(size_t n) {
    std::vector<Image> out;
    for (size_t i = 0; i < n; ++i) out.push_back(fixture().data[i].image);
    return out;
}

}  // namespace

TEST_CASE("denoiser loss decreases after smoothing") {
    std::ifstream in(fixture_dir() / "model.train.json");
    REQUIRE(in);
    const auto trace = nlohmann::json::parse(in).at("denoiser_loss").get<std::vector<double>>();
    REQUIRE(trace.size() >= 1000);
    // 100-step block means: no block rises above its predecessor by more than
    // two standard errors of the difference, and the trend is strongly down.
    std::vector<double> mean, se;
    for (size_t b = 0; b + 100 <= trace.size(); b += 100) {
        double s = 0, s2 = 0;
        for (size_t i = b; i < b + 100; ++i) s += trace[i];
        const double m = s / 100;
        for (size_t i = b; i < b + 100; ++i) s2 += (trace[i] - m) * (trace[i] - m);
        mean.push_back(m);
        se.push_back(std::sqrt(s2 / 99) / 10);
    }
    for (size_t k = 1; k < mean.size(); ++k) {
        CHECK(mean[k] - mean[k - 1] <= 2 * std::hypot(se[k], se[k - 1]));
    }
    CHECK(mean.back() < 0.5 * mean.front());
}

TEST_CASE("codec reconstruction") {
    CHECK(codec_reconstruction_mae(fixture().model.codec(), fixture().data) < 0.05);
}

TEST_CASE("trained profile is stable") {
    const auto p = smoothness_profile(fixture().model, first_images(16), {1, 100, 300, 500, 700, 900, 1000}, 64, 3);
    for (size_t i = 0; i < p.values.size(); ++i) {
        CHECK(std::isfinite(p.values[i]));
        CHECK(p.values[i] > 0.0);
        CHECK(p.std_err[i] < 0.1 * p.values[i]);
    }
}

TEST_CASE("loss gradient on the trained model matches finite differences") {
    const auto& m = fixture().model;
    Rng rng(5);
    const Mat x = fixture().data[3].image.row();
    for (int t : {10, 500, 990}) {
        const Mat e = randn(1, m.codec().latent_dim(), rng);
        const auto lg = loss_gradient(m, t, x, e);
        std::uniform_int_distribution<Eigen::Index> pick(0, x.cols() - 1);
        for (int k = 0; k < 10; ++k) {
            const Eigen::Index j = pick(rng);
            Mat xp = x, xm = x;
            xp(0, j) += 1e-3;
            xm(0, j) -= 1e-3;
            const double fd = (loss_gradient(m, t, xp, e).loss[0] - loss_gradient(m, t, xm, e).loss[0]) / 2e-3;
            CHECK(std::abs(fd - lg.grad(0, j)) <= 1e-3 * std::max(std::abs(fd), 1e-2));
        }
    }
}

TEST_CASE("AdvDM raises the held-out diffusion loss") {
    const auto imgs = first_images(16);
    for (const TimeStepRange r : {TimeStepRange{0, 1000}, TimeStepRange{900, 1000}}) {
        const auto aes = advdm_attack(imgs, fixture().model, r, AttackBudget{}, 4);
        std::vector<Image> adv;
        for (const auto& a : aes) adv.push_back(a.adversarial());
        const auto before = heldout_advdm_loss(fixture().model, imgs, r, 16, 99);
        const auto after = heldout_advdm_loss(fixture().model, adv, r, 16, 99);
        double b = 0, a = 0;
        for (size_t i = 0; i < before.size(); ++i) {
            b += before[i];
            a += after[i];
        }
        CHECK(a > b);
    }
}

TEST_CASE("sampling from noise stays on the latent scale") {
    // Regression guard: an unstable noise predictor makes DDIM blow up
    // geometrically while the per-t training loss still looks fine.
    const auto& m = fixture().model;
    const Mat data_z = encode_images(m, stack_rows(first_images(64)));
    const double data_rms = std::sqrt(data_z.array().square().mean());
    Mat z = pipeline_noise(m, 7, 0, 64);
    const auto grid = denoising_timesteps(m.horizon(), 50);
    for (size_t k = 0; k + 1 < grid.size(); ++k) {
        z = denoise_step(m, ad::leaf(z), grid[k], grid[k + 1], Condition::null(), 1.0).value();
        CHECK(std::sqrt(z.array().square().mean()) < 2.0 * data_rms);
    }
}

TEST_CASE("class tokens steer sampling") {
    const auto& f = fixture();
    for (int cls = 0; cls < kToyClasses; ++cls) {
        const auto gen = generate(f.model, Condition::class_token(cls), 40, 50, 7.5, 7);
        const auto pred = f.clf.predict(stack_rows(gen));
        const double acc = static_cast<double>(std::count(pred.begin(), pred.end(), cls)) / pred.size();
        MESSAGE("class " << cls << " accuracy " << acc);
        CHECK(acc > 1.0 / kToyClasses);
    }
}

TEST_CASE("pseudo token learned from one class generates that class") {
    const auto& f = fixture();
    for (int cls = 0; cls < kToyClasses; ++cls) {
        std::vector<Image> group;
        for (const auto& li : f.data)
            if (li.label == cls && group.size() < 5) group.push_back(li.image);
        TextualInversionConfig cfg;
        cfg.steps = 1500;
        cfg.seed = 1;
        const auto token = textual_inversion(group, f.model, cfg);
        // Smoothed loss at the end is below the start.
        double head = 0, tail = 0;
        for (int i = 0; i < 100; ++i) {
            head += token.loss_trace[static_cast<size_t>(i)];
            tail += token.loss_trace[token.loss_trace.size() - 1 - static_cast<size_t>(i)];
        }
        CHECK(tail < head);
        const auto gen = generate_from_token(f.model, token, 40, 7, 50);
        const auto pred = f.clf.predict(stack_rows(gen));
        const double acc = static_cast<double>(std::count(pred.begin(), pred.end(), cls)) / pred.size();
        MESSAGE("class " << cls << " accuracy " << acc);
        CHECK(acc > 1.0 / kToyClasses);
    }
}

TEST_CASE("experiment cells are reproducible") {
    ExperimentConfig cfg;
    cfg.checkpoint = (fixture_dir() / "model.ckpt").string();
    cfg.dataset = (fixture_dir() / "data").string();
    cfg.classifier = (fixture_dir() / "clf.bin").string();
    cfg.out_dir = (std::filesystem::temp_directory_path() / "ldmt_cells_test").string();
    std::filesystem::remove_all(cfg.out_dir);
    cfg.images = 12;
    cfg.steps = 20;
    cfg.attack = "advdm";
    cfg.range = {800, 900};
    cfg.budget.iterations = 5;
    const Workspace ws = Workspace::open(cfg);
    CellOptions fresh;
    fresh.reuse_cache = false;
    const auto a = run_cell(cfg, ws, fresh);
    const auto b = run_cell(cfg, ws, fresh);
    CHECK(a.metrics == b.metrics);
    CHECK(a.id == b.id);
    const auto cached = run_cell(cfg, ws);
    CHECK(cached.metrics == a.metrics);

    // Zero iterations: benign-equal generations, zero increments.
    const auto g = iteration_ablation(cfg, {0}, ws);
    REQUIRE(g.rows.size() == 1);
    for (const auto& [k, v] : g.rows[0].delta) CHECK(v == 0.0);

    // One fold equals the unrestricted attack.
    const auto s = sweep_ranges(cfg, 1, ws);
    REQUIRE(s.rows.size() == 1);
    ExperimentConfig full = cfg;
    full.range = {0, 1000};
    CHECK(s.rows[0].record.metrics == run_cell(full, ws).metrics);

    // Report over the store; a missing artifact names its path.
    const auto out = std::filesystem::temp_directory_path() / "ldmt_report_test";
    const auto reps = full_report(cfg.out_dir, out);
    CHECK(!reps.empty());
    std::filesystem::remove_all(std::filesystem::path(a.artifacts.at("generated")));
    try {
        full_report(cfg.out_dir, out);
        FAIL("missing artifact not detected");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(a.artifacts.at("generated")) != std::string::npos);
    }
    std::filesystem::remove_all(cfg.out_dir);
    std::filesystem::remove_all(out);
}
