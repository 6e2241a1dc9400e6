// Command-line front end: dataset/model preparation, attacks, analyses and
// the experiment grids. Every command persists its argv as invocation.json in
// its output directory; `rerun` replays it into a new output directory.

#include "ldmt/analysis.hpp"
#include "ldmt/error.hpp"
#include "ldmt/experiment.hpp"
#include "ldmt/finetune.hpp"
#include "ldmt/plot.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace ldmt;

namespace {

std::vector<std::string> g_argv;

uint64_t seed_or_env(uint64_t s) {
    if (const char* env = std::getenv("LDMT_SEED"); env && *env) {
        ExperimentConfig probe;
        apply_seed_override(probe);
        return probe.seed;
    }
    return s;
}

void record_invocation(const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "invocation.json") << nlohmann::json{{"argv", g_argv}}.dump(2) << '\n';
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw ResourceError("cannot write " + path.string());
    os << std::setprecision(17) << j.dump(2) << '\n';
}

std::vector<Image> images_of(const Dataset& d, int count) {
    if (count > static_cast<int>(d.size()) || count < 1) {
        throw DataError("need " + std::to_string(count) + " images, dataset has " + std::to_string(d.size()));
    }
    std::vector<Image> out;
    for (int i = 0; i < count; ++i) out.push_back(d[static_cast<size_t>(i)].image);
    return out;
}

// Evenly spaced grid over [1, T] or an explicit list.
std::vector<int> time_grid(const std::vector<int>& explicit_grid, int points, int horizon) {
    if (!explicit_grid.empty()) return explicit_grid;
    if (points < 1) throw ConfigError("grid needs at least one point");
    std::vector<int> g;
    for (int k = 0; k < points; ++k) {
        g.push_back(points == 1 ? horizon : 1 + static_cast<int>(std::lround(double(k) * (horizon - 1) / (points - 1))));
    }
    return g;
}

// Experiment cell options shared by evaluate and the grids.
struct CellArgs {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    int workers = 1;
    bool force = false;

    void add(CLI::App* app) {
        app->add_option("--config", config, "key = value experiment config")->required()->check(CLI::ExistingFile);
        app->add_option("--set", sets, "override key=value (repeatable)");
        app->add_option("--out", out, "run store directory (overrides out_dir)");
        app->add_option("--workers", workers, "parallel cells")->check(CLI::PositiveNumber);
        app->add_flag("--force", force, "ignore cached records");
    }
    ExperimentConfig load() const {
        std::string text;
        {
            std::ifstream in(config);
            std::stringstream ss;
            ss << in.rdbuf();
            text = ss.str();
        }
        for (const auto& s : sets) text += "\n" + s;
        // Later duplicates override: drop earlier lines with the same key.
        std::vector<std::string> lines;
        std::map<std::string, size_t> last;
        std::stringstream ss(text);
        for (std::string l; std::getline(ss, l);) {
            const auto eq = l.find('=');
            if (eq != std::string::npos && l.find_first_not_of(" \t") != std::string::npos && l[l.find_first_not_of(" \t")] != '#') {
                std::string k = l.substr(0, eq);
                k.erase(k.find_last_not_of(" \t") + 1);
                k.erase(0, k.find_first_not_of(" \t"));
                if (auto it = last.find(k); it != last.end()) lines[it->second].clear();
                last[k] = lines.size();
            }
            lines.push_back(l);
        }
        std::string merged;
        for (const auto& l : lines) merged += l + "\n";
        ExperimentConfig cfg = ExperimentConfig::parse(merged);
        if (!out.empty()) cfg.out_dir = out;
        apply_seed_override(cfg);
        cfg.validate();
        return cfg;
    }
    CellOptions options() const {
        CellOptions o;
        o.reuse_cache = !force;
        return o;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"Adversarial attacks on a toy latent diffusion model"};
    app.require_subcommand(1);

    // make-dataset
    auto* mk = app.add_subcommand("make-dataset", "write the procedural toy dataset as PNGs");
    std::string mk_out;
    int mk_count = 400;
    uint64_t mk_seed = 0;
    mk->add_option("--out", mk_out)->required();
    mk->add_option("--count", mk_count)->check(CLI::PositiveNumber);
    mk->add_option("--seed", mk_seed);

    // train
    auto* tr = app.add_subcommand("train", "train the toy LDM (codec, then denoiser) and optionally the classifier");
    std::string tr_data, tr_out, tr_clf_out;
    TrainConfig tr_cfg, tr_codec;
    tr_codec.steps = 1500;
    ModelConfig tr_model;
    int tr_clf_steps = 1500;
    tr->add_option("--data", tr_data)->required()->check(CLI::ExistingDirectory);
    tr->add_option("--out", tr_out, "checkpoint path")->required();
    tr->add_option("--steps", tr_cfg.steps, "denoiser steps");
    tr->add_option("--codec-steps", tr_codec.steps);
    tr->add_option("--batch", tr_cfg.batch);
    tr->add_option("--lr", tr_cfg.lr);
    tr->add_option("--hidden", tr_model.denoiser_hidden);
    tr->add_option("--seed", tr_model.seed);
    tr->add_option("--classifier-out", tr_clf_out);
    tr->add_option("--classifier-steps", tr_clf_steps);

    // attack
    auto* at = app.add_subcommand("attack", "craft adversarial examples");
    std::string at_ckpt, at_data, at_out, at_method = "advdm", at_target;
    int at_images = 8;
    AttackBudget at_budget;
    std::vector<int> at_range{0, 1000};
    double at_fuse = 1.0;
    int at_depth = 5, at_mc = 1;
    uint64_t at_seed = 0;
    at->add_option("--checkpoint", at_ckpt)->required()->check(CLI::ExistingFile);
    at->add_option("--data", at_data)->required()->check(CLI::ExistingDirectory);
    at->add_option("--out", at_out)->required();
    at->add_option("--images", at_images);
    at->add_option("--method", at_method)->check(CLI::IsMember({"advdm", "encoder", "chain", "mist", "sds"}));
    at->add_option("--epsilon", at_budget.epsilon);
    at->add_option("--step-size", at_budget.step_size);
    at->add_option("--iters", at_budget.iterations);
    at->add_option("--range", at_range, "a,b for (a,b]")->expected(2)->delimiter(',');
    at->add_option("--fuse-weight", at_fuse);
    at->add_option("--depth", at_depth);
    at->add_option("--mc-samples", at_mc);
    at->add_option("--target", at_target, "target image PNG");
    at->add_option("--seed", at_seed);

    // generate
    auto* gen = app.add_subcommand("generate", "run a generation pipeline");
    std::string gen_ckpt, gen_in, gen_out, gen_pipe = "variation", gen_cond = "null";
    int gen_count = 8;
    GenerationConfig gen_cfg;
    gen->add_option("--checkpoint", gen_ckpt)->required()->check(CLI::ExistingFile);
    gen->add_option("--input", gen_in, "image directory (variation/inpainting)");
    gen->add_option("--out", gen_out)->required();
    gen->add_option("--pipeline", gen_pipe)->check(CLI::IsMember({"variation", "inpainting", "sample"}));
    gen->add_option("--count", gen_count, "images for --pipeline sample");
    gen->add_option("--strength", gen_cfg.strength);
    gen->add_option("--steps", gen_cfg.steps);
    gen->add_option("--guidance", gen_cfg.guidance);
    gen->add_option("--condition", gen_cond, "null | class:<k>");
    gen->add_option("--seed", gen_cfg.seed);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "run one experiment cell and score it");
    CellArgs ev_args;
    ev_args.add(ev);

    // profile-smoothness
    auto* ps = app.add_subcommand("profile-smoothness", "mean input-gradient norm per time step");
    std::string ps_ckpt, ps_data, ps_out;
    int ps_images = 16, ps_samples = 64, ps_points = 20;
    std::vector<int> ps_grid;
    uint64_t ps_seed = 0;
    ps->add_option("--checkpoint", ps_ckpt)->required()->check(CLI::ExistingFile);
    ps->add_option("--data", ps_data)->required()->check(CLI::ExistingDirectory);
    ps->add_option("--out", ps_out)->required();
    ps->add_option("--images", ps_images);
    ps->add_option("--samples", ps_samples, "noise draws per image and t");
    ps->add_option("--points", ps_points);
    ps->add_option("--grid", ps_grid)->delimiter(',');
    ps->add_option("--seed", ps_seed);

    // grad-sim
    auto* gs = app.add_subcommand("grad-sim", "gradient cosine-similarity matrix across time steps");
    std::string gs_ckpt, gs_data, gs_out;
    int gs_images = 8, gs_draws = 4, gs_points = 10;
    std::vector<int> gs_grid;
    bool gs_shared = false;
    uint64_t gs_seed = 0;
    gs->add_option("--checkpoint", gs_ckpt)->required()->check(CLI::ExistingFile);
    gs->add_option("--data", gs_data)->required()->check(CLI::ExistingDirectory);
    gs->add_option("--out", gs_out)->required();
    gs->add_option("--images", gs_images);
    gs->add_option("--draws", gs_draws);
    gs->add_option("--points", gs_points);
    gs->add_option("--grid", gs_grid)->delimiter(',');
    gs->add_flag("--shared-noise", gs_shared);
    gs->add_option("--seed", gs_seed);

    // bound
    auto* bd = app.add_subcommand("bound", "evaluate the transferability lower bound");
    std::string bd_out, bd_ckpt, bd_data;
    int bd_trials = 100, bd_samples = 10000, bd_images = 32, bd_pairs = 200;
    int bd_t_f = 850, bd_t_g = 250;
    double bd_eps = 8.0 / 255.0;
    uint64_t bd_seed = 0;
    bd->add_option("--out", bd_out)->required();
    bd->add_option("--trials", bd_trials, "synthetic quadratic trials");
    bd->add_option("--samples", bd_samples, "Monte-Carlo samples per synthetic trial");
    bd->add_option("--checkpoint", bd_ckpt, "toy-model mode: surrogate/target = two time steps")->check(CLI::ExistingFile);
    bd->add_option("--data", bd_data)->check(CLI::ExistingDirectory);
    bd->add_option("--images", bd_images);
    bd->add_option("--t-surrogate", bd_t_f);
    bd->add_option("--t-target", bd_t_g);
    bd->add_option("--epsilon", bd_eps, "l-infinity budget");
    bd->add_option("--beta-pairs", bd_pairs);
    bd->add_option("--seed", bd_seed);

    // defend
    auto* df = app.add_subcommand("defend", "purify images (outputs beside inputs with a tag suffix)");
    std::string df_in, df_out, df_kind = "jpeg";
    DefenseConfig df_cfg;
    df->add_option("--input", df_in, "PNG file or directory")->required()->check(CLI::ExistingPath);
    df->add_option("--out", df_out, "output directory (default: beside the inputs)");
    df->add_option("--kind", df_kind)->check(CLI::IsMember({"jpeg", "tvm"}));
    df->add_option("--quality", df_cfg.jpeg_quality);
    df->add_option("--weight", df_cfg.tvm_weight);
    df->add_option("--iters", df_cfg.tvm_iterations);

    // textual-inversion
    auto* ti = app.add_subcommand("textual-inversion", "fit a pseudo-token embedding to an image group");
    std::string ti_ckpt, ti_group, ti_out;
    TextualInversionConfig ti_cfg;
    int ti_generate = 0;
    ti->add_option("--checkpoint", ti_ckpt)->required()->check(CLI::ExistingFile);
    ti->add_option("--group-dir", ti_group)->required()->check(CLI::ExistingDirectory);
    ti->add_option("--out", ti_out, "output directory")->required();
    ti->add_option("--steps", ti_cfg.steps);
    ti->add_option("--batch", ti_cfg.batch);
    ti->add_option("--lr", ti_cfg.lr);
    ti->add_option("--seed", ti_cfg.seed);
    ti->add_option("--generate", ti_generate, "images to sample from the learned token");

    // grids
    auto* sw = app.add_subcommand("sweep-ranges", "AdvDM per time-step fold vs benign");
    CellArgs sw_args;
    sw_args.add(sw);
    int sw_folds = 10;
    sw->add_option("--folds", sw_folds);
    auto* nb = app.add_subcommand("narrowband", "width-one AdvDM ranges (c-1, c]");
    CellArgs nb_args;
    nb_args.add(nb);
    std::vector<int> nb_centers{100, 500, 1000};
    nb->add_option("--centers", nb_centers)->delimiter(',');
    auto* ia = app.add_subcommand("iter-ablation", "same attack at several iteration budgets");
    CellArgs ia_args;
    ia_args.add(ia);
    std::vector<int> ia_steps{40, 500};
    ia->add_option("--steps", ia_steps)->delimiter(',');

    auto* rp = app.add_subcommand("report", "consolidate run records into tables");
    std::string rp_runs, rp_out;
    rp->add_option("--runs", rp_runs)->required()->check(CLI::ExistingDirectory);
    rp->add_option("--out", rp_out)->required();

    auto* rr = app.add_subcommand("rerun", "replay a persisted invocation into a new output directory");
    std::string rr_dir, rr_out;
    rr->add_option("dir", rr_dir)->required()->check(CLI::ExistingDirectory);
    rr->add_option("--out", rr_out)->required();

    CLI11_PARSE(app, argc, argv);

    if (*mk) {
        const auto data = make_toy_dataset(mk_count, seed_or_env(mk_seed));
        save_dataset(data, mk_out);
        record_invocation(mk_out);
        std::cout << "wrote " << data.size() << " images to " << mk_out << '\n';
    } else if (*tr) {
        const Dataset data = load_image_dir(tr_data);
        tr_model.seed = seed_or_env(tr_model.seed);
        tr_cfg.seed = tr_codec.seed = tr_model.seed;
        ToyLDM model = make_toy_ldm(tr_model);
        auto codec = std::dynamic_pointer_cast<PatchCodec>(model.codec_ptr());
        const auto cr = train_codec(*codec, data, tr_codec);
        const auto dr = train_denoiser(model, data, tr_cfg);
        save_checkpoint(model, tr_model, tr_out);
        record_invocation(fs::absolute(tr_out).parent_path());
        const fs::path base = fs::path(tr_out).replace_extension();
        write_json(base.string() + ".train.json",
                   {{"codec_loss", cr.loss_trace},
                    {"denoiser_loss", dr.loss_trace},
                    {"codec_mae", codec_reconstruction_mae(model.codec(), data)},
                    {"config", to_json(tr_model)}});
        std::cout << "checkpoint " << tr_out << " sha256 " << file_sha256(tr_out) << '\n';
        if (!tr_clf_out.empty()) {
            ToyClassifier::Config cc;
            cc.steps = tr_clf_steps;
            cc.seed = tr_model.seed;
            ToyClassifier clf(cc);
            clf.train(data);
            clf.save(tr_clf_out);
            std::cout << "classifier " << tr_clf_out << " train accuracy " << clf.accuracy(data) << '\n';
        }
    } else if (*at) {
        record_invocation(at_out);
        ExperimentConfig c;
        c.checkpoint = at_ckpt;
        c.dataset = at_data;
        const Workspace ws = Workspace::open(c);
        const auto imgs = ws.images(at_images);
        c.attack = at_method;
        c.budget = at_budget;
        c.range = {at_range[0], at_range[1]};
        c.range.validate(ws.model().horizon());
        AttackOptions opts;
        opts.mc_samples = at_mc;
        opts.surrogate_id = ws.hashes().at("model");
        const TargetSpec target{at_target.empty() ? periodic_target() : resize_center_crop(read_png(at_target), 32),
                                Condition::null()};
        const uint64_t seed = seed_or_env(at_seed);
        std::vector<AdversarialExample> aes;
        switch (attack_method_from_string(at_method)) {
            case AttackMethod::AdvDM: aes = advdm_attack(imgs, ws.model(), c.range, at_budget, seed, opts); break;
            case AttackMethod::SDS: aes = sds_attack(imgs, ws.model(), c.range, at_budget, seed, opts); break;
            case AttackMethod::Encoder: aes = encoder_attack(imgs, ws.model(), target, at_budget, seed, opts); break;
            case AttackMethod::Mist:
                aes = mist_attack(imgs, ws.model(), target, {at_fuse, c.range}, at_budget, seed, opts);
                break;
            case AttackMethod::Chain: {
                ChainConfig cc;
                cc.depth = at_depth;
                aes = chain_attack(imgs, ws.model(), target, cc, at_budget, seed, opts);
                break;
            }
        }
        nlohmann::json side = nlohmann::json::array();
        for (size_t i = 0; i < aes.size(); ++i) {
            const std::string name = ws.data()[i].name;
            write_png(fs::path(at_out) / name, aes[i].adversarial());
            nlohmann::json e = {{"file", name},
                                {"method", to_string(aes[i].method)},
                                {"epsilon", at_budget.epsilon},
                                {"step_size", at_budget.step_size},
                                {"iterations", at_budget.iterations},
                                {"seed", seed},
                                {"surrogate_checkpoint_sha256", aes[i].surrogate_id},
                                {"loss_trace", aes[i].loss_trace}};
            if (aes[i].range) e["range"] = {aes[i].range->a, aes[i].range->b};
            side.push_back(e);
        }
        write_json(fs::path(at_out) / "sidecar.json", side);
        std::cout << "wrote " << aes.size() << " adversarial examples to " << at_out << '\n';
    } else if (*gen) {
        record_invocation(gen_out);
        ToyLDM model = load_checkpoint(gen_ckpt);
        ExperimentConfig probe;
        probe.condition = gen_cond;
        const Condition cond = probe.generation_condition();
        gen_cfg.seed = seed_or_env(gen_cfg.seed);
        std::vector<Image> out;
        std::vector<std::string> names;
        if (gen_pipe == "sample") {
            out = generate(model, cond, static_cast<size_t>(gen_count), gen_cfg.steps, gen_cfg.guidance, gen_cfg.seed);
            for (size_t i = 0; i < out.size(); ++i) names.push_back("sample_" + std::to_string(i) + ".png");
        } else {
            if (gen_in.empty()) throw ConfigError("--input is required for " + gen_pipe);
            const Dataset in = load_image_dir(gen_in);
            std::vector<Image> imgs;
            for (const auto& li : in) {
                imgs.push_back(li.image);
                names.push_back(li.name);
            }
            out = gen_pipe == "variation"
                      ? run_variation_batch(imgs, cond, gen_cfg, model)
                      : run_inpainting_batch(imgs, cond.with_mask(half_mask(32, 32)), gen_cfg, model);
        }
        for (size_t i = 0; i < out.size(); ++i) write_png(fs::path(gen_out) / names[i], out[i]);
        std::cout << "wrote " << out.size() << " images to " << gen_out << '\n';
    } else if (*ev) {
        const ExperimentConfig cfg = ev_args.load();
        record_invocation(cfg.out_dir);
        const Workspace ws = Workspace::open(cfg);
        const RunRecord r = run_cells({cfg}, ws, 1, ev_args.options()).front();
        std::cout << std::setprecision(17) << r.to_json().dump(2) << '\n';
    } else if (*ps) {
        record_invocation(ps_out);
        ToyLDM model = load_checkpoint(ps_ckpt);
        const auto imgs = images_of(load_image_dir(ps_data), ps_images);
        const auto grid = time_grid(ps_grid, ps_points, model.horizon());
        const uint64_t seed = seed_or_env(ps_seed);
        const auto p = smoothness_profile(model, imgs, grid, ps_samples, seed);
        write_profile_csv(p, fs::path(ps_out) / "profile.csv");
        write_json(fs::path(ps_out) / "profile.json",
                   {{"seed", seed}, {"images", ps_images}, {"samples_per_point", ps_samples},
                    {"checkpoint_sha256", file_sha256(ps_ckpt)}, {"t_grid", p.t_grid}, {"values", p.values},
                    {"std_err", p.std_err}});
        std::vector<double> xs(p.t_grid.begin(), p.t_grid.end());
        line_chart(fs::path(ps_out) / "profile.png", xs, p.values, p.std_err);
        for (size_t i = 0; i < grid.size(); ++i) std::cout << grid[i] << ' ' << p.values[i] << '\n';
    } else if (*gs) {
        record_invocation(gs_out);
        ToyLDM model = load_checkpoint(gs_ckpt);
        const auto imgs = images_of(load_image_dir(gs_data), gs_images);
        const auto grid = time_grid(gs_grid, gs_points, model.horizon());
        const uint64_t seed = seed_or_env(gs_seed);
        const auto m = grad_similarity_matrix(model, imgs, grid, gs_draws, seed, gs_shared);
        write_gradsim_csv(m, fs::path(gs_out) / "gradsim.csv");
        write_json(fs::path(gs_out) / "gradsim.json",
                   {{"seed", seed}, {"images", gs_images}, {"draws", gs_draws}, {"shared_noise", gs_shared},
                    {"pairs", m.pairs}, {"skipped", m.skipped}, {"checkpoint_sha256", file_sha256(gs_ckpt)}});
        heatmap(fs::path(gs_out) / "gradsim.png", m.entries);
    } else if (*bd) {
        record_invocation(bd_out);
        const uint64_t seed = seed_or_env(bd_seed);
        if (bd_ckpt.empty()) {
            std::ofstream csv(fs::path(bd_out) / "bound.csv");
            csv << std::setprecision(17) << "trial,alpha,gamma_f,gamma_g,c_f,c_g,s_inf,radius,beta,bound,rate,radius95,verdict\n";
            nlohmann::json all = nlohmann::json::array();
            int violated = 0, verified = 0;
            for (int k = 0; k < bd_trials; ++k) {
                const auto t = synthetic_quadratic_bound(derive_rng(seed, static_cast<uint64_t>(k))(),
                                                         static_cast<size_t>(bd_samples));
                const auto& r = t.report;
                csv << k << ',' << r.inputs.alpha << ',' << r.inputs.gamma_f << ',' << r.inputs.gamma_g << ','
                    << r.inputs.c_f << ',' << r.inputs.c_g << ',' << r.inputs.s_inf << ',' << r.inputs.radius << ','
                    << r.inputs.beta << ',' << r.bound << ',' << r.rate.rate << ',' << r.rate.radius << ','
                    << to_string(r.verdict) << '\n';
                all.push_back(to_json(r));
                violated += r.verdict == Verdict::Violated;
                verified += r.verdict == Verdict::Verified;
            }
            write_json(fs::path(bd_out) / "bound.json",
                       {{"mode", "synthetic-quadratic"}, {"seed", seed}, {"trials", bd_trials},
                        {"samples", bd_samples}, {"verified", verified}, {"violated", violated}, {"reports", all}});
            std::cout << "verified " << verified << ", vacuous " << bd_trials - verified - violated << ", violated "
                      << violated << '\n';
        } else {
            if (bd_data.empty()) throw ConfigError("--data is required with --checkpoint");
            ToyLDM model = load_checkpoint(bd_ckpt);
            const auto imgs = images_of(load_image_dir(bd_data), bd_images);
            const double radius = linf_to_l2_radius(bd_eps, static_cast<Eigen::Index>(imgs.front().size()));
            // One fixed noise draw per image; F and G are the per-t losses.
            Rng rng = derive_rng(seed, 0);
            const Mat noise = randn(bd_images, model.codec().latent_dim(), rng);
            auto loss_at = [&](int t) {
                return SampleLoss{
                    [&, t](size_t i, const Vec& x) {
                        return loss_gradient(model, t, Mat(x.transpose()), noise.row(static_cast<Eigen::Index>(i))).loss[0];
                    },
                    [&, t](size_t i, const Vec& x) {
                        return Vec(loss_gradient(model, t, Mat(x.transpose()), noise.row(static_cast<Eigen::Index>(i)))
                                       .grad.transpose());
                    }};
            };
            const SampleLoss f = loss_at(bd_t_f), g = loss_at(bd_t_g);
            std::vector<Vec> clean, adv;
            for (size_t i = 0; i < imgs.size(); ++i) {
                const Vec x = imgs[i].row().transpose();
                const Vec gr = f.gradient(i, x);
                clean.push_back(x);
                adv.push_back(gr.norm() > 0 ? Vec(x + radius * gr / gr.norm()) : x);
            }
            BoundConfig cfg;
            cfg.radius = radius;
            cfg.beta = std::max(estimate_beta(model, bd_t_f, imgs, bd_pairs, radius, seed),
                                estimate_beta(model, bd_t_g, imgs, bd_pairs, radius, seed + 1));
            cfg.beta_exact = false;
            const auto rep = verify_bound(f, g, clean, adv, cfg);
            nlohmann::json j = to_json(rep);
            j["mode"] = "toy-model";
            j["t_surrogate"] = bd_t_f;
            j["t_target"] = bd_t_g;
            j["seed"] = seed;
            j["checkpoint_sha256"] = file_sha256(bd_ckpt);
            write_json(fs::path(bd_out) / "bound.json", j);
            std::cout << "bound " << rep.bound << " rate " << rep.rate.rate << " (" << to_string(rep.verdict) << ")\n";
        }
    } else if (*df) {
        df_cfg.kind = df_kind == "jpeg" ? DefenseConfig::Kind::Jpeg : DefenseConfig::Kind::Tvm;
        df_cfg.validate();
        std::vector<fs::path> files;
        if (fs::is_directory(df_in)) {
            for (const auto& e : fs::directory_iterator(df_in))
                if (e.path().extension() == ".png") files.push_back(e.path());
            std::sort(files.begin(), files.end());
        } else {
            files.push_back(df_in);
        }
        const std::string tag = "_" + df_cfg.tag();
        if (!df_out.empty()) record_invocation(df_out);
        size_t n = 0;
        for (const auto& f : files) {
            if (f.stem().string().ends_with(tag)) continue;
            const fs::path dir = df_out.empty() ? f.parent_path() : fs::path(df_out);
            const fs::path out = dir / (f.stem().string() + tag + ".png");
            write_png(out, apply_defense(read_png(f), df_cfg));
            ++n;
        }
        std::cout << "defended " << n << " images (" << df_cfg.tag() << ")\n";
    } else if (*ti) {
        record_invocation(ti_out);
        ToyLDM model = load_checkpoint(ti_ckpt);
        std::vector<Image> imgs;
        for (const auto& li : load_image_dir(ti_group)) imgs.push_back(li.image);
        ti_cfg.seed = seed_or_env(ti_cfg.seed);
        ti_cfg.group_id = fs::path(ti_group).filename().string();
        const auto e = textual_inversion(imgs, model, ti_cfg);
        save_embedding(e, fs::path(ti_out) / "embedding.json");
        if (ti_generate > 0) {
            const auto out = generate_from_token(model, e, static_cast<size_t>(ti_generate), ti_cfg.seed);
            for (size_t i = 0; i < out.size(); ++i) {
                write_png(fs::path(ti_out) / ("token_" + std::to_string(i) + ".png"), out[i]);
            }
        }
        std::cout << "final loss " << (e.loss_trace.empty() ? 0.0 : e.loss_trace.back()) << '\n';
    } else if (*sw || *nb || *ia) {
        const CellArgs& a = *sw ? sw_args : *nb ? nb_args : ia_args;
        const ExperimentConfig cfg = a.load();
        record_invocation(cfg.out_dir);
        const Workspace ws = Workspace::open(cfg);
        GridResult g;
        std::string stem;
        if (*sw) {
            g = sweep_ranges(cfg, sw_folds, ws, a.workers, true, a.options());
            stem = "sweep_ranges";
        } else if (*nb) {
            g = narrowband(cfg, nb_centers, ws, a.workers, a.options());
            stem = "narrowband";
        } else {
            g = iteration_ablation(cfg, ia_steps, ws, a.workers, a.options());
            stem = "iter_ablation";
        }
        for (const auto& w : g.warnings) std::cerr << "warning: " << w << '\n';
        if (g.rows.empty()) {
            std::cout << "no cells\n";
            return 0;
        }
        write_grid(g, fs::path(cfg.out_dir) / stem);
        std::cout << std::setprecision(6) << "benign";
        for (const auto& [k, v] : g.benign.metrics) std::cout << ' ' << k << '=' << v;
        std::cout << '\n';
        for (const auto& r : g.rows) {
            std::cout << r.label;
            for (const auto& [k, v] : r.delta) std::cout << " d" << k << '=' << v;
            std::cout << '\n';
        }
    } else if (*rp) {
        record_invocation(rp_out);
        const auto reps = full_report(rp_runs, rp_out);
        std::cout << "wrote " << reps.size() << " report rows to " << rp_out << '\n';
    } else if (*rr) {
        std::ifstream in(fs::path(rr_dir) / "invocation.json");
        if (!in) throw DataError("no invocation.json in " + rr_dir);
        auto args = nlohmann::json::parse(in).at("argv").get<std::vector<std::string>>();
        bool replaced = false;
        for (size_t i = 0; i + 1 < args.size(); ++i) {
            if (args[i] == "--out") {
                args[i + 1] = rr_out;
                replaced = true;
            }
        }
        if (!replaced) {
            args.push_back("--out");
            args.push_back(rr_out);
        }
        // train: the classifier follows the checkpoint.
        for (size_t i = 0; i + 1 < args.size(); ++i) {
            if (args[i] == "--classifier-out") {
                args[i + 1] = (fs::path(rr_out).parent_path() / fs::path(args[i + 1]).filename()).string();
            }
        }
        // Cell commands must not reuse the original cache.
        if (args.size() > 1 && (args[1] == "evaluate" || args[1] == "sweep-ranges" || args[1] == "narrowband" ||
                                args[1] == "iter-ablation") &&
            std::find(args.begin(), args.end(), "--force") == args.end()) {
            args.push_back("--force");
        }
        std::vector<char*> cargv;
        for (auto& s : args) cargv.push_back(s.data());
        g_argv = args;
        return run(static_cast<int>(cargv.size()), cargv.data());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    ldmt::configure_allocator();
    g_argv.assign(argv, argv + argc);
    try {
        return run(argc, argv);
    } catch (const ldmt::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << '\n';
        return 1;
    }
}
