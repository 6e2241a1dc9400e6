#include "ldmt/finetune.hpp"

#include "ldmt/error.hpp"
#include "ldmt/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace ldmt {

PseudoTokenEmbedding textual_inversion(const std::vector<Image>& images, const ToyLDM& model,
                                       const TextualInversionConfig& cfg) {
    if (images.empty()) {
        throw DataError("textual inversion needs at least one image");
    }
    if (cfg.batch < 1 || cfg.steps < 0) {
        throw ConfigError("textual inversion needs a positive batch and nonnegative steps");
    }
    PseudoTokenEmbedding out;
    out.group_id = cfg.group_id;
    out.seed = cfg.seed;
    out.vector = model.embedding(Condition::null());
    if (cfg.steps == 0) {
        return out;
    }
    const Mat latents = encode_images(model, stack_rows(images));
    auto token = ad::make_param(out.vector);
    Adam opt({token}, cfg.lr);
    Rng rng(cfg.seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, latents.rows() - 1);
    std::uniform_int_distribution<int> tdist(1, model.horizon());
    constexpr size_t window = 50;
    double first_window = 0.0;
    for (int step = 0; step < cfg.steps; ++step) {
        Mat z0(cfg.batch, latents.cols());
        std::vector<int> t(static_cast<size_t>(cfg.batch));
        for (int i = 0; i < cfg.batch; ++i) {
            z0.row(i) = latents.row(pick(rng));
            t[static_cast<size_t>(i)] = tdist(rng);
        }
        const Mat noise = randn(z0.rows(), z0.cols(), rng);
        auto z_t = forward_diffuse(ad::leaf(z0), t, noise, model.schedule());
        auto pred = model.denoiser().predict(z_t, t, ad::repeat_rows(ad::leaf(token), cfg.batch));
        auto loss = ad::scale(ad::sum_squares(ad::sub(pred, ad::leaf(noise))), 1.0 / static_cast<double>(noise.size()));
        opt.step(ad::backward(loss, {token}));
        out.loss_trace.push_back(loss.scalar());

        const auto& tr = out.loss_trace;
        if (tr.size() == window) {
            first_window = std::accumulate(tr.begin(), tr.end(), 0.0) / window;
        }
        if (tr.size() >= 2 * window) {
            const double recent = std::accumulate(tr.end() - window, tr.end(), 0.0) / window;
            if (!std::isfinite(recent) || recent > 10.0 * first_window) {
                throw TrainingError("textual inversion diverged at step " + std::to_string(step));
            }
        }
    }
    out.vector = token->value;
    return out;
}

std::vector<Image> generate_from_token(const ToyLDM& model, const PseudoTokenEmbedding& token, size_t count,
                                       uint64_t seed, int steps, double guidance) {
    if (token.vector.cols() != model.cond_dim()) {
        throw DomainError("embedding dimension does not match the condition table");
    }
    return generate(model, Condition::pseudo_token(token.vector), count, steps, guidance, seed);
}

void save_embedding(const PseudoTokenEmbedding& e, const std::filesystem::path& path) {
    nlohmann::json j;
    j["group_id"] = e.group_id;
    j["seed"] = e.seed;
    j["vector"] = std::vector<double>(e.vector.data(), e.vector.data() + e.vector.size());
    j["loss_trace"] = e.loss_trace;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw ResourceError("cannot write " + path.string());
    os << j.dump(1) << '\n';
}

PseudoTokenEmbedding load_embedding(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open embedding " + path.string());
    const auto j = nlohmann::json::parse(is);
    PseudoTokenEmbedding e;
    e.group_id = j.at("group_id");
    e.seed = j.at("seed");
    const auto v = j.at("vector").get<std::vector<double>>();
    e.vector = Eigen::Map<const Mat>(v.data(), 1, static_cast<Eigen::Index>(v.size()));
    e.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    return e;
}

}  // namespace ldmt
