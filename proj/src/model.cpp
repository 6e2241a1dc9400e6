#include "ldmt/model.hpp"

#include "ldmt/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace ldmt {

// ---------------------------------------------------------------------------
// PatchCodec

PatchCodec::PatchCodec(Config cfg, Rng& rng) : cfg_(cfg) {
    const auto& im = cfg_.image;
    if (im.height % cfg_.patch != 0 || im.width % cfg_.patch != 0) {
        throw ConfigError("image size must be a multiple of the codec patch size");
    }
    const int pw = im.width / cfg_.patch;
    const int patch_len = cfg_.patch * cfg_.patch * im.channels;
    patch_order_.resize(static_cast<size_t>(im.size()));
    inverse_order_.resize(static_cast<size_t>(im.size()));
    for (int y = 0; y < im.height; ++y) {
        for (int x = 0; x < im.width; ++x) {
            for (int c = 0; c < im.channels; ++c) {
                const Eigen::Index src = (static_cast<Eigen::Index>(y) * im.width + x) * im.channels + c;
                const int p = (y / cfg_.patch) * pw + x / cfg_.patch;
                const int q = ((y % cfg_.patch) * cfg_.patch + x % cfg_.patch) * im.channels + c;
                const Eigen::Index dst = static_cast<Eigen::Index>(p) * patch_len + q;
                patch_order_[static_cast<size_t>(dst)] = src;
                inverse_order_[static_cast<size_t>(src)] = dst;
            }
        }
    }
    enc1_ = Linear("codec.enc1", patch_len, cfg_.hidden, rng);
    enc2_ = Linear("codec.enc2", cfg_.hidden, cfg_.latent_channels, rng);
    dec1_ = Linear("codec.dec1", cfg_.latent_channels, cfg_.hidden, rng);
    dec2_ = Linear("codec.dec2", cfg_.hidden, cfg_.hidden, rng);
    dec3_ = Linear("codec.dec3", cfg_.hidden, patch_len, rng);
    latent_mean_ = ad::make_param(Mat::Zero(1, cfg_.latent_channels));
    latent_scale_ = ad::make_param(Mat::Ones(1, cfg_.latent_channels));
}

Eigen::Index PatchCodec::latent_dim() const {
    const auto& im = cfg_.image;
    return static_cast<Eigen::Index>(im.height / cfg_.patch) * (im.width / cfg_.patch) * cfg_.latent_channels;
}

namespace {

Eigen::Index patches_per_image(const PatchCodec::Config& c) {
    return static_cast<Eigen::Index>(c.image.height / c.patch) * (c.image.width / c.patch);
}

}  // namespace

ad::Var PatchCodec::encode_raw(const ad::Var& images) const {
    if (images.cols() != cfg_.image.size()) {
        throw DomainError("encode: image width mismatch");
    }
    const Eigen::Index b = images.rows();
    const Eigen::Index np = patches_per_image(cfg_);
    auto patches = ad::reshape(ad::gather_cols(images, patch_order_), b * np, cfg_.image.size() / np);
    // Centered inputs keep the first layer well conditioned.
    auto centered = ad::add_const(patches, Mat::Constant(patches.rows(), patches.cols(), -0.5));
    return enc2_(ad::silu(enc1_(centered)));
}

ad::Var PatchCodec::decode_raw(const ad::Var& latents) const {
    auto h = ad::silu(dec2_(ad::silu(dec1_(latents))));
    return ad::sigmoid(dec3_(h));
}

ad::Var PatchCodec::encode(const ad::Var& images) const {
    const Eigen::Index b = images.rows();
    auto raw = encode_raw(images);
    Mat shift = (-latent_mean_->value).replicate(raw.rows(), 1);
    Mat inv = latent_scale_->value.cwiseInverse().replicate(raw.rows(), 1);
    auto z = ad::mul_const(ad::add_const(raw, shift), inv);
    return ad::reshape(z, b, latent_dim());
}

ad::Var PatchCodec::decode(const ad::Var& latents) const {
    if (latents.cols() != latent_dim()) {
        throw DomainError("decode: latent width mismatch");
    }
    const Eigen::Index b = latents.rows();
    const Eigen::Index np = patches_per_image(cfg_);
    auto z = ad::reshape(latents, b * np, cfg_.latent_channels);
    Mat scale = latent_scale_->value.replicate(z.rows(), 1);
    Mat mean = latent_mean_->value.replicate(z.rows(), 1);
    auto raw = ad::add_const(ad::mul_const(z, scale), mean);
    auto patches = decode_raw(raw);
    auto flat = ad::reshape(patches, b, cfg_.image.size());
    return ad::gather_cols(flat, inverse_order_);
}

Mat LatentCodec::latent_mask(const std::vector<double>&) const {
    throw StateError("this codec does not support latent masks");
}

Mat PatchCodec::latent_mask(const std::vector<double>& pixel_mask) const {
    const auto& im = cfg_.image;
    if (pixel_mask.size() != static_cast<size_t>(im.height) * im.width) {
        throw DomainError("mask must have one value per pixel");
    }
    const int pw = im.width / cfg_.patch;
    Mat m = Mat::Zero(1, latent_dim());
    for (int y = 0; y < im.height; ++y) {
        for (int x = 0; x < im.width; ++x) {
            const double v = pixel_mask[static_cast<size_t>(y) * im.width + x];
            if (v != 0.0 && v != 1.0) {
                throw DomainError("mask values must be 0 or 1");
            }
            if (v == 1.0) {
                const int p = (y / cfg_.patch) * pw + x / cfg_.patch;
                m.middleCols(static_cast<Eigen::Index>(p) * cfg_.latent_channels, cfg_.latent_channels).setOnes();
            }
        }
    }
    return m;
}

void PatchCodec::fit_normalization(const Mat& raw) {
    Mat mean = raw.colwise().mean();
    Mat centered = raw.rowwise() - mean.row(0);
    Mat var = centered.colwise().squaredNorm() / std::max<double>(1.0, static_cast<double>(raw.rows() - 1));
    latent_mean_->value = mean;
    latent_scale_->value = var.cwiseSqrt().cwiseMax(1e-6);
}

std::vector<Parameter> PatchCodec::parameters() const {
    std::vector<Parameter> out;
    enc1_.collect(out);
    enc2_.collect(out);
    dec1_.collect(out);
    dec2_.collect(out);
    dec3_.collect(out);
    out.push_back({"codec.latent_mean", latent_mean_});
    out.push_back({"codec.latent_scale", latent_scale_});
    return out;
}

// ---------------------------------------------------------------------------
// MlpDenoiser

MlpDenoiser::MlpDenoiser(Config cfg, Rng& rng) : cfg_(cfg) {
    const Eigen::Index ctx = cfg_.time_features + cfg_.cond_dim;
    in_ = Linear("denoiser.in", cfg_.latent_dim, cfg_.hidden, rng);
    ctx1_ = Linear("denoiser.ctx1", ctx, cfg_.hidden, rng);
    mid_ = Linear("denoiser.mid", cfg_.hidden, cfg_.hidden, rng);
    ctx2_ = Linear("denoiser.ctx2", ctx, cfg_.hidden, rng);
    out_ = Linear("denoiser.out", cfg_.hidden, cfg_.latent_dim, rng);
    gate_ = Linear("denoiser.gate", ctx, cfg_.latent_dim, rng);
}

Mat MlpDenoiser::time_features(const std::vector<int>& t) const {
    const Eigen::Index half = cfg_.time_features / 2;
    Mat f(static_cast<Eigen::Index>(t.size()), cfg_.time_features);
    for (size_t i = 0; i < t.size(); ++i) {
        const double s = static_cast<double>(t[i]);
        for (Eigen::Index k = 0; k < half; ++k) {
            const double freq = std::exp(-std::log(static_cast<double>(cfg_.horizon)) * static_cast<double>(k) / half);
            f(static_cast<Eigen::Index>(i), 2 * k) = std::sin(s * freq);
            f(static_cast<Eigen::Index>(i), 2 * k + 1) = std::cos(s * freq);
        }
    }
    return f;
}

ad::Var MlpDenoiser::predict(const ad::Var& z_t, const std::vector<int>& t, const ad::Var& cond) const {
    if (z_t.cols() != cfg_.latent_dim || static_cast<Eigen::Index>(t.size()) != z_t.rows() ||
        cond.rows() != z_t.rows() || cond.cols() != cfg_.cond_dim) {
        throw DomainError("denoiser: input shape mismatch");
    }
    auto ctx = ad::concat_cols({ad::leaf(time_features(t)), cond});
    auto h1 = ad::silu(ad::add(in_(z_t), ctx1_(ctx)));
    auto h2 = ad::silu(ad::add(mid_(h1), ctx2_(ctx)));
    return ad::add(out_(h2), ad::mul(gate_(ctx), z_t));
}

std::vector<Parameter> MlpDenoiser::parameters() const {
    std::vector<Parameter> out;
    in_.collect(out);
    ctx1_.collect(out);
    mid_.collect(out);
    ctx2_.collect(out);
    out_.collect(out);
    gate_.collect(out);
    return out;
}

// ---------------------------------------------------------------------------
// ToyLDM

ToyLDM::ToyLDM(std::shared_ptr<LatentCodec> codec, std::shared_ptr<Denoiser> denoiser, NoiseSchedule schedule,
               Eigen::Index num_classes, Eigen::Index cond_dim, Rng& rng)
    : codec_(std::move(codec)), denoiser_(std::move(denoiser)), schedule_(std::move(schedule)),
      num_classes_(num_classes) {
    condition_table_ = ad::make_param(randn(num_classes + 1, cond_dim, rng));
}

Mat ToyLDM::embedding(const Condition& c) const {
    switch (c.kind) {
        case Condition::Kind::PseudoToken:
            if (c.embedding.rows() != 1 || c.embedding.cols() != cond_dim()) {
                throw DomainError("pseudo-token embedding has the wrong dimension");
            }
            return c.embedding;
        case Condition::Kind::ClassToken:
            if (c.id < 0 || c.id >= num_classes_) {
                throw DomainError("class id " + std::to_string(c.id) + " out of range");
            }
            return condition_table_->value.row(c.id);
        case Condition::Kind::Null:
            break;
    }
    return condition_table_->value.row(null_id());
}

ad::Var ToyLDM::condition_rows(const Condition& c, Eigen::Index rows) const {
    if (c.kind == Condition::Kind::PseudoToken) {
        return ad::repeat_rows(ad::leaf(embedding(c)), rows);
    }
    const int id = c.kind == Condition::Kind::Null ? null_id() : c.id;
    if (id < 0 || id > null_id()) {
        throw DomainError("class id " + std::to_string(id) + " out of range");
    }
    return ad::repeat_rows(ad::slice_rows(ad::leaf(condition_table_), id, 1), rows);
}

ad::Var ToyLDM::predict_noise(const ad::Var& z_t, const std::vector<int>& t, const Condition& c) const {
    return denoiser_->predict(z_t, t, condition_rows(c, z_t.rows()));
}

std::vector<Parameter> ToyLDM::parameters() const {
    std::vector<Parameter> out = codec_->parameters();
    for (auto& p : denoiser_->parameters()) {
        out.push_back(p);
    }
    out.push_back({"condition_table", condition_table_});
    return out;
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"image_height", c.image.height},
            {"image_width", c.image.width},
            {"image_channels", c.image.channels},
            {"patch", c.patch},
            {"latent_channels", c.latent_channels},
            {"codec_hidden", c.codec_hidden},
            {"cond_dim", c.cond_dim},
            {"time_features", c.time_features},
            {"denoiser_hidden", c.denoiser_hidden},
            {"horizon", c.horizon},
            {"schedule", c.schedule},
            {"num_classes", c.num_classes},
            {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.image.height = j.at("image_height").get<int>();
    c.image.width = j.at("image_width").get<int>();
    c.image.channels = j.at("image_channels").get<int>();
    c.patch = j.at("patch").get<int>();
    c.latent_channels = j.at("latent_channels").get<int>();
    c.codec_hidden = j.at("codec_hidden").get<int>();
    c.cond_dim = j.at("cond_dim").get<Eigen::Index>();
    c.time_features = j.at("time_features").get<Eigen::Index>();
    c.denoiser_hidden = j.at("denoiser_hidden").get<Eigen::Index>();
    c.horizon = j.at("horizon").get<int>();
    c.schedule = j.at("schedule").get<std::string>();
    c.num_classes = j.at("num_classes").get<Eigen::Index>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

ToyLDM make_toy_ldm(const ModelConfig& cfg) {
    Rng rng(cfg.seed);
    PatchCodec::Config cc;
    cc.image = cfg.image;
    cc.patch = cfg.patch;
    cc.latent_channels = cfg.latent_channels;
    cc.hidden = cfg.codec_hidden;
    auto codec = std::make_shared<PatchCodec>(cc, rng);
    MlpDenoiser::Config dc;
    dc.latent_dim = codec->latent_dim();
    dc.cond_dim = cfg.cond_dim;
    dc.time_features = cfg.time_features;
    dc.hidden = cfg.denoiser_hidden;
    dc.horizon = cfg.horizon;
    auto denoiser = std::make_shared<MlpDenoiser>(dc, rng);
    ToyLDM model(codec, denoiser, build_schedule(cfg.horizon, cfg.schedule), cfg.num_classes, cfg.cond_dim, rng);
    model.config_echo() = to_json(cfg);
    return model;
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<ad::NodePtr> nodes_of(const std::vector<Parameter>& ps) {
    std::vector<ad::NodePtr> out;
    for (const auto& p : ps) {
        out.push_back(p.node);
    }
    return out;
}

Mat dataset_matrix(const Dataset& data) {
    std::vector<Image> imgs;
    imgs.reserve(data.size());
    for (const auto& li : data) {
        imgs.push_back(li.image);
    }
    return stack_rows(imgs);
}

double lr_at(const TrainConfig& cfg, int step) {
    // Constant rate with a linear decay to 10% over the final fifth.
    const double decay_start = 0.8 * cfg.steps;
    if (step < decay_start) {
        return cfg.lr;
    }
    const double f = (step - decay_start) / std::max(1.0, cfg.steps - decay_start);
    return cfg.lr * (1.0 - 0.9 * f);
}

void check_divergence(const std::vector<double>& trace, size_t epoch_steps) {
    if (trace.size() < 2 * epoch_steps) {
        return;
    }
    const double initial = trace.front();
    bool all_above = true;
    for (size_t i = trace.size() - epoch_steps; i < trace.size(); ++i) {
        all_above = all_above && (trace[i] > 10.0 * initial || !std::isfinite(trace[i]));
    }
    if (all_above) {
        throw TrainingError("training diverged: loss above 10x initial for a full epoch (last " +
                            std::to_string(trace.back()) + ", initial " + std::to_string(initial) + ")");
    }
}

}  // namespace

TrainResult train_codec(PatchCodec& codec, const Dataset& data, const TrainConfig& cfg) {
    if (data.empty()) {
        throw DataError("train_codec: empty dataset");
    }
    TrainResult result;
    const Mat all = dataset_matrix(data);
    auto params = codec.parameters();
    std::vector<ad::NodePtr> trainable;
    for (const auto& p : params) {
        if (p.name != "codec.latent_mean" && p.name != "codec.latent_scale") {
            trainable.push_back(p.node);
        }
    }
    Adam opt(trainable, cfg.lr);
    Rng rng(cfg.seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, all.rows() - 1);
    const size_t epoch = std::max<size_t>(1, data.size() / static_cast<size_t>(std::max(1, cfg.batch)));
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<Eigen::Index> idx(static_cast<size_t>(cfg.batch));
        for (auto& i : idx) {
            i = pick(rng);
        }
        Mat batch(cfg.batch, all.cols());
        for (int i = 0; i < cfg.batch; ++i) {
            batch.row(i) = all.row(idx[static_cast<size_t>(i)]);
        }
        auto x = ad::leaf(batch);
        // Normalization cancels between encode and decode.
        auto recon_img = codec.decode(codec.encode(x));
        auto loss = ad::scale(ad::sum_squares(ad::sub(recon_img, x)), 1.0 / static_cast<double>(batch.size()));
        opt.set_lr(lr_at(cfg, step));
        opt.step(ad::backward(loss, trainable));
        result.loss_trace.push_back(loss.scalar());
        check_divergence(result.loss_trace, epoch);
    }
    // Standardize latents over the training set.
    codec.fit_normalization(codec.encode_raw(ad::leaf(all)).value());
    return result;
}

double codec_reconstruction_mae(const LatentCodec& codec, const Dataset& data) {
    if (data.empty()) {
        return 0.0;
    }
    const Mat all = dataset_matrix(data);
    const Mat recon = codec.decode(codec.encode(ad::leaf(all))).value();
    return (recon - all).cwiseAbs().mean();
}

TrainResult train_denoiser(ToyLDM& model, const Dataset& data, const TrainConfig& cfg) {
    if (data.empty()) {
        throw DataError("train_denoiser: empty dataset");
    }
    TrainResult result;
    if (cfg.steps <= 0) {
        return result;
    }
    const Mat latents = encode_images(model, dataset_matrix(data));
    std::vector<ad::NodePtr> trainable = nodes_of(model.denoiser().parameters());
    trainable.push_back(model.condition_table());
    Adam opt(trainable, cfg.lr);
    Rng rng(cfg.seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, latents.rows() - 1);
    std::uniform_int_distribution<int> tdist(1, model.horizon());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const size_t epoch = std::max<size_t>(1, data.size() / static_cast<size_t>(std::max(1, cfg.batch)));
    for (int step = 0; step < cfg.steps; ++step) {
        Mat z0(cfg.batch, latents.cols());
        std::vector<int> t(static_cast<size_t>(cfg.batch));
        std::vector<Eigen::Index> cond_ids(static_cast<size_t>(cfg.batch));
        for (int i = 0; i < cfg.batch; ++i) {
            const Eigen::Index k = pick(rng);
            z0.row(i) = latents.row(k);
            t[static_cast<size_t>(i)] = tdist(rng);
            const int label = data[static_cast<size_t>(k)].label;
            const bool drop = label < 0 || label >= model.num_classes() || u(rng) < cfg.cond_dropout;
            cond_ids[static_cast<size_t>(i)] = drop ? model.null_id() : label;
        }
        const Mat noise = randn(z0.rows(), z0.cols(), rng);
        auto z_t = forward_diffuse(ad::leaf(z0), t, noise, model.schedule());
        auto cond = ad::gather_rows(ad::leaf(model.condition_table()), cond_ids);
        auto pred = model.denoiser().predict(z_t, t, cond);
        auto loss = ad::scale(ad::sum_squares(ad::sub(pred, ad::leaf(noise))), 1.0 / static_cast<double>(noise.size()));
        opt.set_lr(lr_at(cfg, step));
        opt.step(ad::backward(loss, trainable));
        result.loss_trace.push_back(loss.scalar());
        check_divergence(result.loss_trace, epoch);
    }
    model.mark_trained();
    return result;
}

double denoising_loss(const ToyLDM& model, const Dataset& data, int draws, uint64_t seed) {
    if (data.empty() || draws <= 0) {
        throw DataError("denoising_loss: nothing to evaluate");
    }
    const Mat latents = encode_images(model, dataset_matrix(data));
    Rng rng(seed);
    std::uniform_int_distribution<int> tdist(1, model.horizon());
    double total = 0.0;
    for (int d = 0; d < draws; ++d) {
        std::vector<int> t(static_cast<size_t>(latents.rows()));
        for (auto& v : t) {
            v = tdist(rng);
        }
        const Mat noise = randn(latents.rows(), latents.cols(), rng);
        auto z_t = forward_diffuse(ad::leaf(latents), t, noise, model.schedule());
        auto pred = model.predict_noise(z_t, t, Condition::null());
        total += (pred.value() - noise).squaredNorm() / static_cast<double>(noise.size());
    }
    return total / draws;
}

Mat encode_images(const ToyLDM& model, const Mat& images) {
    return model.codec().encode(ad::leaf(images)).value();
}

Mat decode_latents(const ToyLDM& model, const Mat& latents) {
    return model.codec().decode(ad::leaf(latents)).value();
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'L', 'D', 'M', 'T', 'C', 'K', 'P', 'T'};

}  // namespace

void save_checkpoint(const ToyLDM& model, const ModelConfig& cfg, const std::filesystem::path& path) {
    nlohmann::json header;
    header["config"] = to_json(cfg);
    header["config_echo"] = model.config_echo();
    header["trained"] = model.trained();
    header["schedule"] = {{"alphas", model.schedule().alphas()}, {"alpha_bars", model.schedule().alpha_bars()}};
    nlohmann::json table = nlohmann::json::array();
    for (const auto& p : model.parameters()) {
        table.push_back({{"name", p.name}, {"rows", p.node->value.rows()}, {"cols", p.node->value.cols()}});
    }
    header["parameters"] = table;
    const std::string text = header.dump();

    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write checkpoint " + path.string());
    }
    out.write(kMagic, sizeof(kMagic));
    const uint32_t version = kCheckpointVersion;
    const uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : model.parameters()) {
        out.write(reinterpret_cast<const char*>(p.node->value.data()),
                  static_cast<std::streamsize>(p.node->value.size() * sizeof(double)));
    }
    if (!out) {
        throw DataError("short write to checkpoint " + path.string());
    }
}

ToyLDM load_checkpoint(const std::filesystem::path& path, ModelConfig* cfg_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint " + path.string());
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("not a checkpoint: " + path.string());
    }
    uint32_t version = 0;
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (version != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    const auto header = nlohmann::json::parse(text);
    const ModelConfig cfg = model_config_from_json(header.at("config"));
    ToyLDM model = make_toy_ldm(cfg);
    model.config_echo() = header.at("config_echo");
    const auto params = model.parameters();
    const auto& table = header.at("parameters");
    if (table.size() != params.size()) {
        throw DataError("checkpoint parameter table does not match the model");
    }
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& e = table[i];
        auto& v = params[i].node->value;
        if (e.at("name").get<std::string>() != params[i].name || e.at("rows").get<Eigen::Index>() != v.rows() ||
            e.at("cols").get<Eigen::Index>() != v.cols()) {
            throw DataError("checkpoint parameter '" + e.at("name").get<std::string>() + "' does not match");
        }
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!in) {
        throw DataError("truncated checkpoint " + path.string());
    }
    const auto stored = header.at("schedule").at("alpha_bars").get<std::vector<double>>();
    if (stored != model.schedule().alpha_bars()) {
        throw DataError("checkpoint schedule does not match its configuration");
    }
    model.mark_trained(header.at("trained").get<bool>());
    if (cfg_out) {
        *cfg_out = cfg;
    }
    return model;
}

std::string file_sha256(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot hash " + path.string());
    }
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    EVP_DigestFinal_ex(ctx, md, &n);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < n; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    }
    return hex.str();
}

}  // namespace ldmt
