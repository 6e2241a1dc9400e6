#pragma once

#include "ldmt/autograd.hpp"
#include "ldmt/image.hpp"
#include "ldmt/nn.hpp"
#include "ldmt/schedule.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ldmt {

struct ImageShape {
    int height = 32;
    int width = 32;
    int channels = 3;
    Eigen::Index size() const { return static_cast<Eigen::Index>(height) * width * channels; }
};

// Encoder/decoder pair between pixel space (B x H*W*C) and latent space
// (B x latent_dim). Implementations must be deterministic.
class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual ad::Var encode(const ad::Var& images) const = 0;
    virtual ad::Var decode(const ad::Var& latents) const = 0;
    virtual ImageShape image_shape() const = 0;
    virtual Eigen::Index latent_dim() const = 0;
    virtual std::vector<Parameter> parameters() const { return {}; }
    // 1 x latent_dim mask: a latent entry is 1 when any pixel it covers is
    // masked. `pixel_mask` holds H*W values in {0,1}.
    virtual Mat latent_mask(const std::vector<double>& pixel_mask) const;
};

// Time-conditioned noise predictor eps(z_t, t, c). `t` holds one step per row
// and `cond` one embedding row per latent row.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual ad::Var predict(const ad::Var& z_t, const std::vector<int>& t, const ad::Var& cond) const = 0;
    virtual std::vector<Parameter> parameters() const { return {}; }
};

// Non-overlapping patch autoencoder: each PxP patch maps to `latent_channels`
// values through a small MLP. A 32x32x3 image with P=4 yields an 8x8x4 latent.
// Latents are standardized per channel after training.
class PatchCodec final : public LatentCodec {
public:
    struct Config {
        ImageShape image;
        int patch = 4;
        int latent_channels = 4;
        int hidden = 96;
    };

    PatchCodec(Config cfg, Rng& rng);

    ad::Var encode(const ad::Var& images) const override;
    ad::Var decode(const ad::Var& latents) const override;
    ImageShape image_shape() const override { return cfg_.image; }
    Eigen::Index latent_dim() const override;
    std::vector<Parameter> parameters() const override;

    // Raw (unnormalized) paths used during codec training.
    ad::Var encode_raw(const ad::Var& images) const;
    ad::Var decode_raw(const ad::Var& latents) const;
    // Sets per-channel latent normalization from raw latent statistics.
    void fit_normalization(const Mat& raw_latents);
    Mat latent_mask(const std::vector<double>& pixel_mask) const override;
    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    std::vector<Eigen::Index> patch_order_;    // image column -> patch-major order
    std::vector<Eigen::Index> inverse_order_;
    Linear enc1_, enc2_, dec1_, dec2_, dec3_;
    ad::NodePtr latent_mean_;   // 1 x latent_channels
    ad::NodePtr latent_scale_;  // 1 x latent_channels
};

// MLP noise predictor with sinusoidal time features injected into every
// hidden layer together with the condition embedding.
class MlpDenoiser final : public Denoiser {
public:
    struct Config {
        Eigen::Index latent_dim = 256;
        Eigen::Index cond_dim = 16;
        Eigen::Index time_features = 32;
        Eigen::Index hidden = 384;
        int horizon = 1000;
    };

    MlpDenoiser(Config cfg, Rng& rng);

    ad::Var predict(const ad::Var& z_t, const std::vector<int>& t, const ad::Var& cond) const override;
    std::vector<Parameter> parameters() const override;
    const Config& config() const { return cfg_; }
    Mat time_features(const std::vector<int>& t) const;

private:
    Config cfg_;
    Linear in_, mid_, ctx1_, ctx2_, out_;
    Linear gate_;  // per-coordinate skip gain from (t, c): at large t eps ~ z_t
};

struct Condition {
    enum class Kind { ClassToken, PseudoToken, Null };
    Kind kind = Kind::Null;
    int id = -1;
    Mat embedding;                      // 1 x cond_dim for pseudo tokens
    std::optional<std::vector<double>> mask;  // H*W values in {0,1}; inpainting only

    static Condition null() { return {}; }
    static Condition class_token(int id) { return {Kind::ClassToken, id, {}, std::nullopt}; }
    static Condition pseudo_token(Mat embedding) { return {Kind::PseudoToken, -1, std::move(embedding), std::nullopt}; }
    Condition with_mask(std::vector<double> m) const {
        Condition c = *this;
        c.mask = std::move(m);
        return c;
    }
};

// The attackable latent diffusion model: codec, denoiser, schedule and a
// condition table whose last row is the null token.
class ToyLDM {
public:
    ToyLDM(std::shared_ptr<LatentCodec> codec, std::shared_ptr<Denoiser> denoiser, NoiseSchedule schedule,
           Eigen::Index num_classes, Eigen::Index cond_dim, Rng& rng);

    const LatentCodec& codec() const { return *codec_; }
    const Denoiser& denoiser() const { return *denoiser_; }
    std::shared_ptr<LatentCodec> codec_ptr() const { return codec_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    int horizon() const { return schedule_.horizon(); }
    Eigen::Index num_classes() const { return num_classes_; }
    Eigen::Index cond_dim() const { return condition_table_->value.cols(); }
    int null_id() const { return static_cast<int>(num_classes_); }
    const ad::NodePtr& condition_table() const { return condition_table_; }

    // 1 x cond_dim embedding row for a condition (copy, no graph).
    Mat embedding(const Condition& c) const;
    // `rows` copies of the condition embedding, differentiable w.r.t. the
    // table when the condition is a class or null token.
    ad::Var condition_rows(const Condition& c, Eigen::Index rows) const;

    // eps_theta(z_t, t, c) for a batch sharing one condition.
    ad::Var predict_noise(const ad::Var& z_t, const std::vector<int>& t, const Condition& c) const;

    std::vector<Parameter> parameters() const;
    bool trained() const { return trained_; }
    void mark_trained(bool v = true) { trained_ = v; }
    nlohmann::json& config_echo() { return config_echo_; }
    const nlohmann::json& config_echo() const { return config_echo_; }

private:
    std::shared_ptr<LatentCodec> codec_;
    std::shared_ptr<Denoiser> denoiser_;
    NoiseSchedule schedule_;
    Eigen::Index num_classes_;
    ad::NodePtr condition_table_;
    bool trained_ = false;
    nlohmann::json config_echo_ = nlohmann::json::object();
};

struct ModelConfig {
    ImageShape image;
    int patch = 4;
    int latent_channels = 4;
    int codec_hidden = 96;
    Eigen::Index cond_dim = 16;
    Eigen::Index time_features = 32;
    Eigen::Index denoiser_hidden = 384;
    int horizon = 1000;
    std::string schedule = "linear";
    Eigen::Index num_classes = kToyClasses;
    uint64_t seed = 0;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Freshly initialized toy model with a PatchCodec and an MlpDenoiser.
ToyLDM make_toy_ldm(const ModelConfig& cfg);

struct TrainConfig {
    int steps = 4000;
    int batch = 64;
    double lr = 1e-3;
    double cond_dropout = 0.1;
    uint64_t seed = 0;
    int log_every = 0;
};

struct TrainResult {
    std::vector<double> loss_trace;
};

// Codec reconstruction training (mean squared pixel error); fits the latent
// normalization at the end.
TrainResult train_codec(PatchCodec& codec, const Dataset& data, const TrainConfig& cfg);
double codec_reconstruction_mae(const LatentCodec& codec, const Dataset& data);

// Denoiser training on min E||eps - eps_theta(z_t, t, c)||^2 with a frozen
// codec. Class labels condition the model; `cond_dropout` replaces them with
// the null token. Throws TrainingError when the running loss exceeds ten
// times the initial loss for a whole epoch.
TrainResult train_denoiser(ToyLDM& model, const Dataset& data, const TrainConfig& cfg);

// Mean per-element denoising loss estimated with a fixed seed.
double denoising_loss(const ToyLDM& model, const Dataset& data, int draws, uint64_t seed);

// Checkpoint archive: magic, format version, JSON header (config echo,
// schedule arrays, parameter table), raw little-endian float64 payload.
constexpr uint32_t kCheckpointVersion = 1;
void save_checkpoint(const ToyLDM& model, const ModelConfig& cfg, const std::filesystem::path& path);
ToyLDM load_checkpoint(const std::filesystem::path& path, ModelConfig* cfg_out = nullptr);

// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

// Helpers shared by pipelines and attacks.
Mat encode_images(const ToyLDM& model, const Mat& images);
Mat decode_latents(const ToyLDM& model, const Mat& latents);

}  // namespace ldmt
