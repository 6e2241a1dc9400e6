#pragma once

#include "ldmt/model.hpp"
#include "ldmt/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <memory>

namespace ldmt::test {

// Small untrained toy model; fast enough for per-test construction.
inline ModelConfig tiny_config(uint64_t seed = 1) {
    ModelConfig c;
    c.codec_hidden = 16;
    c.denoiser_hidden = 48;
    c.seed = seed;
    return c;
}

inline ToyLDM tiny_model(uint64_t seed = 1, bool trained = true) {
    ToyLDM m = make_toy_ldm(tiny_config(seed));
    m.mark_trained(trained);
    return m;
}

inline std::vector<Image> random_images(size_t n, uint64_t seed, int size = 32) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Image> out;
    for (size_t i = 0; i < n; ++i) {
        Image im(size, size, 3);
        for (auto& v : im.pixels) v = u(rng);
        out.push_back(im);
    }
    return out;
}

// Pixel space is the latent space.
class IdentityCodec final : public LatentCodec {
public:
    explicit IdentityCodec(ImageShape s = {}) : shape_(s) {}
    ad::Var encode(const ad::Var& x) const override { return x; }
    ad::Var decode(const ad::Var& z) const override { return z; }
    ImageShape image_shape() const override { return shape_; }
    Eigen::Index latent_dim() const override { return shape_.size(); }

private:
    ImageShape shape_;
};

// eps(z, t, c) = W z (time and condition ignored).
class LinearDenoiser final : public Denoiser {
public:
    explicit LinearDenoiser(Mat w) : w_(std::move(w)) {}
    ad::Var predict(const ad::Var& z, const std::vector<int>&, const ad::Var&) const override {
        return ad::matmul(z, ad::leaf(Mat(w_.transpose())));
    }
    const Mat& weight() const { return w_; }

private:
    Mat w_;
};

// Returns a fixed matrix regardless of input.
class ConstantDenoiser final : public Denoiser {
public:
    explicit ConstantDenoiser(Mat out) : out_(std::move(out)) {}
    ad::Var predict(const ad::Var& z, const std::vector<int>&, const ad::Var&) const override {
        return ad::leaf(out_.topRows(z.rows()));
    }

private:
    Mat out_;
};

// Predicts the noise that maps z0 to z_t exactly: (z_t - sqrt(ab) z0) / sqrt(1 - ab).
class OracleDenoiser final : public Denoiser {
public:
    OracleDenoiser(Mat z0, NoiseSchedule s) : z0_(std::move(z0)), s_(std::move(s)) {}
    ad::Var predict(const ad::Var& z, const std::vector<int>& t, const ad::Var&) const override {
        Mat out(z.rows(), z.cols());
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double ab = s_.alpha_bar(t[static_cast<size_t>(i)]);
            out.row(i) = (z.value().row(i) - std::sqrt(ab) * z0_.row(i)) / std::sqrt(1.0 - ab);
        }
        return ad::leaf(out);
    }

private:
    Mat z0_;
    NoiseSchedule s_;
};

inline ToyLDM stub_model(std::shared_ptr<LatentCodec> codec, std::shared_ptr<Denoiser> den, int horizon = 1000) {
    Rng rng(7);
    ToyLDM m(std::move(codec), std::move(den), build_schedule(horizon, "linear"), kToyClasses, 16, rng);
    m.mark_trained();
    return m;
}

// Trained fixture produced by the ctest setup step.
inline std::filesystem::path fixture_dir() {
    const char* env = std::getenv("LDMT_FIXTURE_DIR");
    return env ? std::filesystem::path(env) : std::filesystem::path(LDMT_FIXTURE_DIR_DEFAULT);
}

}  // namespace ldmt::test
