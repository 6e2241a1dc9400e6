#pragma once

#include "ldmt/image.hpp"
#include "ldmt/nn.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ldmt {

// Maps images (B x N rows) to fixed-size feature vectors.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual Mat features(const Mat& images) const = 0;
    virtual Eigen::Index feature_dim() const = 0;
    virtual std::string provenance() const = 0;
};

// Small MLP classifier over the toy classes; its penultimate activations are
// the FID feature space.
class ToyClassifier final : public FeatureExtractor {
public:
    struct Config {
        Eigen::Index input = 32 * 32 * 3;
        Eigen::Index hidden = 128;
        Eigen::Index feature = 64;
        Eigen::Index classes = kToyClasses;
        int steps = 1500;
        int batch = 64;
        double lr = 1e-3;
        uint64_t seed = 0;
    };

    explicit ToyClassifier(Config cfg);

    // Returns the per-step training loss.
    std::vector<double> train(const Dataset& data);
    Mat features(const Mat& images) const override;
    Eigen::Index feature_dim() const override { return cfg_.feature; }
    std::string provenance() const override { return provenance_; }
    Mat probabilities(const Mat& images) const;
    std::vector<int> predict(const Mat& images) const;
    double accuracy(const Dataset& data) const;

    void save(const std::filesystem::path& path) const;
    static ToyClassifier load(const std::filesystem::path& path);
    const Config& config() const { return cfg_; }

private:
    ad::Var feature_graph(const ad::Var& x) const;
    std::vector<Parameter> parameters() const;

    Config cfg_;
    Linear l1_, l2_, head_;
    std::string provenance_;
};

// Symmetric positive (semi)definite square root by the scaled Denman-Beavers
// iteration.
Mat sqrtm_psd(const Mat& a, int max_iter = 100, double tol = 1e-12);

struct Gaussian {
    Eigen::VectorXd mean;
    Mat cov;
};

// Mean and covariance of feature rows. Below 4d samples the covariance is
// shrunk by 1e-3 * tr(S)/d * I.
Gaussian feature_statistics(const Mat& features);

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), clamped at 0.
double frechet_distance(const Gaussian& a, const Gaussian& b);
double fid_from_features(const Mat& a, const Mat& b);
double fid(const std::vector<Image>& a, const std::vector<Image>& b, const FeatureExtractor& extractor);

// exp(mean_x KL(p(y|x) || p(y))) from rows of class probabilities.
double inception_score_from_probs(const Mat& probs);
double inception_score_analogue(const std::vector<Image>& images, const ToyClassifier& classifier);

// Plug-in seam for external scorers (CLIP similarity, CLIP-IQA).
class ImageSetScorer {
public:
    virtual ~ImageSetScorer() = default;
    virtual std::string name() const = 0;
    virtual double score(const std::vector<Image>& images) const = 0;
};

struct MetricReport {
    std::string metric;
    std::string run;
    double value = 0.0;
    std::optional<double> increment;  // over the benign run of the same bundle
    size_t samples = 0;
    nlohmann::json config_echo;
};

// A generation run's metric values plus what makes runs comparable.
struct MetricRun {
    std::string name;
    std::map<std::string, double> metrics;
    size_t samples = 0;
    nlohmann::json generation;  // generation config and seeds
};

// Increments of every attacked run over the benign one; mismatched
// generation configs raise ComparabilityError.
std::vector<MetricReport> delta_report(const MetricRun& benign, const std::vector<MetricRun>& attacked);
void write_reports_csv(const std::vector<MetricReport>& reports, const std::filesystem::path& path);
nlohmann::json to_json(const MetricReport& r);

}  // namespace ldmt
