#pragma once

#include "ldmt/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ldmt {

struct PseudoTokenEmbedding {
    Mat vector;  // 1 x cond_dim
    std::string group_id;
    uint64_t seed = 0;
    std::vector<double> loss_trace;
};

struct TextualInversionConfig {
    int steps = 3000;
    int batch = 4;
    double lr = 5e-3;
    uint64_t seed = 0;
    std::string group_id = "group";
};

// Fits a condition embedding S* to the images with the denoising loss; every
// model weight stays frozen. Starts from the null-token embedding.
PseudoTokenEmbedding textual_inversion(const std::vector<Image>& images, const ToyLDM& model,
                                       const TextualInversionConfig& cfg);

std::vector<Image> generate_from_token(const ToyLDM& model, const PseudoTokenEmbedding& token, size_t count,
                                       uint64_t seed, int steps = 100, double guidance = 7.5);

void save_embedding(const PseudoTokenEmbedding& e, const std::filesystem::path& path);
PseudoTokenEmbedding load_embedding(const std::filesystem::path& path);

}  // namespace ldmt
