#pragma once

#include "ldmt/image.hpp"

#include <string>
#include <vector>

namespace ldmt {

struct DefenseConfig {
    enum class Kind { Jpeg, Tvm };
    Kind kind = Kind::Jpeg;
    int jpeg_quality = 75;
    double tvm_weight = 0.1;
    int tvm_iterations = 50;

    void validate() const;
    std::string tag() const;  // e.g. "jpeg75", "tvm0.1x50"
};

// Baseline JPEG encode/decode round trip in memory.
Image jpeg_defense(const Image& image, int quality);

struct TvmResult {
    Image image;
    std::vector<double> objective;  // 0.5|u - f|^2 + w TV(u) of the kept iterate, per iteration
};

// Total-variation minimization min_u 0.5|u - f|^2 + w TV(u) per channel by
// Chambolle's dual projection (step 1/8). An iterate is only accepted when it
// does not raise the objective.
TvmResult tvm_defense_traced(const Image& image, double weight, int iterations);
Image tvm_defense(const Image& image, double weight, int iterations);

Image apply_defense(const Image& image, const DefenseConfig& cfg);

}  // namespace ldmt
