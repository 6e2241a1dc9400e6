#pragma once

#include "ldmt/autograd.hpp"
#include "ldmt/nn.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ldmt {

// Interleaved HWC image with values in [0, 1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<double> pixels;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c), pixels(static_cast<size_t>(h) * w * c, fill) {}

    size_t size() const { return pixels.size(); }
    double& at(int y, int x, int c) { return pixels[(static_cast<size_t>(y) * width + x) * channels + c]; }
    double at(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    // Flattened 1xN row.
    Mat row() const;
    static Image from_row(const Eigen::Ref<const Mat>& row, int h, int w, int c);
};

struct LabeledImage {
    Image image;
    int label = -1;
    std::string name;
};

using Dataset = std::vector<LabeledImage>;

// Stacks images into a BxN matrix.
Mat stack_rows(const std::vector<Image>& images);
std::vector<Image> unstack_rows(const Mat& m, int h, int w, int c);

// 8-bit RGB PNG I/O. Values are quantized with round-to-nearest on write.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

// Bilinear resize of the shorter side to `size`, then a centered crop.
Image resize_center_crop(const Image& image, int size);

// Loads every *.png in `dir` (sorted by file name). The label is parsed from a
// "c<k>_" file-name prefix or a "_c<k>" suffix, or -1 when absent.
Dataset load_image_dir(const std::filesystem::path& dir, int size = 32);

// Procedural 32x32 dataset: one of four shape classes (disc, square,
// stripes, soft gradient blob) per image with random colors and placement.
constexpr int kToyClasses = 4;
Dataset make_toy_dataset(int count, uint64_t seed, int size = 32);
void save_dataset(const Dataset& data, const std::filesystem::path& dir);

// Periodic high-contrast pattern used as the default attack target image.
// Not a reproduction of any published target image.
Image periodic_target(int size = 32);

double mean_abs_diff(const Image& a, const Image& b);
double total_variation(const Image& image);

}  // namespace ldmt
