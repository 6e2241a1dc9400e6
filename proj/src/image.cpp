#include "ldmt/image.hpp"

#include "ldmt/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace ldmt {

Mat Image::row() const {
    Mat m(1, static_cast<Eigen::Index>(pixels.size()));
    std::copy(pixels.begin(), pixels.end(), m.data());
    return m;
}

Image Image::from_row(const Eigen::Ref<const Mat>& row, int h, int w, int c) {
    Image img(h, w, c);
    if (row.size() != static_cast<Eigen::Index>(img.size())) {
        throw DomainError("Image::from_row: size mismatch");
    }
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        img.pixels[static_cast<size_t>(i)] = row(0, i);
    }
    return img;
}

Mat stack_rows(const std::vector<Image>& images) {
    if (images.empty()) {
        return Mat(0, 0);
    }
    Mat m(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(images[0].size()));
    for (size_t i = 0; i < images.size(); ++i) {
        if (!images[i].same_shape(images[0])) {
            throw DomainError("stack_rows: mixed image shapes");
        }
        m.row(static_cast<Eigen::Index>(i)) = images[i].row();
    }
    return m;
}

std::vector<Image> unstack_rows(const Mat& m, int h, int w, int c) {
    std::vector<Image> out;
    out.reserve(static_cast<size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out.push_back(Image::from_row(m.row(i), h, w, c));
    }
    return out;
}

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Image read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) {
        throw DataError("cannot open " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("malformed PNG " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_strip_alpha(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const size_t stride = png_get_rowbytes(png, info);
    std::vector<png_byte> buf(stride * static_cast<size_t>(h));
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) {
        rows[static_cast<size_t>(y)] = buf.data() + stride * static_cast<size_t>(y);
    }
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(h, w, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(y, x, c) = rows[static_cast<size_t>(y)][x * 3 + c] / 255.0;
            }
        }
    }
    return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 3 && image.channels != 1) {
        throw DataError("write_png: only 1 or 3 channels supported");
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) {
        throw DataError("cannot write " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG encode failed for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<size_t>(image.width * image.channels));
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                const double v = std::clamp(image.at(y, x, c), 0.0, 1.0);
                row[static_cast<size_t>(x * image.channels + c)] = static_cast<png_byte>(std::lround(v * 255.0));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image resize_center_crop(const Image& image, int size) {
    const double s = static_cast<double>(size) / std::min(image.height, image.width);
    const int rh = std::max(size, static_cast<int>(std::lround(image.height * s)));
    const int rw = std::max(size, static_cast<int>(std::lround(image.width * s)));
    Image resized(rh, rw, image.channels);
    for (int y = 0; y < rh; ++y) {
        const double sy = std::clamp((y + 0.5) / s - 0.5, 0.0, image.height - 1.0);
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double fy = sy - y0;
        for (int x = 0; x < rw; ++x) {
            const double sx = std::clamp((x + 0.5) / s - 0.5, 0.0, image.width - 1.0);
            const int x0 = static_cast<int>(std::floor(sx));
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double fx = sx - x0;
            for (int c = 0; c < image.channels; ++c) {
                const double top = image.at(y0, x0, c) * (1 - fx) + image.at(y0, x1, c) * fx;
                const double bot = image.at(y1, x0, c) * (1 - fx) + image.at(y1, x1, c) * fx;
                resized.at(y, x, c) = top * (1 - fy) + bot * fy;
            }
        }
    }
    Image out(size, size, image.channels);
    const int oy = (rh - size) / 2, ox = (rw - size) / 2;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                out.at(y, x, c) = resized.at(y + oy, x + ox, c);
            }
        }
    }
    return out;
}

namespace {

// "c<k>_..." prefix or "..._c<k>" suffix.
int label_from_name(const std::string& stem) {
    auto parse = [](const std::string& digits) {
        if (digits.empty() || digits.size() > 6 || digits.find_first_not_of("0123456789") != std::string::npos) return -1;
        return std::stoi(digits);
    };
    if (stem.size() > 2 && stem[0] == 'c') {
        const auto us = stem.find('_');
        if (us != std::string::npos) {
            const int k = parse(stem.substr(1, us - 1));
            if (k >= 0) return k;
        }
    }
    const auto pos = stem.rfind("_c");
    return pos == std::string::npos ? -1 : parse(stem.substr(pos + 2));
}

}  // namespace

Dataset load_image_dir(const std::filesystem::path& dir, int size) {
    if (!std::filesystem::is_directory(dir)) {
        throw DataError("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    Dataset out;
    for (const auto& f : files) {
        LabeledImage li;
        Image img = read_png(f);
        li.image = (img.height == size && img.width == size) ? std::move(img) : resize_center_crop(img, size);
        li.name = f.filename().string();
        li.label = label_from_name(f.stem().string());
        out.push_back(std::move(li));
    }
    return out;
}

namespace {

double smoothstep(double edge0, double edge1, double x) {
    const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
    return t * t * (3 - 2 * t);
}

}  // namespace

Dataset make_toy_dataset(int count, uint64_t seed, int size) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset out;
    for (int i = 0; i < count; ++i) {
        const int label = i % kToyClasses;
        double bg[3], fg[3];
        for (int c = 0; c < 3; ++c) {
            bg[c] = 0.1 + 0.35 * u(rng);
            fg[c] = 0.55 + 0.4 * u(rng);
        }
        const double cx = size * (0.3 + 0.4 * u(rng));
        const double cy = size * (0.3 + 0.4 * u(rng));
        const double r = size * (0.18 + 0.12 * u(rng));
        const double phase = u(rng) * 6.283185307179586;
        const double period = 5.0 + 4.0 * u(rng);
        Image img(size, size, 3);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                double w = 0.0;
                switch (label) {
                    case 0:  // disc
                        w = 1.0 - smoothstep(r - 1.0, r + 1.0, std::sqrt(dx * dx + dy * dy));
                        break;
                    case 1:  // square
                        w = 1.0 - smoothstep(r - 1.0, r + 1.0, std::max(std::abs(dx), std::abs(dy)));
                        break;
                    case 2:  // stripes
                        w = 0.5 + 0.5 * std::sin(6.283185307179586 * (y + 0.5) / period + phase);
                        break;
                    default:  // gradient blob
                        w = std::exp(-(dx * dx + dy * dy) / (2.0 * r * r));
                        break;
                }
                for (int c = 0; c < 3; ++c) {
                    img.at(y, x, c) = std::clamp(bg[c] * (1 - w) + fg[c] * w, 0.0, 1.0);
                }
            }
        }
        LabeledImage li;
        li.image = std::move(img);
        li.label = label;
        char name[64];
        std::snprintf(name, sizeof(name), "%04d_c%d.png", i, label);
        li.name = name;
        out.push_back(std::move(li));
    }
    return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& li : data) {
        write_png(dir / li.name, li.image);
    }
}

Image periodic_target(int size) {
    Image img(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const bool on = ((x / 4) + (y / 4)) % 2 == 0;
            const double ring = 0.5 + 0.5 * std::cos(0.9 * (x + 2 * y));
            img.at(y, x, 0) = on ? 0.9 : 0.1;
            img.at(y, x, 1) = ring;
            img.at(y, x, 2) = on ? 0.15 : 0.85;
        }
    }
    return img;
}

double mean_abs_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) {
        throw DomainError("mean_abs_diff: shape mismatch");
    }
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        s += std::abs(a.pixels[i] - b.pixels[i]);
    }
    return a.size() ? s / static_cast<double>(a.size()) : 0.0;
}

double total_variation(const Image& image) {
    double tv = 0.0;
    for (int c = 0; c < image.channels; ++c) {
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                const double v = image.at(y, x, c);
                const double gx = x + 1 < image.width ? image.at(y, x + 1, c) - v : 0.0;
                const double gy = y + 1 < image.height ? image.at(y + 1, x, c) - v : 0.0;
                tv += std::sqrt(gx * gx + gy * gy);
            }
        }
    }
    return tv;
}

}  // namespace ldmt
