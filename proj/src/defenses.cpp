#include "ldmt/defenses.hpp"

#include "ldmt/error.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <sstream>

#include <jpeglib.h>

namespace ldmt {

void DefenseConfig::validate() const {
    if (kind == Kind::Jpeg && (jpeg_quality < 1 || jpeg_quality > 100)) {
        throw ConfigError("jpeg quality must lie in [1, 100]");
    }
    if (kind == Kind::Tvm && (!(tvm_weight > 0.0) || tvm_iterations < 1)) {
        throw ConfigError("tvm needs a positive weight and iteration count");
    }
}

std::string DefenseConfig::tag() const {
    if (kind == Kind::Jpeg) {
        return "jpeg" + std::to_string(jpeg_quality);
    }
    std::ostringstream os;
    os << "tvm" << tvm_weight << "x" << tvm_iterations;
    return os.str();
}

namespace {

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegError*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

}  // namespace

Image jpeg_defense(const Image& image, int quality) {
    if (quality < 1 || quality > 100) {
        throw ConfigError("jpeg quality must lie in [1, 100]");
    }
    if (image.channels != 3 && image.channels != 1) {
        throw ProcessingError("jpeg needs 1 or 3 channels");
    }
    std::vector<unsigned char> raw(image.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        raw[i] = static_cast<unsigned char>(std::lround(std::clamp(image.pixels[i], 0.0, 1.0) * 255.0));
    }

    unsigned char* buffer = nullptr;
    unsigned long buffer_size = 0;
    JpegError err{};
    {
        jpeg_compress_struct c{};
        c.err = jpeg_std_error(&err.mgr);
        err.mgr.error_exit = on_jpeg_error;
        if (setjmp(err.jump)) {
            jpeg_destroy_compress(&c);
            std::free(buffer);
            throw ProcessingError(std::string("jpeg encode failed: ") + err.message);
        }
        jpeg_create_compress(&c);
        jpeg_mem_dest(&c, &buffer, &buffer_size);
        c.image_width = static_cast<JDIMENSION>(image.width);
        c.image_height = static_cast<JDIMENSION>(image.height);
        c.input_components = image.channels;
        c.in_color_space = image.channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
        jpeg_set_defaults(&c);
        jpeg_set_quality(&c, quality, TRUE);
        jpeg_start_compress(&c, TRUE);
        while (c.next_scanline < c.image_height) {
            JSAMPROW row = raw.data() + static_cast<size_t>(c.next_scanline) * image.width * image.channels;
            jpeg_write_scanlines(&c, &row, 1);
        }
        jpeg_finish_compress(&c);
        jpeg_destroy_compress(&c);
    }

    Image out(image.height, image.width, image.channels);
    {
        jpeg_decompress_struct d{};
        d.err = jpeg_std_error(&err.mgr);
        err.mgr.error_exit = on_jpeg_error;
        if (setjmp(err.jump)) {
            jpeg_destroy_decompress(&d);
            std::free(buffer);
            throw ProcessingError(std::string("jpeg decode failed: ") + err.message);
        }
        jpeg_create_decompress(&d);
        jpeg_mem_src(&d, buffer, buffer_size);
        jpeg_read_header(&d, TRUE);
        d.out_color_space = image.channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
        jpeg_start_decompress(&d);
        if (static_cast<int>(d.output_width) != image.width || static_cast<int>(d.output_height) != image.height ||
            d.output_components != image.channels) {
            jpeg_destroy_decompress(&d);
            std::free(buffer);
            throw ProcessingError("jpeg round trip changed the image shape");
        }
        std::vector<unsigned char> line(static_cast<size_t>(image.width) * image.channels);
        while (d.output_scanline < d.output_height) {
            const int y = static_cast<int>(d.output_scanline);
            JSAMPROW row = line.data();
            jpeg_read_scanlines(&d, &row, 1);
            for (size_t i = 0; i < line.size(); ++i) {
                out.pixels[static_cast<size_t>(y) * line.size() + i] = line[i] / 255.0;
            }
        }
        jpeg_finish_decompress(&d);
        jpeg_destroy_decompress(&d);
    }
    std::free(buffer);
    return out;
}

namespace {

// One channel as a dense H x W array with forward-difference gradient and
// its negative adjoint (divergence), Neumann boundary.
struct Plane {
    int h, w;
    std::vector<double> v;
    double& operator()(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    double operator()(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

double plane_tv(const Plane& u) {
    double tv = 0.0;
    for (int y = 0; y < u.h; ++y) {
        for (int x = 0; x < u.w; ++x) {
            const double gx = x + 1 < u.w ? u(y, x + 1) - u(y, x) : 0.0;
            const double gy = y + 1 < u.h ? u(y + 1, x) - u(y, x) : 0.0;
            tv += std::sqrt(gx * gx + gy * gy);
        }
    }
    return tv;
}

Plane divergence(const Plane& px, const Plane& py) {
    Plane d{px.h, px.w, std::vector<double>(px.v.size(), 0.0)};
    for (int y = 0; y < px.h; ++y) {
        for (int x = 0; x < px.w; ++x) {
            double v = 0.0;
            if (x + 1 < px.w) v += px(y, x);
            if (x > 0) v -= px(y, x - 1);
            if (y + 1 < px.h) v += py(y, x);
            if (y > 0) v -= py(y - 1, x);
            d(y, x) = v;
        }
    }
    return d;
}

}  // namespace

TvmResult tvm_defense_traced(const Image& image, double weight, int iterations) {
    if (!(weight > 0.0)) {
        throw ConfigError("tvm weight must be positive");
    }
    if (iterations < 1) {
        throw ConfigError("tvm iterations must be positive");
    }
    const int h = image.height, w = image.width, ch = image.channels;
    const size_t n = static_cast<size_t>(h) * w;
    const double tau = 0.125;

    std::vector<Plane> f, u, px, py;
    for (int c = 0; c < ch; ++c) {
        Plane p{h, w, std::vector<double>(n)};
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) p(y, x) = image.at(y, x, c);
        f.push_back(p);
        u.push_back(p);
        px.push_back({h, w, std::vector<double>(n, 0.0)});
        py.push_back({h, w, std::vector<double>(n, 0.0)});
    }
    auto objective = [&](const std::vector<Plane>& planes) {
        double data = 0.0, tv = 0.0;
        for (int c = 0; c < ch; ++c) {
            for (size_t i = 0; i < n; ++i) {
                const double d = planes[static_cast<size_t>(c)].v[i] - f[static_cast<size_t>(c)].v[i];
                data += d * d;
            }
            tv += plane_tv(planes[static_cast<size_t>(c)]);
        }
        return 0.5 * data + weight * tv;
    };

    TvmResult res;
    double best = objective(u);
    for (int it = 0; it < iterations; ++it) {
        std::vector<Plane> cand(static_cast<size_t>(ch));
        for (int c = 0; c < ch; ++c) {
            const size_t ci = static_cast<size_t>(c);
            Plane g = divergence(px[ci], py[ci]);
            for (size_t i = 0; i < n; ++i) g.v[i] -= f[ci].v[i] / weight;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double gx = x + 1 < w ? g(y, x + 1) - g(y, x) : 0.0;
                    const double gy = y + 1 < h ? g(y + 1, x) - g(y, x) : 0.0;
                    const double denom = 1.0 + tau * std::sqrt(gx * gx + gy * gy);
                    px[ci](y, x) = (px[ci](y, x) + tau * gx) / denom;
                    py[ci](y, x) = (py[ci](y, x) + tau * gy) / denom;
                }
            }
            Plane d = divergence(px[ci], py[ci]);
            cand[ci] = {h, w, std::vector<double>(n)};
            for (size_t i = 0; i < n; ++i) cand[ci].v[i] = f[ci].v[i] - weight * d.v[i];
        }
        const double obj = objective(cand);
        if (obj <= best) {
            best = obj;
            u = std::move(cand);
        }
        res.objective.push_back(best);
    }
    res.image = Image(h, w, ch);
    for (int c = 0; c < ch; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                res.image.at(y, x, c) = std::clamp(u[static_cast<size_t>(c)](y, x), 0.0, 1.0);
    return res;
}

Image tvm_defense(const Image& image, double weight, int iterations) {
    return tvm_defense_traced(image, weight, iterations).image;
}

Image apply_defense(const Image& image, const DefenseConfig& cfg) {
    cfg.validate();
    return cfg.kind == DefenseConfig::Kind::Jpeg ? jpeg_defense(image, cfg.jpeg_quality)
                                                 : tvm_defense(image, cfg.tvm_weight, cfg.tvm_iterations);
}

}  // namespace ldmt
