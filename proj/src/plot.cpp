#include "ldmt/plot.hpp"

#include "ldmt/error.hpp"
#include "ldmt/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

namespace ldmt {

namespace {

constexpr int kW = 480, kH = 320, kMargin = 40;

struct Rgb {
    double r, g, b;
};

// 3x5 glyphs for "0123456789-.e+", one row per 3-bit pattern.
const std::array<std::array<int, 5>, 14> kGlyphs = {{
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
    {0, 0, 7, 0, 0}, {0, 0, 0, 0, 2}, {0, 7, 5, 6, 7}, {0, 2, 7, 2, 0},
}};

class Canvas {
public:
    Canvas(int w, int h) : img_(h, w, 3, 1.0) {}

    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= img_.width || y >= img_.height) return;
        img_.at(y, x, 0) = c.r;
        img_.at(y, x, 1) = c.g;
        img_.at(y, x, 2) = c.b;
    }
    void rect(int x0, int y0, int x1, int y1, Rgb c) {
        if (x0 > x1) std::swap(x0, x1);
        if (y0 > y1) std::swap(y0, y1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) set(x, y, c);
    }
    void line(int x0, int y0, int x1, int y1, Rgb c) {
        const int n = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
        for (int k = 0; k <= n; ++k) {
            const double s = n == 0 ? 0.0 : double(k) / n;
            set(static_cast<int>(std::lround(x0 + s * (x1 - x0))), static_cast<int>(std::lround(y0 + s * (y1 - y0))), c);
        }
    }
    void text(int x, int y, const std::string& s) {
        for (char ch : s) {
            int g = -1;
            if (ch >= '0' && ch <= '9') g = ch - '0';
            else if (ch == '-') g = 10;
            else if (ch == '.') g = 11;
            else if (ch == 'e') g = 12;
            else if (ch == '+') g = 13;
            if (g >= 0) {
                for (int r = 0; r < 5; ++r)
                    for (int b = 0; b < 3; ++b)
                        if (kGlyphs[g][r] & (4 >> b)) rect(x + 2 * b, y + 2 * r, x + 2 * b + 1, y + 2 * r + 1, {0, 0, 0});
            }
            x += 8;
        }
    }
    const Image& image() const { return img_; }

private:
    Image img_;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void axes(Canvas& c, double lo, double hi) {
    const Rgb k{0, 0, 0};
    c.line(kMargin, kH - kMargin, kW - 10, kH - kMargin, k);
    c.line(kMargin, 10, kMargin, kH - kMargin, k);
    c.text(2, 10, fmt(hi));
    c.text(2, kH - kMargin - 10, fmt(lo));
}

void range_of(const std::vector<double>& v, const std::vector<double>& e, double& lo, double& hi) {
    lo = 0.0;
    hi = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        const double err = i < e.size() ? e[i] : 0.0;
        lo = std::min(lo, v[i] - err);
        hi = std::max(hi, v[i] + err);
    }
    if (hi == lo) hi = lo + 1.0;
}

int to_y(double v, double lo, double hi) {
    return kH - kMargin - static_cast<int>(std::lround((v - lo) / (hi - lo) * (kH - kMargin - 10)));
}

void save(const Canvas& c, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_png(path, c.image());
}

}  // namespace

void bar_chart(const std::filesystem::path& path, const std::vector<double>& values, const std::vector<double>& errors) {
    if (values.empty()) throw DataError("bar chart without values");
    double lo, hi;
    range_of(values, errors, lo, hi);
    Canvas c(kW, kH);
    axes(c, lo, hi);
    const double slot = double(kW - kMargin - 20) / values.size();
    const int zero = to_y(0.0, lo, hi);
    for (size_t i = 0; i < values.size(); ++i) {
        const int x0 = kMargin + 5 + static_cast<int>(i * slot);
        const int x1 = x0 + std::max(1, static_cast<int>(slot * 0.7));
        c.rect(x0, zero, x1, to_y(values[i], lo, hi), {0.25, 0.45, 0.75});
        if (i < errors.size()) {
            const int xm = (x0 + x1) / 2;
            c.line(xm, to_y(values[i] - errors[i], lo, hi), xm, to_y(values[i] + errors[i], lo, hi), {0, 0, 0});
        }
    }
    c.line(kMargin, zero, kW - 10, zero, {0.5, 0.5, 0.5});
    save(c, path);
}

void line_chart(const std::filesystem::path& path, const std::vector<double>& x, const std::vector<double>& y,
                const std::vector<double>& errors) {
    if (x.size() != y.size() || x.empty()) throw DataError("line chart needs matching non-empty x and y");
    double lo, hi;
    range_of(y, errors, lo, hi);
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    const double xs = *xmax > *xmin ? *xmax - *xmin : 1.0;
    auto px = [&](double v) { return kMargin + static_cast<int>(std::lround((v - *xmin) / xs * (kW - kMargin - 20))); };
    Canvas c(kW, kH);
    axes(c, lo, hi);
    c.text(kMargin, kH - kMargin + 8, fmt(*xmin));
    c.text(kW - 60, kH - kMargin + 8, fmt(*xmax));
    for (size_t i = 0; i < x.size(); ++i) {
        if (i < errors.size()) {
            c.line(px(x[i]), to_y(y[i] - errors[i], lo, hi), px(x[i]), to_y(y[i] + errors[i], lo, hi), {0.6, 0.6, 0.6});
        }
        if (i > 0) c.line(px(x[i - 1]), to_y(y[i - 1], lo, hi), px(x[i]), to_y(y[i], lo, hi), {0.8, 0.2, 0.2});
    }
    save(c, path);
}

void heatmap(const std::filesystem::path& path, const Mat& values, double lo, double hi) {
    if (values.size() == 0) throw DataError("empty heatmap");
    const int n = static_cast<int>(std::max(values.rows(), values.cols()));
    const int cell = std::max(2, 300 / n);
    Canvas c(static_cast<int>(values.cols()) * cell + 60, static_cast<int>(values.rows()) * cell + 20);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            const double s = std::clamp((values(i, j) - lo) / (hi - lo), 0.0, 1.0);
            const Rgb col = s < 0.5 ? Rgb{2 * s, 2 * s, 1.0} : Rgb{1.0, 2 - 2 * s, 2 - 2 * s};
            c.rect(10 + int(j) * cell, 10 + int(i) * cell, 10 + int(j + 1) * cell - 1, 10 + int(i + 1) * cell - 1, col);
        }
    }
    c.text(static_cast<int>(values.cols()) * cell + 16, 10, fmt(hi));
    c.text(static_cast<int>(values.cols()) * cell + 16, static_cast<int>(values.rows()) * cell, fmt(lo));
    save(c, path);
}

}  // namespace ldmt
