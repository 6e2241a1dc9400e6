#pragma once

#include "ldmt/nn.hpp"

#include <filesystem>
#include <vector>

namespace ldmt {

// Minimal raster charts written as PNG. Axis extremes are printed with a
// built-in digit font; exact values always go to the CSV next to the plot.

// One bar per value; optional symmetric error whiskers.
void bar_chart(const std::filesystem::path& path, const std::vector<double>& values,
               const std::vector<double>& errors = {});

// Polyline over (x, y) with an optional +-error band.
void line_chart(const std::filesystem::path& path, const std::vector<double>& x, const std::vector<double>& y,
                const std::vector<double>& errors = {});

// Square cells colored on a blue-white-red ramp over [lo, hi].
void heatmap(const std::filesystem::path& path, const Mat& values, double lo = -1.0, double hi = 1.0);

}  // namespace ldmt
