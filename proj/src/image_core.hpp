#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "types.hpp"

namespace lesionquant {

/// Median over the (2r+1)^2 window, clipped to in-bounds pixels. For an even
/// number of in-bounds samples the upper median (sorted index n/2) is used.
Frame median_filter(const Frame& img, int radius);

/// 1-D clipped-window median with the same upper-median convention.
std::vector<double> median_filter_1d(std::span<const double> values, int radius);
IntensityProfile median_filter_1d(const IntensityProfile& profile, int radius);

/// Normalized sampled Gaussian, support +-ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with edge replication.
Frame gaussian_blur(const Frame& img, double sigma);

/// Histogram threshold over [lo, hi] with `bins` equal bins. Bins are closed
/// on the right: value v lands in bin ceil((v - lo) / width) - 1, clamped, so
/// the foreground class (bins >= split) is exactly {v > threshold}.
struct HistogramSplit {
    double lo = 0.0;
    double hi = 0.0;
    int bins = 256;
    int split = 1;           ///< first foreground bin
    double threshold = 0.0;  ///< lo + split * (hi - lo) / bins
};

int histogram_bin(double v, double lo, double hi, int bins);

/// Otsu split of an arbitrary sample set. Between-class variance is compared
/// in exact integer arithmetic so ties resolve deterministically toward the
/// lower threshold. Throws DegenerateHistogram when all samples are equal.
HistogramSplit otsu_split(std::span<const float> values, int bins = 256);

struct OtsuResult {
    HistogramSplit split;
    BinaryMask mask;
};

OtsuResult otsu_threshold(const Frame& img, int bins = 256);

/// Pixel-wise mean over frames selected by `include(index, role)`.
/// Accumulates in double; default selection is post-irradiation frames.
using FramePredicate = std::function<bool(std::size_t, FrameRole)>;
bool is_post_irradiation(std::size_t, FrameRole role);
Frame avg_t_projection(const ImageStack& stack, const FramePredicate& include = is_post_irradiation);
Frame avg_t_projection(std::span<const Frame> frames);

IntensityProfile sum_y_projection(const Frame& img, const BinaryMask* mask = nullptr);

Frame apply_mask(const Frame& img, const BinaryMask& mask);

/// Bilinear interpolation with zero padding outside the image.
inline float bilinear_sample(const Frame& img, double x, double y) {
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    if (fx0 < -1.0 || fy0 < -1.0 || fx0 >= img.width || fy0 >= img.height) return 0.0f;
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);
    const double ax = x - fx0;
    const double ay = y - fy0;
    auto px = [&](int xi, int yi) -> double {
        return img.contains(xi, yi) ? img.at(xi, yi) : 0.0;
    };
    const double top = (1.0 - ax) * px(x0, y0) + (ax > 0.0 ? ax * px(x0 + 1, y0) : 0.0);
    if (ay == 0.0) return static_cast<float>(top);
    const double bottom = (1.0 - ax) * px(x0, y0 + 1) + (ax > 0.0 ? ax * px(x0 + 1, y0 + 1) : 0.0);
    return static_cast<float>((1.0 - ay) * top + ay * bottom);
}

/// Chebyshev dilation by `radius` pixels.
BinaryMask dilate(const BinaryMask& mask, int radius);

}  // namespace lesionquant
