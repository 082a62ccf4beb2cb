#pragma once

// Slow, obviously-correct reference implementations used by the acceptance
// suite and the unit tests.

#include <cstdint>
#include <span>
#include <vector>

#include "types.hpp"

namespace lesionquant::oracle {

/// Clipped-window median by full sort; upper median for even counts.
Frame median_filter(const Frame& img, int radius);
std::vector<double> median_filter_1d(std::span<const double> values, int radius);

/// Dense 2-D convolution with the product Gaussian kernel (support
/// +-ceil(3 sigma), normalized over the square) and edge replication.
Frame gaussian_blur(const Frame& img, double sigma);

/// First bin of the foreground class maximizing w0 * w1 * (mu0 - mu1)^2
/// over bin indices; ties keep the lowest split.
int otsu_split(std::span<const std::uint64_t> histogram);

/// Prominence of profile[peak] within [peak - window, peak + window]: its
/// height above the highest saddle on a path to any sample at least as high
/// outside the peak's own plateau, or above the window minimum if none.
double prominence(std::span<const double> profile, int peak, int window);

double iou(const BinaryMask& a, const BinaryMask& b);

/// 8-connected components by stack-based flood fill; returns a label per
/// pixel (0 = background) and the component count.
std::vector<int> label_components(const BinaryMask& mask, int* count);

}  // namespace lesionquant::oracle
