#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "types.hpp"

namespace lesionquant {

struct Component {
    std::vector<std::size_t> pixels;  ///< row-major linear indices
    std::size_t area = 0;
    Point2 centroid;
    int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
};

/// 8-connected labeling, ordered by (area desc, centroid row, centroid col).
std::vector<Component> connected_components(const BinaryMask& mask);

/// Closest centroid to `image_center` among components with area >=
/// `min_area`; ties go to the larger area. Throws NoNucleusFound.
const Component& select_noi(const std::vector<Component>& components, Point2 image_center, std::size_t min_area);

/// Row i holds angle 2*pi*i/n_angles, column j radius j*r_max/(n_radii-1).
struct PolarImage {
    int n_angles = 0;
    int n_radii = 0;
    double r_max = 0.0;
    Point2 center;
    std::vector<float> values;

    [[nodiscard]] double radial_step() const { return r_max / (n_radii - 1); }
    [[nodiscard]] double angle(int i) const;
    [[nodiscard]] float at(int i, int j) const { return values[static_cast<std::size_t>(i) * n_radii + j]; }
    [[nodiscard]] Frame as_frame() const;
};

PolarImage polar_transform(const Frame& img, Point2 center, int n_angles, int n_radii, double r_max);

/// `polar_bin` is n_radii wide and n_angles tall. For each row the radius is
/// the outer edge of the foreground run that starts at column 0, in pixels.
/// Rows without foreground at column 0 take the median of the nearest valid
/// rows on either side (circularly). Throws ContourExtractionFailed when
/// fewer than a quarter of the rows are valid.
std::vector<double> extract_contour(const BinaryMask& polar_bin, double radial_step);

/// Sets every background pixel of the first `domain` columns that is not
/// 4-connected (with angular wrap-around) to column domain-1 or beyond, so
/// dark patches inside the nucleus do not cut the radial runs short.
void fill_polar_holes(BinaryMask& polar_bin, int domain);

/// Scanline fill (even-odd, pixel centres) of the star polygon
/// center + r_i * (cos t_i, sin t_i), t_i = 2*pi*i/n.
BinaryMask rasterize_contour(Point2 center, std::span<const double> radii, int width, int height);

struct SegmentationParams {
    int median_radius = 3;
    int otsu_bins = 256;
    double min_area_fraction = 0.005;
    int n_angles = 360;
    int n_radii = 256;
    double r_max = 0.0;  ///< 0 selects half the image diagonal
    double polar_sigma = 2.0;
    int polar_median_radius = 3;
    double polar_domain_factor = 1.5;
};

struct SegmentedFrame {
    BinaryMask mask;
    Point2 centroid;
    std::vector<double> contour;
    Frame masked;

    // intermediates, kept for QC and background estimation
    Frame smoothed;
    BinaryMask foreground;  ///< every coarse component
    BinaryMask coarse_noi;
    double coarse_radius = 0.0;
    PolarImage polar;
    Frame polar_smoothed;
    BinaryMask polar_binary;
};

SegmentedFrame segment_frame(const Frame& img, const SegmentationParams& params = {});

/// Median + Otsu + nearest-centroid component, no polar refinement. Kept for
/// comparing against the polar pipeline.
BinaryMask segment_frame_cartesian(const Frame& img, const SegmentationParams& params = {});

}  // namespace lesionquant
