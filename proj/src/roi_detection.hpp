#pragma once

#include <span>
#include <vector>

#include "types.hpp"

namespace lesionquant {

struct ScoredPeak {
    int x = 0;
    double s_height = 0.0;
    double s_haar = 0.0;
    double s_center = 0.0;
    // min-max normalized across the candidate set
    double n_height = 0.0;
    double n_haar = 0.0;
    double n_center = 0.0;
    double s_total = 0.0;
};

/// Strict local maxima of `profile`; a plateau counts once, at its leftmost
/// index, and only if both neighbours of the plateau are lower. The first
/// and last columns never qualify. When `allowed` is given, only columns
/// with allowed[x] set are returned. Throws NoPeakFound.
std::vector<int> find_candidate_peaks(std::span<const double> profile, std::span<const std::uint8_t> allowed = {});

/// Prominence of `peak` within [peak - window, peak + window].
double score_height(std::span<const double> profile, int peak, int window);

/// Mean over the central band minus mean over the two flanking bands of
/// feature_width/2 columns each, all clipped to the profile.
double score_haar(std::span<const double> profile, int peak, int feature_width);

double score_center(int peak, double noi_centroid_x);

/// Odd width no smaller than 1.25 * roi_width.
int haar_feature_width(int roi_width);

/// Fills the normalized fields and s_total of every candidate and returns the
/// index of the winner. Throws InvalidArgument on an empty list.
std::size_t select_peak(std::vector<ScoredPeak>& candidates);

Roi place_roi(const Frame& avg_t, const BinaryMask& noi_mask, int peak_x, int width, int height);

struct RoiParams {
    int width = 20;
    int height = 180;
    int window_factor = 2;  ///< prominence window, in ROI widths
    int min_mask_rows = 5;
    int profile_median_radius = 3;
    double low_confidence_margin = 0.15;
};

struct RoiDetection {
    Roi roi;
    std::vector<ScoredPeak> candidates;
    std::size_t chosen = 0;
    double margin = 0.0;  ///< best minus second-best s_total; 0 for a single candidate
    bool low_confidence = false;
    int feature_width = 0;
    double noi_centroid_x = 0.0;
    Frame avg_t;
    BinaryMask union_mask;
    std::vector<double> profile;  ///< smoothed sum-y projection

    [[nodiscard]] const ScoredPeak& peak() const { return candidates[chosen]; }
};

/// `frames` and `masks` are the registered post-irradiation frames that take
/// part in the projection.
RoiDetection detect_roi(std::span<const Frame> frames, std::span<const BinaryMask> masks, const RoiParams& params = {});

}  // namespace lesionquant
