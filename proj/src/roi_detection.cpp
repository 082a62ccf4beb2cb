#include "roi_detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "image_core.hpp"

namespace lesionquant {

std::vector<int> find_candidate_peaks(std::span<const double> profile, std::span<const std::uint8_t> allowed) {
    const int n = static_cast<int>(profile.size());
    std::vector<int> peaks;
    int i = 1;
    while (i < n - 1) {
        if (profile[i] <= profile[i - 1]) {
            ++i;
            continue;
        }
        int end = i;
        while (end + 1 < n && profile[end + 1] == profile[i]) ++end;
        if (end + 1 < n && profile[end + 1] < profile[i])
            if (allowed.empty() || allowed[i]) peaks.push_back(i);
        i = end + 1;
    }
    if (peaks.empty()) throw Error(ErrorCode::NoPeakFound, "no peak found");
    return peaks;
}

double score_height(std::span<const double> profile, int peak, int window) {
    const int n = static_cast<int>(profile.size());
    const double v = profile[peak];
    const int lo = std::max(0, peak - window);
    const int hi = std::min(n - 1, peak + window);
    int plateau_end = peak;
    while (plateau_end + 1 <= hi && profile[plateau_end + 1] == v) ++plateau_end;

    double left_min = v, right_min = v;
    bool left_higher = false, right_higher = false;
    for (int j = peak - 1; j >= lo; --j) {
        if (profile[j] >= v) {
            left_higher = true;
            break;
        }
        left_min = std::min(left_min, profile[j]);
    }
    for (int j = plateau_end + 1; j <= hi; ++j) {
        if (profile[j] >= v) {
            right_higher = true;
            break;
        }
        right_min = std::min(right_min, profile[j]);
    }
    if (left_higher && right_higher) return v - std::max(left_min, right_min);
    if (left_higher) return v - left_min;
    if (right_higher) return v - right_min;
    double wmin = v;
    for (int j = lo; j <= hi; ++j) wmin = std::min(wmin, profile[j]);
    return v - wmin;
}

double score_haar(std::span<const double> profile, int peak, int feature_width) {
    const int n = static_cast<int>(profile.size());
    const int c0 = peak - feature_width / 2;
    const int c1 = c0 + feature_width - 1;
    const int half = feature_width / 2;
    auto band = [&](int a, int b, double& sum, int& count) {
        for (int j = std::max(0, a); j <= std::min(n - 1, b); ++j) {
            sum += profile[j];
            ++count;
        }
    };
    double cs = 0.0, fs = 0.0;
    int cn = 0, fn = 0;
    band(c0, c1, cs, cn);
    band(c0 - half, c0 - 1, fs, fn);
    band(c1 + 1, c1 + half, fs, fn);
    const double center = cn ? cs / cn : 0.0;
    const double flank = fn ? fs / fn : 0.0;
    return center - flank;
}

double score_center(int peak, double noi_centroid_x) { return -std::abs(peak - noi_centroid_x); }

int haar_feature_width(int roi_width) {
    int w = static_cast<int>(std::ceil(1.25 * roi_width));
    if (w % 2 == 0) ++w;
    return w;
}

std::size_t select_peak(std::vector<ScoredPeak>& candidates) {
    if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "select_peak: no candidates");
    auto normalize = [&](double ScoredPeak::*raw, double ScoredPeak::*out) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& c : candidates) {
            lo = std::min(lo, c.*raw);
            hi = std::max(hi, c.*raw);
        }
        for (auto& c : candidates) c.*out = hi > lo ? (c.*raw - lo) / (hi - lo) : 0.5;
    };
    normalize(&ScoredPeak::s_height, &ScoredPeak::n_height);
    normalize(&ScoredPeak::s_haar, &ScoredPeak::n_haar);
    normalize(&ScoredPeak::s_center, &ScoredPeak::n_center);
    std::size_t best = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto& c = candidates[i];
        c.s_total = c.n_height + c.n_haar + c.n_center;
        if (i == 0) continue;
        const auto& b = candidates[best];
        if (c.s_total > b.s_total || (c.s_total == b.s_total && c.s_center > b.s_center) ||
            (c.s_total == b.s_total && c.s_center == b.s_center && c.x < b.x))
            best = i;
    }
    return best;
}

Roi place_roi(const Frame& avg_t, const BinaryMask& noi_mask, int peak_x, int width, int height) {
    const int w = avg_t.width, h = avg_t.height;
    Roi roi;
    roi.width = width;
    roi.height = height;
    roi.x = std::clamp(peak_x - width / 2, 0, std::max(0, w - width));

    int top = -1, bottom = -1;
    if (peak_x >= 0 && peak_x < w) {
        for (int y = 0; y < h; ++y) {
            if (!noi_mask.get(peak_x, y)) continue;
            if (top < 0) top = y;
            bottom = y;
        }
    }
    if (top < 0) {
        for (int y = 0; y < h && top < 0; ++y)
            for (int x = 0; x < w; ++x)
                if (noi_mask.get(x, y)) {
                    top = y;
                    break;
                }
        for (int y = h - 1; y >= 0 && bottom < 0; --y)
            for (int x = 0; x < w; ++x)
                if (noi_mask.get(x, y)) {
                    bottom = y;
                    break;
                }
        if (top < 0) top = bottom = h / 2;
    }
    const int max_y = std::max(0, h - height);
    const int extent = bottom - top + 1;
    if (extent <= height) {
        const int twice = top + bottom + 1 - height;  // 2 * centred y
        roi.y = std::clamp(static_cast<int>(std::floor(twice / 2.0)), 0, max_y);
        return roi;
    }
    const int y_lo = std::clamp(top, 0, max_y);
    const int y_hi = std::clamp(bottom - height + 1, 0, max_y);
    const int x1 = std::min(w, roi.x + width);
    double best = -std::numeric_limits<double>::infinity();
    int best_y = y_lo;
    for (int y0 = y_lo; y0 <= y_hi; ++y0) {
        double sum = 0.0;
        long count = 0;
        for (int y = y0; y < std::min(h, y0 + height); ++y)
            for (int x = roi.x; x < x1; ++x)
                if (noi_mask.get(x, y)) {
                    sum += avg_t.at(x, y);
                    ++count;
                }
        if (count == 0) continue;
        const double mean = sum / static_cast<double>(count);
        if (mean > best) {
            best = mean;
            best_y = y0;
        }
    }
    roi.y = best_y;
    return roi;
}

RoiDetection detect_roi(std::span<const Frame> frames, std::span<const BinaryMask> masks, const RoiParams& params) {
    if (frames.empty() || frames.size() != masks.size())
        throw Error(ErrorCode::NoPeakFound, "no registered post-irradiation frames");
    if (params.width < 1 || params.height < 1) throw Error(ErrorCode::InvalidArgument, "ROI size must be positive");
    RoiDetection det;
    det.avg_t = avg_t_projection(frames);
    const int w = det.avg_t.width, h = det.avg_t.height;
    det.union_mask = BinaryMask(w, h);
    for (const auto& m : masks)
        for (std::size_t i = 0; i < m.bits.size(); ++i)
            if (m.bits[i]) det.union_mask.bits[i] = 1;

    std::vector<std::uint8_t> allowed(static_cast<std::size_t>(w), 0);
    long sx = 0, count = 0;
    for (int x = 0; x < w; ++x) {
        int rows = 0;
        for (int y = 0; y < h; ++y)
            if (det.union_mask.get(x, y)) {
                ++rows;
                sx += x;
            }
        count += rows;
        allowed[x] = rows >= params.min_mask_rows;
    }
    if (count == 0) throw Error(ErrorCode::NoPeakFound, "empty nucleus mask");
    det.noi_centroid_x = static_cast<double>(sx) / static_cast<double>(count);

    const auto raw = sum_y_projection(det.avg_t, &det.union_mask);
    det.profile = median_filter_1d(std::span<const double>(raw.values), params.profile_median_radius);
    const auto peaks = find_candidate_peaks(det.profile, allowed);

    det.feature_width = haar_feature_width(params.width);
    const int window = params.window_factor * params.width;
    for (int p : peaks) {
        ScoredPeak sp;
        sp.x = p;
        sp.s_height = score_height(det.profile, p, window);
        sp.s_haar = score_haar(det.profile, p, det.feature_width);
        sp.s_center = score_center(p, det.noi_centroid_x);
        det.candidates.push_back(sp);
    }
    det.chosen = select_peak(det.candidates);
    const double best = det.candidates[det.chosen].s_total;
    if (det.candidates.size() == 1) {
        // Nothing to be separated from: all three scores sit at 0.5.
        det.margin = 0.0;
    } else {
        double second = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < det.candidates.size(); ++i)
            if (i != det.chosen) second = std::max(second, det.candidates[i].s_total);
        det.margin = best - second;
    }
    det.low_confidence = det.margin < params.low_confidence_margin;
    det.roi = place_roi(det.avg_t, det.union_mask, det.peak().x, params.width, params.height);
    return det;
}

}  // namespace lesionquant
