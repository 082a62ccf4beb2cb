#include "measurement.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "image_core.hpp"

namespace lesionquant {

Background estimate_background(const Frame& frame, const BinaryMask& foreground, int margin) {
    if (!foreground.same_shape(frame)) throw Error(ErrorCode::InvalidArgument, "background: mask shape mismatch");
    const BinaryMask grown = dilate(foreground, margin);
    Background bg;
    double sum = 0.0;
    for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
        if (grown.bits[i]) continue;
        sum += frame.pixels[i];
        ++bg.pixels;
    }
    if (bg.pixels == 0) {
        bg.empty = true;
        return bg;
    }
    bg.value = sum / static_cast<double>(bg.pixels);
    return bg;
}

std::optional<FrameMeasurement> measure_frame(const Frame& frame, const Roi& roi, const BinaryMask& noi_mask,
                                              double background) {
    if (!noi_mask.same_shape(frame)) throw Error(ErrorCode::InvalidArgument, "measure: mask shape mismatch");
    double roi_sum = 0.0, noi_sum = 0.0;
    std::size_t roi_n = 0, noi_n = 0;
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            if (!noi_mask.get(x, y)) continue;
            const double v = frame.at(x, y);
            noi_sum += v;
            ++noi_n;
            if (roi.contains(x, y)) {
                roi_sum += v;
                ++roi_n;
            }
        }
    }
    if (roi_n == 0) return std::nullopt;
    FrameMeasurement m;
    m.i_roi = std::max(0.0, roi_sum / static_cast<double>(roi_n) - background);
    m.i_noi = std::max(0.0, noi_sum / static_cast<double>(noi_n) - background);
    return m;
}

IntensityCurve compute_curve(std::span<const FrameSample> samples) {
    if (samples.empty()) throw Error(ErrorCode::EmptyInput, "compute_curve: no frames");
    const auto& first = samples.front();
    if (first.role != FrameRole::PreIrradiation || !first.value)
        throw Error(ErrorCode::StackRejected, "pre-irradiation frame not measured");
    if (!(first.value->i_noi > 0.0) || !(first.value->i_roi > 0.0))
        throw Error(ErrorCode::StackRejected, "non-positive pre-irradiation quotient");
    const double q0 = first.value->i_roi / first.value->i_noi;

    IntensityCurve curve;
    for (const auto& s : samples) {
        CurvePoint p;
        p.frame_index = s.frame_index;
        p.role = s.role;
        p.time_s = s.time_s;
        if (s.role == FrameRole::Dark || !s.value || !(s.value->i_noi > 0.0)) {
            p.excluded = true;
        } else {
            p.i_roi = s.value->i_roi;
            p.i_noi = s.value->i_noi;
            p.ratio = &s == &first ? 1.0 : (p.i_roi / p.i_noi) / q0;
        }
        curve.points.push_back(p);
    }
    return curve;
}

AggregateCurve aggregate(std::span<const IntensityCurve> curves) {
    if (curves.empty()) throw Error(ErrorCode::EmptyInput, "aggregate: no curves");
    std::size_t len = curves.front().points.size();
    for (const auto& c : curves) len = std::min(len, c.points.size());

    AggregateCurve agg;
    std::vector<double> ratios, times;
    for (std::size_t k = 0; k < len; ++k) {
        ratios.clear();
        times.clear();
        for (const auto& c : curves) {
            const auto& p = c.points[k];
            if (p.excluded) continue;
            ratios.push_back(p.ratio);
            times.push_back(p.time_s);
        }
        if (ratios.empty()) continue;
        // Sorted summation keeps the result independent of curve order.
        std::sort(ratios.begin(), ratios.end());
        std::sort(times.begin(), times.end());
        const double n = static_cast<double>(ratios.size());
        double sum = 0.0, tsum = 0.0;
        for (double r : ratios) sum += r;
        for (double t : times) tsum += t;
        AggregatePoint ap;
        ap.n = ratios.size();
        ap.mean_ratio = sum / n;
        ap.time_s = tsum / n;
        if (ap.n > 1) {
            double ss = 0.0;
            for (double r : ratios) ss += (r - ap.mean_ratio) * (r - ap.mean_ratio);
            ap.stderr_ratio = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
        agg.points.push_back(ap);
    }
    return agg;
}

}  // namespace lesionquant
