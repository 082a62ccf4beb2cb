#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "types.hpp"

namespace lesionquant {

struct Background {
    double value = 0.0;
    std::size_t pixels = 0;
    bool empty = false;  ///< no background pixels; value forced to 0
};

/// Mean of `frame` outside `foreground` grown by `margin` pixels.
Background estimate_background(const Frame& frame, const BinaryMask& foreground, int margin = 2);

struct FrameMeasurement {
    double i_roi = 0.0;
    double i_noi = 0.0;
};

/// Background-corrected means over ROI ∩ NOI and over the NOI, each clamped
/// at zero. Returns nothing when ROI ∩ NOI is empty.
std::optional<FrameMeasurement> measure_frame(const Frame& frame, const Roi& roi, const BinaryMask& noi_mask,
                                              double background);

struct FrameSample {
    std::size_t frame_index = 0;
    FrameRole role = FrameRole::PostIrradiation;
    double time_s = 0.0;
    std::optional<FrameMeasurement> value;  ///< empty for excluded frames
};

/// ratio_k = q_k / q_0 with q = i_roi / i_noi; the pre-irradiation sample
/// must come first. Throws StackRejected when q_0 is not positive.
IntensityCurve compute_curve(std::span<const FrameSample> samples);

/// Per frame index over the common prefix of all curves, using the
/// non-excluded points at that index. Throws EmptyInput.
AggregateCurve aggregate(std::span<const IntensityCurve> curves);

}  // namespace lesionquant
