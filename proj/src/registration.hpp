#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segmentation.hpp"
#include "types.hpp"

namespace lesionquant {

/// Rotation by `theta` about the image centre followed by translation:
///   p' = R(theta) (p - c) + c + (dx, dy),  c = ((w-1)/2, (h-1)/2)
struct RigidTransform {
    double dx = 0.0;
    double dy = 0.0;
    double theta = 0.0;

    [[nodiscard]] Point2 apply(Point2 p, Point2 center) const;
    [[nodiscard]] RigidTransform inverse() const;
    /// `outer` after `*this`: p -> outer(this(p)).
    [[nodiscard]] RigidTransform then(const RigidTransform& outer) const;
};

Point2 rotation_center(int width, int height);

/// output(p) = img(t^-1 p), bilinear, zero outside.
Frame warp(const Frame& img, const RigidTransform& t);
BinaryMask warp_nearest(const BinaryMask& mask, const RigidTransform& t);

struct RegistrationParams {
    std::vector<int> pyramid = {4, 2, 1};
    int max_iterations = 200;       ///< per level
    double tol_translation = 0.01;  ///< full-resolution pixels
    double tol_rotation = 0.0005;   ///< radians
    double min_overlap_fraction = 0.10;
    double presmooth_sigma = 2.0;  ///< normalized Gaussian smoothing before matching
};

struct RegistrationResult {
    RigidTransform transform;
    double mse_initial = 0.0;
    double mse_final = 0.0;
    std::size_t overlap = 0;
    int iterations = 0;
};

/// The registration objective: mean squared difference between `reference`
/// and warp(moving, t) over pixels where both are nonzero. Both images are
/// smoothed within their support and the supports eroded by 1 + ceil(2 sigma)
/// pixels; a moving sample counts only when every interpolation neighbour is
/// nonzero.
/// `overlap` receives the pixel count.
double registration_mse(const Frame& reference, const Frame& moving, const RigidTransform& t,
                        const RegistrationParams& params = {}, std::size_t* overlap = nullptr);

/// Coarse-to-fine Levenberg-Marquardt on the masked MSE. The returned
/// transform t satisfies warp(moving, t) ~ reference. Throws
/// RegistrationDiverged when the overlap drops below the configured fraction
/// of the reference foreground.
RegistrationResult register_pair(const Frame& reference, const Frame& moving, const RigidTransform& init = {},
                                 const RegistrationParams& params = {});

struct RegisteredFrame {
    bool ok = false;
    std::string failure;
    RigidTransform transform;
    Frame registered;  ///< warp(original) masked by the warped NOI mask
    BinaryMask mask;
    double mse_initial = 0.0;
    double mse_final = 0.0;
};

/// Aligns every post-irradiation frame to the masked pre-irradiation frame.
/// Each registration is seeded with the last successful transform. Frames
/// without a segmentation are reported as failed.
std::vector<RegisteredFrame> register_stack(std::span<const Frame> originals,
                                            std::span<const std::optional<SegmentedFrame>> segmented,
                                            std::span<const FrameRole> roles, const RegistrationParams& params = {});

}  // namespace lesionquant
