#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "registration.hpp"
#include "stack_io.hpp"
#include "types.hpp"

namespace lesionquant {

struct EllipseSpec {
    double cx = 0.0, cy = 0.0;
    double a = 0.0, b = 0.0;  ///< semi-axes along the rotated x and y
    double angle = 0.0;       ///< radians
    double intensity = 0.0;

    /// Normalized radius; <= 1 inside.
    [[nodiscard]] double rho(double x, double y) const;
    /// Area fraction of the pixel at (x, y) covered, from a first-order
    /// distance-to-edge estimate.
    [[nodiscard]] double coverage(double x, double y) const;
};

struct BlobSpec {
    double x = 0.0, y = 0.0, sigma = 1.0, amplitude = 0.0;
};

struct PhantomSpec {
    std::string name = "phantom";
    int width = 512;
    int height = 512;
    int frames = 62;
    std::string layout = "default";
    double interval_s = 6.5;

    EllipseSpec nucleus{255.5, 255.5, 110.0, 100.0, 0.0, 0.4};

    double texture_amplitude = 0.3;
    double texture_density = 12.0;  ///< blobs per 1000 px^2 of nucleus area
    double texture_sigma = 4.0;
    std::uint64_t texture_seed = 1;

    double stripe_x = 255.0;
    double stripe_y = -1.0;  ///< centre row; negative: nucleus centre
    double stripe_width = 9.0;
    double stripe_length = 150.0;
    /// ramp:END | saturating:END:TAU | list:f0,f1,...
    std::string factors = "ramp:1.8";

    double drift_x = 0.0, drift_y = 0.0, drift_theta = 0.0;  ///< per frame
    double jitter_px = 0.0, jitter_theta = 0.0;              ///< std dev per frame
    std::vector<RigidTransform> motion;                      ///< explicit per-frame motion, overrides drift

    double background = 0.05;
    double noise_sigma = 0.0;
    double snr = 0.0;  ///< when > 0, noise_sigma = nucleus intensity / snr

    std::vector<BlobSpec> blobs;
    std::vector<EllipseSpec> extra_nuclei;

    int truth_roi_width = 20;
    int truth_roi_height = 180;

    [[nodiscard]] double effective_sigma() const { return snr > 0.0 ? nucleus.intensity / snr : noise_sigma; }
    [[nodiscard]] double stripe_center_y() const { return stripe_y < 0.0 ? nucleus.cy : stripe_y; }
};

PhantomSpec parse_phantom_spec(std::string_view text);
PhantomSpec read_phantom_spec(const std::filesystem::path& path);
std::string serialize_phantom_spec(const PhantomSpec& spec);

/// Accumulation factor per frame; 1.0 for every non-post frame.
std::vector<double> factor_schedule(const PhantomSpec& spec, const std::vector<FrameRole>& roles);

struct GroundTruth {
    std::vector<BinaryMask> masks;           ///< per frame, in that frame's coordinates
    std::vector<RigidTransform> transforms;  ///< scene -> frame k
    std::vector<double> factors;
    std::vector<double> true_ratio;
    int stripe_x = 0;
    Roi roi;  ///< reference-frame ROI used for the ratio
    BinaryMask reference_mask;
};

struct Phantom {
    ImageStack stack;
    GroundTruth truth;
};

/// Pure function of (spec, seed). Throws Config for invalid specs, including
/// a stripe that leaves the nucleus.
Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t seed);

/// Noiseless, background-free scene at accumulation factor `factor` seen
/// through `motion`.
Frame render_scene(const PhantomSpec& spec, double factor, const RigidTransform& motion = {});

std::string truth_csv(const Phantom& phantom);

/// Writes <name>.tif, <name>.spec and <name>.truth.csv into `dir`.
/// Returns the stack path.
std::filesystem::path write_phantom(const Phantom& phantom, const PhantomSpec& spec, std::uint64_t seed,
                                    const std::filesystem::path& dir);

}  // namespace lesionquant
