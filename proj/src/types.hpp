#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lesionquant {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Grayscale frame, row-major, intensities normalized to [0,1].
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;
    int bit_depth_source = 16;

    Frame() = default;
    Frame(int w, int h, float fill = 0.0f)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    [[nodiscard]] bool empty() const { return pixels.empty(); }
    [[nodiscard]] std::size_t size() const { return pixels.size(); }
    [[nodiscard]] bool contains(int x, int y) const {
        return x >= 0 && y >= 0 && x < width && y < height;
    }
    float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    [[nodiscard]] float at(int x, int y) const {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
};

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h, bool fill = false)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

    [[nodiscard]] std::size_t size() const { return bits.size(); }
    [[nodiscard]] bool get(int x, int y) const {
        return bits[static_cast<std::size_t>(y) * width + x] != 0;
    }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    [[nodiscard]] std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits) n += b != 0;
        return n;
    }
    [[nodiscard]] bool same_shape(const Frame& f) const {
        return width == f.width && height == f.height;
    }
};

/// Per-column sums of an image.
struct IntensityProfile {
    std::vector<double> values;
};

enum class FrameRole { PreIrradiation, Dark, PostIrradiation };

inline const char* role_name(FrameRole r) {
    switch (r) {
        case FrameRole::PreIrradiation: return "pre";
        case FrameRole::Dark: return "dark";
        case FrameRole::PostIrradiation: return "post";
    }
    return "?";
}

struct ImageStack {
    std::vector<Frame> frames;
    std::vector<FrameRole> roles;
    std::vector<double> timestamps_s;
    std::string source_id;

    [[nodiscard]] std::size_t size() const { return frames.size(); }
    [[nodiscard]] int width() const { return frames.empty() ? 0 : frames.front().width; }
    [[nodiscard]] int height() const { return frames.empty() ? 0 : frames.front().height; }
};

/// Axis-aligned box, top-left corner plus size, in pixels.
struct Roi {
    int x = 0;
    int y = 0;
    int width = 1;
    int height = 1;

    [[nodiscard]] bool contains(int px, int py) const {
        return px >= x && px < x + width && py >= y && py < y + height;
    }
};

struct CurvePoint {
    std::size_t frame_index = 0;
    FrameRole role = FrameRole::PostIrradiation;
    double time_s = 0.0;
    double i_roi = 0.0;
    double i_noi = 0.0;
    double ratio = 0.0;
    bool excluded = false;
};

/// Normalized I_ROI / I_NOI over a stack, in acquisition order. Excluded
/// points (dark frame, failed frames) keep their slot but carry no values.
struct IntensityCurve {
    std::vector<CurvePoint> points;
};

struct AggregatePoint {
    double time_s = 0.0;
    double mean_ratio = 0.0;
    double stderr_ratio = 0.0;
    std::size_t n = 0;
};

struct AggregateCurve {
    std::vector<AggregatePoint> points;
};

}  // namespace lesionquant
