#include "image_core.hpp"

#include <cstdint>
#include <limits>

#include "error.hpp"

namespace lesionquant {

namespace {

Frame median_filter_select(const Frame& img, int radius) {
    Frame out(img.width, img.height);
    out.bit_depth_source = img.bit_depth_source;
    std::vector<float> window;
    window.reserve(static_cast<std::size_t>(2 * radius + 1) * (2 * radius + 1));
    for (int y = 0; y < img.height; ++y) {
        const int y_lo = std::max(0, y - radius);
        const int y_hi = std::min(img.height - 1, y + radius);
        for (int x = 0; x < img.width; ++x) {
            const int x_lo = std::max(0, x - radius);
            const int x_hi = std::min(img.width - 1, x + radius);
            window.clear();
            for (int yy = y_lo; yy <= y_hi; ++yy) {
                const float* row = &img.pixels[static_cast<std::size_t>(yy) * img.width];
                window.insert(window.end(), row + x_lo, row + x_hi + 1);
            }
            auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
            std::nth_element(window.begin(), mid, window.end());
            out.at(x, y) = *mid;
        }
    }
    return out;
}

// Sliding-window histogram over value ranks (two-level: 256 coarse bins of
// 256 ranks each). Exact for images with at most 65536 distinct values,
// which covers every 8/16-bit source.
Frame median_filter_histogram(const Frame& img, int radius, const std::vector<float>& levels) {
    const int w = img.width, h = img.height;
    std::vector<std::uint16_t> rank(img.pixels.size());
    for (std::size_t i = 0; i < rank.size(); ++i)
        rank[i] = static_cast<std::uint16_t>(std::lower_bound(levels.begin(), levels.end(), img.pixels[i]) - levels.begin());

    Frame out(w, h);
    out.bit_depth_source = img.bit_depth_source;
    std::vector<std::uint32_t> coarse(256, 0), fine(65536, 0);
    auto column = [&](int x, int y_lo, int y_hi, int delta) {
        for (int yy = y_lo; yy <= y_hi; ++yy) {
            const std::uint16_t r = rank[static_cast<std::size_t>(yy) * w + x];
            coarse[r >> 8] += delta;
            fine[r] += delta;
        }
    };
    for (int y = 0; y < h; ++y) {
        const int y_lo = std::max(0, y - radius);
        const int y_hi = std::min(h - 1, y + radius);
        const int rows = y_hi - y_lo + 1;
        for (int x = 0; x <= std::min(w - 1, radius); ++x) column(x, y_lo, y_hi, 1);
        for (int x = 0; x < w; ++x) {
            if (x > 0) {
                if (x + radius < w) column(x + radius, y_lo, y_hi, 1);
                if (x - radius - 1 >= 0) column(x - radius - 1, y_lo, y_hi, -1);
            }
            const int cols = std::min(w - 1, x + radius) - std::max(0, x - radius) + 1;
            const std::uint32_t k = static_cast<std::uint32_t>(rows * cols / 2);
            std::uint32_t acc = 0;
            int c = 0;
            while (acc + coarse[c] <= k) acc += coarse[c++];
            int f = c << 8;
            while (acc + fine[f] <= k) acc += fine[f++];
            out.at(x, y) = levels[f];
        }
        for (int x = std::max(0, w - radius - 1); x < w; ++x) column(x, y_lo, y_hi, -1);
    }
    return out;
}

}  // namespace

Frame median_filter(const Frame& img, int radius) {
    if (radius < 1) throw Error(ErrorCode::InvalidArgument, "median_filter: radius must be >= 1");
    std::vector<float> levels(img.pixels);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (levels.size() > 65536) return median_filter_select(img, radius);
    return median_filter_histogram(img, radius, levels);
}

std::vector<double> median_filter_1d(std::span<const double> values, int radius) {
    if (radius < 1) throw Error(ErrorCode::InvalidArgument, "median_filter_1d: radius must be >= 1");
    const int n = static_cast<int>(values.size());
    std::vector<double> out(values.size());
    std::vector<double> window;
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - radius);
        const int hi = std::min(n - 1, i + radius);
        window.assign(values.begin() + lo, values.begin() + hi + 1);
        auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
        std::nth_element(window.begin(), mid, window.end());
        out[i] = *mid;
    }
    return out;
}

IntensityProfile median_filter_1d(const IntensityProfile& profile, int radius) {
    return {median_filter_1d(std::span<const double>(profile.values), radius)};
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gaussian_kernel: sigma must be > 0");
    const int half = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * half + 1);
    double sum = 0.0;
    for (int i = -half; i <= half; ++i) {
        k[i + half] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += k[i + half];
    }
    for (auto& v : k) v /= sum;
    return k;
}

Frame gaussian_blur(const Frame& img, double sigma) {
    const auto kernel = gaussian_kernel(sigma);
    const int half = static_cast<int>(kernel.size() / 2);
    const int w = img.width;
    const int h = img.height;
    std::vector<double> tmp(img.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -half; k <= half; ++k) {
                const int xx = std::clamp(x + k, 0, w - 1);
                acc += kernel[k + half] * img.at(xx, y);
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    Frame out(w, h);
    out.bit_depth_source = img.bit_depth_source;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -half; k <= half; ++k) {
                const int yy = std::clamp(y + k, 0, h - 1);
                acc += kernel[k + half] * tmp[static_cast<std::size_t>(yy) * w + x];
            }
            out.at(x, y) = static_cast<float>(acc);
        }
    }
    return out;
}

int histogram_bin(double v, double lo, double hi, int bins) {
    const double t = (v - lo) / (hi - lo) * bins;
    const int b = static_cast<int>(std::ceil(t)) - 1;
    return std::clamp(b, 0, bins - 1);
}

namespace {

using u128 = unsigned __int128;

// a * b for a < 2^128, b < 2^64, as three 64-bit limbs (little endian).
struct U192 {
    std::uint64_t limb[3];
};

U192 mul(u128 a, std::uint64_t b) {
    const auto lo = static_cast<std::uint64_t>(a);
    const auto hi = static_cast<std::uint64_t>(a >> 64);
    const u128 p0 = static_cast<u128>(lo) * b;
    const u128 p1 = static_cast<u128>(hi) * b + (p0 >> 64);
    return {{static_cast<std::uint64_t>(p0), static_cast<std::uint64_t>(p1),
             static_cast<std::uint64_t>(p1 >> 64)}};
}

int compare(const U192& a, const U192& b) {
    for (int i = 2; i >= 0; --i) {
        if (a.limb[i] != b.limb[i]) return a.limb[i] < b.limb[i] ? -1 : 1;
    }
    return 0;
}

}  // namespace

HistogramSplit otsu_split(std::span<const float> values, int bins) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "otsu: empty input");
    if (bins < 2) throw Error(ErrorCode::InvalidArgument, "otsu: need at least 2 bins");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) throw Error(ErrorCode::DegenerateHistogram, "otsu: degenerate histogram (constant input)");

    std::vector<std::uint64_t> hist(bins, 0);
    for (float v : values) ++hist[histogram_bin(v, lo, hi, bins)];

    // Between-class variance in bin-index units, scaled by N^2:
    //   (S0 * N - n0 * S)^2 / (n0 * n1)
    // which has the same argmax as the variance over bin centres.
    std::int64_t total_n = 0;
    std::int64_t total_s = 0;
    for (int j = 0; j < bins; ++j) {
        total_n += static_cast<std::int64_t>(hist[j]);
        total_s += static_cast<std::int64_t>(hist[j]) * j;
    }
    std::int64_t n0 = 0;
    std::int64_t s0 = 0;
    int best = -1;
    u128 best_num = 0;
    std::uint64_t best_den = 1;
    for (int k = 1; k < bins; ++k) {
        n0 += static_cast<std::int64_t>(hist[k - 1]);
        s0 += static_cast<std::int64_t>(hist[k - 1]) * (k - 1);
        const std::int64_t n1 = total_n - n0;
        if (n0 == 0 || n1 == 0) continue;
        const std::int64_t diff = s0 * total_n - n0 * total_s;
        const u128 mag = static_cast<u128>(diff < 0 ? -diff : diff);
        const u128 num = mag * mag;
        const auto den = static_cast<std::uint64_t>(n0) * static_cast<std::uint64_t>(n1);
        if (best < 0 || compare(mul(num, best_den), mul(best_num, den)) > 0) {
            best = k;
            best_num = num;
            best_den = den;
        }
    }
    if (best < 0) throw Error(ErrorCode::DegenerateHistogram, "otsu: degenerate histogram");
    HistogramSplit s;
    s.lo = lo;
    s.hi = hi;
    s.bins = bins;
    s.split = best;
    s.threshold = lo + best * (hi - lo) / bins;
    return s;
}

OtsuResult otsu_threshold(const Frame& img, int bins) {
    OtsuResult r;
    r.split = otsu_split(img.pixels, bins);
    r.mask = BinaryMask(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        r.mask.bits[i] = histogram_bin(img.pixels[i], r.split.lo, r.split.hi, bins) >= r.split.split;
    }
    return r;
}

bool is_post_irradiation(std::size_t, FrameRole role) { return role == FrameRole::PostIrradiation; }

namespace {

Frame mean_of(const std::vector<const Frame*>& frames) {
    if (frames.empty()) throw Error(ErrorCode::EmptyInput, "avg_t_projection: empty frame selection");
    const int w = frames.front()->width;
    const int h = frames.front()->height;
    std::vector<double> acc(static_cast<std::size_t>(w) * h, 0.0);
    for (const Frame* f : frames) {
        if (f->width != w || f->height != h)
            throw Error(ErrorCode::InvalidArgument, "avg_t_projection: frame size mismatch");
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f->pixels[i];
    }
    Frame out(w, h);
    out.bit_depth_source = frames.front()->bit_depth_source;
    const double n = static_cast<double>(frames.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out.pixels[i] = static_cast<float>(acc[i] / n);
    return out;
}

}  // namespace

Frame avg_t_projection(const ImageStack& stack, const FramePredicate& include) {
    std::vector<const Frame*> sel;
    for (std::size_t i = 0; i < stack.frames.size(); ++i) {
        if (include(i, stack.roles.at(i))) sel.push_back(&stack.frames[i]);
    }
    return mean_of(sel);
}

Frame avg_t_projection(std::span<const Frame> frames) {
    std::vector<const Frame*> sel;
    for (const auto& f : frames) sel.push_back(&f);
    return mean_of(sel);
}

IntensityProfile sum_y_projection(const Frame& img, const BinaryMask* mask) {
    if (mask && !mask->same_shape(img))
        throw Error(ErrorCode::InvalidArgument, "sum_y_projection: mask size mismatch");
    IntensityProfile p;
    p.values.assign(img.width, 0.0);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!mask || mask->get(x, y)) p.values[x] += img.at(x, y);
        }
    }
    return p;
}

Frame apply_mask(const Frame& img, const BinaryMask& mask) {
    if (!mask.same_shape(img)) throw Error(ErrorCode::InvalidArgument, "apply_mask: mask size mismatch");
    Frame out = img;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!mask.bits[i]) out.pixels[i] = 0.0f;
    }
    return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
    const int w = mask.width;
    const int h = mask.height;
    // Separable: Chebyshev ball is a square.
    BinaryMask horiz(w, h);
    for (int y = 0; y < h; ++y) {
        int last = std::numeric_limits<int>::min() / 2;
        for (int x = 0; x < w + radius; ++x) {
            if (x < w && mask.get(x, y)) last = x;
            const int target = x - radius;
            if (target >= 0 && target < w) {
                // any set pixel within [target - radius, target + radius]
                horiz.set(target, y, last >= target - radius);
            }
        }
    }
    BinaryMask out(w, h);
    for (int x = 0; x < w; ++x) {
        int last = std::numeric_limits<int>::min() / 2;
        for (int y = 0; y < h + radius; ++y) {
            if (y < h && horiz.get(x, y)) last = y;
            const int target = y - radius;
            if (target >= 0 && target < h) out.set(x, target, last >= target - radius);
        }
    }
    return out;
}

}  // namespace lesionquant
