#include "segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "error.hpp"
#include "image_core.hpp"

namespace lesionquant {

std::vector<Component> connected_components(const BinaryMask& mask) {
    const int w = mask.width;
    const int h = mask.height;
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<Component> out;
    std::vector<std::size_t> queue;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask.bits[start] || seen[start]) continue;
        Component c;
        c.min_x = c.min_y = std::numeric_limits<int>::max();
        c.max_x = c.max_y = std::numeric_limits<int>::min();
        std::int64_t sx = 0, sy = 0;
        queue.assign(1, start);
        seen[start] = 1;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const std::size_t idx = queue[head];
            const int x = static_cast<int>(idx % w);
            const int y = static_cast<int>(idx / w);
            c.pixels.push_back(idx);
            sx += x;
            sy += y;
            c.min_x = std::min(c.min_x, x);
            c.max_x = std::max(c.max_x, x);
            c.min_y = std::min(c.min_y, y);
            c.max_y = std::max(c.max_y, y);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
                    if (mask.bits[n] && !seen[n]) {
                        seen[n] = 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        c.area = c.pixels.size();
        std::sort(c.pixels.begin(), c.pixels.end());
        c.centroid = {static_cast<double>(sx) / static_cast<double>(c.area),
                      static_cast<double>(sy) / static_cast<double>(c.area)};
        out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(), [](const Component& a, const Component& b) {
        if (a.area != b.area) return a.area > b.area;
        if (a.centroid.y != b.centroid.y) return a.centroid.y < b.centroid.y;
        return a.centroid.x < b.centroid.x;
    });
    return out;
}

const Component& select_noi(const std::vector<Component>& components, Point2 image_center, std::size_t min_area) {
    const Component* best = nullptr;
    double best_d = 0.0;
    for (const auto& c : components) {
        if (c.area < min_area) continue;
        const double d = std::hypot(c.centroid.x - image_center.x, c.centroid.y - image_center.y);
        if (!best || d < best_d || (d == best_d && c.area > best->area)) {
            best = &c;
            best_d = d;
        }
    }
    if (!best) throw Error(ErrorCode::NoNucleusFound, "no nucleus found");
    return *best;
}

double PolarImage::angle(int i) const { return 2.0 * std::numbers::pi * i / n_angles; }

Frame PolarImage::as_frame() const {
    Frame f(n_radii, n_angles);
    f.pixels = values;
    return f;
}

PolarImage polar_transform(const Frame& img, Point2 center, int n_angles, int n_radii, double r_max) {
    if (!(r_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "polar_transform: r_max must be > 0");
    if (n_angles < 1 || n_radii < 2) throw Error(ErrorCode::InvalidArgument, "polar_transform: bad resolution");
    PolarImage p;
    p.n_angles = n_angles;
    p.n_radii = n_radii;
    p.r_max = r_max;
    p.center = center;
    p.values.resize(static_cast<std::size_t>(n_angles) * n_radii);
    const double dr = p.radial_step();
    for (int i = 0; i < n_angles; ++i) {
        const double t = p.angle(i);
        const double c = std::cos(t);
        const double s = std::sin(t);
        for (int j = 0; j < n_radii; ++j) {
            const double r = j * dr;
            p.values[static_cast<std::size_t>(i) * n_radii + j] = bilinear_sample(img, center.x + r * c, center.y + r * s);
        }
    }
    return p;
}

std::vector<double> extract_contour(const BinaryMask& polar_bin, double radial_step) {
    const int n_angles = polar_bin.height;
    const int n_radii = polar_bin.width;
    std::vector<double> radii(n_angles, 0.0);
    std::vector<bool> valid(n_angles, false);
    int n_valid = 0;
    for (int i = 0; i < n_angles; ++i) {
        if (!polar_bin.get(0, i)) continue;
        int j = 0;
        while (j + 1 < n_radii && polar_bin.get(j + 1, i)) ++j;
        radii[i] = (j + 1 < n_radii ? j + 0.5 : static_cast<double>(j)) * radial_step;
        valid[i] = true;
        ++n_valid;
    }
    if (n_valid == 0 || 4 * n_valid < n_angles)
        throw Error(ErrorCode::ContourExtractionFailed, "contour extraction failed");
    if (n_valid == n_angles) return radii;

    constexpr int kNeighbours = 3;
    std::vector<double> filled = radii;
    std::vector<double> pool;
    for (int i = 0; i < n_angles; ++i) {
        if (valid[i]) continue;
        pool.clear();
        for (int dir : {-1, 1}) {
            int found = 0;
            for (int step = 1; step < n_angles && found < kNeighbours; ++step) {
                const int k = ((i + dir * step) % n_angles + n_angles) % n_angles;
                if (valid[k]) {
                    pool.push_back(radii[k]);
                    ++found;
                }
            }
        }
        std::sort(pool.begin(), pool.end());
        const std::size_t m = pool.size();
        filled[i] = m % 2 ? pool[m / 2] : 0.5 * (pool[m / 2 - 1] + pool[m / 2]);
    }
    return filled;
}

void fill_polar_holes(BinaryMask& polar_bin, int domain) {
    const int w = std::min(domain, polar_bin.width);
    const int h = polar_bin.height;
    if (w < 1 || h < 1) return;
    std::vector<std::uint8_t> outside(static_cast<std::size_t>(w) * h, 0);
    std::vector<std::pair<int, int>> stack;
    auto push = [&](int j, int i) {
        auto& o = outside[static_cast<std::size_t>(i) * w + j];
        if (o || polar_bin.get(j, i)) return;
        o = 1;
        stack.push_back({j, i});
    };
    for (int i = 0; i < h; ++i) push(w - 1, i);
    while (!stack.empty()) {
        const auto [j, i] = stack.back();
        stack.pop_back();
        if (j > 0) push(j - 1, i);
        if (j + 1 < w) push(j + 1, i);
        push(j, (i + 1) % h);
        push(j, (i + h - 1) % h);
    }
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            if (!outside[static_cast<std::size_t>(i) * w + j]) polar_bin.set(j, i, true);
}

BinaryMask rasterize_contour(Point2 center, std::span<const double> radii, int width, int height) {
    const std::size_t n = radii.size();
    std::vector<Point2> poly(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        poly[i] = {center.x + radii[i] * std::cos(t), center.y + radii[i] * std::sin(t)};
    }
    BinaryMask mask(width, height);
    std::vector<double> crossings;
    for (int y = 0; y < height; ++y) {
        const double fy = y;
        crossings.clear();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Point2& a = poly[i];
            const Point2& b = poly[j];
            if ((a.y > fy) != (b.y > fy)) crossings.push_back(a.x + (fy - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        std::sort(crossings.begin(), crossings.end());
        for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
            const double lo = std::ceil(crossings[k]);
            const double hi = std::ceil(crossings[k + 1]) - 1.0;
            const int x0 = static_cast<int>(std::max(lo, 0.0));
            const int x1 = static_cast<int>(std::min(hi, static_cast<double>(width - 1)));
            for (int x = x0; x <= x1; ++x) mask.set(x, y, true);
        }
    }
    return mask;
}

namespace {

double default_r_max(const Frame& img) { return 0.5 * std::hypot(img.width, img.height); }

std::size_t min_area_pixels(const Frame& img, double fraction) {
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(img.size())));
}

Point2 image_center(const Frame& img) { return {(img.width - 1) / 2.0, (img.height - 1) / 2.0}; }

// Gaussian blur whose angular axis wraps around.
Frame blur_polar(const Frame& polar, double sigma) {
    const int pad = static_cast<int>(std::ceil(3.0 * sigma));
    const int w = polar.width;
    const int h = polar.height;
    Frame padded(w, h + 2 * pad);
    for (int y = 0; y < h + 2 * pad; ++y) {
        const int src = ((y - pad) % h + h) % h;
        std::copy_n(&polar.pixels[static_cast<std::size_t>(src) * w], w, &padded.pixels[static_cast<std::size_t>(y) * w]);
    }
    const Frame blurred = gaussian_blur(padded, sigma);
    Frame out(w, h);
    std::copy_n(&blurred.pixels[static_cast<std::size_t>(pad) * w], out.size(), out.pixels.begin());
    return out;
}

}  // namespace

SegmentedFrame segment_frame(const Frame& img, const SegmentationParams& params) {
    if (img.empty()) throw Error(ErrorCode::EmptyInput, "segment_frame: empty image");
    SegmentedFrame seg;
    seg.smoothed = median_filter(img, params.median_radius);
    OtsuResult coarse;
    try {
        coarse = otsu_threshold(seg.smoothed, params.otsu_bins);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateHistogram) throw Error(ErrorCode::NoNucleusFound, "no nucleus found (blank frame)");
        throw;
    }
    seg.foreground = coarse.mask;
    const auto components = connected_components(coarse.mask);
    const Component& noi = select_noi(components, image_center(img), min_area_pixels(img, params.min_area_fraction));
    seg.coarse_noi = BinaryMask(img.width, img.height);
    double r2 = 0.0;
    for (auto idx : noi.pixels) {
        seg.coarse_noi.bits[idx] = 1;
        const double dx = static_cast<double>(idx % img.width) - noi.centroid.x;
        const double dy = static_cast<double>(idx / img.width) - noi.centroid.y;
        r2 = std::max(r2, dx * dx + dy * dy);
    }
    seg.coarse_radius = std::sqrt(r2) + 0.5;
    seg.centroid = noi.centroid;

    const double r_max = params.r_max > 0.0 ? params.r_max : default_r_max(img);
    seg.polar = polar_transform(img, seg.centroid, params.n_angles, params.n_radii, r_max);

    Frame blurred = blur_polar(seg.polar.as_frame(), params.polar_sigma);
    seg.polar_smoothed = Frame(blurred.width, blurred.height);
    for (int i = 0; i < blurred.height; ++i) {
        std::vector<double> row(blurred.pixels.begin() + static_cast<std::ptrdiff_t>(i) * blurred.width,
                                blurred.pixels.begin() + static_cast<std::ptrdiff_t>(i + 1) * blurred.width);
        const auto med = median_filter_1d(std::span<const double>(row), params.polar_median_radius);
        for (int j = 0; j < blurred.width; ++j) seg.polar_smoothed.at(j, i) = static_cast<float>(med[j]);
    }

    // Threshold only over radii near the coarse nucleus so the background
    // class is not swamped by the far field.
    const double dr = seg.polar.radial_step();
    const int domain = std::clamp(static_cast<int>(std::floor(params.polar_domain_factor * seg.coarse_radius / dr)) + 1, 2,
                                  params.n_radii);
    std::vector<float> samples;
    samples.reserve(static_cast<std::size_t>(domain) * params.n_angles);
    for (int i = 0; i < params.n_angles; ++i)
        for (int j = 0; j < domain; ++j) samples.push_back(seg.polar_smoothed.at(j, i));
    HistogramSplit split;
    try {
        split = otsu_split(samples, params.otsu_bins);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateHistogram) throw Error(ErrorCode::ContourExtractionFailed, "contour extraction failed (flat polar image)");
        throw;
    }
    seg.polar_binary = BinaryMask(params.n_radii, params.n_angles);
    for (int i = 0; i < params.n_angles; ++i)
        for (int j = 0; j < domain; ++j)
            seg.polar_binary.set(j, i, histogram_bin(seg.polar_smoothed.at(j, i), split.lo, split.hi, split.bins) >= split.split);

    fill_polar_holes(seg.polar_binary, domain);
    seg.contour = extract_contour(seg.polar_binary, dr);
    seg.mask = rasterize_contour(seg.centroid, seg.contour, img.width, img.height);
    seg.masked = apply_mask(img, seg.mask);
    return seg;
}

BinaryMask segment_frame_cartesian(const Frame& img, const SegmentationParams& params) {
    const Frame smoothed = median_filter(img, params.median_radius);
    const auto coarse = otsu_threshold(smoothed, params.otsu_bins);
    const auto components = connected_components(coarse.mask);
    const Component& noi = select_noi(components, image_center(img), min_area_pixels(img, params.min_area_fraction));
    BinaryMask mask(img.width, img.height);
    for (auto idx : noi.pixels) mask.bits[idx] = 1;
    return mask;
}

}  // namespace lesionquant
