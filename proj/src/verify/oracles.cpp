#include "verify/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace lesionquant::oracle {

Frame median_filter(const Frame& img, int radius) {
    Frame out(img.width, img.height);
    out.bit_depth_source = img.bit_depth_source;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            std::vector<float> window;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx)
                    if (img.contains(x + dx, y + dy)) window.push_back(img.at(x + dx, y + dy));
            std::sort(window.begin(), window.end());
            out.at(x, y) = window[window.size() / 2];
        }
    }
    return out;
}

std::vector<double> median_filter_1d(std::span<const double> values, int radius) {
    const int n = static_cast<int>(values.size());
    std::vector<double> out(values.size());
    for (int i = 0; i < n; ++i) {
        std::vector<double> window;
        for (int d = -radius; d <= radius; ++d)
            if (i + d >= 0 && i + d < n) window.push_back(values[i + d]);
        std::sort(window.begin(), window.end());
        out[i] = window[window.size() / 2];
    }
    return out;
}

Frame gaussian_blur(const Frame& img, double sigma) {
    const int half = static_cast<int>(std::ceil(3.0 * sigma));
    const int side = 2 * half + 1;
    std::vector<double> k(static_cast<std::size_t>(side) * side);
    double total = 0.0;
    for (int j = -half; j <= half; ++j)
        for (int i = -half; i <= half; ++i) {
            const double v = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
            k[static_cast<std::size_t>(j + half) * side + (i + half)] = v;
            total += v;
        }
    Frame out(img.width, img.height);
    out.bit_depth_source = img.bit_depth_source;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int j = -half; j <= half; ++j) {
                const int yy = std::clamp(y + j, 0, img.height - 1);
                for (int i = -half; i <= half; ++i) {
                    const int xx = std::clamp(x + i, 0, img.width - 1);
                    acc += k[static_cast<std::size_t>(j + half) * side + (i + half)] * img.at(xx, yy);
                }
            }
            out.at(x, y) = static_cast<float>(acc / total);
        }
    }
    return out;
}

int otsu_split(std::span<const std::uint64_t> histogram) {
    const int bins = static_cast<int>(histogram.size());
    long double n = 0.0L;
    for (auto h : histogram) n += static_cast<long double>(h);
    int best = -1;
    long double best_var = -1.0L;
    for (int k = 1; k < bins; ++k) {
        long double n0 = 0.0L, s0 = 0.0L, n1 = 0.0L, s1 = 0.0L;
        for (int j = 0; j < k; ++j) {
            n0 += histogram[j];
            s0 += static_cast<long double>(histogram[j]) * j;
        }
        for (int j = k; j < bins; ++j) {
            n1 += histogram[j];
            s1 += static_cast<long double>(histogram[j]) * j;
        }
        if (n0 == 0.0L || n1 == 0.0L) continue;
        const long double w0 = n0 / n, w1 = n1 / n;
        const long double d = s0 / n0 - s1 / n1;
        const long double var = w0 * w1 * d * d;
        if (var > best_var) {
            best_var = var;
            best = k;
        }
    }
    return best;
}

double prominence(std::span<const double> profile, int peak, int window) {
    const int n = static_cast<int>(profile.size());
    const int lo = std::max(0, peak - window);
    const int hi = std::min(n - 1, peak + window);
    const double v = profile[peak];
    int plateau_end = peak;
    while (plateau_end + 1 <= hi && profile[plateau_end + 1] == v) ++plateau_end;

    bool any = false;
    double key = -INFINITY;
    for (int q = lo; q <= hi; ++q) {
        if (q >= peak && q <= plateau_end) continue;
        if (profile[q] < v) continue;
        const int a = q < peak ? q + 1 : plateau_end + 1;
        const int b = q < peak ? peak - 1 : q - 1;
        double saddle = v;
        for (int j = a; j <= b; ++j) saddle = std::min(saddle, profile[j]);
        key = std::max(key, saddle);
        any = true;
    }
    if (any) return v - key;
    double m = v;
    for (int j = lo; j <= hi; ++j) m = std::min(m, profile[j]);
    return v - m;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        inter += a.bits[i] && b.bits[i];
        uni += a.bits[i] || b.bits[i];
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<int> label_components(const BinaryMask& mask, int* count) {
    std::vector<int> label(mask.bits.size(), 0);
    int next = 0;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.get(x, y) || label[static_cast<std::size_t>(y) * mask.width + x]) continue;
            ++next;
            stack.push_back({x, y});
            label[static_cast<std::size_t>(y) * mask.width + x] = next;
            while (!stack.empty()) {
                const auto [cx, cy] = stack.back();
                stack.pop_back();
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) continue;
                        auto& l = label[static_cast<std::size_t>(ny) * mask.width + nx];
                        if (!mask.get(nx, ny) || l) continue;
                        l = next;
                        stack.push_back({nx, ny});
                    }
            }
        }
    }
    if (count) *count = next;
    return label;
}

}  // namespace lesionquant::oracle
