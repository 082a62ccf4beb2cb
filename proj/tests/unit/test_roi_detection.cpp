#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "error.hpp"
#include "image_core.hpp"
#include "phantom.hpp"
#include "roi_detection.hpp"
#include "verify/oracles.hpp"

using namespace lesionquant;

namespace {

std::vector<double> random_profile(std::mt19937_64& rng, int n) {
    std::uniform_int_distribution<int> level(0, 12);
    std::vector<double> p(n);
    for (auto& v : p) v = level(rng);  // coarse levels give plateaus and ties
    return p;
}

double band_mean(const std::vector<double>& p, int a, int b) {
    double s = 0.0;
    int n = 0;
    for (int j = a; j <= b; ++j)
        if (j >= 0 && j < static_cast<int>(p.size())) {
            s += p[j];
            ++n;
        }
    return n ? s / n : 0.0;
}

}  // namespace

TEST_CASE("candidate peaks are strict local maxima with plateaus counted once") {
    const std::vector<double> p = {5, 1, 3, 3, 2, 4, 4, 4, 6, 2, 2, 7, 7};
    CHECK(find_candidate_peaks(p) == std::vector<int>{2, 8});
    const std::vector<std::uint8_t> allowed = {1, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
    CHECK(find_candidate_peaks(p, allowed) == std::vector<int>{8});
    CHECK_THROWS_AS(find_candidate_peaks(std::vector<double>{1, 2, 3, 4}), Error);

    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
        const auto q = random_profile(rng, 40);
        std::vector<int> peaks;
        try {
            peaks = find_candidate_peaks(q);
        } catch (const Error&) {
        }
        for (int x : peaks) {
            CHECK(x > 0);
            CHECK(q[x] > q[x - 1]);
            int e = x;
            while (q[e + 1] == q[x]) ++e;
            CHECK(q[e + 1] < q[x]);
        }
    }
}

TEST_CASE("prominence agrees with the brute-force oracle") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 300; ++t) {
        const auto q = random_profile(rng, 60);
        std::vector<int> peaks;
        try {
            peaks = find_candidate_peaks(q);
        } catch (const Error&) {
            continue;
        }
        for (int x : peaks)
            for (int window : {3, 10, 40}) CHECK(score_height(q, x, window) == oracle::prominence(q, x, window));
    }
    const std::vector<double> p = {0, 4, 1, 6, 2, 9, 0};
    CHECK(score_height(p, 1, 10) == 3.0);
    CHECK(score_height(p, 3, 10) == 4.0);
    CHECK(score_height(p, 5, 10) == 9.0);
}

TEST_CASE("haar score is the band mean difference") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        const auto q = random_profile(rng, 50);
        const int fw = haar_feature_width(1 + t % 20);
        const int x = t % 50;
        const int c0 = x - fw / 2, c1 = c0 + fw - 1, half = fw / 2;
        // Flanks are pooled, so weight each by its clipped length.
        double fs = 0.0;
        int fn = 0;
        for (int j = c0 - half; j <= c1 + half; ++j)
            if ((j < c0 || j > c1) && j >= 0 && j < 50) {
                fs += q[j];
                ++fn;
            }
        const double want = band_mean(q, c0, c1) - (fn ? fs / fn : 0.0);
        CHECK(score_haar(q, x, fw) == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK(haar_feature_width(20) == 25);
    CHECK(haar_feature_width(16) == 21);
    CHECK(haar_feature_width(1) == 3);
    for (int w = 1; w < 100; ++w) {
        CHECK(haar_feature_width(w) % 2 == 1);
        CHECK(haar_feature_width(w) >= 1.25 * w);
    }
}

TEST_CASE("selection is invariant under positive affine profile changes") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        std::vector<ScoredPeak> c(2 + t % 6);
        for (auto& s : c) {
            s.x = static_cast<int>(u(rng) * 200);
            s.s_height = u(rng);
            s.s_haar = u(rng) - 0.5;
            s.s_center = -u(rng) * 50;
        }
        auto d = c;
        const double a = std::pow(10.0, 6.0 * u(rng) - 3.0), b = 100 * u(rng) - 50;
        for (auto& s : d) {
            s.s_height *= a;  // prominence scales, offsets cancel
            s.s_haar *= a;
            (void)b;
        }
        const std::size_t i = select_peak(c), j = select_peak(d);
        CHECK(i == j);
        for (const auto& s : c) {
            CHECK(s.n_height >= 0.0);
            CHECK(s.n_height <= 1.0);
            CHECK(s.s_total == doctest::Approx(s.n_height + s.n_haar + s.n_center));
        }
    }
    std::vector<ScoredPeak> one(1);
    CHECK(select_peak(one) == 0);
    CHECK(one[0].n_height == 0.5);
    std::vector<ScoredPeak> none;
    CHECK_THROWS_AS(select_peak(none), Error);
}

TEST_CASE("place_roi centres on the peak and scans rows") {
    Frame img(40, 100, 0.0f);
    BinaryMask mask(40, 100);
    for (int y = 10; y < 90; ++y)
        for (int x = 5; x < 35; ++x) {
            mask.set(x, y, true);
            img.at(x, y) = 0.1f;
        }
    for (int y = 60; y < 75; ++y)
        for (int x = 18; x < 23; ++x) img.at(x, y) = 0.9f;

    const Roi small = place_roi(img, mask, 20, 6, 90);
    CHECK(small.x == 17);
    CHECK(small.width == 6);
    CHECK(small.y == 5);  // extent 80 fits, centred on the mask rows 10..89

    const Roi r = place_roi(img, mask, 20, 6, 20);
    // Exhaustive check: the highest in-mask mean over all admissible tops.
    double best = -1.0;
    int best_y = -1;
    for (int y0 = 10; y0 <= 70; ++y0) {
        double s = 0.0;
        int n = 0;
        for (int y = y0; y < y0 + 20; ++y)
            for (int x = r.x; x < r.x + 6; ++x)
                if (mask.get(x, y)) {
                    s += img.at(x, y);
                    ++n;
                }
        if (s / n > best) {
            best = s / n;
            best_y = y0;
        }
    }
    CHECK(r.y == best_y);
    CHECK(r.contains(20, 65));

    const Roi edge = place_roi(img, mask, 1, 6, 20);
    CHECK(edge.x == 0);
    const Roi far = place_roi(img, mask, 39, 6, 20);
    CHECK(far.x == 34);
}

TEST_CASE("detect_roi finds the stripe and mirrors with the image") {
    PhantomSpec s;
    s.width = s.height = 200;
    s.frames = 6;
    s.nucleus = {99.5, 99.5, 60, 50, 0.1, 0.4};
    s.stripe_x = 115;
    s.stripe_width = 8;
    s.stripe_length = 70;
    s.factors = "ramp:2.0";
    s.snr = 12;
    const Phantom ph = generate_phantom(s, 6);
    std::vector<Frame> frames;
    std::vector<BinaryMask> masks;
    for (std::size_t k = 2; k < ph.stack.size(); ++k) {
        frames.push_back(apply_mask(ph.stack.frames[k], ph.truth.masks[0]));
        masks.push_back(ph.truth.masks[0]);
    }
    RoiParams params;
    params.width = 16;
    params.height = 70;
    const RoiDetection det = detect_roi(frames, masks, params);
    CHECK(std::abs(det.peak().x - 115) <= 2);
    CHECK(det.roi.width == 16);
    CHECK(det.roi.contains(115, 100));
    CHECK(det.feature_width == 21);
    CHECK(det.profile.size() == 200);
    CHECK(det.noi_centroid_x == doctest::Approx(99.5).epsilon(0.01));

    auto flip = [](const auto& img) {
        auto out = img;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                if constexpr (std::is_same_v<std::decay_t<decltype(img)>, Frame>)
                    out.at(img.width - 1 - x, y) = img.at(x, y);
                else
                    out.set(img.width - 1 - x, y, img.get(x, y));
            }
        return out;
    };
    std::vector<Frame> ff;
    std::vector<BinaryMask> fm;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        ff.push_back(flip(frames[k]));
        fm.push_back(flip(masks[k]));
    }
    const RoiDetection mirrored = detect_roi(ff, fm, params);
    // Plateaus resolve to their leftmost column, so the mirrored peak lands
    // on the far end of the same plateau.
    for (int x = 0; x < 200; ++x) CHECK(mirrored.profile[199 - x] == det.profile[x]);
    const int back = 199 - mirrored.peak().x;
    CHECK(back >= det.peak().x);
    for (int x = det.peak().x; x <= back; ++x) CHECK(det.profile[x] == det.profile[det.peak().x]);
}

TEST_CASE("a flat nucleus gives a low-confidence detection or none") {
    Frame img(120, 120, 0.0f);
    BinaryMask m(120, 120);
    for (int y = 0; y < 120; ++y)
        for (int x = 0; x < 120; ++x)
            if (std::hypot(x - 59.5, y - 59.5) < 40) {
                m.set(x, y, true);
                img.at(x, y) = 0.4f;
            }
    RoiParams params;
    params.width = 10;
    params.height = 40;
    try {
        const RoiDetection det = detect_roi(std::vector<Frame>{img}, std::vector<BinaryMask>{m}, params);
        CHECK(det.low_confidence);
        if (det.candidates.size() == 1) CHECK(det.margin == 0.0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoPeakFound);
    }
    CHECK_THROWS_AS(detect_roi(std::vector<Frame>{}, std::vector<BinaryMask>{}, params), Error);
    CHECK_THROWS_AS(detect_roi(std::vector<Frame>{img}, std::vector<BinaryMask>{BinaryMask(120, 120)}, params), Error);
}
