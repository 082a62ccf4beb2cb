#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "error.hpp"
#include "helpers.hpp"
#include "image_core.hpp"
#include "measurement.hpp"

using namespace lesionquant;

namespace {

FrameSample sample(std::size_t k, FrameRole role, double roi, double noi) {
    return {k, role, 6.5 * k, FrameMeasurement{roi, noi}};
}

IntensityCurve curve_of(const std::vector<double>& ratios) {
    IntensityCurve c;
    for (std::size_t k = 0; k < ratios.size(); ++k) {
        CurvePoint p;
        p.frame_index = k;
        p.time_s = 6.5 * k;
        p.ratio = ratios[k];
        p.excluded = std::isnan(ratios[k]);
        c.points.push_back(p);
    }
    return c;
}

}  // namespace

TEST_CASE("background is the mean outside the dilated foreground") {
    Frame f(20, 20, 0.1f);
    BinaryMask fg(20, 20);
    for (int y = 8; y < 12; ++y)
        for (int x = 8; x < 12; ++x) {
            fg.set(x, y, true);
            f.at(x, y) = 0.9f;
        }
    f.at(13, 10) = 0.5f;  // inside the 2-pixel margin
    const Background bg = estimate_background(f, fg, 2);
    CHECK(bg.value == doctest::Approx(0.1));
    CHECK(bg.pixels == 400 - 64);
    CHECK(!bg.empty);
    const Background none = estimate_background(f, BinaryMask(20, 20, true), 2);
    CHECK(none.empty);
    CHECK(none.value == 0.0);
    CHECK_THROWS_AS(estimate_background(f, BinaryMask(10, 10), 2), Error);
}

TEST_CASE("frame means agree with direct summation") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 50; ++t) {
        const Frame f = lqtest::random_frame(rng, 40, 30, 1000);
        const BinaryMask m = lqtest::random_mask(rng, 40, 30, 0.6);
        const Roi roi{static_cast<int>(rng() % 30), static_cast<int>(rng() % 20), 1 + static_cast<int>(rng() % 15),
                      1 + static_cast<int>(rng() % 15)};
        const double bg = 0.01 * (t % 5);
        double rs = 0, ns = 0;
        int rn = 0, nn = 0;
        for (int y = 0; y < 30; ++y)
            for (int x = 0; x < 40; ++x) {
                if (!m.get(x, y)) continue;
                ns += f.at(x, y);
                ++nn;
                if (x >= roi.x && x < roi.x + roi.width && y >= roi.y && y < roi.y + roi.height) {
                    rs += f.at(x, y);
                    ++rn;
                }
            }
        const auto got = measure_frame(f, roi, m, bg);
        if (rn == 0) {
            CHECK(!got);
            continue;
        }
        REQUIRE(got);
        CHECK(got->i_roi == doctest::Approx(std::max(0.0, rs / rn - bg)));
        CHECK(got->i_noi == doctest::Approx(std::max(0.0, ns / nn - bg)));
    }
    const Frame dim(10, 10, 0.05f);
    const auto clamped = measure_frame(dim, Roi{0, 0, 5, 5}, BinaryMask(10, 10, true), 0.2);
    REQUIRE(clamped);
    CHECK(clamped->i_roi == 0.0);
    CHECK(!measure_frame(dim, Roi{0, 0, 5, 5}, BinaryMask(10, 10), 0.0));
}

TEST_CASE("compute_curve normalizes to the pre-irradiation quotient") {
    std::vector<FrameSample> s = {sample(0, FrameRole::PreIrradiation, 0.3, 0.2),
                                  {1, FrameRole::Dark, 6.5, std::nullopt},
                                  sample(2, FrameRole::PostIrradiation, 0.45, 0.2),
                                  {3, FrameRole::PostIrradiation, 19.5, std::nullopt},
                                  sample(4, FrameRole::PostIrradiation, 0.3, 0.1)};
    const IntensityCurve c = compute_curve(s);
    REQUIRE(c.points.size() == 5);
    CHECK(c.points[0].ratio == 1.0);
    CHECK(c.points[1].excluded);
    CHECK(c.points[2].ratio == doctest::Approx(1.5));
    CHECK(c.points[3].excluded);
    CHECK(c.points[4].ratio == doctest::Approx(2.0));
    CHECK(c.points[4].time_s == 26.0);

    // Dark frames are excluded even if measured.
    s[1].value = FrameMeasurement{1.0, 1.0};
    CHECK(compute_curve(s).points[1].excluded);

    auto bad = s;
    bad[0].value = FrameMeasurement{0.0, 0.2};
    CHECK_THROWS_AS(compute_curve(bad), Error);
    bad[0].value.reset();
    CHECK_THROWS_AS(compute_curve(bad), Error);
    CHECK_THROWS_AS(compute_curve(std::span<const FrameSample>{}), Error);
}

TEST_CASE("ratios are invariant under a common gain") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<FrameSample> a, b;
        const double g = 0.1 + 3.0 * u(rng);
        for (std::size_t k = 0; k < 10; ++k) {
            const double r = u(rng), n = u(rng);
            const FrameRole role = k == 0 ? FrameRole::PreIrradiation : FrameRole::PostIrradiation;
            a.push_back(sample(k, role, r, n));
            b.push_back(sample(k, role, g * r, g * n));
        }
        const auto ca = compute_curve(a), cb = compute_curve(b);
        for (std::size_t k = 0; k < 10; ++k) CHECK(cb.points[k].ratio == doctest::Approx(ca.points[k].ratio).epsilon(1e-12));
    }
}

TEST_CASE("aggregate mean and standard error") {
    const double nan = std::nan("");
    const std::vector<IntensityCurve> curves = {curve_of({1, 1, 2, 5}), curve_of({1, nan, 4}), curve_of({1, 3, 3, 9})};
    const AggregateCurve a = aggregate(curves);
    REQUIRE(a.points.size() == 3);  // common prefix
    CHECK(a.points[0].mean_ratio == 1.0);
    CHECK(a.points[0].stderr_ratio == 0.0);
    CHECK(a.points[0].n == 3);
    CHECK(a.points[1].n == 2);
    CHECK(a.points[1].mean_ratio == 2.0);
    CHECK(a.points[1].stderr_ratio == doctest::Approx(1.0));
    CHECK(a.points[1].time_s == 6.5);
    CHECK(a.points[2].mean_ratio == 3.0);
    CHECK(a.points[2].stderr_ratio == doctest::Approx(std::sqrt(1.0 / 3.0)));

    const AggregateCurve single = aggregate(std::vector<IntensityCurve>{curve_of({1, 1.4})});
    CHECK(single.points[1].stderr_ratio == 0.0);
    CHECK(single.points[1].n == 1);

    // An index where every curve is excluded is dropped.
    const AggregateCurve gap = aggregate(std::vector<IntensityCurve>{curve_of({1, nan, 2}), curve_of({1, nan, 4})});
    REQUIRE(gap.points.size() == 2);
    CHECK(gap.points[1].time_s == 13.0);
    CHECK_THROWS_AS(aggregate(std::span<const IntensityCurve>{}), Error);
}

TEST_CASE("aggregate is bit-identical under permutation") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.5, 2.5);
    for (int t = 0; t < 30; ++t) {
        std::vector<IntensityCurve> curves;
        for (int c = 0; c < 7; ++c) {
            std::vector<double> r(12);
            for (auto& v : r) v = u(rng);
            r[0] = 1.0;
            curves.push_back(curve_of(r));
        }
        const AggregateCurve ref = aggregate(curves);
        std::shuffle(curves.begin(), curves.end(), rng);
        const AggregateCurve perm = aggregate(curves);
        REQUIRE(perm.points.size() == ref.points.size());
        for (std::size_t k = 0; k < ref.points.size(); ++k) {
            CHECK(perm.points[k].mean_ratio == ref.points[k].mean_ratio);
            CHECK(perm.points[k].stderr_ratio == ref.points[k].stderr_ratio);
        }
    }
}
