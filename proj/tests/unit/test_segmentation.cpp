#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "error.hpp"
#include "helpers.hpp"
#include "phantom.hpp"
#include "segmentation.hpp"
#include "verify/oracles.hpp"

using namespace lesionquant;

namespace {

PhantomSpec cell(double cx, double cy, double a, double b, double angle) {
    PhantomSpec s;
    s.width = s.height = 200;
    s.frames = 1;
    s.layout = "pre-only";
    s.nucleus = {cx, cy, a, b, angle, 0.4};
    s.stripe_x = std::round(cx);
    s.stripe_length = b;
    return s;
}

// Ray casting against the star polygon, independent of the scanline fill.
bool inside_star(Point2 c, std::span<const double> r, double px, double py) {
    const std::size_t n = r.size();
    bool in = false;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        const double ti = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
        const double tj = 2.0 * std::numbers::pi * static_cast<double>(j) / n;
        const double xi = c.x + r[i] * std::cos(ti), yi = c.y + r[i] * std::sin(ti);
        const double xj = c.x + r[j] * std::cos(tj), yj = c.y + r[j] * std::sin(tj);
        if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi) in = !in;
    }
    return in;
}

}  // namespace

TEST_CASE("connected components agree with the flood-fill oracle") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 40; ++t) {
        const BinaryMask m = lqtest::random_mask(rng, 30 + t % 7, 25 + t % 5, 0.2 + 0.01 * t);
        const auto comps = connected_components(m);
        int count = 0;
        const auto labels = oracle::label_components(m, &count);
        REQUIRE(static_cast<int>(comps.size()) == count);

        // Same partition: each component maps to exactly one oracle label.
        std::size_t covered = 0;
        std::set<int> seen;
        for (std::size_t c = 0; c < comps.size(); ++c) {
            const int label = labels[comps[c].pixels.front()];
            CHECK(seen.insert(label).second);
            for (auto p : comps[c].pixels) CHECK(labels[p] == label);
            covered += comps[c].pixels.size();
            CHECK(comps[c].area == comps[c].pixels.size());
            if (c > 0) CHECK(comps[c - 1].area >= comps[c].area);
        }
        CHECK(covered == m.count());
    }
}

TEST_CASE("component statistics") {
    BinaryMask m(10, 10);
    for (int y = 2; y <= 4; ++y)
        for (int x = 3; x <= 7; ++x) m.set(x, y, true);
    m.set(8, 5, true);  // diagonal neighbour joins
    m.set(0, 9, true);
    const auto comps = connected_components(m);
    REQUIRE(comps.size() == 2);
    CHECK(comps[0].area == 16);
    CHECK(comps[0].min_x == 3);
    CHECK(comps[0].max_x == 8);
    CHECK(comps[0].max_y == 5);
    CHECK(comps[0].centroid.x == doctest::Approx((15 * 5.0 + 8) / 16));
    CHECK(comps[1].area == 1);
    CHECK(comps[1].centroid.x == 0.0);
    CHECK(comps[1].centroid.y == 9.0);
}

TEST_CASE("select_noi picks the closest large component") {
    BinaryMask m(60, 60);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) m.set(x, y, true);  // big, far
    for (int y = 27; y < 33; ++y)
        for (int x = 27; x < 33; ++x) m.set(x, y, true);  // small, central
    m.set(45, 45, true);                                   // speck
    const auto comps = connected_components(m);
    CHECK(select_noi(comps, {29.5, 29.5}, 10).area == 36);
    CHECK(select_noi(comps, {29.5, 29.5}, 100).area == 400);
    CHECK(select_noi(comps, {45, 45}, 10).area == 36);
    CHECK_THROWS_AS(select_noi(comps, {29.5, 29.5}, 1000), Error);
    CHECK_THROWS_AS(select_noi({}, {0, 0}, 1), Error);
}

TEST_CASE("polar transform samples radial lines") {
    Frame img(101, 101);
    for (int y = 0; y < 101; ++y)
        for (int x = 0; x < 101; ++x) img.at(x, y) = static_cast<float>(std::hypot(x - 50.0, y - 50.0));
    const PolarImage p = polar_transform(img, {50, 50}, 64, 41, 40.0);
    CHECK(p.radial_step() == doctest::Approx(1.0));
    CHECK(p.angle(16) == doctest::Approx(std::numbers::pi / 2));
    for (int i = 0; i < 64; ++i) {
        CHECK(p.at(i, 0) == doctest::Approx(0.0f));
        // The cone is not bilinear at its apex, so skip the first samples.
        for (int j = 3; j < 41; ++j) CHECK(std::abs(p.at(i, j) - j) < 0.05);
    }
    const Frame f = p.as_frame();
    CHECK(f.width == 41);
    CHECK(f.height == 64);
}

TEST_CASE("extract_contour reads the outer edge of the first run") {
    BinaryMask b(20, 8);
    const int runs[8] = {5, 6, 0, 7, 0, 0, 9, 4};
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < runs[i]; ++j) b.set(j, i, true);
    b.set(15, 0, true);  // detached run ignored
    const auto r = extract_contour(b, 0.5);
    REQUIRE(r.size() == 8);
    // A run of n samples ends half a step past the centre of sample n-1.
    CHECK(r[0] == doctest::Approx(2.25));
    CHECK(r[1] == doctest::Approx(2.75));
    CHECK(r[3] == doctest::Approx(3.25));
    CHECK(r[6] == doctest::Approx(4.25));
    CHECK(r[7] == doctest::Approx(1.75));
    // Gap rows take the median of the three nearest valid rows on each side.
    CHECK(r[2] == doctest::Approx(2.5));
    CHECK(r[4] == doctest::Approx(2.5));

    BinaryMask sparse(20, 8);
    sparse.set(0, 0, true);
    CHECK_THROWS_AS(extract_contour(sparse, 1.0), Error);
}

TEST_CASE("fill_polar_holes closes enclosed background only") {
    BinaryMask b(12, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 8; ++j) b.set(j, i, true);
    b.set(3, 2, false);
    b.set(4, 2, false);        // enclosed hole
    b.set(2, 0, false);        // wraps to row 5, still enclosed
    b.set(2, 5, false);
    for (int j = 4; j < 8; ++j) b.set(j, 4, false);  // notch open to the outside
    fill_polar_holes(b, 10);
    CHECK(b.get(3, 2));
    CHECK(b.get(4, 2));
    CHECK(b.get(2, 0));
    CHECK(b.get(2, 5));
    for (int j = 4; j < 8; ++j) CHECK(!b.get(j, 4));
    CHECK(!b.get(10, 1));
}

TEST_CASE("rasterize_contour matches ray casting") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> rad(8.0, 20.0);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> r(90);
        for (auto& v : r) v = rad(rng);
        const Point2 c{24.3 + t * 0.1, 25.7};
        const BinaryMask m = rasterize_contour(c, r, 50, 50);
        int disagree = 0;
        for (int y = 0; y < 50; ++y)
            for (int x = 0; x < 50; ++x) disagree += m.get(x, y) != inside_star(c, r, x, y);
        CHECK(disagree == 0);
    }
}

TEST_CASE("segment_frame on noiseless ellipses") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 8; ++t) {
        const PhantomSpec s = cell(99.5 + 10 * u(rng), 99.5 + 10 * u(rng), 55 + 8 * u(rng), 45 + 5 * u(rng), u(rng));
        const Phantom ph = generate_phantom(s, 100 + t);
        const SegmentedFrame seg = segment_frame(ph.stack.frames[0]);
        CHECK(oracle::iou(seg.mask, ph.truth.masks[0]) >= 0.95);
        CHECK(std::hypot(seg.centroid.x - s.nucleus.cx, seg.centroid.y - s.nucleus.cy) < 1.5);
        CHECK(seg.contour.size() == 360);
        // masked frame is zero outside the mask
        for (std::size_t i = 0; i < seg.mask.size(); ++i)
            if (!seg.mask.bits[i]) CHECK(seg.masked.pixels[i] == 0.0f);
    }
}

TEST_CASE("untextured ellipse gives a smooth contour") {
    PhantomSpec s = cell(99.5, 99.5, 60, 40, 0.7);
    s.texture_amplitude = 0.0;
    const SegmentedFrame seg = segment_frame(generate_phantom(s, 2).stack.frames[0]);
    const double dr = seg.polar.radial_step();
    double jump = 0.0;
    for (std::size_t i = 0; i < seg.contour.size(); ++i)
        jump = std::max(jump, std::abs(seg.contour[i] - seg.contour[(i + 1) % seg.contour.size()]));
    CHECK(jump <= 2.0 * dr + 1e-9);
    CHECK(oracle::iou(seg.mask, generate_phantom(s, 2).truth.masks[0]) >= 0.97);
}

TEST_CASE("segmentation is covariant under integer translation") {
    const PhantomSpec s = cell(90.5, 99.5, 50, 42, 0.3);
    const Frame f = generate_phantom(s, 9).stack.frames[0];
    const int shift = 11;
    Frame g(f.width, f.height, 0.0f);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x + shift < f.width; ++x) g.at(x + shift, y) = f.at(x, y);
    // Background fill for the vacated columns matches the scene background.
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < shift; ++x) g.at(x, y) = f.at(0, y);
    SegmentationParams p;
    p.r_max = 120.0;
    const auto a = segment_frame(f, p);
    const auto b = segment_frame(g, p);
    CHECK(b.centroid.x - a.centroid.x == doctest::Approx(shift).epsilon(1e-3));
    CHECK(b.centroid.y == doctest::Approx(a.centroid.y).epsilon(1e-3));
    CHECK(a.mask.count() == b.mask.count());
}

TEST_CASE("blank frames have no nucleus") {
    CHECK_THROWS_AS(segment_frame(Frame(64, 64, 0.1f)), Error);
    try {
        segment_frame(Frame(64, 64, 0.0f));
    } catch (const Error& e) {
        CHECK((e.code() == ErrorCode::NoNucleusFound || e.code() == ErrorCode::DegenerateHistogram));
    }
}

TEST_CASE("cartesian baseline finds the nucleus") {
    const PhantomSpec s = cell(99.5, 99.5, 55, 45, 0.0);
    const Phantom ph = generate_phantom(s, 1);
    CHECK(oracle::iou(segment_frame_cartesian(ph.stack.frames[0]), ph.truth.masks[0]) > 0.85);
}
