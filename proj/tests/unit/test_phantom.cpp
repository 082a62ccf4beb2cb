#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "error.hpp"
#include "phantom.hpp"
#include "stack_io.hpp"
#include "verify/oracles.hpp"

using namespace lesionquant;
namespace fs = std::filesystem;

namespace {

PhantomSpec small_spec() {
    PhantomSpec s;
    s.width = s.height = 128;
    s.frames = 6;
    s.nucleus = {63.5, 63.5, 40, 34, 0.3, 0.4};
    s.stripe_x = 70;
    s.stripe_length = 40;
    s.truth_roi_width = 14;
    s.truth_roi_height = 50;
    return s;
}

}  // namespace

TEST_CASE("generation is a pure function of spec and seed") {
    PhantomSpec s = small_spec();
    s.snr = 6;
    s.jitter_px = 0.4;
    const Phantom a = generate_phantom(s, 99), b = generate_phantom(s, 99), c = generate_phantom(s, 100);
    for (std::size_t k = 0; k < a.stack.size(); ++k) CHECK(a.stack.frames[k].pixels == b.stack.frames[k].pixels);
    CHECK(a.stack.frames[2].pixels != c.stack.frames[2].pixels);
    CHECK(truth_csv(a) == truth_csv(b));
}

TEST_CASE("factor schedules") {
    const std::vector<FrameRole> roles = assign_roles(parse_layout("default"), 6);
    PhantomSpec s;
    s.factors = "ramp:1.8";
    auto f = factor_schedule(s, roles);
    CHECK(f[0] == 1.0);
    CHECK(f[1] == 1.0);
    CHECK(f[2] == doctest::Approx(1.2));
    CHECK(f[5] == doctest::Approx(1.8));
    s.factors = "saturating:2:1";
    f = factor_schedule(s, roles);
    CHECK(f[2] == doctest::Approx(1.0 + (1.0 - std::exp(-1.0))));
    CHECK(f[5] < 2.0);
    s.factors = "list:1,1,1.1,1.2,1.3,1.4";
    CHECK(factor_schedule(s, roles)[4] == 1.3);
    s.factors = "constant";
    CHECK(factor_schedule(s, roles) == std::vector<double>(6, 1.0));
    for (const char* bad : {"list:1,2", "list:2,1,1,1,1,1", "saturating:2", "wobble:3"}) {
        s.factors = bad;
        CHECK_THROWS_AS(factor_schedule(s, roles), Error);
    }
}

TEST_CASE("spec parsing and validation") {
    const PhantomSpec s = parse_phantom_spec(
        "name = cellA\nwidth = 100\nheight = 80\nnucleus.a = 30\nnucleus.b = 20\nstripe.length = 20\n"
        "motion.frame = 1, 2, 3\nblob = 10, 20, 3, 0.1\nnucleus2 = 10, 10, 5, 5, 0.3\n");
    CHECK(s.name == "cellA");
    CHECK(s.nucleus.cx == 49.5);
    CHECK(s.nucleus.cy == 39.5);
    CHECK(s.stripe_x == 50.0);
    CHECK(s.motion.size() == 1);
    CHECK(s.motion[0].theta == doctest::Approx(3.0 * M_PI / 180.0));
    CHECK(s.blobs.size() == 1);
    CHECK(s.extra_nuclei[0].intensity == 0.3);

    const PhantomSpec back = parse_phantom_spec(serialize_phantom_spec(s));
    CHECK(serialize_phantom_spec(back) == serialize_phantom_spec(s));

    CHECK_THROWS_AS(parse_phantom_spec("nucleus.radius = 3\n"), Error);
    CHECK_THROWS_AS(parse_phantom_spec("blob = 1, 2\n"), Error);

    PhantomSpec out = small_spec();
    out.stripe_x = 110;  // beyond the nucleus edge
    CHECK_THROWS_AS(generate_phantom(out, 1), Error);
    PhantomSpec tall = small_spec();
    tall.stripe_length = 100;
    CHECK_THROWS_AS(generate_phantom(tall, 1), Error);
    PhantomSpec moves = small_spec();
    moves.motion = {RigidTransform{}};
    CHECK_THROWS_AS(generate_phantom(moves, 1), Error);
}

TEST_CASE("truth masks and stack structure") {
    PhantomSpec s = small_spec();
    s.drift_x = 1.0;
    const Phantom ph = generate_phantom(s, 4);
    CHECK(ph.stack.size() == 6);
    CHECK(ph.stack.roles[1] == FrameRole::Dark);
    CHECK(ph.truth.masks.size() == 6);
    CHECK(oracle::iou(ph.truth.masks[0], ph.truth.reference_mask) == 1.0);
    CHECK(ph.truth.transforms[3].dx == 3.0);
    // Area of the digitized ellipse.
    CHECK(std::abs(static_cast<double>(ph.truth.reference_mask.count()) - M_PI * 40 * 34) < 0.02 * M_PI * 40 * 34);
    // The dark frame holds only background.
    for (float v : ph.stack.frames[1].pixels) CHECK(v == doctest::Approx(0.05).epsilon(1e-4));
    CHECK(ph.truth.roi.x == 63);
    CHECK(ph.truth.roi.width == 14);
}

TEST_CASE("true ratio matches a direct measurement of the noiseless stack") {
    PhantomSpec s = small_spec();
    s.factors = "ramp:1.8";  // stays below saturation
    const Phantom ph = generate_phantom(s, 5);
    const auto& t = ph.truth;
    auto quotient = [&](const Frame& f) {
        double rs = 0, ns = 0;
        int rn = 0, nn = 0;
        for (int y = 0; y < f.height; ++y)
            for (int x = 0; x < f.width; ++x) {
                if (!t.reference_mask.get(x, y)) continue;
                const double v = f.at(x, y) - s.background;
                ns += v;
                ++nn;
                if (t.roi.contains(x, y)) {
                    rs += v;
                    ++rn;
                }
            }
        return (rs / rn) / (ns / nn);
    };
    const double q0 = quotient(ph.stack.frames[0]);
    CHECK(t.true_ratio[0] == 1.0);
    for (std::size_t k = 2; k < ph.stack.size(); ++k)
        CHECK(quotient(ph.stack.frames[k]) / q0 == doctest::Approx(t.true_ratio[k]).epsilon(1e-4));
    CHECK(t.true_ratio[5] > 1.1);

    // Without accumulation the ratio stays at 1.
    PhantomSpec flat = small_spec();
    flat.factors = "constant";
    for (double r : generate_phantom(flat, 5).truth.true_ratio) CHECK(r == 1.0);
}

TEST_CASE("render_scene is the background-free frame content") {
    const PhantomSpec s = small_spec();
    const Phantom ph = generate_phantom(s, 1);
    const Frame scene = render_scene(s, 1.0);
    for (std::size_t i = 0; i < scene.size(); ++i)
        CHECK(ph.stack.frames[0].pixels[i] == doctest::Approx(scene.pixels[i] + s.background).epsilon(1e-4));
    const Frame brighter = render_scene(s, 2.0);
    CHECK(brighter.at(70, 63) > scene.at(70, 63));
    CHECK(brighter.at(40, 63) == scene.at(40, 63));
}

TEST_CASE("write_phantom writes stack, spec and truth") {
    const fs::path dir = fs::temp_directory_path() / "lesionquant-unit-phantom";
    fs::remove_all(dir);
    PhantomSpec s = small_spec();
    s.name = "p1";
    const Phantom ph = generate_phantom(s, 8);
    const fs::path stack = write_phantom(ph, s, 8, dir);
    CHECK(stack == dir / "p1.tif");
    CHECK(fs::exists(dir / "p1.spec"));
    CHECK(fs::exists(dir / "p1.truth.csv"));
    const PhantomSpec again = read_phantom_spec(dir / "p1.spec");
    const Phantom regen = generate_phantom(again, 8);
    const ImageStack loaded = load_stack(stack);
    for (std::size_t k = 0; k < loaded.size(); ++k) CHECK(loaded.frames[k].pixels == regen.stack.frames[k].pixels);
    std::ifstream in(dir / "p1.truth.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "frame_index,role,time_s,factor,dx,dy,theta_rad,true_ratio");
}
