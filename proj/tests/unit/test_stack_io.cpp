#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "error.hpp"
#include "helpers.hpp"
#include "keyvalue.hpp"
#include "phantom.hpp"
#include "stack_io.hpp"
#include "tiff_codec.hpp"

using namespace lesionquant;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lesionquant-unit-stack-io";
    fs::create_directories(dir);
    return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

tiff::Page page(int w, int h, int bits, std::uint16_t fill, const std::string& desc = "") {
    tiff::Page p;
    p.width = w;
    p.height = h;
    p.bits_per_sample = bits;
    p.samples.assign(static_cast<std::size_t>(w) * h, fill);
    p.description = desc;
    return p;
}

// Minimal little-endian TIFF with SamplesPerPixel = 3.
std::vector<std::uint8_t> rgb_tiff() {
    std::vector<std::uint8_t> b = {'I', 'I', 42, 0, 8, 0, 0, 0};
    auto u16 = [&](std::uint16_t v) {
        b.push_back(v & 0xFF);
        b.push_back(v >> 8);
    };
    auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
    };
    auto entry = [&](std::uint16_t tag, std::uint16_t type, std::uint32_t count, std::uint32_t value) {
        u16(tag);
        u16(type);
        u32(count);
        if (type == 3 && count == 1) {
            u16(static_cast<std::uint16_t>(value));
            u16(0);
        } else {
            u32(value);
        }
    };
    const std::uint32_t data_at = 8 + 2 + 8 * 12 + 4;
    u16(8);
    entry(256, 3, 1, 1);
    entry(257, 3, 1, 1);
    entry(258, 3, 1, 8);
    entry(259, 3, 1, 1);
    entry(262, 3, 1, 2);
    entry(273, 4, 1, data_at);
    entry(277, 3, 1, 3);
    entry(279, 4, 1, 3);
    u32(0);
    b.insert(b.end(), {10, 20, 30});
    return b;
}

}  // namespace

TEST_CASE("tiff codec round-trips 8 and 16 bit, plain and deflate") {
    std::mt19937_64 rng(21);
    for (auto comp : {tiff::Compression::None, tiff::Compression::Deflate}) {
        for (int bits : {8, 16}) {
            std::vector<tiff::Page> pages;
            for (int k = 0; k < 3; ++k) {
                tiff::Page p = page(17, 9, bits, 0, "time_s=" + std::to_string(k));
                for (auto& s : p.samples) s = static_cast<std::uint16_t>(rng() % (bits == 8 ? 256 : 65536));
                pages.push_back(p);
            }
            const auto decoded = tiff::decode(tiff::encode(pages, comp));
            REQUIRE(decoded.size() == 3);
            for (int k = 0; k < 3; ++k) {
                CHECK(decoded[k].width == 17);
                CHECK(decoded[k].height == 9);
                CHECK(decoded[k].bits_per_sample == bits);
                CHECK(decoded[k].samples == pages[k].samples);
                CHECK(decoded[k].description == pages[k].description);
            }
        }
    }
}

TEST_CASE("tiff decoder rejects colour and garbage") {
    const auto rgb = rgb_tiff();
    CHECK_THROWS_AS(tiff::decode(rgb), Error);
    const std::vector<std::uint8_t> junk = {'n', 'o', 't', ' ', 'a', ' ', 't', 'i', 'f', 'f'};
    try {
        tiff::decode(junk);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Format);
    }
}

TEST_CASE("layouts and role assignment") {
    const auto def = assign_roles(parse_layout("default"), 62);
    CHECK(def.size() == 62);
    CHECK(def[0] == FrameRole::PreIrradiation);
    CHECK(def[1] == FrameRole::Dark);
    CHECK(std::count(def.begin(), def.end(), FrameRole::PostIrradiation) == 60);
    CHECK(assign_roles(parse_layout("pre-only"), 1) == std::vector<FrameRole>{FrameRole::PreIrradiation});
    CHECK(assign_roles(parse_layout("no-dark"), 3)[1] == FrameRole::PostIrradiation);
    CHECK_THROWS_AS(assign_roles(parse_layout("default:62"), 54), Error);
    CHECK_THROWS_AS(assign_roles(parse_layout("pre-only"), 2), Error);
    CHECK_THROWS_AS(parse_layout("sideways"), Error);
    CHECK_THROWS_AS(parse_layout("default:x"), Error);
    CHECK(layout_name(parse_layout("no-dark:54")) == "no-dark:54");
    // Pure function of (layout, page count).
    CHECK(assign_roles(parse_layout("default"), 54) == assign_roles(parse_layout("default"), 54));
}

TEST_CASE("load_stack normalizes by the bit-depth maximum") {
    const fs::path p8 = scratch("white8.tif");
    write_bytes(p8, tiff::encode({page(4, 3, 8, 255)}));
    const ImageStack s8 = load_stack(p8, parse_layout("pre-only"));
    REQUIRE(s8.size() == 1);
    CHECK(s8.frames[0].bit_depth_source == 8);
    for (float v : s8.frames[0].pixels) CHECK(v == 1.0f);

    std::vector<tiff::Page> pages;
    for (int k = 0; k < 62; ++k) pages.push_back(page(8, 8, 16, static_cast<std::uint16_t>(1000 * k)));
    const fs::path p16 = scratch("stack16.tif");
    write_bytes(p16, tiff::encode(pages, tiff::Compression::Deflate));
    const ImageStack s16 = load_stack(p16);
    CHECK(s16.size() == 62);
    CHECK(s16.roles[1] == FrameRole::Dark);
    CHECK(s16.frames[5].pixels[0] == 5000.0f / 65535.0f);
    CHECK(s16.timestamps_s[3] == doctest::Approx(3 * 6.5));

    CHECK(load_stack(p16, parse_layout("default", 7.0)).timestamps_s[2] == doctest::Approx(14.0));
}

TEST_CASE("load_stack reads per-page timestamps when all pages carry one") {
    std::vector<tiff::Page> pages = {page(4, 4, 16, 1, "role=pre; time_s=0"), page(4, 4, 16, 2, "time_s=5.5"),
                                     page(4, 4, 16, 3, "time_s=12.25")};
    const fs::path p = scratch("timed.tif");
    write_bytes(p, tiff::encode(pages));
    const auto s = load_stack(p);
    CHECK(s.timestamps_s == std::vector<double>{0.0, 5.5, 12.25});

    pages[1].description.clear();
    write_bytes(p, tiff::encode(pages));
    CHECK(load_stack(p).timestamps_s == std::vector<double>{0.0, 6.5, 13.0});
}

TEST_CASE("load_stack errors") {
    try {
        load_stack(scratch("missing.tif"));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Io);
    }
    const fs::path rgb = scratch("rgb.tif");
    write_bytes(rgb, rgb_tiff());
    CHECK_THROWS_AS(load_stack(rgb, parse_layout("pre-only")), Error);
}

TEST_CASE("phantom output round-trips exactly through TIFF and raw") {
    PhantomSpec spec;
    spec.width = spec.height = 96;
    spec.frames = 4;
    spec.nucleus = {47.5, 47.5, 30, 26, 0.2, 0.4};
    spec.stripe_length = 30;
    spec.stripe_x = 48;
    spec.snr = 10;
    const Phantom ph = generate_phantom(spec, 3);
    const fs::path t = scratch("rt.tif"), r = scratch("rt.raw");
    save_stack_tiff(ph.stack, t, tiff::Compression::Deflate);
    save_stack_raw(ph.stack, r);
    for (const auto& path : {t, r}) {
        const ImageStack back = load_stack(path);
        REQUIRE(back.size() == ph.stack.size());
        for (std::size_t k = 0; k < back.size(); ++k) CHECK(back.frames[k].pixels == ph.stack.frames[k].pixels);
        CHECK(back.roles == ph.stack.roles);
        CHECK(back.timestamps_s == ph.stack.timestamps_s);
    }
}

TEST_CASE("curve and aggregate CSV") {
    IntensityCurve c;
    c.points.push_back({0, FrameRole::PreIrradiation, 0.0, 0.5, 0.25, 1.0, false});
    c.points.push_back({1, FrameRole::Dark, 6.5, 0, 0, 0, true});
    c.points.push_back({2, FrameRole::PostIrradiation, 13.0, 0.6, 0.25, 1.2, false});
    CHECK(curve_csv(c) ==
          "frame_index,role,time_s,i_roi,i_noi,ratio,excluded\n"
          "0,pre,0,0.5,0.25,1,0\n"
          "1,dark,6.5,,,,1\n"
          "2,post,13,0.6,0.25,1.2,0\n");
    CHECK_THROWS_AS(curve_csv(IntensityCurve{}), Error);

    AggregateCurve a;
    a.points.push_back({0.0, 1.0, 0.0, 1});
    a.points.push_back({6.5, 1.23456789, 0.0, 1});
    CHECK(aggregate_csv(a) == "time_s,mean_ratio,stderr,n\n0,1,0,1\n6.5,1.23457,0,1\n");
    CHECK_THROWS_AS(aggregate_csv(AggregateCurve{}), Error);

    const fs::path p = scratch("curve.csv");
    write_curve_csv(c, p);
    std::ifstream in(p, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(content == curve_csv(c));
    CHECK(!fs::exists(p.string() + ".tmp"));
    CHECK_THROWS_AS(write_curve_csv(c, scratch("no/such/dir/curve.csv")), Error);
}

TEST_CASE("format_number uses six significant digits") {
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(1234567.0) == "1.23457e+06");
    CHECK(format_number(-0.000123456789) == "-0.000123457");
}

TEST_CASE("key-value parsing") {
    const auto kvs = parse_key_values("# comment\n a = 1 \n\nb=two words # trailing\na = 3\n");
    REQUIRE(kvs.size() == 3);
    CHECK(kvs[0].key == "a");
    CHECK(kvs[0].value == "1");
    CHECK(kvs[0].line == 2);
    CHECK(kvs[1].value == "two words");
    CHECK(kvs[2].value == "3");
    CHECK_THROWS_AS(parse_key_values("just words\n"), Error);
    CHECK(kv_double({"k", "2.5", 1}) == 2.5);
    CHECK_THROWS_AS(kv_double({"k", "2.5x", 1}), Error);
    CHECK(kv_int({"k", "-4", 1}) == -4);
    CHECK_THROWS_AS(kv_int({"k", "4.5", 1}), Error);
    CHECK(kv_bool({"k", "yes", 1}));
    CHECK(!kv_bool({"k", "off", 1}));
    CHECK_THROWS_AS(kv_bool({"k", "maybe", 1}), Error);
    CHECK(kv_doubles({"k", "1, 2 3", 1}) == std::vector<double>{1, 2, 3});
    CHECK(trim("  x y \t") == "x y");
}
