#include "stack_io.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "error.hpp"
#include "png_writer.hpp"

namespace lesionquant {

namespace fs = std::filesystem;

namespace {

constexpr char kRawMagic[8] = {'L', 'Q', 'S', 'T', 'A', 'C', 'K', '1'};

std::vector<std::uint8_t> read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorCode::Io, "read error on " + path.string());
    return bytes;
}

std::optional<double> description_time(const std::string& desc) {
    std::size_t pos = 0;
    while ((pos = desc.find("time_s=", pos)) != std::string::npos) {
        if (pos == 0 || desc[pos - 1] == ';' || std::isspace(static_cast<unsigned char>(desc[pos - 1]))) {
            const char* first = desc.data() + pos + 7;
            const char* last = desc.data() + desc.size();
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec == std::errc() && ptr != first) return v;
        }
        pos += 7;
    }
    return std::nullopt;
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
    if (at + 4 > b.size()) throw Error(ErrorCode::Format, "raw stack: truncated header");
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

struct RawPages {
    std::vector<tiff::Page> pages;
    std::vector<double> times;
};

RawPages decode_raw(const std::vector<std::uint8_t>& b) {
    RawPages out;
    const auto w = get_u32(b, 8), h = get_u32(b, 12), n = get_u32(b, 16), bits = get_u32(b, 20);
    const auto has_times = get_u32(b, 24);
    if (bits != 8 && bits != 16) throw Error(ErrorCode::Format, "raw stack: unsupported bit depth " + std::to_string(bits));
    if (w == 0 || h == 0 || n == 0) throw Error(ErrorCode::Format, "raw stack: empty dimensions");
    std::size_t at = 28;
    if (has_times) {
        if (at + 8ull * n > b.size()) throw Error(ErrorCode::Format, "raw stack: truncated timestamps");
        for (std::uint32_t i = 0; i < n; ++i) {
            std::uint64_t u = 0;
            for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(b[at + k]) << (8 * k);
            double d;
            std::memcpy(&d, &u, sizeof d);
            out.times.push_back(d);
            at += 8;
        }
    }
    const std::size_t bps = bits / 8;
    const std::size_t count = static_cast<std::size_t>(w) * h;
    if (at + count * bps * n != b.size()) throw Error(ErrorCode::Format, "raw stack: pixel payload size mismatch");
    for (std::uint32_t i = 0; i < n; ++i) {
        tiff::Page p;
        p.width = static_cast<int>(w);
        p.height = static_cast<int>(h);
        p.bits_per_sample = static_cast<int>(bits);
        p.samples.resize(count);
        for (std::size_t j = 0; j < count; ++j) {
            p.samples[j] = bps == 1 ? b[at] : static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
            at += bps;
        }
        out.pages.push_back(std::move(p));
    }
    return out;
}

std::uint16_t quantize16(float v) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint16_t>(std::lround(c * 65535.0));
}

}  // namespace

LayoutSpec parse_layout(std::string_view text, double interval_s) {
    LayoutSpec spec;
    spec.interval_s = interval_s;
    std::string_view name = text;
    if (auto colon = text.find(':'); colon != std::string_view::npos) {
        name = text.substr(0, colon);
        auto num = text.substr(colon + 1);
        std::size_t n = 0;
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
        if (ec != std::errc() || ptr != num.data() + num.size() || n == 0)
            throw Error(ErrorCode::Config, "layout: bad frame count in '" + std::string(text) + "'");
        spec.expected_frames = n;
    }
    if (name == "default") spec.kind = LayoutSpec::Kind::Default;
    else if (name == "no-dark") spec.kind = LayoutSpec::Kind::NoDark;
    else if (name == "pre-only") spec.kind = LayoutSpec::Kind::PreOnly;
    else throw Error(ErrorCode::Config, "layout: unknown layout '" + std::string(name) + "'");
    if (!(interval_s > 0.0)) throw Error(ErrorCode::Config, "layout: frame interval must be > 0");
    return spec;
}

std::string layout_name(const LayoutSpec& layout) {
    std::string s = layout.kind == LayoutSpec::Kind::Default  ? "default"
                    : layout.kind == LayoutSpec::Kind::NoDark ? "no-dark"
                                                               : "pre-only";
    if (layout.expected_frames) s += ":" + std::to_string(*layout.expected_frames);
    return s;
}

std::vector<FrameRole> assign_roles(const LayoutSpec& layout, std::size_t page_count) {
    if (layout.expected_frames && *layout.expected_frames != page_count)
        throw Error(ErrorCode::Format, "page count " + std::to_string(page_count) + " does not match layout " +
                                           layout_name(layout));
    std::vector<FrameRole> roles;
    switch (layout.kind) {
        case LayoutSpec::Kind::PreOnly:
            if (page_count != 1) throw Error(ErrorCode::Format, "layout pre-only needs exactly 1 page");
            roles = {FrameRole::PreIrradiation};
            break;
        case LayoutSpec::Kind::NoDark:
            if (page_count < 2) throw Error(ErrorCode::Format, "layout no-dark needs at least 2 pages");
            roles.assign(page_count, FrameRole::PostIrradiation);
            roles[0] = FrameRole::PreIrradiation;
            break;
        case LayoutSpec::Kind::Default:
            if (page_count < 3) throw Error(ErrorCode::Format, "layout default needs at least 3 pages");
            roles.assign(page_count, FrameRole::PostIrradiation);
            roles[0] = FrameRole::PreIrradiation;
            roles[1] = FrameRole::Dark;
            break;
    }
    return roles;
}

ImageStack load_stack(const fs::path& path, const LayoutSpec& layout) {
    const auto bytes = read_all(path);
    std::vector<tiff::Page> pages;
    std::vector<double> times;
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kRawMagic, 8) == 0) {
        auto raw = decode_raw(bytes);
        pages = std::move(raw.pages);
        times = std::move(raw.times);
    } else {
        pages = tiff::decode(bytes);
        for (const auto& p : pages) {
            auto t = description_time(p.description);
            if (!t) {
                times.clear();
                break;
            }
            times.push_back(*t);
        }
    }

    ImageStack stack;
    stack.source_id = path.stem().string();
    stack.roles = assign_roles(layout, pages.size());
    const int w = pages.front().width;
    const int h = pages.front().height;
    for (const auto& p : pages) {
        if (p.width != w || p.height != h) throw Error(ErrorCode::Format, "pages differ in size");
        Frame f(w, h);
        f.bit_depth_source = p.bits_per_sample;
        const float scale = p.bits_per_sample == 8 ? 255.0f : 65535.0f;
        for (std::size_t i = 0; i < f.size(); ++i) f.pixels[i] = static_cast<float>(p.samples[i]) / scale;
        stack.frames.push_back(std::move(f));
    }
    if (times.size() == pages.size()) {
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (!(times[i] > times[i - 1])) throw Error(ErrorCode::Format, "timestamps are not strictly increasing");
        }
        stack.timestamps_s = std::move(times);
    } else {
        for (std::size_t k = 0; k < pages.size(); ++k) stack.timestamps_s.push_back(k * layout.interval_s);
    }
    return stack;
}

void save_stack_tiff(const ImageStack& stack, const fs::path& path, tiff::Compression compression) {
    std::vector<tiff::Page> pages;
    for (std::size_t k = 0; k < stack.frames.size(); ++k) {
        const auto& f = stack.frames[k];
        tiff::Page p;
        p.width = f.width;
        p.height = f.height;
        p.bits_per_sample = 16;
        p.samples.resize(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) p.samples[i] = quantize16(f.pixels[i]);
        std::ostringstream d;
        d.precision(17);
        d << "time_s=" << stack.timestamps_s.at(k) << ";role=" << role_name(stack.roles.at(k));
        p.description = d.str();
        pages.push_back(std::move(p));
    }
    const auto bytes = tiff::encode(pages, compression);
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void save_stack_raw(const ImageStack& stack, const fs::path& path) {
    std::string b(kRawMagic, 8);
    auto put32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    };
    put32(static_cast<std::uint32_t>(stack.width()));
    put32(static_cast<std::uint32_t>(stack.height()));
    put32(static_cast<std::uint32_t>(stack.size()));
    put32(16);
    put32(1);
    for (double t : stack.timestamps_s) {
        std::uint64_t u;
        std::memcpy(&u, &t, sizeof u);
        for (int k = 0; k < 8; ++k) b.push_back(static_cast<char>((u >> (8 * k)) & 0xFF));
    }
    for (const auto& f : stack.frames) {
        for (float v : f.pixels) {
            const auto q = quantize16(v);
            b.push_back(static_cast<char>(q & 0xFF));
            b.push_back(static_cast<char>(q >> 8));
        }
    }
    write_file_atomic(path, b);
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::Io, "write failed on " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::Io, "cannot replace " + path.string());
    }
}

std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

std::string curve_csv(const IntensityCurve& curve) {
    if (curve.points.empty()) throw Error(ErrorCode::EmptyInput, "write_curve_csv: empty curve");
    std::string s = "frame_index,role,time_s,i_roi,i_noi,ratio,excluded\n";
    for (const auto& p : curve.points) {
        s += std::to_string(p.frame_index);
        s += ',';
        s += role_name(p.role);
        s += ',';
        s += format_number(p.time_s);
        if (p.excluded) {
            s += ",,,,1\n";
        } else {
            s += ',' + format_number(p.i_roi) + ',' + format_number(p.i_noi) + ',' + format_number(p.ratio) + ",0\n";
        }
    }
    return s;
}

std::string aggregate_csv(const AggregateCurve& agg) {
    if (agg.points.empty()) throw Error(ErrorCode::EmptyInput, "write_aggregate_csv: empty aggregate");
    std::string s = "time_s,mean_ratio,stderr,n\n";
    for (const auto& p : agg.points) {
        s += format_number(p.time_s) + ',' + format_number(p.mean_ratio) + ',' + format_number(p.stderr_ratio) + ',' +
             std::to_string(p.n) + '\n';
    }
    return s;
}

void write_curve_csv(const IntensityCurve& curve, const fs::path& path) { write_file_atomic(path, curve_csv(curve)); }

void write_aggregate_csv(const AggregateCurve& agg, const fs::path& path) {
    write_file_atomic(path, aggregate_csv(agg));
}

namespace {

std::vector<std::uint8_t> to_gray8(const Frame& image) {
    float maxv = 0.0f;
    for (float v : image.pixels) maxv = std::max(maxv, v);
    const float scale = maxv > 0.0f ? 255.0f / maxv : 0.0f;
    std::vector<std::uint8_t> g(image.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = static_cast<std::uint8_t>(std::clamp(std::lround(image.pixels[i] * scale), 0L, 255L));
    return g;
}

}  // namespace

void write_gray_png(const fs::path& path, const Frame& image) {
    write_png(path, image.width, image.height, 1, to_gray8(image));
}

void write_mask_png(const fs::path& path, const BinaryMask& mask) {
    std::vector<std::uint8_t> g(mask.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = mask.bits[i] ? 255 : 0;
    write_png(path, mask.width, mask.height, 1, g);
}

void write_qc_overlay(const fs::path& path, const Frame& image, const BinaryMask& noi_mask,
                      const std::optional<Roi>& roi) {
    const auto gray = to_gray8(image);
    const int w = image.width;
    const int h = image.height;
    std::vector<std::uint8_t> rgb(gray.size() * 3);
    for (std::size_t i = 0; i < gray.size(); ++i) rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = gray[i];
    auto paint = [&](int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        if (x < 0 || y < 0 || x >= w || y >= h) return;
        const std::size_t i = 3 * (static_cast<std::size_t>(y) * w + x);
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    };
    if (noi_mask.width == w && noi_mask.height == h) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!noi_mask.get(x, y)) continue;
                const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !noi_mask.get(x - 1, y) ||
                                  !noi_mask.get(x + 1, y) || !noi_mask.get(x, y - 1) || !noi_mask.get(x, y + 1);
                if (edge) paint(x, y, 0, 255, 0);
            }
        }
    }
    if (roi) {
        const int x1 = roi->x + roi->width - 1;
        const int y1 = roi->y + roi->height - 1;
        for (int x = roi->x; x <= x1; ++x) {
            paint(x, roi->y, 255, 0, 0);
            paint(x, y1, 255, 0, 0);
        }
        for (int y = roi->y; y <= y1; ++y) {
            paint(roi->x, y, 255, 0, 0);
            paint(x1, y, 255, 0, 0);
        }
    }
    write_png(path, w, h, 3, rgb);
}

}  // namespace lesionquant
