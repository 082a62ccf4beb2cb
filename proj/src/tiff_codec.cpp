#include "tiff_codec.hpp"

#include <zlib.h>

#include <map>

#include "error.hpp"

namespace lesionquant::tiff {

namespace {

enum Tag : std::uint16_t {
    kImageWidth = 256,
    kImageLength = 257,
    kBitsPerSample = 258,
    kCompression = 259,
    kPhotometric = 262,
    kImageDescription = 270,
    kStripOffsets = 273,
    kSamplesPerPixel = 277,
    kRowsPerStrip = 278,
    kStripByteCounts = 279,
    kPlanarConfig = 284,
    kPredictor = 317,
    kTileWidth = 322,
    kSampleFormat = 339,
};

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::Format, "tiff: " + msg); }

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {
        if (b.size() < 8) fail("file too short");
        if (b[0] == 'I' && b[1] == 'I') little_ = true;
        else if (b[0] == 'M' && b[1] == 'M') little_ = false;
        else fail("bad byte-order mark");
        if (u16(2) != 42) fail("not a classic TIFF (BigTIFF unsupported)");
    }

    [[nodiscard]] std::uint16_t u16(std::size_t off) const {
        check(off, 2);
        return little_ ? static_cast<std::uint16_t>(bytes_[off] | (bytes_[off + 1] << 8))
                       : static_cast<std::uint16_t>((bytes_[off] << 8) | bytes_[off + 1]);
    }
    [[nodiscard]] std::uint32_t u32(std::size_t off) const {
        check(off, 4);
        const std::uint32_t a = bytes_[off], b = bytes_[off + 1], c = bytes_[off + 2], d = bytes_[off + 3];
        return little_ ? (a | (b << 8) | (c << 16) | (d << 24)) : ((a << 24) | (b << 16) | (c << 8) | d);
    }
    void check(std::size_t off, std::size_t len) const {
        if (off > bytes_.size() || len > bytes_.size() - off) fail("offset out of range");
    }
    [[nodiscard]] bool little() const { return little_; }
    [[nodiscard]] std::span<const std::uint8_t> slice(std::size_t off, std::size_t len) const {
        check(off, len);
        return bytes_.subspan(off, len);
    }

private:
    std::span<const std::uint8_t> bytes_;
    bool little_ = true;
};

struct Entry {
    std::uint16_t type = 0;
    std::uint32_t count = 0;
    std::size_t value_offset = 0;  // absolute offset of the value bytes
};

std::size_t type_size(std::uint16_t type) {
    switch (type) {
        case 1: case 2: case 6: case 7: return 1;
        case 3: case 8: return 2;
        case 4: case 9: case 11: return 4;
        case 5: case 10: case 12: return 8;
        default: return 0;
    }
}

std::vector<std::uint32_t> read_uints(const Reader& r, const Entry& e) {
    std::vector<std::uint32_t> out(e.count);
    for (std::uint32_t i = 0; i < e.count; ++i) {
        if (e.type == 3) out[i] = r.u16(e.value_offset + 2 * i);
        else if (e.type == 4) out[i] = r.u32(e.value_offset + 4 * i);
        else if (e.type == 1) out[i] = r.slice(e.value_offset + i, 1)[0];
        else fail("unexpected field type for integer tag");
    }
    return out;
}

std::uint32_t read_uint(const Reader& r, const std::map<std::uint16_t, Entry>& tags, std::uint16_t tag,
                        std::uint32_t fallback) {
    auto it = tags.find(tag);
    if (it == tags.end()) return fallback;
    const auto v = read_uints(r, it->second);
    if (v.empty()) fail("empty integer tag");
    return v.front();
}

Page decode_page(const Reader& r, const std::map<std::uint16_t, Entry>& tags) {
    if (tags.count(kTileWidth)) fail("tiled images are not supported");
    Page p;
    p.width = static_cast<int>(read_uint(r, tags, kImageWidth, 0));
    p.height = static_cast<int>(read_uint(r, tags, kImageLength, 0));
    if (p.width <= 0 || p.height <= 0) fail("missing image dimensions");
    const auto spp = read_uint(r, tags, kSamplesPerPixel, 1);
    const auto photometric = read_uint(r, tags, kPhotometric, 1);
    if (spp != 1 || photometric > 1) fail("color images are not supported");
    const auto bits = read_uint(r, tags, kBitsPerSample, 1);
    if (bits != 8 && bits != 16) fail("unsupported bit depth " + std::to_string(bits));
    p.bits_per_sample = static_cast<int>(bits);
    if (read_uint(r, tags, kSampleFormat, 1) != 1) fail("only unsigned integer samples are supported");
    const auto compression = read_uint(r, tags, kCompression, 1);
    if (compression != 1 && compression != 8 && compression != 32946)
        fail("unsupported compression " + std::to_string(compression));
    const auto predictor = read_uint(r, tags, kPredictor, 1);
    if (predictor != 1 && predictor != 2) fail("unsupported predictor");
    const auto rows_per_strip = std::min<std::uint32_t>(read_uint(r, tags, kRowsPerStrip, 0xFFFFFFFFu),
                                                        static_cast<std::uint32_t>(p.height));
    if (rows_per_strip == 0) fail("RowsPerStrip is zero");

    auto off_it = tags.find(kStripOffsets);
    auto cnt_it = tags.find(kStripByteCounts);
    if (off_it == tags.end() || cnt_it == tags.end()) fail("missing strip tags");
    const auto offsets = read_uints(r, off_it->second);
    const auto counts = read_uints(r, cnt_it->second);
    if (offsets.size() != counts.size()) fail("strip tag length mismatch");

    const std::size_t bps = bits / 8;
    const std::size_t row_bytes = static_cast<std::size_t>(p.width) * bps;
    std::vector<std::uint8_t> raw(row_bytes * p.height);
    std::size_t filled = 0;
    for (std::size_t s = 0; s < offsets.size() && filled < raw.size(); ++s) {
        const std::size_t rows = std::min<std::size_t>(rows_per_strip, p.height - filled / row_bytes);
        const std::size_t expect = rows * row_bytes;
        auto src = r.slice(offsets[s], counts[s]);
        if (compression == 1) {
            if (src.size() < expect) fail("truncated strip");
            std::copy_n(src.begin(), expect, raw.begin() + static_cast<std::ptrdiff_t>(filled));
        } else {
            uLongf dest_len = static_cast<uLongf>(expect);
            const int rc = uncompress(raw.data() + filled, &dest_len, src.data(), static_cast<uLong>(src.size()));
            if (rc != Z_OK || dest_len != expect) fail("deflate stream corrupt");
        }
        filled += expect;
    }
    if (filled != raw.size()) fail("strip data does not cover the image");

    p.samples.resize(static_cast<std::size_t>(p.width) * p.height);
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
        if (bps == 1) {
            p.samples[i] = raw[i];
        } else {
            const std::uint8_t a = raw[2 * i], b = raw[2 * i + 1];
            p.samples[i] = r.little() ? static_cast<std::uint16_t>(a | (b << 8)) : static_cast<std::uint16_t>((a << 8) | b);
        }
    }
    if (predictor == 2) {
        const std::uint32_t mask = bits == 8 ? 0xFFu : 0xFFFFu;
        for (int y = 0; y < p.height; ++y) {
            auto* row = &p.samples[static_cast<std::size_t>(y) * p.width];
            for (int x = 1; x < p.width; ++x) row[x] = static_cast<std::uint16_t>((row[x] + row[x - 1]) & mask);
        }
    }
    if (photometric == 0) {
        const std::uint16_t maxv = bits == 8 ? 255 : 65535;
        for (auto& v : p.samples) v = static_cast<std::uint16_t>(maxv - v);
    }
    if (auto it = tags.find(kImageDescription); it != tags.end() && it->second.type == 2) {
        auto s = r.slice(it->second.value_offset, it->second.count);
        p.description.assign(s.begin(), s.end());
        while (!p.description.empty() && p.description.back() == '\0') p.description.pop_back();
    }
    return p;
}

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v & 0xFF));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
void patch32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
}

}  // namespace

std::vector<Page> decode(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    std::vector<Page> pages;
    std::uint32_t ifd = r.u32(4);
    std::map<std::uint32_t, bool> seen;
    while (ifd != 0) {
        if (seen[ifd]) fail("IFD cycle");
        seen[ifd] = true;
        const std::uint16_t n = r.u16(ifd);
        std::map<std::uint16_t, Entry> tags;
        for (std::uint16_t i = 0; i < n; ++i) {
            const std::size_t at = ifd + 2 + 12u * i;
            Entry e;
            const std::uint16_t tag = r.u16(at);
            e.type = r.u16(at + 2);
            e.count = r.u32(at + 4);
            const std::size_t sz = type_size(e.type) * e.count;
            e.value_offset = sz <= 4 ? at + 8 : r.u32(at + 8);
            if (type_size(e.type) == 0) continue;
            r.check(e.value_offset, sz);
            tags[tag] = e;
        }
        pages.push_back(decode_page(r, tags));
        ifd = r.u32(ifd + 2 + 12u * n);
    }
    if (pages.empty()) fail("no pages");
    return pages;
}

std::vector<std::uint8_t> encode(const std::vector<Page>& pages, Compression compression) {
    std::vector<std::uint8_t> b = {'I', 'I', 42, 0, 0, 0, 0, 0};
    std::size_t next_ptr = 4;
    for (const auto& p : pages) {
        if (p.bits_per_sample != 8 && p.bits_per_sample != 16)
            throw Error(ErrorCode::InvalidArgument, "tiff: bits per sample must be 8 or 16");
        std::vector<std::uint8_t> raw;
        raw.reserve(p.samples.size() * 2);
        for (auto v : p.samples) {
            if (p.bits_per_sample == 8) raw.push_back(static_cast<std::uint8_t>(v));
            else put16(raw, v);
        }
        std::vector<std::uint8_t> strip;
        if (compression == Compression::Deflate) {
            uLongf len = compressBound(static_cast<uLong>(raw.size()));
            strip.resize(len);
            if (compress2(strip.data(), &len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
                throw Error(ErrorCode::Io, "tiff: deflate failed");
            strip.resize(len);
        } else {
            strip = std::move(raw);
        }
        if (b.size() % 2) b.push_back(0);
        const auto strip_off = static_cast<std::uint32_t>(b.size());
        b.insert(b.end(), strip.begin(), strip.end());

        std::string desc = p.description;
        desc.push_back('\0');
        if (b.size() % 2) b.push_back(0);
        const auto desc_off = static_cast<std::uint32_t>(b.size());
        b.insert(b.end(), desc.begin(), desc.end());
        if (b.size() % 2) b.push_back(0);

        const auto ifd_off = static_cast<std::uint32_t>(b.size());
        patch32(b, next_ptr, ifd_off);
        struct E { std::uint16_t tag, type; std::uint32_t count, value; };
        const std::vector<E> entries = {
            {kImageWidth, 4, 1, static_cast<std::uint32_t>(p.width)},
            {kImageLength, 4, 1, static_cast<std::uint32_t>(p.height)},
            {kBitsPerSample, 3, 1, static_cast<std::uint32_t>(p.bits_per_sample)},
            {kCompression, 3, 1, compression == Compression::Deflate ? 8u : 1u},
            {kPhotometric, 3, 1, 1},
            {kImageDescription, 2, static_cast<std::uint32_t>(desc.size()), desc_off},
            {kStripOffsets, 4, 1, strip_off},
            {kSamplesPerPixel, 3, 1, 1},
            {kRowsPerStrip, 4, 1, static_cast<std::uint32_t>(p.height)},
            {kStripByteCounts, 4, 1, static_cast<std::uint32_t>(strip.size())},
            {kPlanarConfig, 3, 1, 1},
        };
        put16(b, static_cast<std::uint16_t>(entries.size()));
        for (const auto& e : entries) {
            put16(b, e.tag);
            put16(b, e.type);
            put32(b, e.count);
            if (e.type == 3) {
                put16(b, static_cast<std::uint16_t>(e.value));
                put16(b, 0);
            } else if (e.type == 2 && e.count <= 4) {
                // short descriptions live inline
                for (std::size_t i = 0; i < 4; ++i) b.push_back(i < desc.size() ? static_cast<std::uint8_t>(desc[i]) : 0);
            } else {
                put32(b, e.value);
            }
        }
        next_ptr = b.size();
        put32(b, 0);
    }
    return b;
}

}  // namespace lesionquant::tiff
