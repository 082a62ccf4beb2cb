#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lesionquant::tiff {

/// One grayscale page. Samples are stored widened to 16 bit regardless of
/// `bits_per_sample`.
struct Page {
    int width = 0;
    int height = 0;
    int bits_per_sample = 16;
    std::vector<std::uint16_t> samples;
    std::string description;
};

enum class Compression { None, Deflate };

/// Baseline multi-page grayscale decoder: 8/16-bit unsigned, strips,
/// uncompressed or deflate (with or without horizontal predictor), either
/// byte order. Throws Error(Format) on anything else.
std::vector<Page> decode(std::span<const std::uint8_t> bytes);

/// Little-endian encoder, one strip per page, ImageDescription carried through.
std::vector<std::uint8_t> encode(const std::vector<Page>& pages, Compression compression = Compression::None);

}  // namespace lesionquant::tiff
