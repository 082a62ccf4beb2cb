#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

namespace lesionquant {

/// 8-bit PNG, `channels` 1 (gray) or 3 (RGB), row-major interleaved.
void write_png(const std::filesystem::path& path, int width, int height, int channels,
               std::span<const std::uint8_t> data);

}  // namespace lesionquant
