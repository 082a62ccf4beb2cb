#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tiff_codec.hpp"
#include "types.hpp"

namespace lesionquant {

/// How pages of a file map onto frame roles.
///   default   frame 0 pre, frame 1 dark, rest post (>= 3 pages)
///   no-dark   frame 0 pre, rest post (>= 2 pages)
///   pre-only  a single pre-irradiation page
/// A ":N" suffix pins the expected page count, e.g. "default:62".
struct LayoutSpec {
    enum class Kind { Default, NoDark, PreOnly };
    Kind kind = Kind::Default;
    double interval_s = 6.5;
    std::optional<std::size_t> expected_frames;
};

LayoutSpec parse_layout(std::string_view text, double interval_s = 6.5);
std::string layout_name(const LayoutSpec& layout);

/// Pure function of layout and page count; throws Format on mismatch.
std::vector<FrameRole> assign_roles(const LayoutSpec& layout, std::size_t page_count);

/// Loads a multi-page grayscale TIFF or a raw `LQSTACK1` stack. Pixels are
/// divided by the bit-depth maximum. Per-page `time_s=` entries in the TIFF
/// ImageDescription are used as timestamps when every page has one;
/// otherwise timestamps are k * interval.
ImageStack load_stack(const std::filesystem::path& path, const LayoutSpec& layout = {});

/// Frames are quantized to 16 bit; role and time go into ImageDescription.
void save_stack_tiff(const ImageStack& stack, const std::filesystem::path& path,
                     tiff::Compression compression = tiff::Compression::None);
void save_stack_raw(const ImageStack& stack, const std::filesystem::path& path);

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// 6 significant digits, locale-independent.
std::string format_number(double v);

std::string curve_csv(const IntensityCurve& curve);
std::string aggregate_csv(const AggregateCurve& agg);
void write_curve_csv(const IntensityCurve& curve, const std::filesystem::path& path);
void write_aggregate_csv(const AggregateCurve& agg, const std::filesystem::path& path);

/// Grayscale rendition of `image` (scaled by its maximum) with the mask
/// boundary in green and the ROI outline in red.
void write_qc_overlay(const std::filesystem::path& path, const Frame& image, const BinaryMask& noi_mask,
                      const std::optional<Roi>& roi);
void write_gray_png(const std::filesystem::path& path, const Frame& image);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace lesionquant
