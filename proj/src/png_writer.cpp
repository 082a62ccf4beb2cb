#include "png_writer.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "error.hpp"

namespace lesionquant {

void write_png(const std::filesystem::path& path, int width, int height, int channels,
               std::span<const std::uint8_t> data) {
    if ((channels != 1 && channels != 3) ||
        data.size() != static_cast<std::size_t>(width) * height * channels)
        throw Error(ErrorCode::InvalidArgument, "write_png: buffer does not match dimensions");

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(tmp.c_str(), "wb"), &std::fclose);
    if (!fp) throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::Io, "libpng initialisation failed");
    }
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(data.data() + static_cast<std::size_t>(y) * width * channels);

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::Io, "libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    fp.reset();

    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace lesionquant
