// Raster decoding and encoding. Accepted formats: PNG, TIFF, JPEG, BMP, PPM/PGM.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "cbir/core.h"

namespace cbir {

// True if the file extension (case-insensitive) is one we decode.
bool is_supported_image(const std::filesystem::path& path);

// Throws DataError naming the file when it cannot be decoded.
RgbImage read_image(const std::filesystem::path& path);

// Decodes an in-memory encoded image; throws DataError on failure.
RgbImage decode_image(std::span<const std::uint8_t> bytes);

// Format is chosen from the extension.
void write_image(const std::filesystem::path& path, const RgbImage& img);

std::string encode_png(const RgbImage& img);

// Downscales (area interpolation) so the longer side is at most max_side.
RgbImage fit_within(const RgbImage& img, int max_side);

}  // namespace cbir
