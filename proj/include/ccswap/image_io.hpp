#pragma once

#include <filesystem>

#include "ccswap/tensor.hpp"

namespace ccswap {

// Lossless 8-bit images: PNG (gray, gray+alpha, RGB, RGBA), binary PGM and PPM.
// Pixels are loaded into [0, 1]; alpha is dropped. Throws IoError.
Image read_image(const std::filesystem::path& path);

// Writes 1- or 3-channel images; values are clamped to [0, 1] and rounded to 8 bits.
// The format follows the extension (.png, .pgm, .ppm).
void write_image(const std::filesystem::path& path, const Image& image);

// Rescales to [0, 1] by min and max (constant images become 0) before writing.
void write_heatmap(const std::filesystem::path& path, const Matrix& map);

}  // namespace ccswap
