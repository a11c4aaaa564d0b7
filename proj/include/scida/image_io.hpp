#pragma once

#include <string>

#include "scida/dataset.hpp"

namespace scida {

// Write channel-major [0,1] pixels as an 8-bit PNG. Values are quantized
// with round(v * 255).
void write_png(const std::string& path, const Vec& pixels, int channels, int side);

// Read an image, resize to `side` (area interpolation) and return
// channel-major [0,1] pixels. Throws LoadError on failure.
Vec read_image(const std::string& path, int channels, int side);

}  // namespace scida
