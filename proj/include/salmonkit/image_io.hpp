#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "salmonkit/raster.hpp"

namespace salmon {

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// PNG-backed raster I/O (libpng). All writers embed a Software tEXt chunk
// carrying the toolkit version plus the optional config tag.

// Any PNG; palette/alpha are expanded/stripped; gray stays 1 channel,
// color becomes RGB.
ImageU8 read_image_u8(const std::filesystem::path& path);

// Single-channel PNG (8 or 16 bit); nonzero -> 1.
MaskRaster read_mask_png(const std::filesystem::path& path);

// Single-channel PNG (8 or 16 bit) scaled to [0,1] by its bit depth maximum.
MapRaster read_gray_map_png(const std::filesystem::path& path);

void write_mask_png(const std::filesystem::path& path, const MaskRaster& mask,
                    const std::string& config_tag = {});
// Values clamped to [0,1] and quantized as round(65535 * v).
void write_gray16_png(const std::filesystem::path& path, const MapRaster& map,
                      const std::string& config_tag = {});
void write_rgb8_png(const std::filesystem::path& path, const ImageU8& image,
                    const std::string& config_tag = {});

} // namespace salmon
