#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace salmon {

// Row-major 2-D pixel grid. Value semantics; all toolkit maps and masks are
// rasters of this type.
template <typename T>
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("raster dimensions must be >= 1");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool in_bounds(int x, int y) const {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }
    bool same_size(const Raster& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    T& operator()(int x, int y) { return data_[idx(x, y)]; }
    const T& operator()(int x, int y) const { return data_[idx(x, y)]; }

    std::span<T> row(int y) { return {data_.data() + idx(0, y), static_cast<std::size_t>(width_)}; }
    std::span<const T> row(int y) const {
        return {data_.data() + idx(0, y), static_cast<std::size_t>(width_)};
    }

    std::span<T> pixels() { return data_; }
    std::span<const T> pixels() const { return data_; }

    bool operator==(const Raster& other) const {
        return width_ == other.width_ && height_ == other.height_ && data_ == other.data_;
    }

private:
    std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using MaskRaster = Raster<std::uint8_t>; // 0 background, nonzero foreground
using MapRaster = Raster<double>;        // gray values in [0,1]

// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() +
               (static_cast<std::size_t>(y) * width + x) * static_cast<std::size_t>(channels);
    }
    std::uint8_t* at(int x, int y) {
        return pixels.data() +
               (static_cast<std::size_t>(y) * width + x) * static_cast<std::size_t>(channels);
    }
};

} // namespace salmon
