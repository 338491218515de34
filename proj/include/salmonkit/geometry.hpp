#pragma once

#include <cstdint>
#include <optional>

#include "salmonkit/raster.hpp"

namespace salmon {

// Axis-aligned pixel rectangle, half-open on x1/y1.
struct Rect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    std::int64_t area() const {
        return static_cast<std::int64_t>(width()) * static_cast<std::int64_t>(height());
    }
    bool valid() const { return x0 < x1 && y0 < y1; }
    bool operator==(const Rect&) const = default;
};

std::optional<Rect> rect_intersection(const Rect& a, const Rect& b);

// Intersection-over-union in pixel-area terms; 1 iff equal, 0 iff disjoint.
double rect_iou(const Rect& a, const Rect& b);

// Minimal rectangle covering all foreground pixels. Throws on an empty mask.
Rect tight_bounding_rect(const MaskRaster& mask);

std::int64_t foreground_area(const MaskRaster& mask);

} // namespace salmon
