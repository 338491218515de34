#include "salmonkit/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace salmon {

std::optional<Rect> rect_intersection(const Rect& a, const Rect& b) {
    Rect r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
    if (!r.valid())
        return std::nullopt;
    return r;
}

double rect_iou(const Rect& a, const Rect& b) {
    auto inter = rect_intersection(a, b);
    if (!inter)
        return 0.0;
    double ia = static_cast<double>(inter->area());
    double ua = static_cast<double>(a.area()) + static_cast<double>(b.area()) - ia;
    return ia / ua;
}

Rect tight_bounding_rect(const MaskRaster& mask) {
    int min_x = mask.width();
    int min_y = mask.height();
    int max_x = -1;
    int max_y = -1;
    for (int y = 0; y < mask.height(); ++y) {
        auto row = mask.row(y);
        for (int x = 0; x < mask.width(); ++x) {
            if (row[static_cast<std::size_t>(x)] != 0) {
                min_x = std::min(min_x, x);
                min_y = std::min(min_y, y);
                max_x = std::max(max_x, x);
                max_y = std::max(max_y, y);
            }
        }
    }
    if (max_x < 0)
        throw std::invalid_argument("tight_bounding_rect: mask has no foreground pixel");
    return Rect{min_x, min_y, max_x + 1, max_y + 1};
}

std::int64_t foreground_area(const MaskRaster& mask) {
    std::int64_t n = 0;
    for (auto v : mask.pixels())
        n += (v != 0);
    return n;
}

} // namespace salmon
