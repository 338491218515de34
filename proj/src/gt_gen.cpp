#include "salmonkit/gt_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace salmon {

double foveal_sigma(const ViewingGeometry& g) {
    if (g.d_v_cm <= 0 || g.r_v_px <= 0 || g.h_m_cm <= 0 || g.alpha_deg < 0 || g.eta_deg < 0 ||
        g.theta_deg < 0)
        throw std::invalid_argument("foveal_sigma: geometry fields must be positive");
    if (g.alpha_deg + g.eta_deg + g.theta_deg >= 90.0)
        throw std::invalid_argument("foveal_sigma: alpha + eta + theta must be < 90 degrees");
    constexpr double deg = std::numbers::pi / 180.0;
    double sigma = g.d_v_cm * (g.r_v_px / g.h_m_cm) *
                   (std::tan((g.alpha_deg + g.eta_deg + g.theta_deg) * deg) -
                    std::tan(g.theta_deg * deg));
    if (!std::isfinite(sigma) || sigma < 0)
        throw std::domain_error("foveal_sigma: non-finite result");
    return sigma;
}

DensityMap fixation_density_map(const SubjectRecord& rec, int width, int height, double sigma) {
    if (sigma <= 0)
        throw std::invalid_argument("fixation_density_map: sigma must be > 0");
    if (rec.modality != Modality::eye_tracking)
        throw std::invalid_argument("fixation_density_map: record is not eye tracking");

    DensityMap dm;
    dm.image_id = rec.image_id;
    dm.subject_id = rec.subject_id;
    dm.values = MapRaster(width, height, 0.0);

    if (rec.fixations.empty())
        return dm;

    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(radius) + 1);
    for (int d = 0; d <= radius; ++d)
        kernel[static_cast<std::size_t>(d)] = std::exp(-(static_cast<double>(d) * d) /
                                                       (2.0 * sigma * sigma));

    // Fixation rasters are sparse, so the truncated convolution is applied
    // per fixation as a separable product; zero padding falls out of the
    // bounds clipping.
    for (const auto& f : rec.fixations) {
        int y_lo = std::max(0, f.y - radius);
        int y_hi = std::min(height - 1, f.y + radius);
        int x_lo = std::max(0, f.x - radius);
        int x_hi = std::min(width - 1, f.x + radius);
        for (int y = y_lo; y <= y_hi; ++y) {
            double gy = kernel[static_cast<std::size_t>(std::abs(y - f.y))];
            auto row = dm.values.row(y);
            for (int x = x_lo; x <= x_hi; ++x)
                row[static_cast<std::size_t>(x)] +=
                    f.count * kernel[static_cast<std::size_t>(std::abs(x - f.x))] * gy;
        }
    }

    double max_v = 0.0;
    for (double v : dm.values.pixels())
        max_v = std::max(max_v, v);
    if (max_v > 0.0)
        for (double& v : dm.values.pixels())
            v /= max_v;
    return dm;
}

double eye_tracking_saliency(std::span<const DensityMap> maps, const ObjectMask& mask) {
    if (maps.empty())
        throw std::invalid_argument("eye_tracking_saliency: no density maps");
    double sum = 0.0;
    for (const auto& dm : maps) {
        if (dm.image_id != mask.image_id)
            throw std::invalid_argument("eye_tracking_saliency: density map for wrong image");
        if (!dm.values.same_size(mask.mask))
            throw std::invalid_argument("eye_tracking_saliency: dimension mismatch");
        double m = 0.0;
        const Rect& r = mask.tight_rect;
        for (int y = r.y0; y < r.y1; ++y) {
            auto mrow = mask.mask.row(y);
            auto vrow = dm.values.row(y);
            for (int x = r.x0; x < r.x1; ++x)
                if (mrow[static_cast<std::size_t>(x)] != 0)
                    m = std::max(m, vrow[static_cast<std::size_t>(x)]);
        }
        sum += m;
    }
    return sum / static_cast<double>(maps.size());
}

double point_click_saliency(const std::vector<const SubjectRecord*>& recs,
                            const ObjectMask& mask) {
    if (recs.empty())
        throw std::invalid_argument("point_click_saliency: no subject records");
    int hits = 0;
    for (const auto* rec : recs) {
        bool inside = false;
        for (const auto& c : rec->clicks) {
            if (mask.mask.in_bounds(c.x, c.y) && mask.mask(c.x, c.y) != 0) {
                inside = true;
                break;
            }
        }
        hits += inside;
    }
    return static_cast<double>(hits) / static_cast<double>(recs.size());
}

double rect_draw_saliency(const std::vector<const SubjectRecord*>& recs, const Rect& tight_rect,
                          double iou_threshold) {
    if (recs.empty())
        throw std::invalid_argument("rect_draw_saliency: no subject records");
    if (iou_threshold <= 0.0 || iou_threshold > 1.0)
        throw std::invalid_argument("rect_draw_saliency: threshold must be in (0,1]");
    int hits = 0;
    for (const auto* rec : recs) {
        bool matched = false;
        for (const auto& r : rec->rects) {
            if (rect_iou(r, tight_rect) >= iou_threshold) {
                matched = true;
                break;
            }
        }
        hits += matched;
    }
    return static_cast<double>(hits) / static_cast<double>(recs.size());
}

MultiLevelGroundTruth assemble_gt_map(const std::vector<ObjectSaliency>& saliencies,
                                      const std::vector<const ObjectMask*>& masks, Modality gamma,
                                      int width, int height, const std::string& image_id) {
    MultiLevelGroundTruth gt;
    gt.image_id = image_id;
    gt.gamma = gamma;
    gt.map = MapRaster(width, height, 0.0);

    std::set<double> levels;
    for (const auto* mask : masks) {
        auto it = std::find_if(saliencies.begin(), saliencies.end(),
                               [&](const ObjectSaliency& s) {
                                   return s.object_id == mask->object_id;
                               });
        std::optional<double> value =
            it == saliencies.end() ? std::nullopt : it->value(gamma);
        if (!value)
            throw std::invalid_argument("assemble_gt_map: object '" + mask->object_id +
                                        "' has no value for modality " + modality_tag(gamma));
        double s = *value;
        const Rect& r = mask->tight_rect;
        for (int y = r.y0; y < r.y1; ++y) {
            auto mrow = mask->mask.row(y);
            auto grow = gt.map.row(y);
            for (int x = r.x0; x < r.x1; ++x)
                if (mrow[static_cast<std::size_t>(x)] != 0)
                    grow[static_cast<std::size_t>(x)] =
                        std::max(grow[static_cast<std::size_t>(x)], s);
        }
        if (s > 0.0)
            levels.insert(s);
        gt.object_values.emplace_back(mask->object_id, s);
    }
    gt.levels.assign(levels.begin(), levels.end());
    return gt;
}

MaskRaster binarize_equal_salience(const std::vector<const ObjectMask*>& masks, int width,
                                   int height) {
    if (masks.empty())
        throw std::invalid_argument("binarize_equal_salience: no masks");
    MaskRaster out(width, height, 0);
    for (const auto* mask : masks) {
        const Rect& r = mask->tight_rect;
        for (int y = r.y0; y < r.y1; ++y) {
            auto mrow = mask->mask.row(y);
            auto orow = out.row(y);
            for (int x = r.x0; x < r.x1; ++x)
                if (mrow[static_cast<std::size_t>(x)] != 0)
                    orow[static_cast<std::size_t>(x)] = 1;
        }
    }
    return out;
}

std::vector<ObjectSaliency> compute_object_saliencies(const Dataset& ds,
                                                      const std::string& image_id, double sigma) {
    const ImageRecord* img = ds.find_image(image_id);
    if (!img)
        throw std::invalid_argument("compute_object_saliencies: unknown image '" + image_id + "'");
    auto masks = ds.masks_for(image_id);

    std::vector<ObjectSaliency> out;
    out.reserve(masks.size());
    for (const auto* m : masks)
        out.push_back(ObjectSaliency{m->object_id, std::nullopt, std::nullopt, std::nullopt});

    auto et_recs = ds.records_for(image_id, Modality::eye_tracking);
    if (!et_recs.empty()) {
        std::vector<DensityMap> maps;
        maps.reserve(et_recs.size());
        for (const auto* rec : et_recs)
            maps.push_back(fixation_density_map(*rec, img->width, img->height, sigma));
        for (std::size_t i = 0; i < masks.size(); ++i)
            out[i].s_et = eye_tracking_saliency(maps, *masks[i]);
    }

    auto pc_recs = ds.records_for(image_id, Modality::point_click);
    if (!pc_recs.empty())
        for (std::size_t i = 0; i < masks.size(); ++i)
            out[i].s_pc = point_click_saliency(pc_recs, *masks[i]);

    auto rd_recs = ds.records_for(image_id, Modality::rect_draw);
    if (!rd_recs.empty())
        for (std::size_t i = 0; i < masks.size(); ++i)
            out[i].s_rd = rect_draw_saliency(rd_recs, masks[i]->tight_rect);

    return out;
}

} // namespace salmon
