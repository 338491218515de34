#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salmonkit/dataset.hpp"

namespace salmon {

// Radius of the foveal-vision circle in pixels:
//   sigma = d_v * (r_v / h_m) * (tan(alpha + eta + theta) - tan(theta))
// Throws std::invalid_argument on invalid geometry and std::domain_error
// when the angles approach 90 degrees and the result is not finite.
double foveal_sigma(const ViewingGeometry& g);

struct DensityMap {
    std::string image_id;
    std::string subject_id;
    MapRaster values; // max-normalized to [0,1]; identically 0 when no fixations
};

// Accumulates fixation counts and convolves with an isotropic Gaussian
// (separable kernel truncated at radius ceil(3*sigma), zero padding), then
// divides by the map maximum. Zero input stays identically zero.
DensityMap fixation_density_map(const SubjectRecord& rec, int width, int height, double sigma);

// s_et^o: mean over subjects of the maximum density value inside the mask.
double eye_tracking_saliency(std::span<const DensityMap> maps, const ObjectMask& mask);

// s_pc^o: fraction of subjects with at least one click inside the mask.
double point_click_saliency(const std::vector<const SubjectRecord*>& recs, const ObjectMask& mask);

// s_rd^o: fraction of subjects with at least one rectangle of
// IoU(r, tight_rect) >= iou_threshold. One subject counts once.
double rect_draw_saliency(const std::vector<const SubjectRecord*>& recs, const Rect& tight_rect,
                          double iou_threshold = 0.3);

struct ObjectSaliency {
    std::string object_id;
    std::optional<double> s_et;
    std::optional<double> s_pc;
    std::optional<double> s_rd;

    std::optional<double> value(Modality m) const {
        switch (m) {
        case Modality::eye_tracking: return s_et;
        case Modality::point_click: return s_pc;
        case Modality::rect_draw: return s_rd;
        }
        return std::nullopt;
    }
    void set(Modality m, double v) {
        switch (m) {
        case Modality::eye_tracking: s_et = v; break;
        case Modality::point_click: s_pc = v; break;
        case Modality::rect_draw: s_rd = v; break;
        }
    }
};

struct MultiLevelGroundTruth {
    std::string image_id;
    Modality gamma = Modality::eye_tracking;
    MapRaster map;              // 0 on background; s_gamma^o inside masks (max on overlap)
    std::vector<double> levels; // distinct nonzero saliency values, ascending
    std::vector<std::pair<std::string, double>> object_values; // object_id -> s_gamma^o
};

// F_gamma^k: paints each object's s_gamma value over its mask; overlapping
// pixels take the maximum so the map stays in [0,1]. Throws when an object
// lacks a value for the modality.
MultiLevelGroundTruth assemble_gt_map(const std::vector<ObjectSaliency>& saliencies,
                                      const std::vector<const ObjectMask*>& masks,
                                      Modality gamma, int width, int height,
                                      const std::string& image_id);

// Union of all object masks as 0/1 (the equal-salience binary baseline).
MaskRaster binarize_equal_salience(const std::vector<const ObjectMask*>& masks, int width,
                                   int height);

// Per-object saliencies for one image for every modality with subjects.
std::vector<ObjectSaliency> compute_object_saliencies(const Dataset& ds,
                                                      const std::string& image_id, double sigma);

} // namespace salmon
