#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salmonkit/dataset.hpp"
#include "salmonkit/gt_gen.hpp"
#include "salmonkit/raster.hpp"

namespace salmon {

struct Lab {
    double l = 0.0;
    double a = 0.0;
    double b = 0.0;
};

// sRGB (D65) -> CIE L*a*b*.
Lab rgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// 3-D histogram over L in [0,100], a,b in [-128,128).
class LabHistogram {
public:
    explicit LabHistogram(int bins_per_axis = 8);

    void add(const Lab& color, std::uint64_t count = 1);
    int bin_index(const Lab& color) const;

    int bins_per_axis() const { return bins_per_axis_; }
    int bin_count() const { return static_cast<int>(counts_.size()); }
    std::uint64_t total() const { return total_; }
    std::span<const std::uint64_t> counts() const { return counts_; }

    // Shannon entropy (base 2) of the normalized histogram.
    double entropy_bits() const;

private:
    int bins_per_axis_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

LabHistogram lab_histogram(const ImageU8& image, const MaskRaster& mask, int bins_per_axis = 8);

// Entropy of the within-mask Lab distribution; throws on an empty mask.
double color_entropy(const ImageU8& image, const MaskRaster& mask, int bins_per_axis = 8);

// Componentwise Lab mean over the mask; throws on an empty mask.
Lab mean_color(const ImageU8& image, const MaskRaster& mask);

struct ObjectGeometry {
    double norm_center_dist = 0.0; // centroid-to-center distance / image diagonal
    double width_norm = 0.0;       // tight-rect width / dataset max
    double height_norm = 0.0;
    double area_norm = 0.0;        // foreground pixels / dataset max
    double aspect_ratio = 0.0;     // width / height, unnormalized
};

struct DatasetMaxima {
    double max_width = 0.0;
    double max_height = 0.0;
    double max_area = 0.0;
};

DatasetMaxima dataset_maxima(const std::vector<const ObjectMask*>& masks);
ObjectGeometry geometry_stats(const ObjectMask& mask, int image_width, int image_height,
                              const DatasetMaxima& maxima);

struct NeighborhoodMasks {
    MaskRaster local;  // ring within ring_radius of the object, minus all objects
    MaskRaster global; // image minus the object (other objects excluded by default)
};

// Euclidean dilation ring of the mask minus the union of object masks;
// either raster may come back empty (e.g. full-frame object).
NeighborhoodMasks neighborhood_masks(const ObjectMask& mask,
                                     const std::vector<const ObjectMask*>& all_masks_in_image,
                                     int ring_radius, bool global_excludes_others = true);

int default_ring_radius(std::int64_t object_area);

// 0.5 * sum (p-q)^2 / (p+q+eps) over normalized bins; in [0,1].
double chi2_contrast(const LabHistogram& h1, const LabHistogram& h2);

struct GammaFitResult {
    double g = 1.0;                    // exponent of y ~ x^g
    std::optional<double> r_squared;   // absent when ys have zero variance
};

// Least-squares fit of g in (0,16] minimizing sum (y - x^g)^2.
GammaFitResult gamma_fit(std::span<const double> xs, std::span<const double> ys);

struct ObjectCharacterization {
    std::string image_id;
    std::string object_id;
    double entropy_bits = 0.0;
    Lab mean_lab;
    ObjectGeometry geometry;
    std::optional<double> local_contrast;  // absent when the ring is empty
    std::optional<double> global_contrast; // absent when the background is empty
    int ring_radius = 0;
};

struct ModalityGammaFit {
    std::string x; // modality tag
    std::string y;
    double g = 1.0;
    std::optional<double> r_squared;
    int point_count = 0;
};

struct CharacterizationConfig {
    int bins_per_axis = 8;
    std::optional<int> ring_radius; // absent = auto per object
    bool global_excludes_others = true;
    int workers = 1;
};

struct CharacterizationReport {
    CharacterizationConfig config;
    DatasetMaxima maxima;
    std::vector<ObjectCharacterization> objects;
    std::vector<ObjectSaliency> saliencies; // same order as objects
    std::vector<ModalityGammaFit> gamma_fits;
    std::vector<std::string> notes;
};

// Appendix-style dataset characterization. Object saliencies for the gamma
// fits are computed from the dataset's subject records (sigma from the
// viewing geometry).
CharacterizationReport characterize(const Dataset& ds, const CharacterizationConfig& config);

} // namespace salmon
