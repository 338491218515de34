#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salmonkit/dataset.hpp"
#include "salmonkit/gt_gen.hpp"

namespace salmon {

struct SaliencyMap {
    std::string image_id;
    MapRaster values; // [0,1], image dimensions
};

// Mean of S over the mask's foreground pixels (the object-level estimate S^o).
double object_mean_saliency(const MapRaster& s, const ObjectMask& mask);

// |S^o - s_gamma^o|
double mae_per_object(double estimated, double ground_truth);

// Arithmetic mean; throws on empty scope.
double mean_aggregate(std::span<const double> values);

// min over modalities. With allow_partial, absent modalities are skipped;
// otherwise any absent modality throws.
double mae_combined_per_object(const std::optional<double>& et, const std::optional<double>& pc,
                               const std::optional<double>& rd, bool allow_partial = false);

struct LevelMap {
    double level = 0.0;
    MaskRaster raster; // 1 where F >= level
};

// One binary map per distinct nonzero level, ascending. Maps are nested.
std::vector<LevelMap> gt_level_binarize(const MultiLevelGroundTruth& gt);

struct PRPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct PRCurve {
    std::vector<PRPoint> points;     // sorted by (recall asc, precision desc)
    std::vector<double> thresholds;  // binarization ladder actually used
};

enum class ThresholdMode { uniform256, exact };

// Sweeps predicted = (S >= t) over the threshold ladder. uniform256 uses
// t = k/255 for k = 0..255; exact uses every distinct value of S. Both add a
// threshold just above max(S) (empty prediction, precision 1 by convention)
// and anchor the curve at recall 0 with the precision of the emptiest
// non-empty prediction. Throws when gt has no positive pixel.
PRCurve precision_recall_curve(const MapRaster& s, const MaskRaster& gt_binary,
                               ThresholdMode mode = ThresholdMode::uniform256);

// Trapezoidal integral of precision over recall.
double auprc(const PRCurve& curve);

// Comparison outcome with tie tolerance |a-b| <= tie_eps.
enum class Ord { lt, eq, gt };
inline Ord ord_eps(double a, double b, double eps) {
    double d = a - b;
    if (d > eps)
        return Ord::gt;
    if (d < -eps)
        return Ord::lt;
    return Ord::eq;
}

// Standard tie-aware Kendall tau_b between estimated and reference values.
// nullopt when every pair is tied in either list (zero denominator).
std::optional<double> kendall_tau_b(std::span<const double> estimated,
                                    std::span<const double> reference, double tie_eps = 1e-9);

// Multi-reference tau_b: a pair is concordant when the estimate's strict
// order agrees with at least one modality, discordant only when some
// modality strictly disagrees and none agrees. Reduces to kendall_tau_b
// when the three references are identical.
std::optional<double> kendall_tau_combined(std::span<const double> estimated,
                                           std::span<const double> rho_et,
                                           std::span<const double> rho_pc,
                                           std::span<const double> rho_rd, double tie_eps = 1e-9);

enum class Scope { dataset, image };

struct EvalConfig {
    std::vector<Modality> modalities = {Modality::eye_tracking, Modality::point_click,
                                        Modality::rect_draw};
    Scope scope = Scope::dataset;
    ThresholdMode thresholds = ThresholdMode::uniform256;
    double tie_eps = 1e-9;
    bool allow_missing_modality = false; // combined MAE falls back to present modalities
    std::string detector_name;
    int workers = 1;

    bool wants(Modality m) const;
    bool all_three() const { return modalities.size() == 3; }
};

struct ObjectMetrics {
    std::string image_id;
    std::string object_id;
    double estimated = 0.0; // S^o
    std::map<std::string, double> gt;  // modality tag -> s_gamma^o
    std::map<std::string, double> mae; // modality tag -> MAE_gamma^o
    std::optional<double> mae_combined;
};

struct LevelAuprcRecord {
    std::string image_id;
    Modality gamma = Modality::eye_tracking;
    int rank = 0;       // 0 = highest level within the image
    double level = 0.0;
    double auprc = 0.0;
};

struct AggregateBlock {
    std::map<std::string, double> mae;       // per modality tag
    std::optional<double> mae_combined;
    std::map<std::string, double> auprc;     // per modality tag, Eq.-(12) style mean
    std::optional<double> auprc_combined;    // rank-aligned max, Eq.-(13) style
    std::map<std::string, std::optional<double>> tau; // per modality tag
    std::optional<std::optional<double>> tau_combined;
    std::optional<double> baseline_equal_salience_auprc;
    int object_count = 0;
};

struct ImageAggregates {
    std::string image_id;
    AggregateBlock block;
};

struct MetricReport {
    EvalConfig config;
    std::vector<ObjectMetrics> per_object;
    std::vector<LevelAuprcRecord> per_level;
    AggregateBlock dataset;
    std::vector<ImageAggregates> per_image; // populated when scope == image
    std::vector<std::string> missing_maps;  // image ids skipped for lack of a saliency map
    std::vector<std::string> missing_gt;    // image ids skipped for lack of ground truth
    int level_alignment_truncated = 0;      // images whose level lists were truncated for Eq. (13)
    std::vector<std::string> notes;
};

// Scores all saliency maps against the ground-truth set; images lacking a
// map or the requested ground truth are listed and skipped.
MetricReport evaluate(const Dataset& ds, const std::vector<MultiLevelGroundTruth>& gts,
                      const std::vector<SaliencyMap>& maps, const EvalConfig& config);

} // namespace salmon
