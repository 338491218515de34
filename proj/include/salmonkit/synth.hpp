#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salmonkit/dataset.hpp"
#include "salmonkit/gt_gen.hpp"
#include "salmonkit/metrics.hpp"
#include "salmonkit/rng.hpp"

namespace salmon {

enum class ShapeKind { rectangle, ellipse, blob };

struct SceneObjectSpec {
    ShapeKind shape = ShapeKind::rectangle;
    int cx = 0; // center, pixels
    int cy = 0;
    int width = 0;
    int height = 0;
    std::array<std::uint8_t, 3> color{128, 128, 128};
    double true_saliency = 0.5;
};

struct SceneSpec {
    std::uint64_t seed = 1;
    int width = 256;
    int height = 256;
    std::vector<SceneObjectSpec> objects;
    int subjects_et = 8;
    int subjects_pc = 8;
    int subjects_rd = 8;
    double click_scatter_sigma = 0.0; // 0 = clicks stay inside the mask
    double rect_jitter = 0.05;        // bounded uniform jitter, fraction of rect size
    int fixation_count = 1;           // count column per placed fixation
    double color_jitter = 10.0;       // per-channel uniform pixel jitter
    std::array<std::uint8_t, 3> background{200, 200, 200};
};

struct GeneratedScene {
    std::string image_id;
    ImageU8 image;
    std::vector<ObjectMask> masks;
    std::vector<double> true_saliency; // parallel to masks
};

// Deterministic rasterization of the spec; seed fully determines the output.
// Throws when an object does not fit inside the image.
GeneratedScene generate_scene(const SceneSpec& spec, const std::string& image_id);

// Simulated records for all three modalities. Each subject interacts with
// object o independently with probability true_saliency(o); with the default
// noise knobs the recovered s_gamma^o are exact binomial fractions.
std::vector<SubjectRecord> simulate_subjects(const GeneratedScene& scene, const SceneSpec& spec);

struct RandomSceneConfig {
    int min_objects = 2;
    int max_objects = 5;
    int width = 256;
    int height = 256;
    int subjects_et = 8;
    int subjects_pc = 8;
    int subjects_rd = 8;
    bool anchor_max_saliency = true; // force one object to saliency 1.0
    bool allow_overlap = false;
};

// Draws object shapes/positions/saliencies; placement is rejection-sampled
// so that inflated bounding boxes stay pairwise disjoint unless overlap is
// allowed. Throws after too many failed placements.
SceneSpec random_scene_spec(std::uint64_t seed, const RandomSceneConfig& config);

// Full synthetic dataset in memory (records included); `viewing_geometry`
// is derived so that foveal_sigma lands near target_sigma_px.
struct SynthBatch {
    Dataset dataset;
    std::vector<GeneratedScene> scenes;
    std::map<std::string, ImageU8> image_pixels;
    std::map<std::string, std::vector<double>> true_saliency; // image_id -> per-object
};
SynthBatch synth_batch(std::uint64_t seed, int scene_count, const RandomSceneConfig& config,
                       double target_sigma_px = 4.0);

ViewingGeometry geometry_for_sigma(double sigma_px);

struct OracleResult {
    std::string metric;
    std::optional<double> value; // absent = undefined (e.g. zero denominator)
    std::string method;
};

enum class TauMode { standard, combined };

// Literal double-loop evaluation of the pair indicators; n capped at 12.
OracleResult oracle_tau_bruteforce(std::span<const double> estimated,
                                   const std::vector<std::vector<double>>& references,
                                   TauMode mode, double tie_eps = 1e-9);

// Exact PR area via every distinct threshold of S, counted by full scans;
// image capped at 64x64.
OracleResult oracle_auprc_exact(const MapRaster& s, const MaskRaster& gt_binary);

} // namespace salmon
