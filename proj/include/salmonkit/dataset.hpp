#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "salmonkit/geometry.hpp"
#include "salmonkit/raster.hpp"

namespace salmon {

// Structural problem in a manifest or its referenced files; carries a
// file/line locus where one exists.
class DatasetError : public std::runtime_error {
public:
    DatasetError(std::string locus, const std::string& message)
        : std::runtime_error(locus.empty() ? message : locus + ": " + message),
          locus_(std::move(locus)) {}
    const std::string& locus() const { return locus_; }

private:
    std::string locus_;
};

enum class Modality { eye_tracking, point_click, rect_draw };

constexpr const char* modality_tag(Modality m) {
    switch (m) {
    case Modality::eye_tracking: return "et";
    case Modality::point_click: return "pc";
    case Modality::rect_draw: return "rd";
    }
    return "?";
}
std::optional<Modality> modality_from_tag(const std::string& tag);
inline constexpr Modality kAllModalities[] = {Modality::eye_tracking, Modality::point_click,
                                              Modality::rect_draw};

struct ImageRecord {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::string path; // relative to the manifest directory
    bool operator==(const ImageRecord&) const = default;
};

struct ObjectMask {
    std::string object_id;
    std::string image_id;
    MaskRaster mask;
    Rect tight_rect;
    std::string path;
    bool operator==(const ObjectMask&) const = default;
};

struct FixationPoint {
    int x = 0;
    int y = 0;
    int count = 1; // number of recorded fixation samples at this pixel
    bool operator==(const FixationPoint&) const = default;
};

struct ClickPoint {
    int x = 0;
    int y = 0;
    bool operator==(const ClickPoint&) const = default;
};

// One subject's events on one image for one modality. Only the event list
// matching the modality is populated.
struct SubjectRecord {
    std::string subject_id;
    std::string image_id;
    Modality modality = Modality::eye_tracking;
    std::vector<FixationPoint> fixations;
    std::vector<ClickPoint> clicks;
    std::vector<Rect> rects;
    bool operator==(const SubjectRecord&) const = default;
};

struct ViewingGeometry {
    double d_v_cm = 75.0;    // viewing distance
    double r_v_px = 1050.0;  // vertical monitor resolution
    double h_m_cm = 29.5;    // monitor height
    double alpha_deg = 1.0;  // half fovea size
    double eta_deg = 0.4;    // tracker accuracy
    double theta_deg = 0.0;  // gaze eccentricity offset
    bool operator==(const ViewingGeometry&) const = default;
};

struct IngestWarning {
    std::string locus;
    std::string message;
};

struct Dataset {
    std::vector<ImageRecord> images;         // sorted by image_id
    std::vector<ObjectMask> masks;           // sorted by (image_id, object_id)
    std::vector<SubjectRecord> subject_records; // sorted by (image_id, modality, subject_id)
    ViewingGeometry viewing_geometry;
    std::vector<IngestWarning> warnings;     // ingestion report
    std::filesystem::path root;              // manifest directory

    const ImageRecord* find_image(const std::string& image_id) const;
    const ObjectMask* find_mask(const std::string& object_id) const;
    std::vector<const ObjectMask*> masks_for(const std::string& image_id) const;
    std::vector<const SubjectRecord*> records_for(const std::string& image_id, Modality m) const;
    // N_gamma^k: distinct subjects per (image, modality).
    int subject_count(const std::string& image_id, Modality m) const;
};

// Loads and cross-links a dataset manifest. Aborts (throws DatasetError)
// on structural problems; clampable ones (out-of-bounds event coordinates,
// duplicate events) are fixed up and recorded in Dataset::warnings.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes manifest + masks + event CSVs (and the image files when pixels are
// provided) under `out_dir`. Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& ds, const std::filesystem::path& out_dir,
                                    const std::map<std::string, ImageU8>& image_pixels = {},
                                    const std::string& config_tag = {});

struct Violation {
    std::string subject; // object_id / image_id / record key
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Diagnostics only: re-checks every data-model invariant on an in-memory
// dataset. Empty report iff valid.
ValidationReport validate_dataset(const Dataset& ds);

} // namespace salmon
