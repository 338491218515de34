#include "salmonkit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "salmonkit/image_io.hpp"
#include "salmonkit/version.hpp"

namespace salmon {

using nlohmann::json;

std::optional<Modality> modality_from_tag(const std::string& tag) {
    if (tag == "et")
        return Modality::eye_tracking;
    if (tag == "pc")
        return Modality::point_click;
    if (tag == "rd")
        return Modality::rect_draw;
    return std::nullopt;
}

const ImageRecord* Dataset::find_image(const std::string& image_id) const {
    auto it = std::lower_bound(images.begin(), images.end(), image_id,
                               [](const ImageRecord& r, const std::string& id) {
                                   return r.image_id < id;
                               });
    if (it != images.end() && it->image_id == image_id)
        return &*it;
    return nullptr;
}

const ObjectMask* Dataset::find_mask(const std::string& object_id) const {
    for (const auto& m : masks)
        if (m.object_id == object_id)
            return &m;
    return nullptr;
}

std::vector<const ObjectMask*> Dataset::masks_for(const std::string& image_id) const {
    std::vector<const ObjectMask*> out;
    for (const auto& m : masks)
        if (m.image_id == image_id)
            out.push_back(&m);
    return out;
}

std::vector<const SubjectRecord*> Dataset::records_for(const std::string& image_id,
                                                       Modality m) const {
    std::vector<const SubjectRecord*> out;
    for (const auto& r : subject_records)
        if (r.image_id == image_id && r.modality == m)
            out.push_back(&r);
    return out;
}

int Dataset::subject_count(const std::string& image_id, Modality m) const {
    std::set<std::string> ids;
    for (const auto& r : subject_records)
        if (r.image_id == image_id && r.modality == m)
            ids.insert(r.subject_id);
    return static_cast<int>(ids.size());
}

namespace {

std::string locus_of(const std::filesystem::path& file, std::size_t line = 0) {
    if (line == 0)
        return file.string();
    return file.string() + ":" + std::to_string(line);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

int parse_int_field(const std::string& s, const std::string& locus, const char* what) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw DatasetError(locus, std::string("malformed ") + what + " value '" + s + "'");
    return value;
}

struct RecordKey {
    std::string subject_id;
    std::string image_id;
    auto operator<=>(const RecordKey&) const = default;
};

class EventIngester {
public:
    EventIngester(Dataset& ds, std::vector<IngestWarning>& warnings)
        : ds_(ds), warnings_(warnings) {}

    void load_csv(const std::filesystem::path& file, Modality modality,
                  const std::vector<std::string>& expected_header) {
        std::ifstream in(file);
        if (!in)
            throw DatasetError(file.string(), "cannot open event file");
        std::string line;
        std::size_t line_no = 0;
        if (!std::getline(in, line))
            throw DatasetError(file.string(), "missing header row");
        ++line_no;
        auto header = split_csv_line(line);
        if (header != expected_header) {
            std::string want;
            for (const auto& h : expected_header)
                want += (want.empty() ? "" : ",") + h;
            throw DatasetError(locus_of(file, line_no), "bad header, expected '" + want + "'");
        }
        std::map<RecordKey, SubjectRecord> grouped;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line == "\r")
                continue;
            auto fields = split_csv_line(line);
            if (fields.size() != expected_header.size())
                throw DatasetError(locus_of(file, line_no), "wrong field count");
            ingest_row(file, line_no, modality, fields, grouped);
        }
        for (auto& [key, rec] : grouped)
            ds_.subject_records.push_back(std::move(rec));
    }

private:
    void ingest_row(const std::filesystem::path& file, std::size_t line_no, Modality modality,
                    const std::vector<std::string>& fields,
                    std::map<RecordKey, SubjectRecord>& grouped) {
        const std::string locus = locus_of(file, line_no);
        const std::string& subject_id = fields[0];
        const std::string& image_id = fields[1];
        if (subject_id.empty() || image_id.empty())
            throw DatasetError(locus, "empty subject_id or image_id");
        const ImageRecord* img = ds_.find_image(image_id);
        if (!img)
            throw DatasetError(locus, "unknown image_id '" + image_id + "'");

        auto& rec = grouped[RecordKey{subject_id, image_id}];
        if (rec.subject_id.empty()) {
            rec.subject_id = subject_id;
            rec.image_id = image_id;
            rec.modality = modality;
        }

        switch (modality) {
        case Modality::eye_tracking: {
            int x = parse_int_field(fields[2], locus, "x");
            int y = parse_int_field(fields[3], locus, "y");
            int count = parse_int_field(fields[4], locus, "count");
            if (count < 1)
                throw DatasetError(locus, "fixation count must be >= 1");
            clamp_point(locus, *img, x, y);
            FixationPoint p{x, y, count};
            if (std::find(rec.fixations.begin(), rec.fixations.end(), p) != rec.fixations.end())
                warn(locus, "duplicate fixation event");
            rec.fixations.push_back(p);
            break;
        }
        case Modality::point_click: {
            int x = parse_int_field(fields[2], locus, "x");
            int y = parse_int_field(fields[3], locus, "y");
            clamp_point(locus, *img, x, y);
            ClickPoint p{x, y};
            if (std::find(rec.clicks.begin(), rec.clicks.end(), p) != rec.clicks.end())
                warn(locus, "duplicate click event");
            rec.clicks.push_back(p);
            break;
        }
        case Modality::rect_draw: {
            int x0 = parse_int_field(fields[2], locus, "x0");
            int y0 = parse_int_field(fields[3], locus, "y0");
            int x1 = parse_int_field(fields[4], locus, "x1");
            int y1 = parse_int_field(fields[5], locus, "y1");
            if (x0 >= x1 || y0 >= y1)
                throw DatasetError(locus, "degenerate rectangle");
            Rect r{x0, y0, x1, y1};
            Rect clamped{std::clamp(r.x0, 0, img->width - 1), std::clamp(r.y0, 0, img->height - 1),
                         std::clamp(r.x1, 1, img->width), std::clamp(r.y1, 1, img->height)};
            if (!clamped.valid())
                throw DatasetError(locus, "rectangle entirely outside image bounds");
            if (clamped != r)
                warn(locus, "rectangle clamped to image bounds");
            if (std::find(rec.rects.begin(), rec.rects.end(), clamped) != rec.rects.end())
                warn(locus, "duplicate rectangle event");
            rec.rects.push_back(clamped);
            break;
        }
        }
    }

    void clamp_point(const std::string& locus, const ImageRecord& img, int& x, int& y) {
        int cx = std::clamp(x, 0, img.width - 1);
        int cy = std::clamp(y, 0, img.height - 1);
        if (cx != x || cy != y)
            warn(locus, "point clamped to image bounds");
        x = cx;
        y = cy;
    }

    void warn(const std::string& locus, std::string message) {
        warnings_.push_back(IngestWarning{locus, std::move(message)});
    }

    Dataset& ds_;
    std::vector<IngestWarning>& warnings_;
};

void sort_dataset(Dataset& ds) {
    std::sort(ds.images.begin(), ds.images.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
    std::sort(ds.masks.begin(), ds.masks.end(), [](const ObjectMask& a, const ObjectMask& b) {
        return std::tie(a.image_id, a.object_id) < std::tie(b.image_id, b.object_id);
    });
    std::sort(ds.subject_records.begin(), ds.subject_records.end(),
              [](const SubjectRecord& a, const SubjectRecord& b) {
                  return std::tie(a.image_id, a.modality, a.subject_id) <
                         std::tie(b.image_id, b.modality, b.subject_id);
              });
}

json require_key(const json& j, const char* key, const std::string& locus) {
    if (!j.contains(key))
        throw DatasetError(locus, std::string("manifest missing key '") + key + "'");
    return j.at(key);
}

} // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in)
        throw DatasetError(manifest_path.string(), "cannot open manifest");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DatasetError(manifest_path.string(), std::string("manifest parse error: ") + e.what());
    }

    Dataset ds;
    ds.root = manifest_path.parent_path();
    const std::string mloc = manifest_path.string();

    for (const auto& ji : require_key(j, "images", mloc)) {
        ImageRecord rec;
        rec.image_id = require_key(ji, "id", mloc).get<std::string>();
        rec.width = require_key(ji, "width", mloc).get<int>();
        rec.height = require_key(ji, "height", mloc).get<int>();
        rec.path = require_key(ji, "path", mloc).get<std::string>();
        if (rec.width < 1 || rec.height < 1)
            throw DatasetError(mloc, "image '" + rec.image_id + "' has non-positive dimensions");
        ds.images.push_back(std::move(rec));
    }
    {
        std::set<std::string> seen;
        for (const auto& img : ds.images)
            if (!seen.insert(img.image_id).second)
                throw DatasetError(mloc, "duplicate image_id '" + img.image_id + "'");
    }
    std::sort(ds.images.begin(), ds.images.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });

    for (const auto& jm : require_key(j, "masks", mloc)) {
        ObjectMask m;
        m.object_id = require_key(jm, "object_id", mloc).get<std::string>();
        m.image_id = require_key(jm, "image_id", mloc).get<std::string>();
        m.path = require_key(jm, "path", mloc).get<std::string>();
        const ImageRecord* img = ds.find_image(m.image_id);
        if (!img)
            throw DatasetError(mloc, "mask '" + m.object_id + "' references unknown image_id '" +
                                         m.image_id + "'");
        auto mask_path = ds.root / m.path;
        m.mask = read_mask_png(mask_path);
        if (m.mask.width() != img->width || m.mask.height() != img->height)
            throw DatasetError(mask_path.string(),
                               "mask dimensions do not match image '" + m.image_id + "'");
        if (foreground_area(m.mask) == 0)
            throw DatasetError(mask_path.string(), "mask has no foreground pixel");
        m.tight_rect = tight_bounding_rect(m.mask);
        ds.masks.push_back(std::move(m));
    }
    {
        std::set<std::string> seen;
        for (const auto& m : ds.masks)
            if (!seen.insert(m.object_id).second)
                throw DatasetError(mloc, "duplicate object_id '" + m.object_id + "'");
    }

    if (j.contains("viewing_geometry")) {
        const auto& vg = j.at("viewing_geometry");
        ViewingGeometry g;
        g.d_v_cm = require_key(vg, "d_v_cm", mloc).get<double>();
        g.r_v_px = require_key(vg, "r_v_px", mloc).get<double>();
        g.h_m_cm = require_key(vg, "h_m_cm", mloc).get<double>();
        g.alpha_deg = require_key(vg, "alpha_deg", mloc).get<double>();
        g.eta_deg = require_key(vg, "eta_deg", mloc).get<double>();
        g.theta_deg = require_key(vg, "theta_deg", mloc).get<double>();
        ds.viewing_geometry = g;
    }

    EventIngester ingester(ds, ds.warnings);
    if (j.contains("events")) {
        const auto& je = j.at("events");
        if (je.contains("fixations"))
            ingester.load_csv(ds.root / je.at("fixations").get<std::string>(),
                              Modality::eye_tracking,
                              {"subject_id", "image_id", "x", "y", "count"});
        if (je.contains("clicks"))
            ingester.load_csv(ds.root / je.at("clicks").get<std::string>(), Modality::point_click,
                              {"subject_id", "image_id", "x", "y"});
        if (je.contains("rectangles"))
            ingester.load_csv(ds.root / je.at("rectangles").get<std::string>(),
                              Modality::rect_draw,
                              {"subject_id", "image_id", "x0", "y0", "x1", "y1"});
    }
    sort_dataset(ds);

    bool any_subjects = !ds.subject_records.empty();
    if (!any_subjects)
        ds.warnings.push_back(IngestWarning{mloc, "no modality has subject records"});

    return ds;
}

std::filesystem::path write_dataset(const Dataset& ds, const std::filesystem::path& out_dir,
                                    const std::map<std::string, ImageU8>& image_pixels,
                                    const std::string& config_tag) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "masks");
    fs::create_directories(out_dir / "events");
    if (!image_pixels.empty())
        fs::create_directories(out_dir / "images");

    json j;
    j["images"] = json::array();
    for (const auto& img : ds.images) {
        j["images"].push_back({{"id", img.image_id},
                               {"width", img.width},
                               {"height", img.height},
                               {"path", img.path}});
        auto it = image_pixels.find(img.image_id);
        if (it != image_pixels.end())
            write_rgb8_png(out_dir / img.path, it->second, config_tag);
    }

    j["masks"] = json::array();
    for (const auto& m : ds.masks) {
        std::string rel = m.path.empty() ? "masks/" + m.object_id + ".png" : m.path;
        j["masks"].push_back({{"object_id", m.object_id}, {"image_id", m.image_id}, {"path", rel}});
        write_mask_png(out_dir / rel, m.mask, config_tag);
    }

    const auto& g = ds.viewing_geometry;
    j["viewing_geometry"] = {{"d_v_cm", g.d_v_cm},       {"r_v_px", g.r_v_px},
                             {"h_m_cm", g.h_m_cm},       {"alpha_deg", g.alpha_deg},
                             {"eta_deg", g.eta_deg},     {"theta_deg", g.theta_deg}};

    std::ostringstream fixations;
    std::ostringstream clicks;
    std::ostringstream rects;
    fixations << "subject_id,image_id,x,y,count\n";
    clicks << "subject_id,image_id,x,y\n";
    rects << "subject_id,image_id,x0,y0,x1,y1\n";
    for (const auto& rec : ds.subject_records) {
        for (const auto& f : rec.fixations)
            fixations << rec.subject_id << ',' << rec.image_id << ',' << f.x << ',' << f.y << ','
                      << f.count << '\n';
        for (const auto& c : rec.clicks)
            clicks << rec.subject_id << ',' << rec.image_id << ',' << c.x << ',' << c.y << '\n';
        for (const auto& r : rec.rects)
            rects << rec.subject_id << ',' << rec.image_id << ',' << r.x0 << ',' << r.y0 << ','
                  << r.x1 << ',' << r.y1 << '\n';
    }

    auto write_text = [](const fs::path& p, const std::string& text) {
        fs::path tmp = p;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            out << text;
        }
        fs::rename(tmp, p);
    };
    write_text(out_dir / "events" / "fixations.csv", fixations.str());
    write_text(out_dir / "events" / "clicks.csv", clicks.str());
    write_text(out_dir / "events" / "rectangles.csv", rects.str());
    j["events"] = {{"fixations", "events/fixations.csv"},
                   {"clicks", "events/clicks.csv"},
                   {"rectangles", "events/rectangles.csv"}};

    fs::path manifest = out_dir / "manifest.json";
    write_text(manifest, j.dump(2) + "\n");
    return manifest;
}

ValidationReport validate_dataset(const Dataset& ds) {
    ValidationReport report;
    auto flag = [&](std::string subject, std::string message) {
        report.violations.push_back(Violation{std::move(subject), std::move(message)});
    };

    std::set<std::string> image_ids;
    for (const auto& img : ds.images) {
        if (!image_ids.insert(img.image_id).second)
            flag(img.image_id, "duplicate image_id");
        if (img.width < 1 || img.height < 1)
            flag(img.image_id, "non-positive image dimensions");
    }

    std::set<std::string> object_ids;
    for (const auto& m : ds.masks) {
        if (!object_ids.insert(m.object_id).second)
            flag(m.object_id, "duplicate object_id");
        const ImageRecord* img = ds.find_image(m.image_id);
        if (!img) {
            flag(m.object_id, "mask references unknown image_id '" + m.image_id + "'");
            continue;
        }
        if (m.mask.width() != img->width || m.mask.height() != img->height)
            flag(m.object_id, "mask dimensions do not match image");
        if (foreground_area(m.mask) == 0) {
            flag(m.object_id, "mask has no foreground pixel");
            continue;
        }
        if (tight_bounding_rect(m.mask) != m.tight_rect)
            flag(m.object_id, "stored tight_rect does not match mask");
    }

    std::set<std::tuple<std::string, std::string, Modality>> record_keys;
    for (const auto& rec : ds.subject_records) {
        std::string key = rec.subject_id + "/" + rec.image_id + "/" + modality_tag(rec.modality);
        if (!record_keys.insert({rec.subject_id, rec.image_id, rec.modality}).second)
            flag(key, "duplicate (subject, image, modality) record");
        const ImageRecord* img = ds.find_image(rec.image_id);
        if (!img) {
            flag(key, "record references unknown image_id '" + rec.image_id + "'");
            continue;
        }
        auto in_img = [&](int x, int y) {
            return x >= 0 && y >= 0 && x < img->width && y < img->height;
        };
        for (const auto& f : rec.fixations) {
            if (!in_img(f.x, f.y))
                flag(key, "fixation outside image bounds");
            if (f.count < 1)
                flag(key, "fixation count < 1");
        }
        for (const auto& c : rec.clicks)
            if (!in_img(c.x, c.y))
                flag(key, "click outside image bounds");
        for (const auto& r : rec.rects)
            if (!r.valid() || r.x0 < 0 || r.y0 < 0 || r.x1 > img->width || r.y1 > img->height)
                flag(key, "rectangle outside image bounds or degenerate");
    }

    return report;
}

} // namespace salmon
