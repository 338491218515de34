#include "salmonkit/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "salmonkit/gt_gen.hpp"
#include "salmonkit/image_io.hpp"
#include "salmonkit/parallel.hpp"
#include "salmonkit/synth.hpp"
#include "salmonkit/version.hpp"

namespace salmon {

using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

int default_workers() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(std::min(n, 8u));
}

json opt_to_json(const std::optional<double>& v) {
    if (v)
        return *v;
    return nullptr;
}

std::string provenance_comment(const std::string& hash) {
    return "# " + std::string(kToolkitName) + " " + std::string(kToolkitVersion) +
           " config=" + hash + "\n";
}

void stamp(json& j, const json& config) {
    j["version"] = std::string(kToolkitVersion);
    j["config"] = config;
    j["config_hash"] = config_hash(config.dump());
}

json eval_config_to_json(const EvalConfig& c) {
    json j;
    json mods = json::array();
    for (Modality m : c.modalities)
        mods.push_back(modality_tag(m));
    j["modalities"] = mods;
    j["scope"] = c.scope == Scope::dataset ? "dataset" : "image";
    j["thresholds"] = c.thresholds == ThresholdMode::uniform256 ? "uniform256" : "exact";
    j["tie_eps"] = c.tie_eps;
    j["allow_missing_modality"] = c.allow_missing_modality;
    j["detector"] = c.detector_name;
    return j;
}

json aggregate_block_to_json(const AggregateBlock& b) {
    json j;
    json mae = json::object();
    for (const auto& [tag, v] : b.mae)
        mae[tag] = v;
    if (b.mae_combined)
        mae["combined"] = *b.mae_combined;
    j["mae"] = mae;
    json au = json::object();
    for (const auto& [tag, v] : b.auprc)
        au[tag] = v;
    if (b.auprc_combined)
        au["combined"] = *b.auprc_combined;
    j["auprc"] = au;
    json tau = json::object();
    for (const auto& [tag, v] : b.tau)
        tau[tag] = opt_to_json(v);
    if (b.tau_combined)
        tau["combined"] = opt_to_json(*b.tau_combined);
    j["tau"] = tau;
    if (b.baseline_equal_salience_auprc)
        j["baseline_equal_salience_auprc"] = *b.baseline_equal_salience_auprc;
    j["object_count"] = b.object_count;
    return j;
}

} // namespace

std::string metric_report_to_json(const MetricReport& report) {
    json j;
    j["kind"] = "metric_report";
    stamp(j, eval_config_to_json(report.config));

    json per_object = json::array();
    for (const auto& om : report.per_object) {
        json o;
        o["image_id"] = om.image_id;
        o["object_id"] = om.object_id;
        o["estimated"] = om.estimated;
        o["gt"] = om.gt;
        o["mae"] = om.mae;
        if (om.mae_combined)
            o["mae_combined"] = *om.mae_combined;
        per_object.push_back(std::move(o));
    }
    j["per_object"] = per_object;

    json per_level = json::array();
    for (const auto& lr : report.per_level) {
        per_level.push_back({{"image_id", lr.image_id},
                             {"gamma", modality_tag(lr.gamma)},
                             {"rank", lr.rank},
                             {"level", lr.level},
                             {"auprc", lr.auprc}});
    }
    j["per_level"] = per_level;

    j["dataset_aggregates"] = aggregate_block_to_json(report.dataset);
    if (!report.per_image.empty()) {
        json arr = json::array();
        for (const auto& ia : report.per_image) {
            json e = aggregate_block_to_json(ia.block);
            e["image_id"] = ia.image_id;
            arr.push_back(std::move(e));
        }
        j["image_aggregates"] = arr;
    }
    j["coverage"] = {{"missing_maps", report.missing_maps},
                     {"missing_gt", report.missing_gt},
                     {"level_alignment_truncated", report.level_alignment_truncated}};
    j["notes"] = report.notes;
    return j.dump(2) + "\n";
}

std::string characterization_report_to_json(const CharacterizationReport& report) {
    json config;
    config["bins_per_axis"] = report.config.bins_per_axis;
    config["ring_radius"] =
        report.config.ring_radius ? json(*report.config.ring_radius) : json("auto");
    config["global_excludes_others"] = report.config.global_excludes_others;

    json j;
    j["kind"] = "characterization_report";
    stamp(j, config);
    j["dataset_maxima"] = {{"max_width", report.maxima.max_width},
                           {"max_height", report.maxima.max_height},
                           {"max_area", report.maxima.max_area}};

    json objects = json::array();
    for (std::size_t i = 0; i < report.objects.size(); ++i) {
        const auto& oc = report.objects[i];
        json o;
        o["image_id"] = oc.image_id;
        o["object_id"] = oc.object_id;
        o["entropy_bits"] = oc.entropy_bits;
        o["mean_lab"] = {oc.mean_lab.l, oc.mean_lab.a, oc.mean_lab.b};
        o["geometry"] = {{"norm_center_dist", oc.geometry.norm_center_dist},
                         {"width_norm", oc.geometry.width_norm},
                         {"height_norm", oc.geometry.height_norm},
                         {"area_norm", oc.geometry.area_norm},
                         {"aspect_ratio", oc.geometry.aspect_ratio}};
        o["local_contrast"] = opt_to_json(oc.local_contrast);
        o["global_contrast"] = opt_to_json(oc.global_contrast);
        o["ring_radius"] = oc.ring_radius;
        if (i < report.saliencies.size()) {
            const auto& s = report.saliencies[i];
            o["saliency"] = {{"et", opt_to_json(s.s_et)},
                             {"pc", opt_to_json(s.s_pc)},
                             {"rd", opt_to_json(s.s_rd)}};
        }
        objects.push_back(std::move(o));
    }
    j["objects"] = objects;

    json fits = json::array();
    for (const auto& f : report.gamma_fits)
        fits.push_back({{"x", f.x},
                        {"y", f.y},
                        {"g", f.g},
                        {"r_squared", opt_to_json(f.r_squared)},
                        {"points", f.point_count}});
    j["gamma_fits"] = fits;
    j["notes"] = report.notes;
    return j.dump(2) + "\n";
}

void atomic_write_file(const std::filesystem::path& path, const std::string& contents) {
    namespace fs = std::filesystem;
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot open for writing: " + tmp.string());
        out << contents;
        if (!out)
            throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

namespace {

// ---------------------------------------------------------------- synth ---

struct SynthArgs {
    std::uint64_t seed = 1;
    int scenes = 5;
    std::string objects_range = "2..5";
    std::string subjects = "et=8,pc=8,rd=8";
    std::string dims = "256x256";
    std::string out;
    bool overlap = false;
    double sigma = 0.0; // 0 = derive from dims
    double color_jitter = 10.0;
    int workers = default_workers();
};

int parse_int_arg(const std::string& s, const char* flag) {
    try {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw CLI::ValidationError(flag, "malformed integer '" + s + "'");
    }
}

std::pair<int, int> parse_range(const std::string& text) {
    auto pos = text.find("..");
    if (pos == std::string::npos)
        throw CLI::ValidationError("--objects-per-scene", "expected form a..b");
    int a = parse_int_arg(text.substr(0, pos), "--objects-per-scene");
    int b = parse_int_arg(text.substr(pos + 2), "--objects-per-scene");
    if (a < 1 || b < a)
        throw CLI::ValidationError("--objects-per-scene", "need 1 <= a <= b");
    return {a, b};
}

std::pair<int, int> parse_dims(const std::string& text) {
    auto pos = text.find('x');
    if (pos == std::string::npos)
        throw CLI::ValidationError("--dims", "expected form WxH");
    int w = parse_int_arg(text.substr(0, pos), "--dims");
    int h = parse_int_arg(text.substr(pos + 1), "--dims");
    if (w < 16 || h < 16)
        throw CLI::ValidationError("--dims", "dimensions must be >= 16");
    return {w, h};
}

std::map<std::string, int> parse_subjects(const std::string& text) {
    std::map<std::string, int> out{{"et", 0}, {"pc", 0}, {"rd", 0}};
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos || out.find(item.substr(0, eq)) == out.end())
            throw CLI::ValidationError("--subjects", "expected et=N,pc=N,rd=N");
        out[item.substr(0, eq)] = parse_int_arg(item.substr(eq + 1), "--subjects");
    }
    return out;
}

int run_synth(const SynthArgs& args) {
    auto [min_obj, max_obj] = parse_range(args.objects_range);
    auto [width, height] = parse_dims(args.dims);
    auto subjects = parse_subjects(args.subjects);

    RandomSceneConfig config;
    config.min_objects = min_obj;
    config.max_objects = max_obj;
    config.width = width;
    config.height = height;
    config.subjects_et = subjects["et"];
    config.subjects_pc = subjects["pc"];
    config.subjects_rd = subjects["rd"];
    config.allow_overlap = args.overlap;

    double sigma = args.sigma > 0.0
                       ? args.sigma
                       : std::max(2.0, std::min(width, height) / 32.0);

    json cfg;
    cfg["seed"] = args.seed;
    cfg["scenes"] = args.scenes;
    cfg["objects_per_scene"] = args.objects_range;
    cfg["subjects"] = args.subjects;
    cfg["dims"] = args.dims;
    cfg["overlap"] = args.overlap;
    cfg["sigma_px"] = sigma;
    std::string hash = config_hash(cfg.dump());

    SynthBatch batch = synth_batch(args.seed, args.scenes, config, sigma);
    std::filesystem::path out_dir(args.out);
    write_dataset(batch.dataset, out_dir, batch.image_pixels, hash);

    json truth;
    truth["kind"] = "synth_truth";
    stamp(truth, cfg);
    json images = json::object();
    for (const auto& scene : batch.scenes) {
        json objs = json::object();
        for (std::size_t i = 0; i < scene.masks.size(); ++i)
            objs[scene.masks[i].object_id] = scene.true_saliency[i];
        images[scene.image_id] = objs;
    }
    truth["images"] = images;
    atomic_write_file(out_dir / "truth.json", truth.dump(2) + "\n");

    std::cout << "wrote " << batch.scenes.size() << " scene(s) to " << out_dir.string() << "\n";
    return 0;
}

// -------------------------------------------------------------- gt-build ---

struct GtBuildArgs {
    std::string manifest;
    std::string modality = "all";
    std::string sigma = "auto";
    std::string out;
    int workers = default_workers();
};

std::vector<Modality> parse_modalities(const std::string& text) {
    if (text == "all")
        return {Modality::eye_tracking, Modality::point_click, Modality::rect_draw};
    auto m = modality_from_tag(text);
    if (!m)
        throw CLI::ValidationError("--modality", "expected et, pc, rd or all");
    return {*m};
}

int run_gt_build(const GtBuildArgs& args) {
    auto modalities = parse_modalities(args.modality);
    Dataset ds = load_dataset(args.manifest);

    double sigma = 0.0;
    if (args.sigma == "auto") {
        sigma = foveal_sigma(ds.viewing_geometry);
    } else {
        try {
            std::size_t used = 0;
            sigma = std::stod(args.sigma, &used);
            if (used != args.sigma.size())
                throw std::invalid_argument(args.sigma);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--sigma", "expected a number or 'auto'");
        }
        if (sigma <= 0)
            throw CLI::ValidationError("--sigma", "sigma must be positive");
    }

    json cfg;
    cfg["manifest"] = args.manifest;
    cfg["modality"] = args.modality;
    cfg["sigma_px"] = sigma;
    std::string hash = config_hash(cfg.dump());

    std::filesystem::path out_dir(args.out);
    std::filesystem::create_directories(out_dir);

    struct ImageOut {
        json entry;
        std::vector<std::string> notes;
    };
    std::vector<ImageOut> outs(ds.images.size());

    parallel_for(args.workers, ds.images.size(), [&](std::size_t idx) {
        const auto& img = ds.images[idx];
        auto& out = outs[idx];
        auto masks = ds.masks_for(img.image_id);
        json entry;
        entry["image_id"] = img.image_id;
        entry["width"] = img.width;
        entry["height"] = img.height;
        json objects = json::object();
        if (masks.empty()) {
            out.notes.push_back("image '" + img.image_id + "' has no objects");
            entry["objects"] = objects;
            out.entry = std::move(entry);
            return;
        }

        auto sals = compute_object_saliencies(ds, img.image_id, sigma);
        for (std::size_t i = 0; i < masks.size(); ++i) {
            json vals = json::object();
            for (Modality m : modalities) {
                auto v = sals[i].value(m);
                if (v)
                    vals[modality_tag(m)] = *v;
            }
            objects[masks[i]->object_id] = vals;
        }
        entry["objects"] = objects;

        for (Modality m : modalities) {
            bool have = std::all_of(sals.begin(), sals.end(),
                                    [&](const ObjectSaliency& s) {
                                        return s.value(m).has_value();
                                    });
            if (!have) {
                out.notes.push_back("image '" + img.image_id + "': no subjects for modality " +
                                    modality_tag(m));
                continue;
            }
            auto gt = assemble_gt_map(sals, masks, m, img.width, img.height, img.image_id);
            write_gray16_png(out_dir / (img.image_id + "__" + modality_tag(m) + ".png"), gt.map,
                             hash);
        }
        out.entry = std::move(entry);
    });

    json sidecar;
    sidecar["kind"] = "gt_saliency";
    stamp(sidecar, cfg);
    sidecar["sigma_px"] = sigma;
    json images = json::array();
    json notes = json::array();
    for (auto& out : outs) {
        images.push_back(std::move(out.entry));
        for (auto& n : out.notes)
            notes.push_back(n);
    }
    sidecar["images"] = images;
    sidecar["notes"] = notes;
    atomic_write_file(out_dir / "gt_saliency.json", sidecar.dump(2) + "\n");

    std::cout << "wrote ground truth for " << ds.images.size() << " image(s) to "
              << out_dir.string() << "\n";
    return 0;
}

// -------------------------------------------------------------- evaluate ---

struct EvaluateArgs {
    std::string manifest;
    std::string gt_dir;
    std::string maps_dir;
    std::string modality = "all";
    std::string scope = "dataset";
    std::string thresholds = "uniform256";
    double tie_eps = 1e-9;
    bool allow_missing = false;
    std::string out;
    std::string csv;
    std::string name;
    int workers = default_workers();
};

std::vector<MultiLevelGroundTruth> load_gt_sidecar(const Dataset& ds,
                                                   const std::filesystem::path& gt_dir,
                                                   const std::vector<Modality>& modalities) {
    auto sidecar_path = gt_dir / "gt_saliency.json";
    std::ifstream in(sidecar_path);
    if (!in)
        throw DatasetError(sidecar_path.string(), "ground-truth sidecar not found");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DatasetError(sidecar_path.string(), std::string("parse error: ") + e.what());
    }
    if (!j.contains("images"))
        throw DatasetError(sidecar_path.string(), "missing 'images' key");

    std::vector<MultiLevelGroundTruth> gts;
    for (const auto& entry : j.at("images")) {
        std::string image_id = entry.at("image_id").get<std::string>();
        const ImageRecord* img = ds.find_image(image_id);
        if (!img)
            continue;
        auto masks = ds.masks_for(image_id);
        if (masks.empty())
            continue;
        const auto& objects = entry.at("objects");
        for (Modality m : modalities) {
            std::vector<ObjectSaliency> sals;
            bool complete = true;
            for (const auto* mask : masks) {
                if (!objects.contains(mask->object_id) ||
                    !objects.at(mask->object_id).contains(modality_tag(m))) {
                    complete = false;
                    break;
                }
                ObjectSaliency s;
                s.object_id = mask->object_id;
                s.set(m, objects.at(mask->object_id).at(modality_tag(m)).get<double>());
                sals.push_back(std::move(s));
            }
            if (!complete)
                continue;
            gts.push_back(assemble_gt_map(sals, masks, m, img->width, img->height, image_id));
        }
    }
    return gts;
}

std::string metric_report_csv(const MetricReport& report, const std::string& hash) {
    std::ostringstream out;
    out << provenance_comment(hash);
    out << "image_id,object_id,estimated,s_et,s_pc,s_rd,mae_et,mae_pc,mae_rd,mae_combined\n";
    auto field = [](const std::map<std::string, double>& m, const char* tag) {
        auto it = m.find(tag);
        return it == m.end() ? std::string() : std::to_string(it->second);
    };
    for (const auto& om : report.per_object) {
        out << om.image_id << ',' << om.object_id << ',' << om.estimated << ','
            << field(om.gt, "et") << ',' << field(om.gt, "pc") << ',' << field(om.gt, "rd") << ','
            << field(om.mae, "et") << ',' << field(om.mae, "pc") << ',' << field(om.mae, "rd")
            << ',' << (om.mae_combined ? std::to_string(*om.mae_combined) : std::string())
            << '\n';
    }
    return out.str();
}

int run_evaluate(const EvaluateArgs& args) {
    auto modalities = parse_modalities(args.modality);
    Dataset ds = load_dataset(args.manifest);

    std::filesystem::path gt_dir(args.gt_dir);
    if (!std::filesystem::exists(gt_dir))
        throw DatasetError(gt_dir.string(), "ground-truth directory not found");
    std::filesystem::path maps_dir(args.maps_dir);
    if (!std::filesystem::exists(maps_dir))
        throw DatasetError(maps_dir.string(), "saliency-map directory not found");

    auto gts = load_gt_sidecar(ds, gt_dir, modalities);

    std::vector<SaliencyMap> maps;
    for (const auto& img : ds.images) {
        auto path = maps_dir / (img.image_id + ".png");
        if (!std::filesystem::exists(path))
            continue;
        SaliencyMap m;
        m.image_id = img.image_id;
        m.values = read_gray_map_png(path);
        maps.push_back(std::move(m));
    }

    EvalConfig config;
    config.modalities = modalities;
    config.scope = args.scope == "image" ? Scope::image : Scope::dataset;
    config.thresholds =
        args.thresholds == "exact" ? ThresholdMode::exact : ThresholdMode::uniform256;
    config.tie_eps = args.tie_eps;
    config.allow_missing_modality = args.allow_missing;
    config.detector_name = args.name.empty() ? maps_dir.filename().string() : args.name;
    config.workers = args.workers;

    MetricReport report = evaluate(ds, gts, maps, config);
    std::string report_json = metric_report_to_json(report);
    atomic_write_file(args.out, report_json);
    if (!args.csv.empty()) {
        std::string hash = config_hash(eval_config_to_json(config).dump());
        atomic_write_file(args.csv, metric_report_csv(report, hash));
    }
    std::cout << "evaluated " << report.dataset.object_count << " object(s); report at "
              << args.out << "\n";
    return 0;
}

// ----------------------------------------------------------- characterize ---

struct CharacterizeArgs {
    std::string manifest;
    std::string out;
    int bins = 8;
    std::string ring = "auto";
    std::string csv_dir;
    bool global_with_others = false;
    int workers = default_workers();
};

std::string histogram_csv(const std::vector<double>& values, double lo, double hi, int bins,
                          const std::string& hash) {
    std::ostringstream out;
    out << provenance_comment(hash);
    out << "bin_lo,bin_hi,count\n";
    if (hi <= lo)
        hi = lo + 1.0;
    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        b = std::clamp(b, 0, bins - 1);
        counts[static_cast<std::size_t>(b)]++;
    }
    for (int b = 0; b < bins; ++b) {
        double blo = lo + (hi - lo) * b / bins;
        double bhi = lo + (hi - lo) * (b + 1) / bins;
        out << blo << ',' << bhi << ',' << counts[static_cast<std::size_t>(b)] << '\n';
    }
    return out.str();
}

int run_characterize(const CharacterizeArgs& args) {
    Dataset ds = load_dataset(args.manifest);

    CharacterizationConfig config;
    config.bins_per_axis = args.bins;
    if (args.ring != "auto") {
        int r = parse_int_arg(args.ring, "--ring");
        if (r < 1)
            throw CLI::ValidationError("--ring", "ring radius must be >= 1");
        config.ring_radius = r;
    }
    config.global_excludes_others = !args.global_with_others;
    config.workers = args.workers;

    CharacterizationReport report = characterize(ds, config);
    atomic_write_file(args.out, characterization_report_to_json(report));

    if (!args.csv_dir.empty()) {
        std::filesystem::path dir(args.csv_dir);
        json cfg;
        cfg["bins_per_axis"] = config.bins_per_axis;
        cfg["ring"] = args.ring;
        std::string hash = config_hash(cfg.dump());

        auto collect = [&](auto&& get) {
            std::vector<double> vals;
            for (const auto& oc : report.objects) {
                auto v = get(oc);
                if (v)
                    vals.push_back(*v);
            }
            return vals;
        };
        using OC = ObjectCharacterization;
        auto always = [](double v) { return std::optional<double>(v); };
        struct Dist {
            const char* file;
            std::vector<double> values;
            double lo;
            double hi;
        };
        double max_entropy =
            3.0 * std::log2(static_cast<double>(config.bins_per_axis));
        std::vector<Dist> dists;
        dists.push_back({"entropy_hist.csv",
                         collect([&](const OC& o) { return always(o.entropy_bits); }), 0.0,
                         max_entropy});
        dists.push_back({"center_dist_hist.csv",
                         collect([&](const OC& o) { return always(o.geometry.norm_center_dist); }),
                         0.0, 0.5});
        dists.push_back({"width_hist.csv",
                         collect([&](const OC& o) { return always(o.geometry.width_norm); }), 0.0,
                         1.0});
        dists.push_back({"height_hist.csv",
                         collect([&](const OC& o) { return always(o.geometry.height_norm); }), 0.0,
                         1.0});
        dists.push_back({"area_hist.csv",
                         collect([&](const OC& o) { return always(o.geometry.area_norm); }), 0.0,
                         1.0});
        auto aspects = collect([&](const OC& o) { return always(o.geometry.aspect_ratio); });
        double max_aspect = 1.0;
        for (double a : aspects)
            max_aspect = std::max(max_aspect, a);
        dists.push_back({"aspect_hist.csv", aspects, 0.0, max_aspect});
        dists.push_back({"local_contrast_hist.csv",
                         collect([&](const OC& o) { return o.local_contrast; }), 0.0, 1.0});
        dists.push_back({"global_contrast_hist.csv",
                         collect([&](const OC& o) { return o.global_contrast; }), 0.0, 1.0});
        for (const auto& d : dists)
            atomic_write_file(dir / d.file, histogram_csv(d.values, d.lo, d.hi, 20, hash));

        std::map<std::string, int> per_image;
        for (const auto& oc : report.objects)
            per_image[oc.image_id]++;
        std::map<int, int> count_hist;
        for (const auto& [id, n] : per_image)
            count_hist[n]++;
        std::ostringstream oc_csv;
        oc_csv << provenance_comment(hash) << "objects_per_image,images\n";
        for (const auto& [n, c] : count_hist)
            oc_csv << n << ',' << c << '\n';
        atomic_write_file(dir / "object_count_hist.csv", oc_csv.str());

        std::ostringstream mean_csv;
        mean_csv << provenance_comment(hash) << "image_id,object_id,L,a,b\n";
        for (const auto& o : report.objects)
            mean_csv << o.image_id << ',' << o.object_id << ',' << o.mean_lab.l << ','
                     << o.mean_lab.a << ',' << o.mean_lab.b << '\n';
        atomic_write_file(dir / "mean_color.csv", mean_csv.str());

        std::ostringstream fit_csv;
        fit_csv << provenance_comment(hash) << "x,y,g,r_squared,points\n";
        for (const auto& f : report.gamma_fits)
            fit_csv << f.x << ',' << f.y << ',' << f.g << ','
                    << (f.r_squared ? std::to_string(*f.r_squared) : std::string()) << ','
                    << f.point_count << '\n';
        atomic_write_file(dir / "gamma_fits.csv", fit_csv.str());
    }

    std::cout << "characterized " << report.objects.size() << " object(s); report at " << args.out
              << "\n";
    return 0;
}

// ---------------------------------------------------------------- report ---

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
    const int width = 640;
    const int height = 360;
    const int margin = 48;
    double max_v = 1e-9;
    for (double v : values)
        max_v = std::max(max_v, std::abs(v));
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << title << "</text>\n";
    int n = static_cast<int>(values.size());
    if (n > 0) {
        double bar_w = static_cast<double>(width - 2 * margin) / n;
        for (int i = 0; i < n; ++i) {
            double frac = std::abs(values[static_cast<std::size_t>(i)]) / max_v;
            double bh = frac * (height - 2 * margin);
            double x = margin + i * bar_w;
            double y = height - margin - bh;
            svg << "<rect x=\"" << x + 2 << "\" y=\"" << y << "\" width=\"" << bar_w - 4
                << "\" height=\"" << bh << "\" fill=\"#4878a8\"/>\n";
            svg << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << height - margin + 14
                << "\" text-anchor=\"middle\" font-size=\"9\">"
                << labels[static_cast<std::size_t>(i)] << "</text>\n";
            svg << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << y - 3
                << "\" text-anchor=\"middle\" font-size=\"9\">"
                << values[static_cast<std::size_t>(i)] << "</text>\n";
        }
    }
    svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    svg << "</svg>\n";
    return svg.str();
}

} // namespace

std::vector<std::filesystem::path> emit_plot_data(
    const std::vector<std::filesystem::path>& report_jsons, const std::filesystem::path& out_dir,
    bool with_svg) {
    std::vector<std::filesystem::path> written;
    std::vector<json> metric_reports;
    std::vector<json> charac_reports;

    for (const auto& path : report_jsons) {
        std::ifstream in(path);
        if (!in)
            throw DatasetError(path.string(), "report not found");
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw DatasetError(path.string(), std::string("parse error: ") + e.what());
        }
        std::string kind = j.value("kind", "");
        if (kind == "metric_report")
            metric_reports.push_back(std::move(j));
        else if (kind == "characterization_report")
            charac_reports.push_back(std::move(j));
        else
            throw DatasetError(path.string(), "unknown report kind '" + kind + "'");
    }

    std::filesystem::create_directories(out_dir);
    json cfg;
    cfg["inputs"] = json::array();
    for (const auto& p : report_jsons)
        cfg["inputs"].push_back(p.filename().string());
    std::string hash = config_hash(cfg.dump());

    auto write = [&](const std::filesystem::path& p, const std::string& text) {
        atomic_write_file(p, text);
        written.push_back(p);
    };

    if (!metric_reports.empty()) {
        const char* families[] = {"mae", "auprc", "tau"};
        for (const char* family : families) {
            std::ostringstream csv;
            csv << provenance_comment(hash);
            csv << "detector,et,pc,rd,combined";
            if (std::string(family) == "auprc")
                csv << ",baseline_equal_salience";
            csv << '\n';
            std::vector<std::string> labels;
            std::vector<double> combined_vals;
            for (const auto& r : metric_reports) {
                std::string detector = r.at("config").value("detector", "detector");
                const auto& block = r.at("dataset_aggregates").at(family);
                auto cell = [&](const char* tag) -> std::string {
                    if (!block.contains(tag) || block.at(tag).is_null())
                        return "";
                    return block.at(tag).dump();
                };
                csv << detector << ',' << cell("et") << ',' << cell("pc") << ',' << cell("rd")
                    << ',' << cell("combined");
                if (std::string(family) == "auprc") {
                    const auto& agg = r.at("dataset_aggregates");
                    csv << ','
                        << (agg.contains("baseline_equal_salience_auprc")
                                ? agg.at("baseline_equal_salience_auprc").dump()
                                : "");
                }
                csv << '\n';
                labels.push_back(detector);
                if (block.contains("combined") && !block.at("combined").is_null())
                    combined_vals.push_back(block.at("combined").get<double>());
            }
            write(out_dir / (std::string(family) + ".csv"), csv.str());
            if (with_svg && combined_vals.size() == labels.size())
                write(out_dir / (std::string(family) + ".svg"),
                      svg_bar_chart(std::string(family) + " (combined)", labels, combined_vals));
        }
    }

    for (std::size_t ci = 0; ci < charac_reports.size(); ++ci) {
        const auto& r = charac_reports[ci];
        std::string prefix = charac_reports.size() > 1
                                 ? "characterization_" + std::to_string(ci) + "_"
                                 : "";
        std::ostringstream csv;
        csv << provenance_comment(hash);
        csv << "image_id,object_id,entropy_bits,norm_center_dist,width_norm,height_norm,"
               "area_norm,aspect_ratio,local_contrast,global_contrast\n";
        std::vector<double> entropies;
        for (const auto& o : r.at("objects")) {
            const auto& g = o.at("geometry");
            auto optcell = [&](const char* key) -> std::string {
                if (!o.contains(key) || o.at(key).is_null())
                    return "";
                return o.at(key).dump();
            };
            csv << o.at("image_id").get<std::string>() << ','
                << o.at("object_id").get<std::string>() << ',' << o.at("entropy_bits").dump()
                << ',' << g.at("norm_center_dist").dump() << ',' << g.at("width_norm").dump()
                << ',' << g.at("height_norm").dump() << ',' << g.at("area_norm").dump() << ','
                << g.at("aspect_ratio").dump() << ',' << optcell("local_contrast") << ','
                << optcell("global_contrast") << '\n';
            entropies.push_back(o.at("entropy_bits").get<double>());
        }
        write(out_dir / (prefix + "objects.csv"), csv.str());

        std::ostringstream fits;
        fits << provenance_comment(hash) << "x,y,g,r_squared,points\n";
        for (const auto& f : r.at("gamma_fits"))
            fits << f.at("x").get<std::string>() << ',' << f.at("y").get<std::string>() << ','
                 << f.at("g").dump() << ','
                 << (f.at("r_squared").is_null() ? "" : f.at("r_squared").dump()) << ','
                 << f.at("points").dump() << '\n';
        write(out_dir / (prefix + "gamma_fits.csv"), fits.str());

        if (with_svg) {
            std::vector<std::string> labels;
            std::vector<double> counts;
            constexpr int kBins = 10;
            double max_e = 1e-9;
            for (double e : entropies)
                max_e = std::max(max_e, e);
            std::vector<int> hist(kBins, 0);
            for (double e : entropies) {
                int b = std::clamp(static_cast<int>(e / max_e * kBins), 0, kBins - 1);
                hist[static_cast<std::size_t>(b)]++;
            }
            for (int b = 0; b < kBins; ++b) {
                labels.push_back(std::to_string(b));
                counts.push_back(hist[static_cast<std::size_t>(b)]);
            }
            write(out_dir / (prefix + "entropy_hist.svg"),
                  svg_bar_chart("color entropy distribution", labels, counts));
        }
    }

    return written;
}

namespace {

int dispatch(int argc, const char* const* argv) {
    CLI::App app{std::string(kToolkitName) +
                 ": multi-level salient-object ground truth and evaluation toolkit"};
    app.require_subcommand(0, 1);
    app.set_version_flag("--version",
                         std::string(kToolkitName) + " " + std::string(kToolkitVersion));
    bool verbose = false;
    app.add_flag("--verbose", verbose, "verbose diagnostics to stderr");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--seed", synth_args.seed, "master seed");
    synth->add_option("--scenes", synth_args.scenes, "number of scenes")->check(CLI::Range(1, 100000));
    synth->add_option("--objects-per-scene", synth_args.objects_range, "objects per scene, a..b");
    synth->add_option("--subjects", synth_args.subjects, "subject counts, et=N,pc=N,rd=N");
    synth->add_option("--dims", synth_args.dims, "image dimensions WxH");
    synth->add_option("--out", synth_args.out, "output directory")->required();
    synth->add_flag("--overlap", synth_args.overlap, "allow overlapping objects");
    synth->add_option("--sigma", synth_args.sigma, "target foveal sigma in px (0 = auto)");
    synth->add_option("--color-jitter", synth_args.color_jitter, "per-pixel color jitter");
    synth->add_option("--workers", synth_args.workers, "worker threads");

    GtBuildArgs gt_args;
    auto* gt = app.add_subcommand("gt-build", "build multi-level ground truth from records");
    gt->add_option("--manifest", gt_args.manifest, "dataset manifest")->required();
    gt->add_option("--modality", gt_args.modality, "et, pc, rd or all");
    gt->add_option("--sigma", gt_args.sigma, "fixation filter sigma in px, or 'auto'");
    gt->add_option("--out", gt_args.out, "output directory")->required();
    gt->add_option("--workers", gt_args.workers, "worker threads");

    EvaluateArgs eval_args;
    auto* ev = app.add_subcommand("evaluate", "score saliency maps against ground truth");
    ev->add_option("--manifest", eval_args.manifest, "dataset manifest")->required();
    ev->add_option("--gt-dir", eval_args.gt_dir, "gt-build output directory")->required();
    ev->add_option("--maps-dir", eval_args.maps_dir, "detector saliency maps directory")
        ->required();
    ev->add_option("--modality", eval_args.modality, "et, pc, rd or all");
    ev->add_option("--scope", eval_args.scope, "dataset or image")
        ->check(CLI::IsMember({"dataset", "image"}));
    ev->add_option("--thresholds", eval_args.thresholds, "uniform256 or exact")
        ->check(CLI::IsMember({"uniform256", "exact"}));
    ev->add_option("--tie-eps", eval_args.tie_eps, "tie tolerance for rank comparisons");
    ev->add_flag("--allow-missing-modality", eval_args.allow_missing,
                 "combined measures fall back to present modalities");
    ev->add_option("--out", eval_args.out, "report JSON path")->required();
    ev->add_option("--csv", eval_args.csv, "per-object CSV path");
    ev->add_option("--name", eval_args.name, "detector label for the report");
    ev->add_option("--workers", eval_args.workers, "worker threads");

    CharacterizeArgs ch_args;
    auto* ch = app.add_subcommand("characterize", "dataset characterization statistics");
    ch->add_option("--manifest", ch_args.manifest, "dataset manifest")->required();
    ch->add_option("--out", ch_args.out, "report JSON path")->required();
    ch->add_option("--bins", ch_args.bins, "Lab histogram bins per axis")
        ->check(CLI::Range(1, 64));
    ch->add_option("--ring", ch_args.ring, "local ring radius in px, or 'auto'");
    ch->add_option("--csv", ch_args.csv_dir, "directory for distribution CSVs");
    ch->add_flag("--global-with-others", ch_args.global_with_others,
                 "keep other objects inside the global background");
    ch->add_option("--workers", ch_args.workers, "worker threads");

    std::vector<std::string> report_inputs;
    std::string report_out;
    bool report_svg = false;
    auto* rp = app.add_subcommand("report", "expand report JSONs into plot-ready CSV/SVG");
    rp->add_option("--in", report_inputs, "report JSON path(s)")->required();
    rp->add_option("--out", report_out, "output directory")->required();
    rp->add_flag("--svg", report_svg, "also render simple SVG charts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e); // prints help/version or the usage error
        return code == 0 ? 0 : kExitUsage;
    }

    if (synth->parsed())
        return run_synth(synth_args);
    if (gt->parsed())
        return run_gt_build(gt_args);
    if (ev->parsed())
        return run_evaluate(eval_args);
    if (ch->parsed())
        return run_characterize(ch_args);
    if (rp->parsed()) {
        std::vector<std::filesystem::path> inputs(report_inputs.begin(), report_inputs.end());
        auto files = emit_plot_data(inputs, report_out, report_svg);
        std::cout << "wrote " << files.size() << " file(s) to " << report_out << "\n";
        return 0;
    }
    std::cerr << app.help();
    return kExitUsage;
}

} // namespace

int run(int argc, const char* const* argv) {
    try {
        return dispatch(argc, argv);
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DatasetError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ImageIoError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

} // namespace salmon
