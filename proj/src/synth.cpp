#include "salmonkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace salmon {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t state = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    return split_mix64(state);
}

std::string zero_pad(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width)
        s.insert(s.begin(), '0');
    return s;
}

bool point_in_polygon(double px, double py, const std::vector<std::pair<double, double>>& poly) {
    bool inside = false;
    std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        auto [xi, yi] = poly[i];
        auto [xj, yj] = poly[j];
        if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi)
            inside = !inside;
    }
    return inside;
}

MaskRaster rasterize_object(const SceneObjectSpec& obj, int width, int height, Pcg32& rng) {
    MaskRaster mask(width, height, 0);
    double half_w = obj.width / 2.0;
    double half_h = obj.height / 2.0;
    int x0 = obj.cx - obj.width / 2;
    int y0 = obj.cy - obj.height / 2;

    switch (obj.shape) {
    case ShapeKind::rectangle:
        for (int y = y0; y < y0 + obj.height; ++y)
            for (int x = x0; x < x0 + obj.width; ++x)
                mask(x, y) = 1;
        break;
    case ShapeKind::ellipse:
        for (int y = y0; y < y0 + obj.height; ++y) {
            for (int x = x0; x < x0 + obj.width; ++x) {
                double dx = (x + 0.5 - obj.cx) / half_w;
                double dy = (y + 0.5 - obj.cy) / half_h;
                if (dx * dx + dy * dy <= 1.0)
                    mask(x, y) = 1;
            }
        }
        break;
    case ShapeKind::blob: {
        constexpr int kVertices = 10;
        std::vector<std::pair<double, double>> poly;
        poly.reserve(kVertices);
        for (int i = 0; i < kVertices; ++i) {
            double angle = 2.0 * std::numbers::pi * i / kVertices;
            double rx = half_w * (0.55 + 0.45 * rng.uniform());
            double ry = half_h * (0.55 + 0.45 * rng.uniform());
            poly.emplace_back(obj.cx + rx * std::cos(angle), obj.cy + ry * std::sin(angle));
        }
        for (int y = y0; y < y0 + obj.height; ++y)
            for (int x = x0; x < x0 + obj.width; ++x)
                if (point_in_polygon(x + 0.5, y + 0.5, poly))
                    mask(x, y) = 1;
        break;
    }
    }
    if (foreground_area(mask) == 0)
        mask(obj.cx, obj.cy) = 1; // degenerate sizes still yield one pixel
    return mask;
}

std::vector<std::pair<int, int>> foreground_pixels(const MaskRaster& mask, const Rect& bound) {
    std::vector<std::pair<int, int>> px;
    for (int y = bound.y0; y < bound.y1; ++y)
        for (int x = bound.x0; x < bound.x1; ++x)
            if (mask(x, y) != 0)
                px.emplace_back(x, y);
    return px;
}

} // namespace

GeneratedScene generate_scene(const SceneSpec& spec, const std::string& image_id) {
    if (spec.width < 1 || spec.height < 1)
        throw std::invalid_argument("generate_scene: bad dimensions");
    for (const auto& obj : spec.objects) {
        int x0 = obj.cx - obj.width / 2;
        int y0 = obj.cy - obj.height / 2;
        if (obj.width < 1 || obj.height < 1 || x0 < 0 || y0 < 0 || x0 + obj.width > spec.width ||
            y0 + obj.height > spec.height)
            throw std::invalid_argument("generate_scene: object does not fit inside the image");
        if (obj.true_saliency < 0.0 || obj.true_saliency > 1.0)
            throw std::invalid_argument("generate_scene: true_saliency outside [0,1]");
    }

    GeneratedScene scene;
    scene.image_id = image_id;

    Pcg32 shape_rng(derive_seed(spec.seed, 101), 7);
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        ObjectMask m;
        m.object_id = image_id + "_obj" + zero_pad(static_cast<int>(i), 2);
        m.image_id = image_id;
        m.mask = rasterize_object(spec.objects[i], spec.width, spec.height, shape_rng);
        m.tight_rect = tight_bounding_rect(m.mask);
        m.path = "masks/" + m.object_id + ".png";
        scene.masks.push_back(std::move(m));
        scene.true_saliency.push_back(spec.objects[i].true_saliency);
    }

    scene.image.width = spec.width;
    scene.image.height = spec.height;
    scene.image.channels = 3;
    scene.image.pixels.assign(static_cast<std::size_t>(spec.width) * spec.height * 3, 0);
    Pcg32 jitter_rng(derive_seed(spec.seed, 202), 11);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            std::array<std::uint8_t, 3> base = spec.background;
            for (std::size_t i = 0; i < scene.masks.size(); ++i)
                if (scene.masks[i].mask(x, y) != 0)
                    base = spec.objects[i].color;
            std::uint8_t* px = scene.image.at(x, y);
            for (int c = 0; c < 3; ++c) {
                double j = spec.color_jitter > 0.0
                               ? jitter_rng.uniform(-spec.color_jitter, spec.color_jitter)
                               : 0.0;
                double v = base[static_cast<std::size_t>(c)] + j;
                px[c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    }
    return scene;
}

std::vector<SubjectRecord> simulate_subjects(const GeneratedScene& scene, const SceneSpec& spec) {
    std::vector<SubjectRecord> records;

    std::vector<std::vector<std::pair<int, int>>> fg;
    std::vector<std::pair<double, double>> centroids;
    for (const auto& m : scene.masks) {
        auto px = foreground_pixels(m.mask, m.tight_rect);
        double sx = 0.0;
        double sy = 0.0;
        for (auto [x, y] : px) {
            sx += x;
            sy += y;
        }
        centroids.emplace_back(sx / static_cast<double>(px.size()),
                               sy / static_cast<double>(px.size()));
        fg.push_back(std::move(px));
    }

    // Eye tracking: attend each object with probability s, one fixation near
    // the centroid, inside the mask.
    for (int subj = 0; subj < spec.subjects_et; ++subj) {
        Pcg32 rng(derive_seed(spec.seed, 1, static_cast<std::uint64_t>(subj)), 1);
        SubjectRecord rec;
        rec.subject_id = "et" + zero_pad(subj, 5);
        rec.image_id = scene.image_id;
        rec.modality = Modality::eye_tracking;
        for (std::size_t i = 0; i < scene.masks.size(); ++i) {
            if (!rng.bernoulli(scene.true_saliency[i]))
                continue;
            auto [cx, cy] = centroids[i];
            const auto& m = scene.masks[i].mask;
            double scatter = std::min(scene.masks[i].tight_rect.width(),
                                      scene.masks[i].tight_rect.height()) / 8.0;
            int px = -1;
            int py = -1;
            for (int attempt = 0; attempt < 20; ++attempt) {
                int x = static_cast<int>(std::lround(rng.gaussian(cx, scatter)));
                int y = static_cast<int>(std::lround(rng.gaussian(cy, scatter)));
                if (m.in_bounds(x, y) && m(x, y) != 0) {
                    px = x;
                    py = y;
                    break;
                }
            }
            if (px < 0) {
                auto [fx, fy] = fg[i][fg[i].size() / 2];
                px = fx;
                py = fy;
            }
            rec.fixations.push_back(FixationPoint{px, py, spec.fixation_count});
        }
        records.push_back(std::move(rec));
    }

    // Point clicking: click a uniform foreground pixel with probability s.
    for (int subj = 0; subj < spec.subjects_pc; ++subj) {
        Pcg32 rng(derive_seed(spec.seed, 2, static_cast<std::uint64_t>(subj)), 2);
        SubjectRecord rec;
        rec.subject_id = "pc" + zero_pad(subj, 5);
        rec.image_id = scene.image_id;
        rec.modality = Modality::point_click;
        for (std::size_t i = 0; i < scene.masks.size(); ++i) {
            if (!rng.bernoulli(scene.true_saliency[i]))
                continue;
            auto [x, y] = fg[i][static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(fg[i].size()) - 1))];
            if (spec.click_scatter_sigma > 0.0) {
                x = std::clamp(static_cast<int>(std::lround(
                                   rng.gaussian(x, spec.click_scatter_sigma))),
                               0, spec.width - 1);
                y = std::clamp(static_cast<int>(std::lround(
                                   rng.gaussian(y, spec.click_scatter_sigma))),
                               0, spec.height - 1);
            }
            rec.clicks.push_back(ClickPoint{x, y});
        }
        records.push_back(std::move(rec));
    }

    // Rectangle drawing: bounded uniform jitter of the tight rect keeps the
    // IoU comfortably above the 0.3 threshold.
    for (int subj = 0; subj < spec.subjects_rd; ++subj) {
        Pcg32 rng(derive_seed(spec.seed, 3, static_cast<std::uint64_t>(subj)), 3);
        SubjectRecord rec;
        rec.subject_id = "rd" + zero_pad(subj, 5);
        rec.image_id = scene.image_id;
        rec.modality = Modality::rect_draw;
        for (std::size_t i = 0; i < scene.masks.size(); ++i) {
            if (!rng.bernoulli(scene.true_saliency[i]))
                continue;
            const Rect& t = scene.masks[i].tight_rect;
            double f = spec.rect_jitter;
            auto jitter = [&](double extent) {
                return static_cast<int>(std::lround(rng.uniform(-1.0, 1.0) * f * extent));
            };
            Rect r{t.x0 + jitter(t.width()), t.y0 + jitter(t.height()),
                   t.x1 + jitter(t.width()), t.y1 + jitter(t.height())};
            r.x0 = std::clamp(r.x0, 0, spec.width - 1);
            r.y0 = std::clamp(r.y0, 0, spec.height - 1);
            r.x1 = std::clamp(r.x1, r.x0 + 1, spec.width);
            r.y1 = std::clamp(r.y1, r.y0 + 1, spec.height);
            rec.rects.push_back(r);
        }
        records.push_back(std::move(rec));
    }

    return records;
}

SceneSpec random_scene_spec(std::uint64_t seed, const RandomSceneConfig& config) {
    Pcg32 rng(derive_seed(seed, 42), 5);
    SceneSpec spec;
    spec.seed = seed;
    spec.width = config.width;
    spec.height = config.height;
    spec.subjects_et = config.subjects_et;
    spec.subjects_pc = config.subjects_pc;
    spec.subjects_rd = config.subjects_rd;

    int count = static_cast<int>(rng.uniform_int(config.min_objects, config.max_objects));

    // Distinct saliency grid so level counts match object counts.
    std::vector<double> grid;
    for (int i = 2; i <= 19; ++i)
        grid.push_back(i * 0.05);
    for (std::size_t i = grid.size(); i > 1; --i)
        std::swap(grid[i - 1],
                  grid[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    std::vector<Rect> placed;
    for (int i = 0; i < count; ++i) {
        SceneObjectSpec obj;
        int shape_pick = static_cast<int>(rng.uniform_int(0, 2));
        obj.shape = shape_pick == 0   ? ShapeKind::rectangle
                    : shape_pick == 1 ? ShapeKind::ellipse
                                      : ShapeKind::blob;
        int min_dim = std::min(config.width, config.height);
        int lo = std::max(6, min_dim / 10);
        int hi = std::max(lo + 1, min_dim / 4);
        bool placed_ok = false;
        for (int attempt = 0; attempt < 200 && !placed_ok; ++attempt) {
            obj.width = static_cast<int>(rng.uniform_int(lo, hi));
            obj.height = static_cast<int>(rng.uniform_int(lo, hi));
            obj.cx = static_cast<int>(
                rng.uniform_int(obj.width / 2 + 1, config.width - obj.width / 2 - 2));
            obj.cy = static_cast<int>(
                rng.uniform_int(obj.height / 2 + 1, config.height - obj.height / 2 - 2));
            int margin = std::max(4, std::max(obj.width, obj.height) * 3 / 20);
            Rect inflated{obj.cx - obj.width / 2 - margin, obj.cy - obj.height / 2 - margin,
                          obj.cx + obj.width - obj.width / 2 + margin,
                          obj.cy + obj.height - obj.height / 2 + margin};
            bool clash = false;
            if (!config.allow_overlap)
                for (const auto& p : placed)
                    if (rect_intersection(p, inflated)) {
                        clash = true;
                        break;
                    }
            if (!clash) {
                placed.push_back(inflated);
                placed_ok = true;
            }
        }
        if (!placed_ok)
            throw std::runtime_error("random_scene_spec: could not place object " +
                                     std::to_string(i));
        for (int c = 0; c < 3; ++c)
            obj.color[static_cast<std::size_t>(c)] =
                static_cast<std::uint8_t>(rng.uniform_int(30, 225));
        obj.true_saliency = grid[static_cast<std::size_t>(i) % grid.size()];
        spec.objects.push_back(obj);
    }
    if (config.anchor_max_saliency && !spec.objects.empty())
        spec.objects[0].true_saliency = 1.0;
    return spec;
}

ViewingGeometry geometry_for_sigma(double sigma_px) {
    if (sigma_px <= 0)
        throw std::invalid_argument("geometry_for_sigma: sigma must be > 0");
    ViewingGeometry g;
    g.theta_deg = 0.0;
    double angle_deg =
        std::atan(sigma_px * g.h_m_cm / (g.d_v_cm * g.r_v_px)) * 180.0 / std::numbers::pi;
    g.alpha_deg = angle_deg / 2.0;
    g.eta_deg = angle_deg / 2.0;
    return g;
}

SynthBatch synth_batch(std::uint64_t seed, int scene_count, const RandomSceneConfig& config,
                       double target_sigma_px) {
    SynthBatch batch;
    batch.dataset.viewing_geometry = geometry_for_sigma(target_sigma_px);

    for (int s = 0; s < scene_count; ++s) {
        std::string image_id = "img" + zero_pad(s, 4);
        SceneSpec spec = random_scene_spec(derive_seed(seed, 7, static_cast<std::uint64_t>(s)),
                                           config);
        spec.seed = derive_seed(seed, 8, static_cast<std::uint64_t>(s));
        GeneratedScene scene = generate_scene(spec, image_id);
        auto records = simulate_subjects(scene, spec);

        ImageRecord img;
        img.image_id = image_id;
        img.width = spec.width;
        img.height = spec.height;
        img.path = "images/" + image_id + ".png";
        batch.dataset.images.push_back(img);
        for (const auto& m : scene.masks)
            batch.dataset.masks.push_back(m);
        for (auto& r : records)
            batch.dataset.subject_records.push_back(std::move(r));
        batch.image_pixels[image_id] = scene.image;
        batch.true_saliency[image_id] = scene.true_saliency;
        batch.scenes.push_back(std::move(scene));
    }
    return batch;
}

OracleResult oracle_tau_bruteforce(std::span<const double> estimated,
                                   const std::vector<std::vector<double>>& references,
                                   TauMode mode, double tie_eps) {
    const std::size_t n = estimated.size();
    if (n > 12)
        throw std::invalid_argument("oracle_tau_bruteforce: n must be <= 12");
    if (n < 2)
        throw std::invalid_argument("oracle_tau_bruteforce: need at least 2 values");
    std::size_t expected = mode == TauMode::standard ? 1 : 3;
    if (references.size() != expected)
        throw std::invalid_argument("oracle_tau_bruteforce: wrong reference count");
    for (const auto& r : references)
        if (r.size() != n)
            throw std::invalid_argument("oracle_tau_bruteforce: length mismatch");

    auto d_gt = [&](double a, double b) { return a - b > tie_eps ? 1.0 : 0.0; };
    auto d_lt = [&](double a, double b) { return b - a > tie_eps ? 1.0 : 0.0; };
    auto d_eq = [&](double a, double b) { return std::abs(a - b) <= tie_eps ? 1.0 : 0.0; };
    auto d_ne = [&](double a, double b) { return std::abs(a - b) > tie_eps ? 1.0 : 0.0; };
    auto d_le = [&](double a, double b) { return a - b <= tie_eps ? 1.0 : 0.0; };
    auto d_ge = [&](double a, double b) { return b - a <= tie_eps ? 1.0 : 0.0; };

    double c_sum = 0.0;
    double d_sum = 0.0;
    double t_est = 0.0;
    double t_ref = 0.0;

    // Ordered double loop over all (x, y), literal indicator evaluation;
    // the uniform factor 2 vs. unordered pairs cancels in the ratio exactly.
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y) {
            if (x == y)
                continue;
            double e_gt = d_gt(estimated[x], estimated[y]);
            double e_lt = d_lt(estimated[x], estimated[y]);
            double e_eq = d_eq(estimated[x], estimated[y]);
            if (mode == TauMode::standard) {
                const auto& rho = references[0];
                double g_gt = d_gt(rho[x], rho[y]);
                double g_lt = d_lt(rho[x], rho[y]);
                double g_eq = d_eq(rho[x], rho[y]);
                double g_ne = d_ne(rho[x], rho[y]);
                c_sum += g_gt * e_gt + g_lt * e_lt;
                d_sum += g_lt * e_gt + g_gt * e_lt;
                t_ref += g_eq * (e_gt + e_lt);
                t_est += g_ne * e_eq;
            } else {
                double gs_gt = 0.0;
                double gs_lt = 0.0;
                double gs_ne = 0.0;
                double gi_le = 1.0;
                double gi_ge = 1.0;
                double gi_eq = 1.0;
                for (const auto& rho : references) {
                    gs_gt = std::max(gs_gt, d_gt(rho[x], rho[y]));
                    gs_lt = std::max(gs_lt, d_lt(rho[x], rho[y]));
                    gs_ne = std::max(gs_ne, d_ne(rho[x], rho[y]));
                    gi_le = std::min(gi_le, d_le(rho[x], rho[y]));
                    gi_ge = std::min(gi_ge, d_ge(rho[x], rho[y]));
                    gi_eq = std::min(gi_eq, d_eq(rho[x], rho[y]));
                }
                c_sum += gs_gt * e_gt + gs_lt * e_lt;
                d_sum += gs_lt * gi_le * e_gt + gs_gt * gi_ge * e_lt;
                t_ref += gi_eq * (e_gt + e_lt);
                t_est += gs_ne * e_eq;
            }
        }
    }

    OracleResult result;
    result.metric = mode == TauMode::standard ? "kendall_tau_b" : "kendall_tau_combined";
    result.method = "literal ordered-pair indicator evaluation";
    double denom = std::sqrt((c_sum + d_sum + t_est) * (c_sum + d_sum + t_ref));
    if (denom == 0.0)
        result.value = std::nullopt;
    else
        result.value = (c_sum - d_sum) / denom;
    return result;
}

OracleResult oracle_auprc_exact(const MapRaster& s, const MaskRaster& gt_binary) {
    if (s.width() > 64 || s.height() > 64)
        throw std::invalid_argument("oracle_auprc_exact: image must be at most 64x64");
    if (!s.same_size(gt_binary))
        throw std::invalid_argument("oracle_auprc_exact: dimension mismatch");

    std::set<double> distinct(s.pixels().begin(), s.pixels().end());
    std::vector<double> thresholds(distinct.begin(), distinct.end());
    thresholds.push_back(
        std::nextafter(thresholds.back(), std::numeric_limits<double>::infinity()));

    std::int64_t positives = 0;
    for (auto v : gt_binary.pixels())
        positives += (v != 0);
    if (positives == 0)
        throw std::invalid_argument("oracle_auprc_exact: no positive pixels");

    struct Point {
        double recall;
        double precision;
    };
    std::vector<Point> points;
    double anchor_precision = 1.0;
    for (double t : thresholds) {
        std::int64_t tp = 0;
        std::int64_t fp = 0;
        std::int64_t fn = 0;
        auto sp = s.pixels();
        auto gp = gt_binary.pixels();
        for (std::size_t i = 0; i < sp.size(); ++i) {
            bool pred = sp[i] >= t;
            bool pos = gp[i] != 0;
            tp += (pred && pos);
            fp += (pred && !pos);
            fn += (!pred && pos);
        }
        double precision = (tp + fp) == 0
                               ? 1.0
                               : static_cast<double>(tp) / static_cast<double>(tp + fp);
        double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        if (tp + fp > 0)
            anchor_precision = precision;
        points.push_back(Point{recall, precision});
    }
    points.push_back(Point{0.0, anchor_precision});
    std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
        if (a.recall != b.recall)
            return a.recall < b.recall;
        return a.precision > b.precision;
    });

    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].recall - points[i - 1].recall) *
                (points[i].precision + points[i - 1].precision) / 2.0;

    OracleResult result;
    result.metric = "auprc_exact";
    result.method = "full confusion-matrix scan at every distinct threshold";
    result.value = area;
    return result;
}

} // namespace salmon
