#include "salmonkit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "salmonkit/image_io.hpp"
#include "salmonkit/parallel.hpp"

namespace salmon {

namespace {

constexpr double kSrgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};
// White point = matrix row sums, so pure white maps to L=100, a=b=0 exactly.
constexpr double kWhiteX = kSrgbToXyz[0][0] + kSrgbToXyz[0][1] + kSrgbToXyz[0][2];
constexpr double kWhiteY = kSrgbToXyz[1][0] + kSrgbToXyz[1][1] + kSrgbToXyz[1][2];
constexpr double kWhiteZ = kSrgbToXyz[2][0] + kSrgbToXyz[2][1] + kSrgbToXyz[2][2];

double srgb_linearize(std::uint8_t v) {
    double c = v / 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
    constexpr double cutoff = (6.0 / 29.0) * (6.0 / 29.0) * (6.0 / 29.0);
    constexpr double slope = (29.0 / 6.0) * (29.0 / 6.0) / 3.0;
    return t > cutoff ? std::cbrt(t) : slope * t + 4.0 / 29.0;
}

} // namespace

Lab rgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    double r = srgb_linearize(r8);
    double g = srgb_linearize(g8);
    double b = srgb_linearize(b8);
    double x = kSrgbToXyz[0][0] * r + kSrgbToXyz[0][1] * g + kSrgbToXyz[0][2] * b;
    double y = kSrgbToXyz[1][0] * r + kSrgbToXyz[1][1] * g + kSrgbToXyz[1][2] * b;
    double z = kSrgbToXyz[2][0] * r + kSrgbToXyz[2][1] * g + kSrgbToXyz[2][2] * b;
    double fx = lab_f(x / kWhiteX);
    double fy = lab_f(y / kWhiteY);
    double fz = lab_f(z / kWhiteZ);
    Lab lab;
    lab.l = 116.0 * fy - 16.0;
    lab.a = 500.0 * (fx - fy);
    lab.b = 200.0 * (fy - fz);
    return lab;
}

LabHistogram::LabHistogram(int bins_per_axis) : bins_per_axis_(bins_per_axis) {
    if (bins_per_axis < 1)
        throw std::invalid_argument("LabHistogram: bins_per_axis must be >= 1");
    counts_.assign(static_cast<std::size_t>(bins_per_axis) * bins_per_axis * bins_per_axis, 0);
}

int LabHistogram::bin_index(const Lab& color) const {
    auto clamp_bin = [this](double v, double lo, double hi) {
        double t = (v - lo) / (hi - lo);
        int b = static_cast<int>(t * bins_per_axis_);
        return std::clamp(b, 0, bins_per_axis_ - 1);
    };
    int bl = clamp_bin(color.l, 0.0, 100.0);
    int ba = clamp_bin(color.a, -128.0, 128.0);
    int bb = clamp_bin(color.b, -128.0, 128.0);
    return (bl * bins_per_axis_ + ba) * bins_per_axis_ + bb;
}

void LabHistogram::add(const Lab& color, std::uint64_t count) {
    counts_[static_cast<std::size_t>(bin_index(color))] += count;
    total_ += count;
}

double LabHistogram::entropy_bits() const {
    if (total_ == 0)
        return 0.0;
    double h = 0.0;
    double total = static_cast<double>(total_);
    for (std::uint64_t c : counts_) {
        if (c == 0)
            continue;
        double p = static_cast<double>(c) / total;
        h -= p * std::log2(p);
    }
    return h;
}

LabHistogram lab_histogram(const ImageU8& image, const MaskRaster& mask, int bins_per_axis) {
    if (image.width != mask.width() || image.height != mask.height())
        throw std::invalid_argument("lab_histogram: dimension mismatch");
    LabHistogram hist(bins_per_axis);
    for (int y = 0; y < mask.height(); ++y) {
        auto mrow = mask.row(y);
        for (int x = 0; x < mask.width(); ++x) {
            if (mrow[static_cast<std::size_t>(x)] == 0)
                continue;
            const std::uint8_t* px = image.at(x, y);
            hist.add(image.channels == 1 ? rgb_to_lab(px[0], px[0], px[0])
                                         : rgb_to_lab(px[0], px[1], px[2]));
        }
    }
    return hist;
}

double color_entropy(const ImageU8& image, const MaskRaster& mask, int bins_per_axis) {
    LabHistogram hist = lab_histogram(image, mask, bins_per_axis);
    if (hist.total() == 0)
        throw std::invalid_argument("color_entropy: empty mask");
    return hist.entropy_bits();
}

Lab mean_color(const ImageU8& image, const MaskRaster& mask) {
    if (image.width != mask.width() || image.height != mask.height())
        throw std::invalid_argument("mean_color: dimension mismatch");
    Lab sum;
    std::int64_t n = 0;
    for (int y = 0; y < mask.height(); ++y) {
        auto mrow = mask.row(y);
        for (int x = 0; x < mask.width(); ++x) {
            if (mrow[static_cast<std::size_t>(x)] == 0)
                continue;
            const std::uint8_t* px = image.at(x, y);
            Lab lab = image.channels == 1 ? rgb_to_lab(px[0], px[0], px[0])
                                          : rgb_to_lab(px[0], px[1], px[2]);
            sum.l += lab.l;
            sum.a += lab.a;
            sum.b += lab.b;
            ++n;
        }
    }
    if (n == 0)
        throw std::invalid_argument("mean_color: empty mask");
    return Lab{sum.l / n, sum.a / n, sum.b / n};
}

DatasetMaxima dataset_maxima(const std::vector<const ObjectMask*>& masks) {
    DatasetMaxima m;
    for (const auto* mask : masks) {
        m.max_width = std::max(m.max_width, static_cast<double>(mask->tight_rect.width()));
        m.max_height = std::max(m.max_height, static_cast<double>(mask->tight_rect.height()));
        m.max_area = std::max(m.max_area, static_cast<double>(foreground_area(mask->mask)));
    }
    return m;
}

ObjectGeometry geometry_stats(const ObjectMask& mask, int image_width, int image_height,
                              const DatasetMaxima& maxima) {
    double sum_x = 0.0;
    double sum_y = 0.0;
    std::int64_t n = 0;
    for (int y = 0; y < mask.mask.height(); ++y) {
        auto mrow = mask.mask.row(y);
        for (int x = 0; x < mask.mask.width(); ++x) {
            if (mrow[static_cast<std::size_t>(x)] != 0) {
                sum_x += x + 0.5;
                sum_y += y + 0.5;
                ++n;
            }
        }
    }
    if (n == 0)
        throw std::invalid_argument("geometry_stats: empty mask");

    double cx = sum_x / static_cast<double>(n);
    double cy = sum_y / static_cast<double>(n);
    double dx = cx - image_width / 2.0;
    double dy = cy - image_height / 2.0;
    double diagonal = std::hypot(static_cast<double>(image_width),
                                 static_cast<double>(image_height));

    ObjectGeometry g;
    g.norm_center_dist = std::hypot(dx, dy) / diagonal;
    double w = mask.tight_rect.width();
    double h = mask.tight_rect.height();
    g.width_norm = maxima.max_width > 0 ? w / maxima.max_width : 0.0;
    g.height_norm = maxima.max_height > 0 ? h / maxima.max_height : 0.0;
    g.area_norm = maxima.max_area > 0 ? static_cast<double>(n) / maxima.max_area : 0.0;
    g.aspect_ratio = w / h;
    return g;
}

int default_ring_radius(std::int64_t object_area) {
    return std::max(5, static_cast<int>(std::lround(0.1 * std::sqrt(
                                             static_cast<double>(object_area)))));
}

namespace {

// 1-D squared Euclidean distance transform (Felzenszwalb & Huttenlocher).
void edt_1d(const double* f, int n, double* d, int* v, double* z) {
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = 0.0;
        for (;;) {
            s = ((f[q] + static_cast<double>(q) * q) -
                 (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q)
            ++k;
        double diff = q - v[k];
        d[q] = diff * diff + f[v[k]];
    }
}

// Squared distance to the nearest mask foreground pixel, computed on a
// window; `inf` where unreachable.
std::vector<double> edt_window(const MaskRaster& mask, const Rect& window) {
    const int w = window.width();
    const int h = window.height();
    constexpr double inf = 1e18;
    std::vector<double> grid(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            grid[static_cast<std::size_t>(y) * w + x] =
                mask(window.x0 + x, window.y0 + y) != 0 ? 0.0 : inf;

    const std::size_t buf = static_cast<std::size_t>(std::max(w, h));
    std::vector<double> f(buf);
    std::vector<double> d(buf);
    std::vector<int> v(buf);
    std::vector<double> z(buf + 1);

    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y)
            f[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y) * w + x];
        edt_1d(f.data(), h, d.data(), v.data(), z.data());
        for (int y = 0; y < h; ++y)
            grid[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(y)];
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            f[static_cast<std::size_t>(x)] = grid[static_cast<std::size_t>(y) * w + x];
        edt_1d(f.data(), w, d.data(), v.data(), z.data());
        for (int x = 0; x < w; ++x)
            grid[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(x)];
    }
    return grid;
}

} // namespace

NeighborhoodMasks neighborhood_masks(const ObjectMask& mask,
                                     const std::vector<const ObjectMask*>& all_masks_in_image,
                                     int ring_radius, bool global_excludes_others) {
    if (ring_radius < 1)
        throw std::invalid_argument("neighborhood_masks: ring_radius must be >= 1");
    const int w = mask.mask.width();
    const int h = mask.mask.height();

    NeighborhoodMasks out;
    out.local = MaskRaster(w, h, 0);
    out.global = MaskRaster(w, h, 0);

    Rect window{std::max(0, mask.tight_rect.x0 - ring_radius),
                std::max(0, mask.tight_rect.y0 - ring_radius),
                std::min(w, mask.tight_rect.x1 + ring_radius),
                std::min(h, mask.tight_rect.y1 + ring_radius)};
    auto dist2 = edt_window(mask.mask, window);
    const double r2 = static_cast<double>(ring_radius) * ring_radius;

    auto in_any_object = [&](int x, int y) {
        for (const auto* m : all_masks_in_image)
            if (m->mask(x, y) != 0)
                return true;
        return false;
    };

    for (int y = window.y0; y < window.y1; ++y) {
        for (int x = window.x0; x < window.x1; ++x) {
            double d2 = dist2[static_cast<std::size_t>(y - window.y0) * window.width() +
                              (x - window.x0)];
            if (d2 > 0.0 && d2 <= r2 && !in_any_object(x, y))
                out.local(x, y) = 1;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.mask(x, y) != 0)
                continue;
            if (global_excludes_others && in_any_object(x, y))
                continue;
            out.global(x, y) = 1;
        }
    }
    return out;
}

double chi2_contrast(const LabHistogram& h1, const LabHistogram& h2) {
    if (h1.total() == 0 || h2.total() == 0)
        throw std::invalid_argument("chi2_contrast: zero-total histogram");
    if (h1.bin_count() != h2.bin_count())
        throw std::invalid_argument("chi2_contrast: bin layout mismatch");
    constexpr double eps = 1e-12;
    double t1 = static_cast<double>(h1.total());
    double t2 = static_cast<double>(h2.total());
    auto c1 = h1.counts();
    auto c2 = h2.counts();
    double sum = 0.0;
    for (std::size_t i = 0; i < c1.size(); ++i) {
        double p = static_cast<double>(c1[i]) / t1;
        double q = static_cast<double>(c2[i]) / t2;
        if (p == 0.0 && q == 0.0)
            continue;
        double diff = p - q;
        sum += diff * diff / (p + q + eps);
    }
    return 0.5 * sum;
}

GammaFitResult gamma_fit(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        throw std::invalid_argument("gamma_fit: length mismatch");
    if (xs.size() < 3)
        throw std::invalid_argument("gamma_fit: need at least 3 points");
    bool all_equal = std::all_of(xs.begin(), xs.end(), [&](double v) { return v == xs[0]; });
    if (all_equal)
        throw std::invalid_argument("gamma_fit: xs are all equal");

    auto sse = [&](double g) {
        double s = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double r = ys[i] - std::pow(xs[i], g);
            s += r * r;
        }
        return s;
    };

    // Coarse log-spaced scan over (0,16], then golden-section refine.
    constexpr int kScan = 128;
    constexpr double lo_g = 1e-3;
    constexpr double hi_g = 16.0;
    double best_g = 1.0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kScan; ++i) {
        double g = lo_g * std::pow(hi_g / lo_g, static_cast<double>(i) / kScan);
        double v = sse(g);
        if (v < best_v) {
            best_v = v;
            best_g = g;
        }
    }
    double a = best_g / std::pow(hi_g / lo_g, 1.0 / kScan);
    double b = best_g * std::pow(hi_g / lo_g, 1.0 / kScan);
    a = std::max(a, lo_g);
    b = std::min(b, hi_g);
    constexpr double invphi = 0.6180339887498949;
    double c = b - (b - a) * invphi;
    double d = a + (b - a) * invphi;
    double fc = sse(c);
    double fd = sse(d);
    while (b - a > 1e-8) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * invphi;
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * invphi;
            fd = sse(d);
        }
    }
    GammaFitResult fit;
    fit.g = (a + b) / 2.0;

    double mean_y = 0.0;
    for (double y : ys)
        mean_y += y;
    mean_y /= static_cast<double>(ys.size());
    double ss_tot = 0.0;
    for (double y : ys)
        ss_tot += (y - mean_y) * (y - mean_y);
    if (ss_tot == 0.0) {
        fit.r_squared = std::nullopt;
    } else {
        fit.r_squared = 1.0 - sse(fit.g) / ss_tot;
    }
    return fit;
}

CharacterizationReport characterize(const Dataset& ds, const CharacterizationConfig& config) {
    CharacterizationReport report;
    report.config = config;

    std::vector<const ObjectMask*> all_masks;
    for (const auto& m : ds.masks)
        all_masks.push_back(&m);
    report.maxima = dataset_maxima(all_masks);

    double sigma = 0.0;
    bool have_sigma = true;
    try {
        sigma = foveal_sigma(ds.viewing_geometry);
    } catch (const std::exception& e) {
        have_sigma = false;
        report.notes.push_back(std::string("viewing geometry invalid, eye-tracking saliencies "
                                           "skipped: ") + e.what());
    }

    struct ImageOut {
        std::vector<ObjectCharacterization> objects;
        std::vector<ObjectSaliency> saliencies;
        std::vector<std::string> notes;
    };
    std::vector<ImageOut> outs(ds.images.size());

    parallel_for(config.workers, ds.images.size(), [&](std::size_t idx) {
        const auto& img = ds.images[idx];
        auto& out = outs[idx];
        auto masks = ds.masks_for(img.image_id);
        if (masks.empty())
            return;

        ImageU8 pixels;
        try {
            pixels = read_image_u8(ds.root / img.path);
        } catch (const std::exception& e) {
            out.notes.push_back("image '" + img.image_id + "' unreadable, objects skipped: " +
                                e.what());
            return;
        }
        if (pixels.width != img.width || pixels.height != img.height) {
            out.notes.push_back("image '" + img.image_id + "' dimensions mismatch, skipped");
            return;
        }

        // Background histogram shared by every object of the image.
        MaskRaster union_mask(img.width, img.height, 0);
        for (const auto* m : masks)
            for (int y = m->tight_rect.y0; y < m->tight_rect.y1; ++y)
                for (int x = m->tight_rect.x0; x < m->tight_rect.x1; ++x)
                    if (m->mask(x, y) != 0)
                        union_mask(x, y) = 1;

        MaskRaster background(img.width, img.height, 0);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                background(x, y) = union_mask(x, y) ? 0 : 1;
        LabHistogram background_hist = lab_histogram(pixels, background, config.bins_per_axis);

        std::vector<ObjectSaliency> sals;
        if (have_sigma)
            sals = compute_object_saliencies(ds, img.image_id, sigma);

        for (std::size_t mi = 0; mi < masks.size(); ++mi) {
            const auto* m = masks[mi];
            ObjectCharacterization oc;
            oc.image_id = img.image_id;
            oc.object_id = m->object_id;

            LabHistogram obj_hist = lab_histogram(pixels, m->mask, config.bins_per_axis);
            oc.entropy_bits = obj_hist.entropy_bits();
            oc.mean_lab = mean_color(pixels, m->mask);
            oc.geometry = geometry_stats(*m, img.width, img.height, report.maxima);

            std::int64_t area = foreground_area(m->mask);
            oc.ring_radius = config.ring_radius ? *config.ring_radius
                                                : default_ring_radius(area);
            auto neigh = neighborhood_masks(*m, masks, oc.ring_radius,
                                            config.global_excludes_others);
            if (foreground_area(neigh.local) > 0) {
                LabHistogram local_hist =
                    lab_histogram(pixels, neigh.local, config.bins_per_axis);
                oc.local_contrast = chi2_contrast(obj_hist, local_hist);
            } else {
                out.notes.push_back("object '" + m->object_id +
                                    "': empty local ring, contrast absent");
            }
            if (config.global_excludes_others) {
                if (background_hist.total() > 0)
                    oc.global_contrast = chi2_contrast(obj_hist, background_hist);
            } else if (foreground_area(neigh.global) > 0) {
                LabHistogram ghist = lab_histogram(pixels, neigh.global, config.bins_per_axis);
                oc.global_contrast = chi2_contrast(obj_hist, ghist);
            }
            if (!oc.global_contrast)
                out.notes.push_back("object '" + m->object_id +
                                    "': empty global background, contrast absent");

            out.objects.push_back(std::move(oc));
            out.saliencies.push_back(have_sigma && !sals.empty()
                                         ? sals[mi]
                                         : ObjectSaliency{m->object_id, std::nullopt,
                                                          std::nullopt, std::nullopt});
        }
    });

    for (auto& out : outs) {
        report.objects.insert(report.objects.end(), out.objects.begin(), out.objects.end());
        report.saliencies.insert(report.saliencies.end(), out.saliencies.begin(),
                                 out.saliencies.end());
        report.notes.insert(report.notes.end(), out.notes.begin(), out.notes.end());
    }

    // Pairwise modality fits over objects carrying both values.
    const std::pair<Modality, Modality> pairs[] = {
        {Modality::eye_tracking, Modality::point_click},
        {Modality::eye_tracking, Modality::rect_draw},
        {Modality::point_click, Modality::rect_draw},
    };
    for (const auto& [mx, my] : pairs) {
        std::vector<double> xs;
        std::vector<double> ys;
        for (const auto& s : report.saliencies) {
            auto vx = s.value(mx);
            auto vy = s.value(my);
            if (vx && vy) {
                xs.push_back(*vx);
                ys.push_back(*vy);
            }
        }
        ModalityGammaFit fit;
        fit.x = modality_tag(mx);
        fit.y = modality_tag(my);
        fit.point_count = static_cast<int>(xs.size());
        if (xs.size() >= 3 && !std::all_of(xs.begin(), xs.end(),
                                           [&](double v) { return v == xs[0]; })) {
            auto res = gamma_fit(xs, ys);
            fit.g = res.g;
            fit.r_squared = res.r_squared;
            report.gamma_fits.push_back(fit);
        } else {
            report.notes.push_back(std::string("gamma fit ") + fit.x + "->" + fit.y +
                                   " skipped: insufficient points");
        }
    }
    return report;
}

} // namespace salmon
