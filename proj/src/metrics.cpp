#include "salmonkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "salmonkit/parallel.hpp"

namespace salmon {

double object_mean_saliency(const MapRaster& s, const ObjectMask& mask) {
    if (!s.same_size(mask.mask))
        throw std::invalid_argument("object_mean_saliency: dimension mismatch");
    double sum = 0.0;
    std::int64_t n = 0;
    const Rect& r = mask.tight_rect;
    for (int y = r.y0; y < r.y1; ++y) {
        auto mrow = mask.mask.row(y);
        auto srow = s.row(y);
        for (int x = r.x0; x < r.x1; ++x) {
            if (mrow[static_cast<std::size_t>(x)] != 0) {
                sum += srow[static_cast<std::size_t>(x)];
                ++n;
            }
        }
    }
    if (n == 0)
        throw std::invalid_argument("object_mean_saliency: empty mask");
    return sum / static_cast<double>(n);
}

double mae_per_object(double estimated, double ground_truth) {
    return std::abs(estimated - ground_truth);
}

double mean_aggregate(std::span<const double> values) {
    if (values.empty())
        throw std::invalid_argument("mean_aggregate: empty scope");
    double sum = 0.0;
    for (double v : values)
        sum += v;
    return sum / static_cast<double>(values.size());
}

double mae_combined_per_object(const std::optional<double>& et, const std::optional<double>& pc,
                               const std::optional<double>& rd, bool allow_partial) {
    double best = std::numeric_limits<double>::infinity();
    int present = 0;
    for (const auto& v : {et, pc, rd}) {
        if (v) {
            best = std::min(best, *v);
            ++present;
        }
    }
    if (present == 0)
        throw std::invalid_argument("mae_combined_per_object: no modality value present");
    if (present < 3 && !allow_partial)
        throw std::invalid_argument("mae_combined_per_object: modality missing");
    return best;
}

std::vector<LevelMap> gt_level_binarize(const MultiLevelGroundTruth& gt) {
    std::vector<LevelMap> out;
    out.reserve(gt.levels.size());
    for (double level : gt.levels) {
        LevelMap lm;
        lm.level = level;
        lm.raster = MaskRaster(gt.map.width(), gt.map.height(), 0);
        for (int y = 0; y < gt.map.height(); ++y) {
            auto grow = gt.map.row(y);
            auto orow = lm.raster.row(y);
            for (int x = 0; x < gt.map.width(); ++x)
                if (grow[static_cast<std::size_t>(x)] >= level)
                    orow[static_cast<std::size_t>(x)] = 1;
        }
        out.push_back(std::move(lm));
    }
    return out;
}

namespace {

// Shared PR-sweep core: counts use the predicate (value >= t) realized as a
// lower_bound over the sorted pixel values, which matches a literal full
// scan exactly.
PRCurve pr_from_sorted(const std::vector<double>& all_sorted,
                       const std::vector<double>& pos_sorted,
                       std::vector<double> thresholds) {
    const auto total_pos = static_cast<double>(pos_sorted.size());
    PRCurve curve;
    curve.thresholds = std::move(thresholds);
    curve.points.reserve(curve.thresholds.size() + 1);

    double anchor_precision = 1.0;
    for (double t : curve.thresholds) {
        auto pred = static_cast<double>(
            all_sorted.end() - std::lower_bound(all_sorted.begin(), all_sorted.end(), t));
        auto tp = static_cast<double>(
            pos_sorted.end() - std::lower_bound(pos_sorted.begin(), pos_sorted.end(), t));
        double precision = pred == 0.0 ? 1.0 : tp / pred;
        double recall = tp / total_pos;
        if (pred > 0.0)
            anchor_precision = precision; // thresholds ascend: last non-empty wins
        curve.points.push_back(PRPoint{recall, precision});
    }
    curve.points.push_back(PRPoint{0.0, anchor_precision});

    std::sort(curve.points.begin(), curve.points.end(), [](const PRPoint& a, const PRPoint& b) {
        if (a.recall != b.recall)
            return a.recall < b.recall;
        return a.precision > b.precision;
    });
    return curve;
}

} // namespace

PRCurve precision_recall_curve(const MapRaster& s, const MaskRaster& gt_binary,
                               ThresholdMode mode) {
    if (!s.same_size(gt_binary))
        throw std::invalid_argument("precision_recall_curve: dimension mismatch");

    std::vector<double> all_vals;
    std::vector<double> pos_vals;
    all_vals.reserve(s.pixel_count());
    auto sp = s.pixels();
    auto gp = gt_binary.pixels();
    for (std::size_t i = 0; i < sp.size(); ++i) {
        all_vals.push_back(sp[i]);
        if (gp[i] != 0)
            pos_vals.push_back(sp[i]);
    }
    if (pos_vals.empty())
        throw std::invalid_argument("precision_recall_curve: ground truth has no positive pixel");

    std::sort(all_vals.begin(), all_vals.end());
    std::sort(pos_vals.begin(), pos_vals.end());
    double max_v = all_vals.back();

    std::vector<double> thresholds;
    if (mode == ThresholdMode::uniform256) {
        thresholds.reserve(257);
        for (int k = 0; k < 256; ++k)
            thresholds.push_back(k / 255.0);
    } else {
        thresholds.reserve(all_vals.size() + 1);
        for (double v : all_vals)
            if (thresholds.empty() || v != thresholds.back())
                thresholds.push_back(v);
    }
    thresholds.push_back(std::nextafter(max_v, std::numeric_limits<double>::infinity()));

    return pr_from_sorted(all_vals, pos_vals, std::move(thresholds));
}

double auprc(const PRCurve& curve) {
    if (curve.points.size() < 2)
        throw std::invalid_argument("auprc: need at least 2 points");
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.recall - a.recall) * (b.precision + a.precision) / 2.0;
    }
    return area;
}

std::optional<double> kendall_tau_b(std::span<const double> estimated,
                                    std::span<const double> reference, double tie_eps) {
    if (estimated.size() != reference.size())
        throw std::invalid_argument("kendall_tau_b: length mismatch");
    if (estimated.size() < 2)
        throw std::invalid_argument("kendall_tau_b: need at least 2 values");

    double concordant = 0.0;
    double discordant = 0.0;
    double ties_est_only = 0.0;
    double ties_ref_only = 0.0;
    const std::size_t n = estimated.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            Ord e = ord_eps(estimated[i], estimated[j], tie_eps);
            Ord r = ord_eps(reference[i], reference[j], tie_eps);
            if (e == Ord::eq && r == Ord::eq)
                continue;
            if (e == Ord::eq)
                ties_est_only += 1.0;
            else if (r == Ord::eq)
                ties_ref_only += 1.0;
            else if (e == r)
                concordant += 1.0;
            else
                discordant += 1.0;
        }
    }
    double denom = std::sqrt((concordant + discordant + ties_est_only) *
                             (concordant + discordant + ties_ref_only));
    if (denom == 0.0)
        return std::nullopt;
    return (concordant - discordant) / denom;
}

std::optional<double> kendall_tau_combined(std::span<const double> estimated,
                                           std::span<const double> rho_et,
                                           std::span<const double> rho_pc,
                                           std::span<const double> rho_rd, double tie_eps) {
    const std::size_t n = estimated.size();
    if (rho_et.size() != n || rho_pc.size() != n || rho_rd.size() != n)
        throw std::invalid_argument("kendall_tau_combined: length mismatch");
    if (n < 2)
        throw std::invalid_argument("kendall_tau_combined: need at least 2 values");

    double concordant = 0.0;
    double discordant = 0.0;
    double ties_est = 0.0; // estimate tied, some modality not tied
    double ties_ref = 0.0; // estimate strict, every modality tied
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            Ord e = ord_eps(estimated[i], estimated[j], tie_eps);
            Ord g[3] = {ord_eps(rho_et[i], rho_et[j], tie_eps),
                        ord_eps(rho_pc[i], rho_pc[j], tie_eps),
                        ord_eps(rho_rd[i], rho_rd[j], tie_eps)};
            bool any_gt = g[0] == Ord::gt || g[1] == Ord::gt || g[2] == Ord::gt;
            bool any_lt = g[0] == Ord::lt || g[1] == Ord::lt || g[2] == Ord::lt;
            bool all_eq = !any_gt && !any_lt;
            if (e == Ord::eq) {
                if (!all_eq)
                    ties_est += 1.0;
            } else if ((e == Ord::gt && any_gt) || (e == Ord::lt && any_lt)) {
                concordant += 1.0; // agrees with at least one modality
            } else if (all_eq) {
                ties_ref += 1.0;
            } else {
                discordant += 1.0; // some modality strictly disagrees, none agrees
            }
        }
    }
    double denom =
        std::sqrt((concordant + discordant + ties_est) * (concordant + discordant + ties_ref));
    if (denom == 0.0)
        return std::nullopt;
    return (concordant - discordant) / denom;
}

bool EvalConfig::wants(Modality m) const {
    return std::find(modalities.begin(), modalities.end(), m) != modalities.end();
}

namespace {

struct ImageWork {
    const ImageRecord* image = nullptr;
    const SaliencyMap* map = nullptr;
    std::vector<const ObjectMask*> masks;
    std::map<Modality, const MultiLevelGroundTruth*> gts;
};

struct ImageResult {
    std::vector<ObjectMetrics> objects;
    std::vector<LevelAuprcRecord> levels;
    // per rank (descending level), per requested modality index: A value
    std::vector<std::map<std::string, double>> aligned_auprc;
    bool truncated = false;
    double baseline_auprc = 0.0;
    std::vector<double> estimated;                      // per object
    std::map<std::string, std::vector<double>> gt_vals; // tag -> per object
};

ImageResult evaluate_image(const ImageWork& work, const EvalConfig& config) {
    ImageResult res;
    const auto& s = work.map->values;

    for (const auto* mask : work.masks) {
        ObjectMetrics om;
        om.image_id = work.image->image_id;
        om.object_id = mask->object_id;
        om.estimated = object_mean_saliency(s, *mask);

        std::optional<double> mae_et;
        std::optional<double> mae_pc;
        std::optional<double> mae_rd;
        for (Modality m : config.modalities) {
            const auto* gt = work.gts.at(m);
            auto it = std::find_if(gt->object_values.begin(), gt->object_values.end(),
                                   [&](const auto& kv) { return kv.first == mask->object_id; });
            double sv = it->second;
            double err = mae_per_object(om.estimated, sv);
            om.gt[modality_tag(m)] = sv;
            om.mae[modality_tag(m)] = err;
            if (m == Modality::eye_tracking)
                mae_et = err;
            else if (m == Modality::point_click)
                mae_pc = err;
            else
                mae_rd = err;
            res.gt_vals[modality_tag(m)].push_back(sv);
        }
        if (config.all_three() || config.allow_missing_modality)
            om.mae_combined = mae_combined_per_object(mae_et, mae_pc, mae_rd,
                                                      config.allow_missing_modality);
        res.estimated.push_back(om.estimated);
        res.objects.push_back(std::move(om));
    }

    // Per-level AuPRC, highest level first for the rank alignment.
    std::size_t min_levels = std::numeric_limits<std::size_t>::max();
    std::size_t max_levels = 0;
    std::map<std::string, std::vector<double>> per_gamma_desc;
    for (Modality m : config.modalities) {
        const auto* gt = work.gts.at(m);
        auto level_maps = gt_level_binarize(*gt);
        std::vector<double> areas_desc;
        for (std::size_t li = level_maps.size(); li-- > 0;) {
            const auto& lm = level_maps[li];
            double area = auprc(precision_recall_curve(s, lm.raster, config.thresholds));
            LevelAuprcRecord rec;
            rec.image_id = work.image->image_id;
            rec.gamma = m;
            rec.rank = static_cast<int>(level_maps.size() - 1 - li);
            rec.level = lm.level;
            rec.auprc = area;
            res.levels.push_back(rec);
            areas_desc.push_back(area);
        }
        min_levels = std::min(min_levels, areas_desc.size());
        max_levels = std::max(max_levels, areas_desc.size());
        per_gamma_desc[modality_tag(m)] = std::move(areas_desc);
    }
    if (config.all_three() && min_levels != std::numeric_limits<std::size_t>::max()) {
        res.truncated = min_levels != max_levels;
        res.aligned_auprc.resize(min_levels);
        for (std::size_t r = 0; r < min_levels; ++r)
            for (const auto& [tag, areas] : per_gamma_desc)
                res.aligned_auprc[r][tag] = areas[r];
    }

    auto union_mask = binarize_equal_salience(work.masks, s.width(), s.height());
    res.baseline_auprc = auprc(precision_recall_curve(s, union_mask, config.thresholds));
    return res;
}

AggregateBlock aggregate_results(const std::vector<const ImageResult*>& results,
                                 const EvalConfig& config) {
    AggregateBlock block;

    std::map<std::string, std::vector<double>> mae_by_tag;
    std::vector<double> mae_combined;
    std::map<std::string, std::vector<double>> auprc_by_tag;
    std::vector<double> auprc_combined;
    std::vector<double> baseline;
    std::vector<double> estimated;
    std::map<std::string, std::vector<double>> gt_by_tag;

    for (const auto* res : results) {
        for (const auto& om : res->objects) {
            for (const auto& [tag, err] : om.mae)
                mae_by_tag[tag].push_back(err);
            if (om.mae_combined)
                mae_combined.push_back(*om.mae_combined);
        }
        for (const auto& lr : res->levels)
            auprc_by_tag[modality_tag(lr.gamma)].push_back(lr.auprc);
        for (const auto& rank_vals : res->aligned_auprc) {
            double best = 0.0;
            for (const auto& [tag, v] : rank_vals)
                best = std::max(best, v);
            auprc_combined.push_back(best);
        }
        baseline.push_back(res->baseline_auprc);
        estimated.insert(estimated.end(), res->estimated.begin(), res->estimated.end());
        for (const auto& [tag, vals] : res->gt_vals)
            gt_by_tag[tag].insert(gt_by_tag[tag].end(), vals.begin(), vals.end());
    }

    block.object_count = static_cast<int>(estimated.size());
    for (const auto& [tag, vals] : mae_by_tag)
        if (!vals.empty())
            block.mae[tag] = mean_aggregate(vals);
    if (!mae_combined.empty())
        block.mae_combined = mean_aggregate(mae_combined);
    for (const auto& [tag, vals] : auprc_by_tag)
        if (!vals.empty())
            block.auprc[tag] = mean_aggregate(vals);
    if (!auprc_combined.empty())
        block.auprc_combined = mean_aggregate(auprc_combined);
    if (!baseline.empty())
        block.baseline_equal_salience_auprc = mean_aggregate(baseline);

    if (estimated.size() >= 2) {
        for (const auto& [tag, vals] : gt_by_tag)
            block.tau[tag] = kendall_tau_b(estimated, vals, config.tie_eps);
        if (config.all_three())
            block.tau_combined =
                kendall_tau_combined(estimated, gt_by_tag.at("et"), gt_by_tag.at("pc"),
                                     gt_by_tag.at("rd"), config.tie_eps);
    }
    return block;
}

} // namespace

MetricReport evaluate(const Dataset& ds, const std::vector<MultiLevelGroundTruth>& gts,
                      const std::vector<SaliencyMap>& maps, const EvalConfig& config) {
    MetricReport report;
    report.config = config;

    std::map<std::pair<std::string, Modality>, const MultiLevelGroundTruth*> gt_index;
    for (const auto& gt : gts)
        gt_index[{gt.image_id, gt.gamma}] = &gt;
    std::map<std::string, const SaliencyMap*> map_index;
    for (const auto& m : maps)
        map_index[m.image_id] = &m;

    std::vector<ImageWork> work;
    for (const auto& img : ds.images) {
        auto masks = ds.masks_for(img.image_id);
        if (masks.empty())
            continue;
        auto mit = map_index.find(img.image_id);
        if (mit == map_index.end()) {
            report.missing_maps.push_back(img.image_id);
            continue;
        }
        if (mit->second->values.width() != img.width ||
            mit->second->values.height() != img.height)
            throw std::invalid_argument("evaluate: saliency map dimensions mismatch for image '" +
                                        img.image_id + "'");
        for (double v : mit->second->values.pixels())
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("evaluate: saliency values outside [0,1] for image '" +
                                            img.image_id + "'");

        ImageWork w;
        w.image = &img;
        w.map = mit->second;
        w.masks = std::move(masks);
        bool gt_ok = true;
        for (Modality m : config.modalities) {
            auto git = gt_index.find({img.image_id, m});
            if (git == gt_index.end()) {
                gt_ok = false;
                break;
            }
            const auto* gt = git->second;
            for (const auto* mask : w.masks) {
                bool found = std::any_of(gt->object_values.begin(), gt->object_values.end(),
                                         [&](const auto& kv) {
                                             return kv.first == mask->object_id;
                                         });
                if (!found) {
                    gt_ok = false;
                    break;
                }
            }
            if (!gt_ok)
                break;
            w.gts[m] = gt;
        }
        if (!gt_ok) {
            report.missing_gt.push_back(img.image_id);
            continue;
        }
        work.push_back(std::move(w));
    }

    std::vector<ImageResult> results(work.size());
    parallel_for(config.workers, work.size(),
                 [&](std::size_t i) { results[i] = evaluate_image(work[i], config); });

    std::vector<const ImageResult*> all;
    all.reserve(results.size());
    for (const auto& r : results) {
        all.push_back(&r);
        report.level_alignment_truncated += r.truncated ? 1 : 0;
    }

    for (std::size_t i = 0; i < results.size(); ++i) {
        report.per_object.insert(report.per_object.end(), results[i].objects.begin(),
                                 results[i].objects.end());
        report.per_level.insert(report.per_level.end(), results[i].levels.begin(),
                                results[i].levels.end());
    }

    if (!all.empty())
        report.dataset = aggregate_results(all, config);
    if (config.scope == Scope::image) {
        for (std::size_t i = 0; i < results.size(); ++i) {
            ImageAggregates ia;
            ia.image_id = work[i].image->image_id;
            ia.block = aggregate_results({&results[i]}, config);
            report.per_image.push_back(std::move(ia));
        }
    }

    if (!config.all_three())
        report.notes.push_back("combined measures require all three modalities");
    if (report.level_alignment_truncated > 0)
        report.notes.push_back("level lists truncated for cross-modality alignment on " +
                               std::to_string(report.level_alignment_truncated) + " image(s)");
    return report;
}

} // namespace salmon
