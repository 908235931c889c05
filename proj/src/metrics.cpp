#include "fpvbench/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace fpvbench {

AdeFde ade_fde(std::span<const Vec2> pred, std::span<const Vec2> gt) {
    if (pred.size() != gt.size() || gt.empty()) {
        throw DataError("ade_fde: length mismatch (" + std::to_string(pred.size()) + " vs " +
                        std::to_string(gt.size()) + ")");
    }
    double sum = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) sum += distance(pred[i], gt[i]);
    return {sum / static_cast<double>(gt.size()), distance(pred.back(), gt.back())};
}

double average_precision(std::span<const RankedItem> items, std::size_t num_gt) {
    if (num_gt == 0 || items.empty()) return 0.0;
    std::vector<RankedItem> sorted(items.begin(), items.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const RankedItem& a, const RankedItem& b) { return a.confidence > b.confidence; });
    std::vector<double> recall, precision;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        tp += sorted[i].tp ? 1 : 0;
        if (i + 1 < sorted.size() && sorted[i + 1].confidence == sorted[i].confidence) continue;
        recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
        precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    }
    for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0;
    double prev_recall = 0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

void MetricConfig::validate() const {
    if (!(tau_ade > 0)) throw ConfigError("metrics: tau_ade must be positive");
    if (!(iou_min > 0 && iou_min <= 1)) throw ConfigError("metrics: iou_min must be in (0, 1]");
    if (recall_levels < 1) throw ConfigError("metrics: recall_levels must be >= 1");
    if (!(amotp_penalty >= 0)) throw ConfigError("metrics: amotp_penalty must be >= 0");
}

namespace {

std::vector<Vec2> future_positions(const TruthFuture& f) {
    std::vector<Vec2> out;
    out.reserve(f.future.size());
    for (const auto& p : f.future) out.push_back(p.p);
    return out;
}

}  // namespace

SceneScore score_scene(const Scene& scene, std::span<const PredictionSet> predictions, const MetricConfig& cfg) {
    SceneScore s;
    const auto targets = scene.targets();
    s.num_targets = targets.size();
    std::vector<std::vector<Vec2>> target_paths;
    for (const auto* t : targets) target_paths.push_back(future_positions(*t));

    struct Candidate {
        std::size_t pred;
        std::size_t target;
        double ade;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& p = predictions[i];
        if (p.gt_id) {
            auto it = std::find_if(targets.begin(), targets.end(),
                                   [&](const TruthFuture* t) { return t->agent_id == *p.gt_id; });
            if (it == targets.end()) continue;  // agent leaves before the window ends
            const auto ti = static_cast<std::size_t>(it - targets.begin());
            const MinOverK m = min_over_k(p, target_paths[ti], cfg.independent_min);
            s.errors.push_back(m);
            candidates.push_back({i, ti, m.ade});
        } else {
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& path : target_paths) best = std::max(best, -min_over_k(p, path).ade);
            s.items.push_back({best, false});
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.ade < b.ade; });
    std::vector<char> claimed(targets.size(), 0);
    for (const auto& c : candidates) {
        const bool tp = !claimed[c.target] && c.ade <= cfg.tau_ade;
        if (tp) claimed[c.target] = 1;
        s.items.push_back({-c.ade, tp});
    }
    return s;
}

double trajectory_map(std::span<const SceneScore> scenes) {
    std::vector<RankedItem> items;
    std::size_t num_gt = 0;
    for (const auto& s : scenes) {
        items.insert(items.end(), s.items.begin(), s.items.end());
        num_gt += s.num_targets;
    }
    return average_precision(items, num_gt);
}

double trajectory_map(std::span<const Scene> scenes, std::span<const std::vector<PredictionSet>> predictions,
                      double tau_ade) {
    if (scenes.size() != predictions.size()) throw DataError("trajectory_map: scene/prediction count mismatch");
    MetricConfig cfg;
    cfg.tau_ade = tau_ade;
    std::vector<SceneScore> scores;
    for (std::size_t i = 0; i < scenes.size(); ++i) scores.push_back(score_scene(scenes[i], predictions[i], cfg));
    return trajectory_map(scores);
}

double iou_2d(const PixelRect& a, const PixelRect& b) noexcept {
    const double iw = std::min(a.u_max, b.u_max) - std::max(a.u_min, b.u_min);
    const double ih = std::min(a.v_max, b.v_max) - std::max(a.v_min, b.v_min);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.width() * a.height() + b.width() * b.height() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

double detection_ap(std::span<const ApFrame> frames, double iou_min) {
    struct Ref {
        double score;
        std::size_t frame;
        Eigen::Index det;
    };
    std::vector<Ref> dets;
    std::size_t num_gt = 0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto& fr = frames[f];
        if (fr.iou.rows() != static_cast<Eigen::Index>(fr.scores.size()) ||
            fr.iou.cols() != static_cast<Eigen::Index>(fr.num_gt)) {
            throw DataError("detection_ap: IoU matrix shape mismatch");
        }
        num_gt += fr.num_gt;
        for (std::size_t d = 0; d < fr.scores.size(); ++d) dets.push_back({fr.scores[d], f, static_cast<Eigen::Index>(d)});
    }
    std::stable_sort(dets.begin(), dets.end(), [](const Ref& a, const Ref& b) { return a.score > b.score; });
    std::vector<std::vector<char>> claimed(frames.size());
    for (std::size_t f = 0; f < frames.size(); ++f) claimed[f].assign(frames[f].num_gt, 0);
    std::vector<RankedItem> items;
    items.reserve(dets.size());
    for (const auto& d : dets) {
        const auto& iou = frames[d.frame].iou;
        Eigen::Index best = -1;
        double best_iou = -1;
        for (Eigen::Index g = 0; g < iou.cols(); ++g) {
            if (claimed[d.frame][static_cast<std::size_t>(g)]) continue;
            if (iou(d.det, g) > best_iou) {
                best_iou = iou(d.det, g);
                best = g;
            }
        }
        const bool tp = best >= 0 && best_iou >= iou_min;
        if (tp) claimed[d.frame][static_cast<std::size_t>(best)] = 1;
        items.push_back({d.score, tp});
    }
    return average_precision(items, num_gt);
}

MotCounts& MotCounts::operator+=(const MotCounts& o) noexcept {
    gt += o.gt;
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    ids += o.ids;
    dist_sum += o.dist_sum;
    return *this;
}

MotCounts& MotCounts::operator-=(const MotCounts& o) noexcept {
    gt -= o.gt;
    tp -= o.tp;
    fp -= o.fp;
    fn -= o.fn;
    ids -= o.ids;
    dist_sum -= o.dist_sum;
    return *this;
}

MotCounts clear_mot(const TrackingSequence& seq, double min_score, double iou_min) {
    MotCounts c;
    std::map<AgentId, AgentId> last_match;  // truth id -> track id
    for (const auto& frame : seq) {
        std::vector<const TrackingObject*> tracks;
        for (const auto& t : frame.tracks) {
            if (t.score >= min_score) tracks.push_back(&t);
        }
        const auto& truth = frame.truth;
        c.gt += static_cast<long long>(truth.size());
        Eigen::MatrixXd iou(static_cast<Eigen::Index>(truth.size()), static_cast<Eigen::Index>(tracks.size()));
        for (std::size_t g = 0; g < truth.size(); ++g)
            for (std::size_t t = 0; t < tracks.size(); ++t)
                iou(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(t)) = bev_iou(truth[g].box, tracks[t]->box);

        std::vector<int> match(truth.size(), -1);
        std::vector<char> used(tracks.size(), 0);
        for (std::size_t g = 0; g < truth.size(); ++g) {
            auto it = last_match.find(truth[g].id);
            if (it == last_match.end()) continue;
            for (std::size_t t = 0; t < tracks.size(); ++t) {
                if (tracks[t]->id == it->second && !used[t] &&
                    iou(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(t)) >= iou_min) {
                    match[g] = static_cast<int>(t);
                    used[t] = 1;
                    break;
                }
            }
        }
        std::vector<std::size_t> rows, cols;
        for (std::size_t g = 0; g < truth.size(); ++g)
            if (match[g] < 0) rows.push_back(g);
        for (std::size_t t = 0; t < tracks.size(); ++t)
            if (!used[t]) cols.push_back(t);
        if (!rows.empty() && !cols.empty()) {
            Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                                      static_cast<Eigen::Index>(cols.size()));
            for (std::size_t a = 0; a < rows.size(); ++a)
                for (std::size_t b = 0; b < cols.size(); ++b) {
                    const double v = iou(static_cast<Eigen::Index>(rows[a]), static_cast<Eigen::Index>(cols[b]));
                    if (v >= iou_min) w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
                }
            const auto m = max_weight_assignment(w, AssignmentMethod::kOptimal);
            for (std::size_t a = 0; a < rows.size(); ++a) {
                if (m[a] < 0) continue;
                match[rows[a]] = static_cast<int>(cols[static_cast<std::size_t>(m[a])]);
                used[cols[static_cast<std::size_t>(m[a])]] = 1;
            }
        }
        for (std::size_t g = 0; g < truth.size(); ++g) {
            if (match[g] < 0) {
                ++c.fn;
                continue;
            }
            const TrackingObject& t = *tracks[static_cast<std::size_t>(match[g])];
            ++c.tp;
            c.dist_sum += std::hypot(truth[g].box.cx - t.box.cx, truth[g].box.cy - t.box.cy);
            auto it = last_match.find(truth[g].id);
            if (it != last_match.end() && it->second != t.id) ++c.ids;
            last_match[truth[g].id] = t.id;
        }
        for (std::size_t t = 0; t < tracks.size(); ++t) c.fp += used[t] ? 0 : 1;
    }
    return c;
}

double motar(const MotCounts& c, double recall) noexcept {
    if (c.gt <= 0 || recall <= 0) return 0.0;
    const double p = static_cast<double>(c.gt);
    const double v = 1.0 - (static_cast<double>(c.ids + c.fp + c.fn) - (1.0 - recall) * p) / (recall * p);
    return std::clamp(v, 0.0, 1.0);
}

AmotaResult amota_amotp(std::span<const TrackingSequence> sequences, const MetricConfig& cfg) {
    cfg.validate();
    std::vector<double> thresholds;
    for (const auto& seq : sequences)
        for (const auto& f : seq)
            for (const auto& t : f.tracks) thresholds.push_back(t.score);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    AmotaResult res;
    res.motar.assign(static_cast<std::size_t>(cfg.recall_levels), 0.0);
    if (thresholds.empty()) {
        res.amotp = cfg.amotp_penalty;
        return res;
    }
    const double inf = std::numeric_limits<double>::infinity();
    // Counts change only where a threshold crosses one of the sequence's own
    // scores, so each sequence is evaluated once per distinct score.
    std::vector<MotCounts> delta(thresholds.size());
    for (const auto& seq : sequences) {
        std::vector<double> own;
        for (const auto& f : seq)
            for (const auto& t : f.tracks) own.push_back(t.score);
        std::sort(own.begin(), own.end(), std::greater<>());
        own.erase(std::unique(own.begin(), own.end()), own.end());
        MotCounts prev = clear_mot(seq, inf, cfg.iou_min);
        delta[0] += prev;
        for (double s : own) {
            const auto j = static_cast<std::size_t>(
                std::lower_bound(thresholds.begin(), thresholds.end(), s, std::greater<>()) - thresholds.begin());
            MotCounts cur = clear_mot(seq, s, cfg.iou_min);
            delta[j] += cur;
            delta[j] -= prev;
            prev = cur;
        }
    }
    std::vector<MotCounts> counts(thresholds.size());
    MotCounts run;
    for (std::size_t j = 0; j < thresholds.size(); ++j) {
        run += delta[j];
        counts[j] = run;
    }
    const double gt = static_cast<double>(counts[0].gt);
    double motp_sum = 0;
    for (int l = 1; l <= cfg.recall_levels; ++l) {
        const double r = static_cast<double>(l) / cfg.recall_levels;
        auto it = std::find_if(counts.begin(), counts.end(), [&](const MotCounts& c) {
            return gt > 0 && static_cast<double>(c.tp) / gt >= r - 1e-12;
        });
        if (it == counts.end()) {
            motp_sum += cfg.amotp_penalty;
            continue;
        }
        res.motar[static_cast<std::size_t>(l - 1)] = motar(*it, r);
        motp_sum += it->tp > 0 ? it->dist_sum / static_cast<double>(it->tp) : cfg.amotp_penalty;
    }
    res.amota = std::accumulate(res.motar.begin(), res.motar.end(), 0.0) / cfg.recall_levels;
    res.amotp = motp_sum / cfg.recall_levels;
    return res;
}

EvalReport evaluate_predictions(const std::string& algorithm, const std::string& fold, Variant variant,
                                std::span<const Scene> scenes,
                                std::span<const std::vector<PredictionSet>> predictions,
                                const MetricConfig& cfg) {
    cfg.validate();
    if (scenes.size() != predictions.size()) {
        throw DataError("evaluate: " + std::to_string(scenes.size()) + " scenes but " +
                        std::to_string(predictions.size()) + " prediction groups");
    }
    std::vector<SceneScore> scores;
    scores.reserve(scenes.size());
    std::size_t count = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        scores.push_back(score_scene(scenes[i], predictions[i], cfg));
        count += predictions[i].size();
    }
    return summarize_scores(algorithm, fold, variant, scores, count);
}

EvalReport summarize_scores(const std::string& algorithm, const std::string& fold, Variant variant,
                            std::span<const SceneScore> scores, std::size_t predictions) {
    EvalReport r;
    r.algorithm = algorithm;
    r.fold = fold;
    r.variant = variant;
    r.predictions = predictions;
    double ade = 0, fde = 0;
    std::size_t n = 0;
    for (const auto& s : scores) {
        for (const auto& e : s.errors) {
            ade += e.ade;
            fde += e.fde;
            ++n;
        }
        r.targets += s.num_targets;
    }
    r.ade = n ? ade / static_cast<double>(n) : 0.0;
    r.fde = n ? fde / static_cast<double>(n) : 0.0;
    r.map = trajectory_map(scores);
    return r;
}

std::vector<EvalReport> transfer_evaluate(std::span<const EvalReport> reports,
                                          std::span<const std::string> algorithms,
                                          std::span<const std::string> folds,
                                          std::span<const Variant> variants) {
    std::vector<EvalReport> out;
    auto find = [&](const std::string& a, const std::string& f, Variant v) -> const EvalReport* {
        for (const auto& r : reports)
            if (r.algorithm == a && r.fold == f && r.variant == v && r.present) return &r;
        return nullptr;
    };
    for (const auto& a : algorithms) {
        for (const auto& f : folds) {
            for (Variant v : variants) {
                if (const auto* r = find(a, f, v)) {
                    out.push_back(*r);
                } else {
                    EvalReport absent;
                    absent.algorithm = a;
                    absent.fold = f;
                    absent.variant = v;
                    absent.present = false;
                    out.push_back(absent);
                }
            }
        }
        for (Variant v : variants) {
            EvalReport agg;
            agg.algorithm = a;
            agg.fold = std::string(kAllFolds);
            agg.variant = v;
            std::size_t n = 0, n_tracking = 0;
            TrackingMetrics tm;
            for (const auto& f : folds) {
                const auto* r = find(a, f, v);
                if (!r) continue;
                ++n;
                agg.ade += r->ade;
                agg.fde += r->fde;
                agg.map += r->map;
                agg.predictions += r->predictions;
                agg.targets += r->targets;
                if (r->tracking) {
                    ++n_tracking;
                    tm.amota += r->tracking->amota;
                    tm.amotp += r->tracking->amotp;
                    tm.ap2d += r->tracking->ap2d;
                    tm.apbev += r->tracking->apbev;
                }
            }
            agg.present = n > 0;
            if (n) {
                agg.ade /= static_cast<double>(n);
                agg.fde /= static_cast<double>(n);
                agg.map /= static_cast<double>(n);
            }
            if (n_tracking && n_tracking == n) {
                const double k = static_cast<double>(n_tracking);
                agg.tracking = TrackingMetrics{tm.amota / k, tm.amotp / k, tm.ap2d / k, tm.apbev / k};
            }
            out.push_back(agg);
        }
    }
    return out;
}

std::string report_csv(std::span<const EvalReport> reports) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6);
    os << "algorithm,fold,variant,status,ade,fde,map,predictions,targets,amota,amotp,ap2d,apbev\n";
    for (const auto& r : reports) {
        os << r.algorithm << ',' << r.fold << ',' << to_string(r.variant) << ',';
        if (!r.present) {
            os << "absent,,,,,,,,,\n";
            continue;
        }
        os << "ok," << r.ade << ',' << r.fde << ',' << r.map << ',' << r.predictions << ',' << r.targets << ',';
        if (r.tracking) {
            os << r.tracking->amota << ',' << r.tracking->amotp << ',' << r.tracking->ap2d << ','
               << r.tracking->apbev;
        } else {
            os << ",,,";
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace fpvbench
