#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>

#include "json.hpp"

namespace fpvbench::testing {

std::vector<RawRecord> formation_records(const Formation& f) {
    std::vector<RawRecord> out;
    for (int s = 0; s < f.steps; ++s) {
        for (std::size_t i = 0; i < f.offsets.size(); ++i) {
            const double x = f.origin.x + f.offsets[i].x + f.speed_mps * f.step_s * s;
            const double y = f.origin.y + f.offsets[i].y;
            out.push_back({10 * s, f.first_id + static_cast<AgentId>(i), x, y});
        }
    }
    return out;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const std::vector<std::pair<std::string, std::vector<RawRecord>>>& folds) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = {{"step_period_s", 0.4}, {"folds", nlohmann::json::object()}};
    for (const auto& [name, records] : folds) {
        std::ofstream(dir / (name + ".txt")) << format_records(records);
        manifest["folds"][name] = {{"test", {name + ".txt"}}};
    }
    const auto path = dir / "manifest.json";
    std::ofstream(path) << manifest.dump(2);
    return path;
}

Scene synthetic_fpv_scene(int index, int others, int t_obs) {
    Scene s;
    s.fold = "synthetic";
    s.recording = "r" + std::to_string(index / 1000);
    s.window_start = index % 1000;
    s.t_obs = t_obs;
    s.variant = Variant::kFpvGt;
    s.ego_id = 1;
    for (AgentId id = 1; id <= others + 1; ++id) {
        Tracklet tr;
        tr.id = id;
        tr.gt_id = id;
        for (int t = 0; t < t_obs; ++t) tr.obs.push_back({t, {0.5 * t + id, 0.25 * id}});
        s.tracklets.push_back(tr);
        TruthFuture f{id, {}};
        for (int t = t_obs; t < t_obs + s.t_pred; ++t) f.future.push_back({t, {0.5 * t + id, 0.25 * id}});
        s.truth.push_back(f);
    }
    return s;
}

namespace {

struct PrPoint {
    double recall;
    double precision;
};

double integrate(const std::vector<PrPoint>& pts) {
    std::vector<double> recalls;
    for (const auto& p : pts) recalls.push_back(p.recall);
    std::sort(recalls.begin(), recalls.end());
    recalls.erase(std::unique(recalls.begin(), recalls.end()), recalls.end());
    double ap = 0, prev = 0;
    for (double r : recalls) {
        double best = 0;
        for (const auto& p : pts)
            if (p.recall >= r) best = std::max(best, p.precision);
        ap += (r - prev) * best;
        prev = r;
    }
    return ap;
}

std::vector<double> distinct_desc(std::vector<double> v) {
    std::sort(v.begin(), v.end(), std::greater<>());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

double mean_dist(const Trajectory& a, const std::vector<TimedPos>& b) {
    double s = 0;
    for (std::size_t t = 0; t < b.size(); ++t) s += distance(a[t], b[t].p);
    return s / static_cast<double>(b.size());
}

double best_ade(const PredictionSet& p, const std::vector<TimedPos>& f) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : p.samples) best = std::min(best, mean_dist(s, f));
    return best;
}

}  // namespace

double ap_by_thresholds(const std::vector<RankedItem>& items, std::size_t num_gt) {
    if (num_gt == 0 || items.empty()) return 0.0;
    std::vector<double> conf;
    for (const auto& it : items) conf.push_back(it.confidence);
    std::vector<PrPoint> pts;
    for (double c : distinct_desc(conf)) {
        std::size_t n = 0, tp = 0;
        for (const auto& it : items) {
            if (it.confidence < c) continue;
            ++n;
            tp += it.tp ? 1 : 0;
        }
        pts.push_back({static_cast<double>(tp) / static_cast<double>(num_gt),
                       static_cast<double>(tp) / static_cast<double>(n)});
    }
    return integrate(pts);
}

double detection_ap_oracle(const std::vector<ApFrame>& frames, double iou_min) {
    struct Det {
        double score;
        std::size_t frame;
        Eigen::Index row;
    };
    std::vector<Det> all;
    std::size_t num_gt = 0;
    std::vector<double> scores;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        num_gt += frames[f].num_gt;
        for (std::size_t d = 0; d < frames[f].scores.size(); ++d) {
            all.push_back({frames[f].scores[d], f, static_cast<Eigen::Index>(d)});
            scores.push_back(frames[f].scores[d]);
        }
    }
    if (num_gt == 0 || all.empty()) return 0.0;
    std::vector<PrPoint> pts;
    for (double c : distinct_desc(scores)) {
        std::vector<Det> kept;
        for (const auto& d : all)
            if (d.score >= c) kept.push_back(d);
        std::stable_sort(kept.begin(), kept.end(), [](const Det& a, const Det& b) { return a.score > b.score; });
        std::map<std::pair<std::size_t, Eigen::Index>, bool> claimed;
        std::size_t tp = 0;
        for (const auto& d : kept) {
            const auto& iou = frames[d.frame].iou;
            Eigen::Index best = -1;
            double best_iou = -1;
            for (Eigen::Index g = 0; g < iou.cols(); ++g) {
                if (claimed[{d.frame, g}]) continue;
                if (iou(d.row, g) > best_iou) {
                    best_iou = iou(d.row, g);
                    best = g;
                }
            }
            if (best >= 0 && best_iou >= iou_min) {
                claimed[{d.frame, best}] = true;
                ++tp;
            }
        }
        pts.push_back({static_cast<double>(tp) / static_cast<double>(num_gt),
                       static_cast<double>(tp) / static_cast<double>(kept.size())});
    }
    return integrate(pts);
}

double trajectory_map_oracle(const std::vector<TrajInstance>& instances, double tau_ade) {
    std::vector<RankedItem> items;
    std::size_t num_gt = 0;
    for (const auto& inst : instances) {
        const Scene& sc = inst.scene;
        std::map<AgentId, const TruthFuture*> targets;
        for (const auto& f : sc.truth)
            if (static_cast<int>(f.future.size()) == sc.t_pred) targets[f.agent_id] = &f;
        num_gt += targets.size();
        const auto& preds = inst.predictions;
        std::vector<double> ade(preds.size(), 0.0);
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (!preds[i].gt_id) {
                double conf = -std::numeric_limits<double>::infinity();
                for (const auto& [id, f] : targets) conf = std::max(conf, -best_ade(preds[i], f->future));
                items.push_back({conf, false});
                continue;
            }
            auto it = targets.find(*preds[i].gt_id);
            if (it == targets.end()) continue;
            ade[i] = best_ade(preds[i], it->second->future);
        }
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (!preds[i].gt_id || !targets.count(*preds[i].gt_id)) continue;
            bool first_best = true;
            for (std::size_t j = 0; j < preds.size(); ++j) {
                if (j == i || preds[j].gt_id != preds[i].gt_id) continue;
                if (ade[j] < ade[i] || (ade[j] == ade[i] && j < i)) first_best = false;
            }
            items.push_back({-ade[i], first_best && ade[i] <= tau_ade});
        }
    }
    return ap_by_thresholds(items, num_gt);
}

AmotaResult amota_oracle(const std::vector<TrackingSequence>& sequences, const MetricConfig& cfg) {
    std::vector<double> scores;
    for (const auto& seq : sequences)
        for (const auto& f : seq)
            for (const auto& t : f.tracks) scores.push_back(t.score);
    AmotaResult res;
    res.motar.assign(static_cast<std::size_t>(cfg.recall_levels), 0.0);
    const auto thresholds = distinct_desc(scores);
    std::vector<MotCounts> counts;
    for (double c : thresholds) {
        MotCounts total;
        for (const auto& seq : sequences) total += clear_mot(seq, c, cfg.iou_min);
        counts.push_back(total);
    }
    const int levels = cfg.recall_levels;
    double motp = 0;
    for (int l = 1; l <= levels; ++l) {
        const MotCounts* hit = nullptr;
        for (const auto& c : counts) {
            if (c.gt > 0 && c.tp * levels >= static_cast<long long>(l) * c.gt) {
                hit = &c;
                break;
            }
        }
        if (!hit) {
            motp += cfg.amotp_penalty;
            continue;
        }
        const double r = static_cast<double>(l) / levels;
        const double p = static_cast<double>(hit->gt);
        const double errors = static_cast<double>(hit->ids + hit->fp + hit->fn);
        const double v = 1.0 - (errors - (1.0 - r) * p) / (r * p);
        res.motar[static_cast<std::size_t>(l - 1)] = std::min(1.0, std::max(0.0, v));
        motp += hit->tp > 0 ? hit->dist_sum / static_cast<double>(hit->tp) : cfg.amotp_penalty;
    }
    double sum = 0;
    for (double m : res.motar) sum += m;
    res.amota = sum / levels;
    res.amotp = motp / levels;
    return res;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t pick(std::mt19937_64& g, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(g);
}

// Coarse values make ties and exact threshold hits common.
double coarse(std::mt19937_64& g, const std::vector<double>& values) { return values[pick(g, 0, values.size() - 1)]; }

}  // namespace

std::vector<RankedItem> random_ranked(std::mt19937_64& g, std::size_t max_items, std::size_t* num_gt) {
    std::vector<RankedItem> items(pick(g, 0, max_items));
    std::size_t tps = 0;
    for (auto& it : items) {
        it.confidence = coarse(g, {0.1, 0.2, 0.3, 0.5, 0.8}) + (pick(g, 0, 3) == 0 ? uniform01(g) : 0.0);
        it.tp = pick(g, 0, 1) == 1;
        tps += it.tp ? 1 : 0;
    }
    *num_gt = std::min(max_items, tps + pick(g, 0, 3));
    return items;
}

std::vector<ApFrame> random_ap_frames(std::mt19937_64& g, std::size_t max_items) {
    const std::size_t n_frames = pick(g, 1, 3);
    std::size_t dets_left = max_items, gt_left = max_items;
    std::vector<ApFrame> frames;
    for (std::size_t f = 0; f < n_frames; ++f) {
        ApFrame fr;
        const std::size_t nd = pick(g, 0, std::min<std::size_t>(dets_left, 5));
        fr.num_gt = pick(g, 0, std::min<std::size_t>(gt_left, 5));
        dets_left -= nd;
        gt_left -= fr.num_gt;
        fr.iou = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nd), static_cast<Eigen::Index>(fr.num_gt));
        for (std::size_t d = 0; d < nd; ++d) {
            fr.scores.push_back(coarse(g, {0.2, 0.4, 0.6, 0.9}));
            for (std::size_t k = 0; k < fr.num_gt; ++k) {
                const double v = pick(g, 0, 4) == 0 ? uniform01(g) : coarse(g, {0.0, 0.0, 0.3, 0.5, 0.7, 0.9});
                fr.iou(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = v;
            }
        }
        frames.push_back(std::move(fr));
    }
    return frames;
}

std::vector<TrajInstance> random_traj_instances(std::mt19937_64& g, std::size_t max_items) {
    std::vector<TrajInstance> out;
    const std::size_t n_scenes = pick(g, 1, 3);
    for (std::size_t s = 0; s < n_scenes; ++s) {
        TrajInstance inst;
        Scene& sc = inst.scene;
        sc.t_obs = 2;
        sc.t_pred = 4;
        sc.window_start = static_cast<Step>(s);
        const std::size_t n_agents = pick(g, 0, 4);
        std::vector<AgentId> full, partial;
        for (std::size_t a = 0; a < n_agents; ++a) {
            const AgentId id = static_cast<AgentId>(a + 1);
            const bool complete = pick(g, 0, 4) != 0;
            TruthFuture f{id, {}};
            const int len = complete ? sc.t_pred : static_cast<int>(pick(g, 1, 3));
            Vec2 p{uniform01(g) * 5, uniform01(g) * 5};
            for (int t = 0; t < len; ++t) {
                p = p + Vec2{0.5, 0.1 * t};
                f.future.push_back({sc.t_obs + t, p});
            }
            (complete ? full : partial).push_back(id);
            sc.truth.push_back(std::move(f));
        }
        const std::size_t n_preds = pick(g, 0, max_items);
        for (std::size_t i = 0; i < n_preds; ++i) {
            PredictionSet p;
            const std::size_t kind = pick(g, 0, 5);
            const TruthFuture* base = nullptr;
            if (kind <= 3 && !full.empty()) {
                p.gt_id = full[pick(g, 0, full.size() - 1)];
            } else if (kind == 4 && !partial.empty()) {
                p.gt_id = partial[pick(g, 0, partial.size() - 1)];
            }
            if (p.gt_id) base = sc.truth_of(*p.gt_id);
            if (!base && !sc.truth.empty()) base = &sc.truth[pick(g, 0, sc.truth.size() - 1)];
            if (!inst.predictions.empty() && pick(g, 0, 5) == 0) {
                inst.predictions.push_back(inst.predictions.back());  // exact ADE tie
                continue;
            }
            const std::size_t k = pick(g, 1, 3);
            const double scale = coarse(g, {0.0, 0.5, 1.0, 2.0, 3.0});
            for (std::size_t j = 0; j < k; ++j) {
                Trajectory tr;
                for (int t = 0; t < sc.t_pred; ++t) {
                    Vec2 q = base && t < static_cast<int>(base->future.size()) ? base->future[static_cast<std::size_t>(t)].p
                                                                               : Vec2{uniform01(g) * 5, uniform01(g) * 5};
                    tr.push_back(q + Vec2{scale * (uniform01(g) - 0.5), scale * (uniform01(g) - 0.5)});
                }
                p.samples.push_back(std::move(tr));
            }
            p.agent_id = p.gt_id.value_or(-static_cast<AgentId>(i + 1));
            inst.predictions.push_back(std::move(p));
        }
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<TrackingSequence> random_tracking(std::mt19937_64& g, std::size_t max_items) {
    std::vector<TrackingSequence> out;
    const std::size_t n_seq = pick(g, 1, 3);
    for (std::size_t s = 0; s < n_seq; ++s) {
        const std::size_t n_agents = pick(g, 0, std::min<std::size_t>(4, max_items));
        std::vector<Vec2> pos(n_agents);
        std::vector<AgentId> track_of(n_agents);
        std::map<AgentId, double> score_of;
        AgentId next = 1;
        for (std::size_t a = 0; a < n_agents; ++a) {
            pos[a] = {uniform01(g) * 2, uniform01(g) * 2};
            track_of[a] = next++;
        }
        auto score = [&](AgentId id) {
            auto [it, fresh] = score_of.emplace(id, 0.0);
            if (fresh) it->second = coarse(g, {0.2, 0.4, 0.6, 0.8});
            return it->second;
        };
        TrackingSequence seq(pick(g, 1, 5));
        for (auto& frame : seq) {
            for (std::size_t a = 0; a < n_agents; ++a) {
                pos[a] = pos[a] + Vec2{0.2 * (uniform01(g) - 0.5), 0.2 * (uniform01(g) - 0.5)};
                if (pick(g, 0, 9) == 0) continue;  // agent absent this frame
                frame.truth.push_back({static_cast<AgentId>(a + 1), {pos[a].x, pos[a].y, 0.5, 0.5, 0.0}, 1.0});
                if (pick(g, 0, 4) == 0) continue;  // missed
                if (pick(g, 0, 6) == 0) track_of[a] = next++;  // identity switch
                const double jitter = coarse(g, {0.0, 0.05, 0.15, 0.3});
                frame.tracks.push_back({track_of[a],
                                        {pos[a].x + jitter * (uniform01(g) - 0.5) * 2,
                                         pos[a].y + jitter * (uniform01(g) - 0.5) * 2, 0.5, 0.5, 0.0},
                                        score(track_of[a])});
            }
            if (frame.tracks.size() < max_items && pick(g, 0, 4) == 0) {
                const AgentId ghost = next++;
                frame.tracks.push_back({ghost, {uniform01(g) * 2, uniform01(g) * 2, 0.5, 0.5, 0.0}, score(ghost)});
            }
        }
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace fpvbench::testing
