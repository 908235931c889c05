#include "fpvbench/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "fpvbench/degrade.hpp"
#include "fpvbench/parallel.hpp"

namespace fpvbench {

const FoldSpec& Manifest::fold(const std::string& name) const {
    for (const auto& f : folds)
        if (f.name == name) return f;
    throw ConfigError("fold '" + name + "' is not in manifest " + path.string());
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError("manifest " + path.string() + " is not valid JSON");
    Manifest m;
    m.path = path;
    const fs::path base = path.parent_path();
    try {
        m.step_period = j.value("step_period_s", 0.4);
        for (const auto& [name, spec] : j.at("folds").items()) {
            FoldSpec f;
            f.name = name;
            for (const auto& p : spec.value("test", json::array())) f.test.push_back(base / p.get<std::string>());
            for (const auto& p : spec.value("train", json::array())) f.train.push_back(base / p.get<std::string>());
            m.folds.push_back(std::move(f));
        }
    } catch (const json::exception& e) {
        throw DataError("manifest " + path.string() + ": " + e.what());
    }
    return m;
}

Fold load_fold(const Manifest& m, const FoldSpec& spec, int slerp_window) {
    Fold f;
    f.name = spec.name;
    f.step_period = m.step_period;
    for (const auto& p : spec.test) f.recordings.push_back(load_recording(p.string(), slerp_window));
    return f;
}

std::vector<Recording> load_training(const Manifest& m, const std::string& fold, int slerp_window) {
    std::vector<fs::path> paths = m.fold(fold).train;
    if (paths.empty()) {
        for (const auto& f : m.folds) {
            if (f.name == fold) continue;
            paths.insert(paths.end(), f.test.begin(), f.test.end());
        }
    }
    std::vector<Recording> out;
    for (const auto& p : paths) out.push_back(load_recording(p.string(), slerp_window));
    return out;
}

std::vector<std::string> selected_folds(const RunConfig& cfg, const Manifest& m) {
    std::vector<std::string> out;
    for (const auto& f : m.folds) {
        if (cfg.folds.empty() || std::find(cfg.folds.begin(), cfg.folds.end(), f.name) != cfg.folds.end()) {
            out.push_back(f.name);
        }
    }
    for (const auto& f : cfg.folds) (void)m.fold(f);  // unknown names are config errors
    return out;
}

fs::path Layout::variant_dir(const std::string& fold, Variant v) const {
    return root / fold / std::string(to_string(v));
}
fs::path Layout::scenes(const std::string& fold, Variant v) const { return variant_dir(fold, v) / "scenes.jsonl"; }
fs::path Layout::predictions(const std::string& fold, Variant v, Predictor p) const {
    return variant_dir(fold, v) / "predictions" / (std::string(to_string(p)) + ".jsonl");
}
fs::path Layout::reports(const std::string& fold, Variant v) const { return variant_dir(fold, v) / "reports"; }
fs::path Layout::annotations(const std::string& fold, const std::string& recording) const {
    return root / fold / "annotations" / (recording + ".jsonl");
}
fs::path Layout::tracking(const std::string& fold) const { return reports(fold, Variant::kFpvDet) / "tracking.jsonl"; }

namespace {

void note(std::ostream* log, const std::string& msg) {
    if (log) *log << msg << '\n';
}

ArtifactHeader header(const RunConfig& cfg, std::string kind, json meta) {
    ArtifactHeader h;
    h.kind = std::move(kind);
    h.config_hash = cfg.hash;
    h.meta = std::move(meta);
    return h;
}

void write_scenes(const RunConfig& cfg, const fs::path& path, const std::string& fold, Variant v,
                  const std::vector<Scene>& scenes) {
    JsonlWriter w(path, header(cfg, "scenes", {{"fold", fold}, {"variant", to_string(v)}, {"count", scenes.size()}}));
    for (const auto& s : scenes) w.write(to_json(s));
    w.close();
}

bool wants_fpv(const RunConfig& cfg) {
    return cfg.wants(Variant::kFpvGt) || cfg.wants(Variant::kFpvNoisy) || cfg.wants(Variant::kFpvDet);
}

}  // namespace

GeneratedFold generate_fold(const RunConfig& cfg, const Fold& fold, bool with_fpv) {
    GeneratedFold g;
    g.name = fold.name;
    for (const auto& rec : fold.recordings) {
        RecordingIndex index(rec);
        std::vector<Scene> bev;
        for (Step s : enumerate_windows(index, cfg.shape.t_obs + cfg.shape.t_pred)) {
            if (auto sc = build_bev_scene(fold.name, index, s, cfg.shape)) bev.push_back(std::move(*sc));
        }
        if (with_fpv) {
            AnnotationIndex ann = render_annotations(index, required_annotations(bev), cfg.render, cfg.jobs);
            std::vector<std::vector<Scene>> fpv(bev.size());
            parallel_for(bev.size(), cfg.jobs,
                         [&](std::size_t i) { fpv[i] = build_fpv_gt_scenes(bev[i], index, ann, cfg.visibility); });
            for (auto& v : fpv)
                for (auto& s : v) g.fpv_gt.push_back(std::move(s));
            g.annotations.emplace_back(rec.name, std::move(ann));
        }
        for (auto& s : bev) g.bev.push_back(std::move(s));
    }
    return g;
}

std::vector<Scene> read_scenes(const fs::path& path) {
    std::vector<Scene> out;
    read_jsonl(path, "scenes", [&](const json& j) { out.push_back(scene_from_json(j)); });
    return out;
}

AnnotationIndex read_annotations(const fs::path& path) {
    AnnotationIndex out;
    read_jsonl(path, "annotations", [&](const json& j) {
        EgoFrameAnnotation a = annotation_from_json(j);
        const AnnotationKey k{a.ego_id, a.step};
        out.emplace(k, std::move(a));
    });
    return out;
}

void cmd_generate(const RunConfig& cfg, std::ostream* log) {
    const Manifest m = load_manifest(cfg.manifest);
    const Layout out{cfg.out};
    const bool fpv = wants_fpv(cfg);
    for (const auto& name : selected_folds(cfg, m)) {
        const Fold fold = load_fold(m, m.fold(name), cfg.slerp_window);
        GeneratedFold g = generate_fold(cfg, fold, fpv);
        if (cfg.wants(Variant::kBev)) write_scenes(cfg, out.scenes(name, Variant::kBev), name, Variant::kBev, g.bev);
        if (fpv) {
            write_scenes(cfg, out.scenes(name, Variant::kFpvGt), name, Variant::kFpvGt, g.fpv_gt);
            for (const auto& [rec, ann] : g.annotations) {
                JsonlWriter w(out.annotations(name, rec),
                              header(cfg, "annotations", {{"fold", name}, {"recording", rec}, {"count", ann.size()}}));
                for (const auto& [k, a] : ann) w.write(to_json(a));
                w.close();
            }
        }
        note(log, "generate " + name + ": " + std::to_string(g.bev.size()) + " BEV scenes, " +
                      std::to_string(g.fpv_gt.size()) + " FPV scenes");
    }
}

void cmd_degrade(const RunConfig& cfg, std::ostream* log) {
    const Manifest m = load_manifest(cfg.manifest);
    const Layout out{cfg.out};
    for (const auto& name : selected_folds(cfg, m)) {
        const auto gt = read_scenes(out.scenes(name, Variant::kFpvGt));
        std::vector<Scene> noisy(gt.size());
        parallel_for(gt.size(), cfg.jobs, [&](std::size_t i) { noisy[i] = corrupt_scene(gt[i], cfg.noise); });
        write_scenes(cfg, out.scenes(name, Variant::kFpvNoisy), name, Variant::kFpvNoisy, noisy);
        write_text(out.reports(name, Variant::kFpvNoisy) / "noise_audit.csv",
                   audit_csv(noise_audit(gt, noisy), cfg.noise));
        note(log, "degrade " + name + ": " + std::to_string(noisy.size()) + " scenes");
    }
}

namespace {

std::vector<TrackedObject> objects_of(const std::vector<TrackingObject>& v) {
    std::vector<TrackedObject> out;
    for (const auto& o : v) out.push_back({o.id, o.box, o.score, std::nullopt});
    return out;
}

}  // namespace

void cmd_track(const RunConfig& cfg, std::ostream* log) {
    const Manifest m = load_manifest(cfg.manifest);
    const Layout out{cfg.out};
    for (const auto& name : selected_folds(cfg, m)) {
        const Fold fold = load_fold(m, m.fold(name), cfg.slerp_window);
        const auto gt = read_scenes(out.scenes(name, Variant::kFpvGt));

        TrackerConfig tracker = cfg.tracker;
        json cov_meta = {{"source", cfg.covariance == CovarianceSource::kEstimated ? "estimated" : "fixed"}};
        if (cfg.covariance == CovarianceSource::kEstimated) {
            const auto training = load_training(m, name, cfg.slerp_window);
            const NoiseCovariances nc =
                estimate_covariances(training, cfg.detector, cfg.render.camera, cfg.render.body, tracker.dt);
            tracker.Q = nc.Q;
            tracker.R = nc.R;
            cov_meta["process_samples"] = nc.process_samples;
            cov_meta["observation_samples"] = nc.observation_samples;
        }
        json q = json::array(), r = json::array();
        for (int i = 0; i < 6; ++i) {
            json row = json::array();
            for (int k = 0; k < 6; ++k) row.push_back(tracker.Q(i, k));
            q.push_back(row);
        }
        for (int i = 0; i < 4; ++i) {
            json row = json::array();
            for (int k = 0; k < 4; ++k) row.push_back(tracker.R(i, k));
            r.push_back(row);
        }
        cov_meta["Q"] = q;
        cov_meta["R"] = r;
        cov_meta["config_hash"] = cfg.hash;
        write_text(out.reports(name, Variant::kFpvDet) / "covariances.json", cov_meta.dump(2) + "\n");

        std::map<std::string, RecordingIndex> indices;
        std::map<std::string, AnnotationIndex> annotations;
        for (const auto& rec : fold.recordings) {
            indices.emplace(rec.name, RecordingIndex(rec));
            annotations.emplace(rec.name, read_annotations(out.annotations(name, rec.name)));
        }

        std::vector<PerceptionResult> results(gt.size());
        std::vector<PerceptionRecord> records(gt.size());
        parallel_for(gt.size(), cfg.jobs, [&](std::size_t i) {
            const Scene& sc = gt[i];
            const auto idx = indices.find(sc.recording);
            const auto ann = annotations.find(sc.recording);
            if (idx == indices.end() || ann == annotations.end()) {
                throw DataIntegrityError("scene references unknown recording " + sc.recording);
            }
            const AgentId ego = *sc.ego_id;
            std::vector<std::vector<Detection>> dets(static_cast<std::size_t>(sc.t_obs));
            std::vector<const EgoFrameAnnotation*> frames(static_cast<std::size_t>(sc.t_obs));
            for (int t = 0; t < sc.t_obs; ++t) {
                const Step step = sc.window_start + t;
                auto it = ann->second.find({ego, step});
                if (it == ann->second.end()) {
                    throw DataIntegrityError("missing annotation for ego " + std::to_string(ego) + " at step " +
                                             std::to_string(step));
                }
                frames[static_cast<std::size_t>(t)] = &it->second;
                auto rng = detection_stream(cfg.detector.seed, name, sc.recording, ego, step).engine();
                dets[static_cast<std::size_t>(t)] =
                    synth_detect(it->second, cfg.detector, cfg.render.camera, cfg.render.body, rng);
            }
            results[i] = track_scene(sc, idx->second, ann->second, dets, tracker, cfg.visibility.min_pixels);

            PerceptionRecord& rec = records[i];
            rec.key = sc.key();
            for (int t = 0; t < sc.t_obs; ++t) {
                const auto ti = static_cast<std::size_t>(t);
                PerceptionFrame f;
                f.step = sc.window_start + t;
                for (const auto& v : frames[ti]->visible) {
                    if (v.pixel_count < cfg.visibility.min_pixels) continue;
                    f.truth.push_back({v.agent_id,
                                       {v.world_pose.x, v.world_pose.y, tracker.footprint_m, tracker.footprint_m,
                                        v.world_pose.heading},
                                       1.0,
                                       v.bbox2d});
                }
                f.tracks = objects_of(results[i].tracking[ti].tracks);
                for (const auto& d : dets[ti]) f.detections.push_back({0, d.box, d.score, d.bbox2d});
                rec.frames.push_back(std::move(f));
            }
        });

        std::vector<Scene> det_scenes;
        det_scenes.reserve(gt.size());
        for (auto& r : results) det_scenes.push_back(std::move(r.scene));
        results.clear();
        write_scenes(cfg, out.scenes(name, Variant::kFpvDet), name, Variant::kFpvDet, det_scenes);
        JsonlWriter w(out.tracking(name), header(cfg, "tracking", {{"fold", name}, {"count", records.size()}}));
        for (const auto& r : records) w.write(to_json(r));
        w.close();
        note(log, "track " + name + ": " + std::to_string(det_scenes.size()) + " scenes");
    }
}

void cmd_predict(const RunConfig& cfg, std::ostream* log) {
    const Manifest m = load_manifest(cfg.manifest);
    const Layout out{cfg.out};
    for (const auto& name : selected_folds(cfg, m)) {
        for (Variant v : cfg.variants) {
            const fs::path path = out.scenes(name, v);
            if (!fs::exists(path)) throw DataError("missing upstream artifact " + path.string());
            const auto scenes = read_scenes(path);
            for (Predictor p : cfg.algorithms) {
                JsonlWriter w(out.predictions(name, v, p),
                              header(cfg, "predictions",
                                     {{"fold", name}, {"variant", to_string(v)}, {"algorithm", to_string(p)},
                                      {"k", cfg.predictor.k}}));
                std::size_t count = 0;
                // Bounded batches keep memory flat on the large folds.
                constexpr std::size_t kBatch = 512;
                for (std::size_t lo = 0; lo < scenes.size(); lo += kBatch) {
                    const std::size_t n = std::min(kBatch, scenes.size() - lo);
                    std::vector<std::vector<PredictionSet>> preds(n);
                    parallel_for(n, cfg.jobs,
                                 [&](std::size_t i) { preds[i] = predict_scene(scenes[lo + i], p, cfg.predictor); });
                    for (std::size_t i = 0; i < n; ++i) {
                        const SceneKey key = scenes[lo + i].key();
                        for (const auto& ps : preds[i]) w.write(to_json(ps, key));
                        count += preds[i].size();
                    }
                }
                w.close();
                note(log, "predict " + name + " " + std::string(to_string(v)) + " " + std::string(to_string(p)) +
                              ": " + std::to_string(count) + " prediction sets");
            }
        }
    }
}

namespace {

// Scores predictions scene by scene as they stream in; the file must keep
// each scene's predictions together.
EvalReport score_predictions(const fs::path& path, const std::vector<Scene>& scenes, const std::string& algorithm,
                             const std::string& fold, Variant v, const MetricConfig& mc) {
    std::map<SceneKey, std::size_t> index;
    for (std::size_t i = 0; i < scenes.size(); ++i) index.emplace(scenes[i].key(), i);
    std::vector<SceneScore> scores(scenes.size());
    std::vector<char> done(scenes.size(), 0);
    std::vector<PredictionSet> pending;
    std::size_t current = 0;
    std::size_t count = 0;
    auto flush = [&] {
        if (pending.empty()) return;
        scores[current] = score_scene(scenes[current], pending, mc);
        done[current] = 1;
        pending.clear();
    };
    read_jsonl(path, "predictions", [&](const json& j) {
        SceneKey key;
        PredictionSet p = prediction_from_json(j, &key);
        auto it = index.find(key);
        if (it == index.end()) throw DataIntegrityError(path.string() + ": prediction for an unknown scene");
        if (pending.empty() || it->second != current) {
            flush();
            if (done[it->second]) throw DataIntegrityError(path.string() + ": predictions not grouped by scene");
            current = it->second;
        }
        pending.push_back(std::move(p));
        ++count;
    });
    flush();
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        if (!done[i]) scores[i] = score_scene(scenes[i], {}, mc);
    }
    return summarize_scores(algorithm, fold, v, scores, count);
}

TrackingMetrics tracking_metrics(const fs::path& path, const MetricConfig& mc) {
    std::vector<TrackingSequence> sequences;
    std::vector<ApFrame> frames_2d, frames_bev;
    std::set<std::tuple<std::string, AgentId, Step>> seen;
    read_jsonl(path, "tracking", [&](const json& j) {
        const PerceptionRecord r = perception_from_json(j);
        TrackingSequence seq;
        for (const auto& f : r.frames) {
            TrackingFrame tf;
            for (const auto& o : f.truth) tf.truth.push_back({o.id, o.box, o.score});
            for (const auto& o : f.tracks) tf.tracks.push_back({o.id, o.box, o.score});
            seq.push_back(std::move(tf));
            // Overlapping windows share frames; score each camera frame once.
            if (!seen.emplace(r.key.recording, r.key.ego_id.value_or(0), f.step).second) continue;
            ApFrame a2, ab;
            a2.num_gt = ab.num_gt = f.truth.size();
            a2.iou.resize(static_cast<Eigen::Index>(f.detections.size()), static_cast<Eigen::Index>(f.truth.size()));
            ab.iou.resize(a2.iou.rows(), a2.iou.cols());
            for (std::size_t d = 0; d < f.detections.size(); ++d) {
                a2.scores.push_back(f.detections[d].score);
                ab.scores.push_back(f.detections[d].score);
                for (std::size_t g = 0; g < f.truth.size(); ++g) {
                    const auto& det = f.detections[d];
                    const auto& tru = f.truth[g];
                    const auto di = static_cast<Eigen::Index>(d), gi = static_cast<Eigen::Index>(g);
                    a2.iou(di, gi) = (det.rect && tru.rect) ? iou_2d(*det.rect, *tru.rect) : 0.0;
                    ab.iou(di, gi) = bev_iou(det.box, tru.box);
                }
            }
            frames_2d.push_back(std::move(a2));
            frames_bev.push_back(std::move(ab));
        }
        sequences.push_back(std::move(seq));
    });
    const AmotaResult am = amota_amotp(sequences, mc);
    return {am.amota, am.amotp, detection_ap(frames_2d, mc.iou_min), detection_ap(frames_bev, mc.iou_min)};
}

json report_json(const EvalReport& r) {
    json j = {{"algorithm", r.algorithm}, {"fold", r.fold}, {"variant", to_string(r.variant)}, {"present", r.present}};
    if (!r.present) return j;
    j["ade"] = r.ade;
    j["fde"] = r.fde;
    j["map"] = r.map;
    j["predictions"] = r.predictions;
    j["targets"] = r.targets;
    if (r.tracking) {
        j["amota"] = r.tracking->amota;
        j["amotp"] = r.tracking->amotp;
        j["ap2d"] = r.tracking->ap2d;
        j["apbev"] = r.tracking->apbev;
    }
    return j;
}

}  // namespace

std::vector<EvalReport> cmd_evaluate(const RunConfig& cfg, std::ostream* log) {
    const Manifest m = load_manifest(cfg.manifest);
    const Layout out{cfg.out};
    const auto folds = selected_folds(cfg, m);
    std::vector<EvalReport> reports;
    for (const auto& name : folds) {
        for (Variant v : cfg.variants) {
            const fs::path scene_path = out.scenes(name, v);
            if (!fs::exists(scene_path)) continue;  // reported as absent
            const auto scenes = read_scenes(scene_path);
            std::optional<TrackingMetrics> tm;
            if (v == Variant::kFpvDet && fs::exists(out.tracking(name))) tm = tracking_metrics(out.tracking(name), cfg.metrics);
            for (Predictor p : cfg.algorithms) {
                const fs::path pred_path = out.predictions(name, v, p);
                if (!fs::exists(pred_path)) continue;
                EvalReport r = score_predictions(pred_path, scenes, std::string(to_string(p)), name, v, cfg.metrics);
                r.tracking = tm;
                json rep = report_json(r);
                rep["config_hash"] = cfg.hash;
                rep["tau_ade"] = cfg.metrics.tau_ade;
                write_text(out.reports(name, v) / ("eval_" + std::string(to_string(p)) + ".json"), rep.dump(2) + "\n");
                note(log, "evaluate " + name + " " + std::string(to_string(v)) + " " + r.algorithm +
                              ": ade " + std::to_string(r.ade) + " map " + std::to_string(r.map));
                reports.push_back(std::move(r));
            }
        }
    }
    std::vector<std::string> algos;
    for (Predictor p : cfg.algorithms) algos.emplace_back(to_string(p));
    auto table = transfer_evaluate(reports, algos, folds, cfg.variants);
    write_text(out.root / "report.csv", report_csv(table));
    json summary = {{"config_hash", cfg.hash},
                    {"tau_ade", cfg.metrics.tau_ade},
                    {"recall_levels", cfg.metrics.recall_levels},
                    {"rows", json::array()}};
    for (const auto& r : table) summary["rows"].push_back(report_json(r));
    write_text(out.root / "report.json", summary.dump(2) + "\n");
    return table;
}

std::vector<FoldStatistics> cmd_stats(const RunConfig& cfg, std::ostream* log) {
    const Manifest m = load_manifest(cfg.manifest);
    const Layout out{cfg.out};
    std::vector<FoldStatistics> rows;
    for (const auto& name : selected_folds(cfg, m)) {
        std::map<Variant, std::vector<Scene>> by_variant;
        for (Variant v : kAllVariants) {
            const fs::path p = out.scenes(name, v);
            if (fs::exists(p)) by_variant[v] = read_scenes(p);
        }
        rows.push_back(fold_statistics(name, by_variant));
    }
    const std::string csv = statistics_csv(rows);
    write_text(out.root / "stats.csv", csv);
    if (log) *log << csv;
    return rows;
}

void echo_config(const RunConfig& cfg) {
    json j = cfg.tree;
    j["config_hash"] = cfg.hash;
    write_text(cfg.out / "config.json", j.dump(2) + "\n");
}

void run_all(const RunConfig& cfg, std::ostream* log) {
    echo_config(cfg);
    cmd_generate(cfg, log);
    if (cfg.wants(Variant::kFpvNoisy)) cmd_degrade(cfg, log);
    if (cfg.wants(Variant::kFpvDet)) cmd_track(cfg, log);
    cmd_predict(cfg, log);
    cmd_evaluate(cfg, log);
    cmd_stats(cfg, log);
}

}  // namespace fpvbench
