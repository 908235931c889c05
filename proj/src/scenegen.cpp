#include "fpvbench/scenegen.hpp"

#include <algorithm>
#include <sstream>

#include "fpvbench/parallel.hpp"

namespace fpvbench {

const TruthFuture* Scene::truth_of(AgentId id) const noexcept {
    auto it = std::lower_bound(truth.begin(), truth.end(), id,
                               [](const TruthFuture& f, AgentId x) { return f.agent_id < x; });
    return (it != truth.end() && it->agent_id == id) ? &*it : nullptr;
}

bool Scene::is_target(AgentId id) const noexcept {
    const TruthFuture* f = truth_of(id);
    return f && static_cast<int>(f->future.size()) == t_pred;
}

std::vector<const TruthFuture*> Scene::targets() const {
    std::vector<const TruthFuture*> out;
    for (const auto& f : truth) {
        if (static_cast<int>(f.future.size()) == t_pred) out.push_back(&f);
    }
    return out;
}

RecordingIndex::RecordingIndex(const Recording& rec) : rec_(&rec) {
    if (rec.tracks.empty()) return;
    min_step_ = rec.min_step();
    max_step_ = rec.max_step();
    by_step_.resize(static_cast<std::size_t>(max_step_ - min_step_ + 1));
    for (const auto& t : rec.tracks) {
        for (Step s = t.start_step; s < t.end_step(); ++s) {
            by_step_[static_cast<std::size_t>(s - min_step_)].push_back({t.agent_id, t.pose_at(s)});
        }
    }
    for (auto& v : by_step_) {
        std::sort(v.begin(), v.end(), [](const AgentPose& a, const AgentPose& b) { return a.id < b.id; });
    }
}

std::span<const AgentPose> RecordingIndex::agents_at(Step s) const noexcept {
    if (s < min_step_ || s > max_step_) return {};
    return by_step_[static_cast<std::size_t>(s - min_step_)];
}

std::optional<Pose2> RecordingIndex::pose_of(AgentId id, Step s) const noexcept {
    auto v = agents_at(s);
    auto it = std::lower_bound(v.begin(), v.end(), id,
                               [](const AgentPose& a, AgentId x) { return a.id < x; });
    if (it == v.end() || it->id != id) return std::nullopt;
    return it->pose;
}

std::vector<Step> enumerate_windows(const RecordingIndex& index, int window_len) {
    std::vector<Step> out;
    const Step lo = index.min_step();
    const Step hi = index.max_step() - window_len + 1;
    if (hi < lo) return out;
    // occupied[i] = number of non-empty steps in [lo, lo + i)
    std::vector<long> occupied(static_cast<std::size_t>(index.max_step() - lo + 2), 0);
    for (Step s = lo; s <= index.max_step(); ++s) {
        const auto i = static_cast<std::size_t>(s - lo);
        occupied[i + 1] = occupied[i] + (index.agents_at(s).empty() ? 0 : 1);
    }
    for (Step s = lo; s <= hi; ++s) {
        const auto i = static_cast<std::size_t>(s - lo);
        if (occupied[i + static_cast<std::size_t>(window_len)] - occupied[i] > 0) out.push_back(s);
    }
    return out;
}

std::vector<WindowRef> enumerate_windows(const Fold& fold, int window_len) {
    std::vector<WindowRef> out;
    for (std::size_t r = 0; r < fold.recordings.size(); ++r) {
        RecordingIndex index(fold.recordings[r]);
        for (Step s : enumerate_windows(index, window_len)) out.push_back({r, s});
    }
    return out;
}

std::optional<Scene> build_bev_scene(const std::string& fold, const RecordingIndex& index,
                                     Step window_start, SceneShape shape) {
    Scene scene;
    scene.fold = fold;
    scene.recording = index.recording().name;
    scene.window_start = window_start;
    scene.t_obs = shape.t_obs;
    scene.t_pred = shape.t_pred;
    scene.variant = Variant::kBev;
    const int len = shape.t_obs + shape.t_pred;

    for (const AgentPose& a : index.agents_at(window_start)) {
        std::vector<TimedPos> path;
        path.reserve(static_cast<std::size_t>(len));
        for (int t = 0; t < len; ++t) {
            auto p = index.pose_of(a.id, window_start + t);
            if (!p) break;
            path.push_back({t, p->position()});
        }
        if (static_cast<int>(path.size()) != len) continue;
        Tracklet tr;
        tr.id = a.id;
        tr.gt_id = a.id;
        tr.obs.assign(path.begin(), path.begin() + shape.t_obs);
        scene.tracklets.push_back(std::move(tr));
        scene.truth.push_back({a.id, {path.begin() + shape.t_obs, path.end()}});
    }
    if (scene.tracklets.size() < 2) return std::nullopt;
    return scene;
}

std::set<AnnotationKey> required_annotations(std::span<const Scene> bev_scenes) {
    std::set<AnnotationKey> keys;
    for (const auto& sc : bev_scenes) {
        for (const auto& tr : sc.tracklets) {
            for (int t = 0; t < sc.t_obs; ++t) keys.emplace(tr.id, sc.window_start + t);
        }
    }
    return keys;
}

AnnotationIndex render_annotations(const RecordingIndex& index, const std::set<AnnotationKey>& keys,
                                   const RenderSettings& render, int jobs) {
    render.camera.validate();
    render.body.validate();
    const std::vector<AnnotationKey> todo(keys.begin(), keys.end());
    std::vector<EgoFrameAnnotation> out(todo.size());
    parallel_for(todo.size(), jobs, [&](std::size_t i) {
        const auto [ego, step] = todo[i];
        auto pose = index.pose_of(ego, step);
        if (!pose) {
            throw DataIntegrityError("ego " + std::to_string(ego) + " absent at step " +
                                     std::to_string(step) + " of " + index.recording().name);
        }
        out[i] = rasterize_visibility({ego, *pose}, index.agents_at(step), render.camera, render.body,
                                      render.occluders, step);
    });
    AnnotationIndex result;
    for (std::size_t i = 0; i < todo.size(); ++i) result.emplace(todo[i], std::move(out[i]));
    return result;
}

VisibilitySet compute_visibility(const RecordingIndex& index, const AnnotationIndex& annotations,
                                 AgentId ego, Step window_start, int t_obs,
                                 const VisibilityParams& params) {
    VisibilitySet vs;
    vs.ego_id = ego;
    vs.window_start = window_start;

    std::vector<const EgoFrameAnnotation*> frames(static_cast<std::size_t>(t_obs));
    std::set<AgentId> candidates;
    for (int t = 0; t < t_obs; ++t) {
        auto it = annotations.find({ego, window_start + t});
        if (it == annotations.end()) {
            throw DataIntegrityError("missing annotation for ego " + std::to_string(ego) +
                                     " at step " + std::to_string(window_start + t) + " of " +
                                     index.recording().name);
        }
        frames[static_cast<std::size_t>(t)] = &it->second;
        for (const auto& a : index.agents_at(window_start + t)) {
            if (a.id != ego) candidates.insert(a.id);
        }
    }

    for (AgentId id : candidates) {
        VisibilityMember m;
        m.agent_id = id;
        m.pixels.resize(static_cast<std::size_t>(t_obs), 0);
        int count = 0;
        int run = 0;
        int best_run = 0;
        m.first_visible = -1;
        for (int t = 0; t < t_obs; ++t) {
            const long px = frames[static_cast<std::size_t>(t)]->pixels_of(id);
            m.pixels[static_cast<std::size_t>(t)] = px;
            if (px >= params.min_pixels) {
                ++count;
                best_run = std::max(best_run, ++run);
                if (m.first_visible < 0) m.first_visible = t;
                m.last_visible = t;
            } else {
                run = 0;
            }
        }
        const int score = params.contiguous ? best_run : count;
        if (score >= params.min_steps && count > 0) vs.members.push_back(std::move(m));
    }
    return vs;
}

std::vector<Scene> build_fpv_gt_scenes(const Scene& bev, const RecordingIndex& index,
                                       const AnnotationIndex& annotations,
                                       const VisibilityParams& params) {
    std::vector<Scene> out;
    const int len = bev.window_len();
    for (const auto& ego_tr : bev.tracklets) {
        const AgentId ego = ego_tr.id;
        VisibilitySet vs =
            compute_visibility(index, annotations, ego, bev.window_start, bev.t_obs, params);

        Scene sc;
        sc.fold = bev.fold;
        sc.recording = bev.recording;
        sc.window_start = bev.window_start;
        sc.t_obs = bev.t_obs;
        sc.t_pred = bev.t_pred;
        sc.variant = Variant::kFpvGt;
        sc.ego_id = ego;
        sc.ego_only = vs.members.empty();
        sc.tracklets.push_back(ego_tr);

        std::vector<AgentId> truth_ids{ego};
        for (const auto& m : vs.members) {
            Tracklet tr;
            tr.id = m.agent_id;
            tr.gt_id = m.agent_id;
            for (int t = 0; t < bev.t_obs; ++t) {
                if (m.pixels[static_cast<std::size_t>(t)] < params.min_pixels) continue;
                tr.obs.push_back({t, index.pose_of(m.agent_id, bev.window_start + t)->position()});
            }
            sc.tracklets.push_back(std::move(tr));
            truth_ids.push_back(m.agent_id);
        }
        std::sort(truth_ids.begin(), truth_ids.end());
        for (AgentId id : truth_ids) {
            TruthFuture f{id, {}};
            for (int t = bev.t_obs; t < len; ++t) {
                if (auto p = index.pose_of(id, bev.window_start + t)) f.future.push_back({t, p->position()});
            }
            sc.truth.push_back(std::move(f));
        }
        out.push_back(std::move(sc));
    }
    return out;
}

VariantCounts count_scenes(std::span<const Scene> scenes) {
    VariantCounts c;
    c.scenes = scenes.size();
    for (const auto& s : scenes) c.tracklets += s.tracklets.size();
    return c;
}

FoldStatistics fold_statistics(const std::string& fold,
                               const std::map<Variant, std::vector<Scene>>& scenes_by_variant) {
    FoldStatistics st;
    st.fold = fold;
    for (const auto& [v, scenes] : scenes_by_variant) st.by_variant[v] = count_scenes(scenes);
    return st;
}

std::string statistics_csv(std::span<const FoldStatistics> rows) {
    std::ostringstream os;
    os << "fold,scenes,bev,fpv_gt,fpv_noisy,fpv_det\n";
    for (const auto& r : rows) {
        os << r.fold << ',';
        if (auto it = r.by_variant.find(Variant::kBev); it != r.by_variant.end()) os << it->second.scenes;
        for (Variant v : kAllVariants) {
            os << ',';
            if (auto it = r.by_variant.find(v); it != r.by_variant.end()) os << it->second.tracklets;
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace fpvbench
