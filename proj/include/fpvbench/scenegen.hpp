// Sliding-window scenes and the BEV / FPV-GT dataset variants.

#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fpvbench/common.hpp"
#include "fpvbench/egocam.hpp"
#include "fpvbench/trajio.hpp"

namespace fpvbench {

inline constexpr int kDefaultObsSteps = 8;
inline constexpr int kDefaultPredSteps = 12;

// Position at a window-relative step (0 = window start).
struct TimedPos {
    int t{0};
    Vec2 p;
    friend bool operator==(const TimedPos&, const TimedPos&) = default;
};

struct Tracklet {
    AgentId id{0};                 // tracker / synthetic ids are negative
    std::optional<AgentId> gt_id;  // ground-truth identity, if any
    std::vector<TimedPos> obs;     // steps within [0, t_obs)
    double score{1.0};
    friend bool operator==(const Tracklet&, const Tracklet&) = default;
};

// Ground-truth future of one agent over [t_obs, t_obs + t_pred). Partial
// when the agent leaves the recording before the window ends.
struct TruthFuture {
    AgentId agent_id{0};
    std::vector<TimedPos> future;
    friend bool operator==(const TruthFuture&, const TruthFuture&) = default;
};

enum class RemovalReason { kTrackletDrop, kNoObservations };

struct RemovedTracklet {
    AgentId agent_id{0};
    RemovalReason reason{RemovalReason::kTrackletDrop};
    friend bool operator==(const RemovedTracklet&, const RemovedTracklet&) = default;
};

struct SceneKey {
    std::string fold;
    std::string recording;
    Step window_start{0};
    std::optional<AgentId> ego_id;
    auto operator<=>(const SceneKey&) const = default;
};

struct Scene {
    std::string fold;
    std::string recording;
    Step window_start{0};
    int t_obs{kDefaultObsSteps};
    int t_pred{kDefaultPredSteps};
    Variant variant{Variant::kBev};
    std::optional<AgentId> ego_id;
    bool ego_only{false};
    std::vector<Tracklet> tracklets;   // ego first, then ascending id
    std::vector<TruthFuture> truth;    // ascending agent_id
    std::vector<RemovedTracklet> removed;

    [[nodiscard]] int window_len() const noexcept { return t_obs + t_pred; }
    [[nodiscard]] SceneKey key() const { return {fold, recording, window_start, ego_id}; }
    [[nodiscard]] const TruthFuture* truth_of(AgentId id) const noexcept;
    [[nodiscard]] bool is_target(AgentId id) const noexcept;
    /// Agents with a complete future: the set every prediction is scored against.
    [[nodiscard]] std::vector<const TruthFuture*> targets() const;
    friend bool operator==(const Scene&, const Scene&) = default;
};

/// Per-step, id-sorted agent poses of one recording.
class RecordingIndex {
public:
    explicit RecordingIndex(const Recording& rec);

    [[nodiscard]] Step min_step() const noexcept { return min_step_; }
    [[nodiscard]] Step max_step() const noexcept { return max_step_; }
    [[nodiscard]] std::span<const AgentPose> agents_at(Step s) const noexcept;
    [[nodiscard]] std::optional<Pose2> pose_of(AgentId id, Step s) const noexcept;
    [[nodiscard]] const Recording& recording() const noexcept { return *rec_; }

private:
    const Recording* rec_;
    Step min_step_{0};
    Step max_step_{-1};
    std::vector<std::vector<AgentPose>> by_step_;
};

std::vector<Step> enumerate_windows(const RecordingIndex& index, int window_len);

struct WindowRef {
    std::size_t recording{0};
    Step start{0};
    friend bool operator==(const WindowRef&, const WindowRef&) = default;
};
std::vector<WindowRef> enumerate_windows(const Fold& fold, int window_len);

struct SceneShape {
    int t_obs{kDefaultObsSteps};
    int t_pred{kDefaultPredSteps};
};

/// Keeps the agents present on every step of the window; nullopt when fewer
/// than two remain.
std::optional<Scene> build_bev_scene(const std::string& fold, const RecordingIndex& index,
                                     Step window_start, SceneShape shape = {});

using AnnotationKey = std::pair<AgentId, Step>;  // (ego, absolute step)
using AnnotationIndex = std::map<AnnotationKey, EgoFrameAnnotation>;

/// (ego, step) pairs needed to turn the given BEV scenes into FPV scenes.
std::set<AnnotationKey> required_annotations(std::span<const Scene> bev_scenes);

struct RenderSettings {
    CameraModel camera;
    BodyModel body;
    std::vector<StaticBox> occluders;
};

AnnotationIndex render_annotations(const RecordingIndex& index, const std::set<AnnotationKey>& keys,
                                   const RenderSettings& render, int jobs = 1);

struct VisibilityParams {
    long min_pixels{100};  // P
    int min_steps{3};      // k
    bool contiguous{true};
};

struct VisibilityMember {
    AgentId agent_id{0};
    int first_visible{0};
    int last_visible{0};
    std::vector<long> pixels;  // per observation step
};

struct VisibilitySet {
    AgentId ego_id{0};
    Step window_start{0};
    std::vector<VisibilityMember> members;
};

/// Members of the ego's view over the observation phase of the window.
VisibilitySet compute_visibility(const RecordingIndex& index, const AnnotationIndex& annotations,
                                 AgentId ego, Step window_start, int t_obs,
                                 const VisibilityParams& params);

/// One FPV-GT scene per full-length agent of the BEV scene.
std::vector<Scene> build_fpv_gt_scenes(const Scene& bev, const RecordingIndex& index,
                                       const AnnotationIndex& annotations,
                                       const VisibilityParams& params);

struct VariantCounts {
    std::size_t scenes{0};
    std::size_t tracklets{0};
    friend bool operator==(const VariantCounts&, const VariantCounts&) = default;
};

VariantCounts count_scenes(std::span<const Scene> scenes);

struct FoldStatistics {
    std::string fold;
    std::map<Variant, VariantCounts> by_variant;  // absent variants are missing
};

FoldStatistics fold_statistics(const std::string& fold,
                               const std::map<Variant, std::vector<Scene>>& scenes_by_variant);

/// One row per fold: fold,scenes,bev,fpv_gt,fpv_noisy,fpv_det (tracklet counts).
std::string statistics_csv(std::span<const FoldStatistics> rows);

}  // namespace fpvbench
