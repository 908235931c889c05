// FPV-Det: a parametric detector feeding a Kalman tracker that associates
// detections to tracks by bird's-eye-view IoU.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fpvbench/egocam.hpp"
#include "fpvbench/rng.hpp"
#include "fpvbench/scenegen.hpp"

namespace fpvbench {

struct BevBox {
    double cx{0};
    double cy{0};
    double w{0.5};  // lateral extent
    double l{0.5};  // extent along yaw
    double yaw{0};
};

/// Intersection over union of two rotated ground-plane rectangles.
double bev_iou(const BevBox& a, const BevBox& b);

struct Detection {
    Step step{0};  // absolute step
    Vec3 position;
    double yaw{0};
    BevBox box;
    double score{1.0};
    std::optional<PixelRect> bbox2d;
    std::optional<AgentId> source;  // audit only; the tracker never reads it
};

struct DetectorConfig {
    double p_miss_base{0.05};
    double p_miss_dist_coeff{0.01};  // per meter beyond miss_free_range_m
    double miss_free_range_m{5.0};
    double sigma_range_abs{0.0};     // meters
    double sigma_range_rel{0.05};    // meters per meter of distance
    double sigma_bearing{0.5 * kPi / 180.0};
    double sigma_yaw{0.3};
    double false_positives_per_frame{0.1};
    double ghost_min_range_m{1.0};
    double ghost_max_range_m{15.0};
    double score_base{0.9};
    double score_decay_per_m{0.02};
    double score_sigma{0.05};
    double ghost_score_mean{0.3};
    double footprint_m{0.5};
    long min_pixels{100};
    std::uint64_t seed{0};

    void validate() const;
    /// All noise, misses and ghosts disabled.
    static DetectorConfig noise_free();
};

double miss_probability(const DetectorConfig& cfg, double distance) noexcept;

/// Noisy measurement of one agent seen from `ego` (misses and ghosts aside).
Detection measure_agent(const Pose2& ego, const Pose2& agent, const DetectorConfig& cfg,
                        const CameraModel& camera, const BodyModel& body, std::mt19937_64& rng);

std::vector<Detection> synth_detect(const EgoFrameAnnotation& annotation, const DetectorConfig& cfg,
                                    const CameraModel& camera, const BodyModel& body,
                                    std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Kalman filter over (x, y, z, yaw, vx, vy); observations are (x, y, z, yaw).

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

struct TrackState {
    int track_id{0};
    Vec6 mean{Vec6::Zero()};
    Mat6 covariance{Mat6::Zero()};
    int age{0};
    int misses{0};
    int hits{0};
};

TrackState kalman_predict(const TrackState& state, double dt, const Mat6& Q);
TrackState kalman_update(const TrackState& state, const Vec4& observation, const Mat4& R);
TrackState kalman_update(const TrackState& state, const Detection& det, const Mat4& R);

/// Smallest eigenvalue of the symmetric part.
double min_eigenvalue(const Eigen::MatrixXd& m);

// ---------------------------------------------------------------------------
// Association.

enum class AssignmentMethod { kOptimal, kGreedy };

/// Maximum-weight bipartite matching; entries <= 0 are never matched.
/// Returns, for each row, the matched column or -1.
std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weights, AssignmentMethod method);

struct Association {
    std::vector<std::pair<std::size_t, std::size_t>> matches;  // (track, detection)
    std::vector<std::size_t> unmatched_tracks;
    std::vector<std::size_t> unmatched_detections;
};

Association associate(std::span<const BevBox> tracks, std::span<const BevBox> detections,
                      double iou_min, AssignmentMethod method = AssignmentMethod::kOptimal);

// ---------------------------------------------------------------------------
// Tracking.

struct TrackerConfig {
    double dt{0.4};
    double iou_min{0.1};
    int min_hits{2};
    int max_misses{2};
    AssignmentMethod method{AssignmentMethod::kOptimal};
    // Tracks whose velocity has not been observed yet fall back to
    // center-distance association within this radius.
    double birth_gate_m{1.0};
    // A new track takes R for its observed components.
    double init_vel_var{2.0};
    double footprint_m{0.5};
    Mat6 Q{Mat6::Identity() * 1e-2};
    Mat4 R{Mat4::Identity() * 1e-2};
    // Tracklet -> ground-truth identity assignment.
    double identity_max_mean_dist_m{1.0};

    void validate() const;
};

struct TrackPoint {
    int t{0};  // window-relative
    Vec6 state;
    double score{0};
};

struct TrackHistory {
    int track_id{0};
    bool confirmed{false};
    std::vector<TrackPoint> points;  // matched steps only
    [[nodiscard]] double mean_score() const noexcept;
};

class MultiObjectTracker {
public:
    explicit MultiObjectTracker(TrackerConfig cfg);

    /// Processes one frame of detections at window-relative step t.
    void step(int t, std::span<const Detection> detections);

    /// Every track that was ever confirmed, ascending id.
    [[nodiscard]] std::vector<TrackHistory> confirmed_tracks() const;
    [[nodiscard]] std::span<const TrackState> live_tracks() const noexcept { return live_; }

private:
    struct Live {
        std::size_t history{0};
        int consecutive_hits{0};
    };
    BevBox box_of(const Vec6& s) const noexcept;
    void spawn(int t, const Detection& det);

    TrackerConfig cfg_;
    std::vector<TrackState> live_;
    std::vector<Live> meta_;  // parallel to live_
    std::vector<TrackHistory> history_;
    int next_id_{1};
};

struct TrackingObject {
    AgentId id{0};
    BevBox box;
    double score{1.0};
};

struct TrackingFrame {
    std::vector<TrackingObject> truth;
    std::vector<TrackingObject> tracks;
};

using TrackingSequence = std::vector<TrackingFrame>;

/// Ground-truth identity by smallest mean distance over co-present steps.
std::optional<AgentId> assign_identity(const Tracklet& tracklet, const RecordingIndex& index,
                                       Step window_start, std::optional<AgentId> exclude,
                                       double max_mean_dist);

struct PerceptionResult {
    Scene scene;               // variant FPV-Det
    TrackingSequence tracking; // per observation step
    std::vector<std::vector<Detection>> detections;  // per observation step
};

/// Runs detector and tracker over the observation phase of an FPV-GT scene.
/// `detections[t]` are the frame's detections at window step t.
PerceptionResult track_scene(const Scene& fpv_gt, const RecordingIndex& index,
                             const AnnotationIndex& annotations,
                             std::span<const std::vector<Detection>> detections,
                             const TrackerConfig& tracker, long min_pixels);

/// Detector RNG stream for one (ego, absolute step) frame.
StreamKey detection_stream(std::uint64_t seed, const std::string& fold, const std::string& recording,
                           AgentId ego, Step step);

struct NoiseCovariances {
    Mat6 Q{Mat6::Zero()};
    Mat4 R{Mat4::Zero()};
    std::size_t process_samples{0};
    std::size_t observation_samples{0};
};

inline constexpr std::size_t kMinCovarianceSamples = 100;

/// Q from constant-velocity residuals of ground-truth tracks, R from the
/// detector's measurement error against ground truth. Only pass training data.
NoiseCovariances estimate_covariances(std::span<const Recording> training, const DetectorConfig& det,
                                      const CameraModel& camera, const BodyModel& body, double dt,
                                      double max_range_m = 20.0);

}  // namespace fpvbench
