// Synthetic inputs and brute-force reference implementations shared by the
// unit tests and the acceptance run.

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fpvbench/metrics.hpp"
#include "fpvbench/trajio.hpp"

namespace fpvbench::testing {

// Agents walking in a rigid formation along +x at constant speed. Offsets are
// (ahead, lateral) in meters; raw frames use stride 10.
struct Formation {
    std::vector<Vec2> offsets{{0.0, 0.0}, {2.5, 1.2}, {5.0, -1.0}, {7.5, 2.7}, {10.0, -2.2}};
    double speed_mps{1.3};
    double step_s{0.4};
    int steps{40};
    Vec2 origin{0.0, 0.0};
    AgentId first_id{1};
};

std::vector<RawRecord> formation_records(const Formation& f);

/// Writes `<dir>/<name>.txt` for every recording and a manifest with one
/// fold per recording. Returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const std::vector<std::pair<std::string, std::vector<RawRecord>>>& folds);

/// FPV-GT scene with an ego (id 1) and `others` fully observed agents.
Scene synthetic_fpv_scene(int index, int others, int t_obs = 8);

// ---------------------------------------------------------------------------
// Oracles. Each one enumerates every confidence threshold explicitly.

/// AP from the precision/recall pair at every distinct threshold, with the
/// precision envelope taken as a max over all points of higher recall.
double ap_by_thresholds(const std::vector<RankedItem>& items, std::size_t num_gt);

/// Detection AP: at each threshold the kept detections are re-matched from
/// scratch in descending-score order.
double detection_ap_oracle(const std::vector<ApFrame>& frames, double iou_min);

struct TrajInstance {
    Scene scene;
    std::vector<PredictionSet> predictions;
};

/// Trajectory mAP with the per-target "best ADE wins" rule written directly.
double trajectory_map_oracle(const std::vector<TrajInstance>& instances, double tau_ade);

/// AMOTA/AMOTP by evaluating CLEAR-MOT counts at every distinct threshold.
AmotaResult amota_oracle(const std::vector<TrackingSequence>& sequences, const MetricConfig& cfg);

// Random instances, at most `max_items` detections / targets each.
std::vector<RankedItem> random_ranked(std::mt19937_64& g, std::size_t max_items, std::size_t* num_gt);
std::vector<ApFrame> random_ap_frames(std::mt19937_64& g, std::size_t max_items);
std::vector<TrajInstance> random_traj_instances(std::mt19937_64& g, std::size_t max_items);
std::vector<TrackingSequence> random_tracking(std::mt19937_64& g, std::size_t max_items);

}  // namespace fpvbench::testing
