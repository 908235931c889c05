// Displacement errors, trajectory mAP, detection AP and AMOTA/AMOTP.

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpvbench/perceive.hpp"
#include "fpvbench/predict.hpp"

namespace fpvbench {

struct AdeFde {
    double ade{0};
    double fde{0};
};

AdeFde ade_fde(std::span<const Vec2> pred, std::span<const Vec2> gt);

struct RankedItem {
    double confidence{0};
    bool tp{false};
};

/// All-point interpolated AP. Precision/recall points are taken at each
/// distinct confidence, so tied items enter the curve together.
double average_precision(std::span<const RankedItem> items, std::size_t num_gt);

// ---------------------------------------------------------------------------
// Trajectory prediction.

struct MetricConfig {
    double tau_ade{2.0};
    bool independent_min{false};
    double iou_min{0.5};
    int recall_levels{40};
    double amotp_penalty{2.0};  // meters, for recall levels never reached
    void validate() const;
};

struct SceneScore {
    std::vector<RankedItem> items;  // one per scored prediction
    std::size_t num_targets{0};
    std::vector<MinOverK> errors;   // predictions that map to a target
};

/// Greedy matching in ascending min-over-K ADE. Predictions without a
/// ground-truth identity are false positives ranked by their distance to
/// the closest target; predictions of agents without a complete future are
/// not scored.
SceneScore score_scene(const Scene& scene, std::span<const PredictionSet> predictions, const MetricConfig& cfg);

/// Pooled AP over all scenes.
double trajectory_map(std::span<const SceneScore> scenes);
double trajectory_map(std::span<const Scene> scenes, std::span<const std::vector<PredictionSet>> predictions,
                      double tau_ade);

// ---------------------------------------------------------------------------
// Detection.

double iou_2d(const PixelRect& a, const PixelRect& b) noexcept;

struct ApFrame {
    std::vector<double> scores;  // per detection
    std::size_t num_gt{0};
    Eigen::MatrixXd iou;         // detections x ground truth
};

/// Greedy descending-score matching: a detection claims the unclaimed
/// ground-truth box it overlaps most, if that IoU reaches iou_min.
double detection_ap(std::span<const ApFrame> frames, double iou_min = 0.5);

// ---------------------------------------------------------------------------
// Tracking.

struct MotCounts {
    long long gt{0};
    long long tp{0};
    long long fp{0};
    long long fn{0};
    long long ids{0};
    double dist_sum{0};

    MotCounts& operator+=(const MotCounts& o) noexcept;
    MotCounts& operator-=(const MotCounts& o) noexcept;
};

/// CLEAR-MOT counts using only tracks whose score is >= min_score.
/// Correspondences from the previous frame are kept while their IoU stays
/// above threshold; the rest are assigned optimally on BEV IoU.
MotCounts clear_mot(const TrackingSequence& seq, double min_score, double iou_min);

struct AmotaResult {
    double amota{0};
    double amotp{0};
    std::vector<double> motar;  // per recall level, ascending recall
};

double motar(const MotCounts& c, double recall) noexcept;

AmotaResult amota_amotp(std::span<const TrackingSequence> sequences, const MetricConfig& cfg);

// ---------------------------------------------------------------------------
// Reports.

struct TrackingMetrics {
    double amota{0};
    double amotp{0};
    double ap2d{0};
    double apbev{0};
};

struct EvalReport {
    std::string algorithm;
    std::string fold;  // "ALL" for the fold-averaged row
    Variant variant{Variant::kBev};
    bool present{true};
    double ade{0};
    double fde{0};
    double map{0};
    std::size_t predictions{0};
    std::size_t targets{0};
    std::optional<TrackingMetrics> tracking;
};

inline constexpr std::string_view kAllFolds = "ALL";

EvalReport evaluate_predictions(const std::string& algorithm, const std::string& fold, Variant variant,
                                std::span<const Scene> scenes,
                                std::span<const std::vector<PredictionSet>> predictions,
                                const MetricConfig& cfg);

/// Report row from already-scored scenes; `predictions` is the number of
/// prediction sets behind them.
EvalReport summarize_scores(const std::string& algorithm, const std::string& fold, Variant variant,
                            std::span<const SceneScore> scores, std::size_t predictions);

/// Fills the (algorithm x fold x variant) grid, marking missing cells as
/// absent, and appends one fold-averaged row per (algorithm, variant).
std::vector<EvalReport> transfer_evaluate(std::span<const EvalReport> reports,
                                          std::span<const std::string> algorithms,
                                          std::span<const std::string> folds,
                                          std::span<const Variant> variants);

std::string report_csv(std::span<const EvalReport> reports);

}  // namespace fpvbench
