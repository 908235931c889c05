// Reading top-down trajectory files and turning them into contiguous agent
// tracks with smoothed gaze headings.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fpvbench/common.hpp"

namespace fpvbench {

struct RawRecord {
    std::int64_t frame_id{0};
    AgentId agent_id{0};
    double x{0};
    double y{0};
    friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

struct AgentTrack {
    AgentId agent_id{0};
    int handle{0};  // unique per recording; gap splits share agent_id
    Step start_step{0};
    std::vector<Vec2> positions;
    std::vector<double> headings;

    [[nodiscard]] Step end_step() const noexcept {
        return start_step + static_cast<Step>(positions.size());
    }
    [[nodiscard]] bool covers(Step s) const noexcept { return s >= start_step && s < end_step(); }
    [[nodiscard]] Pose2 pose_at(Step s) const {
        const auto i = static_cast<std::size_t>(s - start_step);
        return {positions[i].x, positions[i].y, headings[i]};
    }
    friend bool operator==(const AgentTrack&, const AgentTrack&) = default;
};

// One input file on a shared step timeline.
struct Recording {
    std::string name;
    std::int64_t frame_base{0};
    std::int64_t frame_stride{1};
    std::vector<AgentTrack> tracks;

    [[nodiscard]] Step min_step() const noexcept;
    [[nodiscard]] Step max_step() const noexcept;  // inclusive; -1 when empty
};

struct Fold {
    std::string name;
    double step_period{0.4};
    std::vector<Recording> recordings;
};

/// Parses whitespace-separated `frame_id agent_id x y` rows. Blank lines are
/// skipped. Ids must be integral (a trailing ".0" is accepted).
std::vector<RawRecord> parse_trajectory_file(std::istream& in);
std::vector<RawRecord> parse_trajectory_text(std::string_view text);

/// GCD of the per-agent frame deltas; falls back to the deltas between
/// distinct frames when no agent appears twice. Returns 1 for <2 frames.
std::int64_t infer_frame_stride(std::span<const RawRecord> records);

/// Groups records into contiguous tracks (split at gaps) on the step
/// timeline `(frame - frame_base) / stride`. Headings are left at zero.
Recording build_recording(std::span<const RawRecord> records, std::string name = {});
std::vector<AgentTrack> build_tracks(std::span<const RawRecord> records);

inline constexpr int kDefaultSlerpWindow = 3;
inline constexpr double kStationaryEps = 1e-6;

/// Raw heading is the direction of travel to the next step; smoothing is a
/// centered running slerp mean over `slerp_window` steps.
AgentTrack derive_headings(AgentTrack track, int slerp_window = kDefaultSlerpWindow);
std::vector<double> raw_headings(std::span<const Vec2> positions);
std::vector<double> smooth_headings(std::span<const double> raw, int slerp_window);

/// Shortest-arc interpolation between two angles.
double slerp_angle(double from, double to, double t) noexcept;

/// Inverse of build_recording (records sorted by frame, then agent).
std::vector<RawRecord> to_records(const Recording& rec);
std::string format_records(std::span<const RawRecord> records);

/// Reads a file, builds the recording and derives headings.
Recording load_recording(const std::string& path, int slerp_window = kDefaultSlerpWindow);

}  // namespace fpvbench
