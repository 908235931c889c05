// Head-mounted pinhole camera and per-frame agent visibility.
//
// Camera frame: +z forward along the ego heading, +x right, +y down. Agents
// are upright cylinders whose silhouette is approximated by the projected
// bounding rectangle; visibility is decided by front-to-back coverage at
// full image resolution.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fpvbench/common.hpp"

namespace fpvbench {

struct CameraModel {
    double height_m{1.6};
    double focal_mm{18.0};
    double sensor_w_mm{36.0};
    double sensor_h_mm{24.0};
    int image_w_px{640};
    int image_h_px{480};
    std::optional<Vec2> principal;  // defaults to the image center

    // Vertical sensor fit with square pixels.
    [[nodiscard]] double focal_px() const noexcept { return focal_mm / sensor_h_mm * image_h_px; }
    [[nodiscard]] Vec2 principal_point() const noexcept {
        return principal.value_or(Vec2{image_w_px / 2.0, image_h_px / 2.0});
    }
    [[nodiscard]] double vertical_fov_rad() const noexcept {
        return 2.0 * std::atan(sensor_h_mm / (2.0 * focal_mm));
    }
    [[nodiscard]] double horizontal_fov_rad() const noexcept {
        return 2.0 * std::atan(image_w_px / (2.0 * focal_px()));
    }
    void validate() const;
};

struct BodyModel {
    double radius_m{0.25};
    double height_m{1.7};
    void validate() const;
};

struct StaticBox {
    Vec3 min;
    Vec3 max;
};

inline constexpr double kDepthEpsilon = 0.01;

struct PixelRect {
    double u_min{0};
    double v_min{0};
    double u_max{0};
    double v_max{0};
    [[nodiscard]] double width() const noexcept { return u_max - u_min; }
    [[nodiscard]] double height() const noexcept { return v_max - v_min; }
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

struct CameraPose {
    double x{0};
    double y{0};
    double z{0};
    double relative_yaw{0};
};

struct VisibleAgent {
    AgentId agent_id{0};
    Pose2 world_pose;
    CameraPose cam_pose;  // of the agent's ground contact point
    long pixel_count{0};
    PixelRect bbox2d;     // clipped to the image
};

struct EgoFrameAnnotation {
    AgentId ego_id{0};
    Step step{0};
    Pose2 ego_pose;
    std::vector<VisibleAgent> visible;  // ascending agent_id

    [[nodiscard]] const VisibleAgent* find(AgentId id) const noexcept;
    [[nodiscard]] long pixels_of(AgentId id) const noexcept;
};

struct AgentPose {
    AgentId id{0};
    Pose2 pose;
};

Vec3 world_to_camera(const Pose2& ego, const CameraModel& camera, const Vec3& point) noexcept;

/// Returns nullopt when the point is at or behind the near plane.
std::optional<Vec2> project(const CameraModel& camera, const Vec3& p_cam) noexcept;

/// Unclipped image rectangle of an upright body at `p_cam` (its ground
/// contact point in camera coordinates); nullopt behind the near plane.
std::optional<PixelRect> body_rectangle(const CameraModel& camera, const BodyModel& body,
                                        const Vec3& p_cam) noexcept;

std::optional<PixelRect> clip_to_image(const PixelRect& r, const CameraModel& camera) noexcept;

/// Bounding rectangle of the near-plane-clipped box, plus its nearest depth.
struct ProjectedBox {
    PixelRect rect;
    double depth{0};
};
std::optional<ProjectedBox> project_box(const Pose2& ego, const CameraModel& camera,
                                        const StaticBox& box) noexcept;

/// Pixels (i, j) whose centers (i + 0.5, j + 0.5) lie in [u_min, u_max) x
/// [v_min, v_max), clipped to the image.
struct PixelSpan {
    int col_begin{0};
    int col_end{0};
    int row_begin{0};
    int row_end{0};
    [[nodiscard]] bool empty() const noexcept { return col_begin >= col_end || row_begin >= row_end; }
    [[nodiscard]] long area() const noexcept {
        return empty() ? 0L : static_cast<long>(col_end - col_begin) * (row_end - row_begin);
    }
};
PixelSpan pixel_span(const PixelRect& r, const CameraModel& camera) noexcept;

/// Full-resolution occupancy stored as sorted disjoint column runs per row.
class CoverageBuffer {
public:
    CoverageBuffer(int width, int height);
    /// Marks the span as covered and returns how many pixels were newly covered.
    long cover(const PixelSpan& span);
    [[nodiscard]] long covered() const noexcept { return covered_; }

private:
    int width_;
    std::vector<std::vector<std::pair<int, int>>> rows_;
    long covered_{0};
};

EgoFrameAnnotation rasterize_visibility(const AgentPose& ego, std::span<const AgentPose> others,
                                        const CameraModel& camera, const BodyModel& body,
                                        std::span<const StaticBox> occluders, Step step = 0);

}  // namespace fpvbench
