#include "fpvbench/egocam.hpp"

#include <algorithm>
#include <array>

namespace fpvbench {

void CameraModel::validate() const {
    if (!(focal_mm > 0 && sensor_w_mm > 0 && sensor_h_mm > 0)) {
        throw ConfigError("camera: focal length and sensor size must be positive");
    }
    if (image_w_px <= 0 || image_h_px <= 0) throw ConfigError("camera: image size must be positive");
}

void BodyModel::validate() const {
    if (!(radius_m > 0 && height_m > 0)) throw ConfigError("body: radius and height must be positive");
}

const VisibleAgent* EgoFrameAnnotation::find(AgentId id) const noexcept {
    auto it = std::lower_bound(visible.begin(), visible.end(), id,
                               [](const VisibleAgent& v, AgentId x) { return v.agent_id < x; });
    return (it != visible.end() && it->agent_id == id) ? &*it : nullptr;
}

long EgoFrameAnnotation::pixels_of(AgentId id) const noexcept {
    const VisibleAgent* v = find(id);
    return v ? v->pixel_count : 0;
}

Vec3 world_to_camera(const Pose2& ego, const CameraModel& camera, const Vec3& point) noexcept {
    const double c = std::cos(ego.heading);
    const double s = std::sin(ego.heading);
    const double dx = point.x - ego.x;
    const double dy = point.y - ego.y;
    const double dz = point.z - camera.height_m;
    return {dx * s - dy * c, -dz, dx * c + dy * s};
}

std::optional<Vec2> project(const CameraModel& camera, const Vec3& p) noexcept {
    if (p.z <= kDepthEpsilon) return std::nullopt;
    const double f = camera.focal_px();
    const Vec2 c = camera.principal_point();
    return Vec2{c.x + f * p.x / p.z, c.y + f * p.y / p.z};
}

std::optional<PixelRect> body_rectangle(const CameraModel& camera, const BodyModel& body,
                                        const Vec3& p) noexcept {
    if (p.z <= kDepthEpsilon) return std::nullopt;
    const double f = camera.focal_px();
    const Vec2 c = camera.principal_point();
    return PixelRect{c.x + f * (p.x - body.radius_m) / p.z, c.y + f * (p.y - body.height_m) / p.z,
                     c.x + f * (p.x + body.radius_m) / p.z, c.y + f * p.y / p.z};
}

std::optional<PixelRect> clip_to_image(const PixelRect& r, const CameraModel& camera) noexcept {
    PixelRect out{std::max(r.u_min, 0.0), std::max(r.v_min, 0.0),
                  std::min(r.u_max, static_cast<double>(camera.image_w_px)),
                  std::min(r.v_max, static_cast<double>(camera.image_h_px))};
    if (out.u_min >= out.u_max || out.v_min >= out.v_max) return std::nullopt;
    return out;
}

std::optional<ProjectedBox> project_box(const Pose2& ego, const CameraModel& camera,
                                        const StaticBox& box) noexcept {
    std::array<Vec3, 8> corners;
    for (int i = 0; i < 8; ++i) {
        const Vec3 w{(i & 1) ? box.max.x : box.min.x, (i & 2) ? box.max.y : box.min.y,
                     (i & 4) ? box.max.z : box.min.z};
        corners[i] = world_to_camera(ego, camera, w);
    }
    std::vector<Vec3> pts;
    for (const auto& p : corners) {
        if (p.z >= kDepthEpsilon) pts.push_back(p);
    }
    // Edges cut by the near plane contribute their intersection points.
    for (int a = 0; a < 8; ++a) {
        for (int bit = 1; bit < 8; bit <<= 1) {
            const int b = a | bit;
            if (b == a) continue;
            const Vec3& p = corners[a];
            const Vec3& q = corners[b];
            if ((p.z - kDepthEpsilon) * (q.z - kDepthEpsilon) < 0) {
                const double t = (kDepthEpsilon - p.z) / (q.z - p.z);
                pts.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y), kDepthEpsilon});
            }
        }
    }
    if (pts.empty()) return std::nullopt;
    const double f = camera.focal_px();
    const Vec2 c = camera.principal_point();
    ProjectedBox out{{1e300, 1e300, -1e300, -1e300}, 1e300};
    for (const auto& p : pts) {
        const double u = c.x + f * p.x / p.z;
        const double v = c.y + f * p.y / p.z;
        out.rect.u_min = std::min(out.rect.u_min, u);
        out.rect.u_max = std::max(out.rect.u_max, u);
        out.rect.v_min = std::min(out.rect.v_min, v);
        out.rect.v_max = std::max(out.rect.v_max, v);
        out.depth = std::min(out.depth, p.z);
    }
    return out;
}

namespace {

int first_center_at_or_after(double edge, int limit) noexcept {
    const double k = std::ceil(edge - 0.5);
    return static_cast<int>(std::clamp(k, 0.0, static_cast<double>(limit)));
}

}  // namespace

PixelSpan pixel_span(const PixelRect& r, const CameraModel& camera) noexcept {
    return {first_center_at_or_after(r.u_min, camera.image_w_px),
            first_center_at_or_after(r.u_max, camera.image_w_px),
            first_center_at_or_after(r.v_min, camera.image_h_px),
            first_center_at_or_after(r.v_max, camera.image_h_px)};
}

CoverageBuffer::CoverageBuffer(int width, int height)
    : width_(width), rows_(static_cast<std::size_t>(std::max(height, 0))) {}

long CoverageBuffer::cover(const PixelSpan& span) {
    if (span.empty()) return 0;
    long fresh = 0;
    const int a = std::max(span.col_begin, 0);
    const int b = std::min(span.col_end, width_);
    for (int r = span.row_begin; r < span.row_end; ++r) {
        auto& runs = rows_[static_cast<std::size_t>(r)];
        // Runs are sorted and disjoint; find those overlapping or touching [a, b).
        auto lo = std::lower_bound(runs.begin(), runs.end(), a,
                                   [](const std::pair<int, int>& run, int x) { return run.second < x; });
        auto hi = lo;
        int overlap = 0;
        int na = a;
        int nb = b;
        while (hi != runs.end() && hi->first <= b) {
            overlap += std::max(0, std::min(hi->second, b) - std::max(hi->first, a));
            na = std::min(na, hi->first);
            nb = std::max(nb, hi->second);
            ++hi;
        }
        fresh += (b - a) - overlap;
        if (lo == hi) {
            runs.insert(lo, {na, nb});
        } else {
            *lo = {na, nb};
            runs.erase(lo + 1, hi);
        }
    }
    covered_ += fresh;
    return fresh;
}

EgoFrameAnnotation rasterize_visibility(const AgentPose& ego, std::span<const AgentPose> others,
                                        const CameraModel& camera, const BodyModel& body,
                                        std::span<const StaticBox> occluders, Step step) {
    EgoFrameAnnotation ann;
    ann.ego_id = ego.id;
    ann.step = step;
    ann.ego_pose = ego.pose;

    struct Item {
        double depth;
        int kind;  // 0 = occluder, 1 = agent
        std::size_t index;
        PixelRect clipped;
        CameraPose cam;
    };
    std::vector<Item> items;
    items.reserve(others.size() + occluders.size());

    for (std::size_t i = 0; i < others.size(); ++i) {
        const auto& o = others[i];
        if (o.id == ego.id) continue;
        const Vec3 pc = world_to_camera(ego.pose, camera, {o.pose.x, o.pose.y, 0.0});
        auto rect = body_rectangle(camera, body, pc);
        if (!rect) continue;
        auto clipped = clip_to_image(*rect, camera);
        if (!clipped) continue;
        items.push_back({pc.z, 1, i, *clipped,
                         {pc.x, pc.y, pc.z, angle_diff(o.pose.heading, ego.pose.heading)}});
    }
    for (std::size_t i = 0; i < occluders.size(); ++i) {
        auto pb = project_box(ego.pose, camera, occluders[i]);
        if (!pb) continue;
        auto clipped = clip_to_image(pb->rect, camera);
        if (!clipped) continue;
        items.push_back({pb->depth, 0, i, *clipped, {}});
    }
    std::sort(items.begin(), items.end(), [&](const Item& a, const Item& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        if (a.kind != b.kind) return a.kind < b.kind;
        const AgentId ia = a.kind ? others[a.index].id : static_cast<AgentId>(a.index);
        const AgentId ib = b.kind ? others[b.index].id : static_cast<AgentId>(b.index);
        return ia < ib;
    });

    CoverageBuffer buffer(camera.image_w_px, camera.image_h_px);
    for (const auto& it : items) {
        const long fresh = buffer.cover(pixel_span(it.clipped, camera));
        if (it.kind == 1 && fresh >= 1) {
            const auto& o = others[it.index];
            ann.visible.push_back({o.id, o.pose, it.cam, fresh, it.clipped});
        }
    }
    std::sort(ann.visible.begin(), ann.visible.end(),
              [](const VisibleAgent& a, const VisibleAgent& b) { return a.agent_id < b.agent_id; });
    return ann;
}

}  // namespace fpvbench
