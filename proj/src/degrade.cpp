#include "fpvbench/degrade.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <sstream>

#include "fpvbench/rng.hpp"

namespace fpvbench {

namespace {

enum Stage : int { kStageTrackletDrop = 1, kStageBoxDrop = 2, kStageIdSwitch = 3, kStageNoise = 4 };

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("noise: ") + name + " must be in [0, 1]");
}

}  // namespace

void NoiseConfig::validate() const {
    check_probability(p_tracklet_drop, "p_tracklet_drop");
    check_probability(p_box_drop, "p_box_drop");
    check_probability(p_id_switch, "p_id_switch");
    if (!(sigma_pos >= 0.0)) throw ConfigError("noise: sigma_pos must be >= 0");
}

Scene corrupt_scene(const Scene& scene, const NoiseConfig& cfg) {
    cfg.validate();
    if (scene.variant != Variant::kFpvGt) {
        throw DataError("corrupt_scene expects an FPV-GT scene, got " +
                        std::string(to_string(scene.variant)));
    }
    Scene out = scene;
    out.variant = Variant::kFpvNoisy;
    out.tracklets.clear();
    out.removed.clear();

    AgentId next_synthetic = kSyntheticIdBase;
    const AgentId ego = scene.ego_id.value_or(std::numeric_limits<AgentId>::min());
    for (const auto& tr : scene.tracklets) {
        if (tr.id == ego) {
            out.tracklets.push_back(tr);
            continue;
        }
        StreamKey key(cfg.seed);
        key.add(scene.fold).add(scene.recording).add(scene.window_start).add(ego).add(tr.id);

        auto g_drop = StreamKey(key).add(kStageTrackletDrop).engine();
        if (bernoulli(g_drop, cfg.p_tracklet_drop)) {
            out.removed.push_back({tr.id, RemovalReason::kTrackletDrop});
            continue;
        }

        auto g_box = StreamKey(key).add(kStageBoxDrop).engine();
        std::vector<bool> keep(tr.obs.size());
        for (std::size_t i = 0; i < tr.obs.size(); ++i) keep[i] = !bernoulli(g_box, cfg.p_box_drop);

        auto g_switch = StreamKey(key).add(kStageIdSwitch).engine();
        std::vector<Tracklet> pieces;
        bool pending = false;
        bool seen_any = false;
        for (std::size_t i = 0; i < tr.obs.size(); ++i) {
            if (cfg.id_switch_basis == IdSwitchBasis::kVisibleSteps && i > 0 &&
                bernoulli(g_switch, cfg.p_id_switch)) {
                pending = true;
            }
            if (!keep[i]) continue;
            if (cfg.id_switch_basis == IdSwitchBasis::kSurvivingSteps && seen_any &&
                bernoulli(g_switch, cfg.p_id_switch)) {
                pending = true;
            }
            if (!seen_any || pending) {
                Tracklet piece;
                piece.id = seen_any ? next_synthetic-- : tr.id;
                piece.gt_id = tr.gt_id;
                piece.score = tr.score;
                pieces.push_back(std::move(piece));
                pending = false;
            }
            seen_any = true;
            pieces.back().obs.push_back(tr.obs[i]);
        }
        if (pieces.empty()) {
            out.removed.push_back({tr.id, RemovalReason::kNoObservations});
            continue;
        }

        auto g_noise = StreamKey(key).add(kStageNoise).engine();
        if (cfg.sigma_pos > 0.0) {
            std::normal_distribution<double> n(0.0, cfg.sigma_pos);
            for (auto& piece : pieces) {
                for (auto& o : piece.obs) {
                    o.p.x += n(g_noise);
                    o.p.y += n(g_noise);
                }
            }
        }
        for (auto& piece : pieces) out.tracklets.push_back(std::move(piece));
    }
    return out;
}

double NoiseAudit::tracklet_drop_rate() const noexcept {
    return tracklets ? static_cast<double>(tracklets_dropped) / static_cast<double>(tracklets) : 0.0;
}
double NoiseAudit::box_drop_rate() const noexcept {
    return boxes ? static_cast<double>(boxes_dropped) / static_cast<double>(boxes) : 0.0;
}
double NoiseAudit::id_switch_rate() const noexcept {
    return switch_opportunities
               ? static_cast<double>(switches) / static_cast<double>(switch_opportunities)
               : 0.0;
}
double NoiseAudit::sigma_estimate() const noexcept {
    return residuals ? std::sqrt(sum_sq_residual / static_cast<double>(residuals)) : 0.0;
}

NoiseAudit& NoiseAudit::operator+=(const NoiseAudit& o) noexcept {
    tracklets += o.tracklets;
    tracklets_dropped += o.tracklets_dropped;
    boxes += o.boxes;
    boxes_dropped += o.boxes_dropped;
    switch_opportunities += o.switch_opportunities;
    switches += o.switches;
    residuals += o.residuals;
    sum_sq_residual += o.sum_sq_residual;
    return *this;
}

NoiseAudit noise_audit(const Scene& original, const Scene& corrupted) {
    if (original.key() != corrupted.key() || original.variant != Variant::kFpvGt ||
        corrupted.variant != Variant::kFpvNoisy) {
        throw DataError("noise_audit: mismatched scene pairing");
    }
    NoiseAudit a;
    const AgentId ego = original.ego_id.value_or(std::numeric_limits<AgentId>::min());
    std::map<AgentId, std::vector<const Tracklet*>> pieces;
    for (const auto& tr : corrupted.tracklets) {
        if (tr.id != ego && tr.gt_id) pieces[*tr.gt_id].push_back(&tr);
    }
    for (const auto& tr : original.tracklets) {
        if (tr.id == ego) continue;
        ++a.tracklets;
        const bool dropped = std::any_of(corrupted.removed.begin(), corrupted.removed.end(), [&](auto& r) {
            return r.agent_id == tr.id && r.reason == RemovalReason::kTrackletDrop;
        });
        if (dropped) {
            ++a.tracklets_dropped;
            continue;
        }
        a.boxes += tr.obs.size();
        std::size_t surviving = 0;
        const auto& ps = pieces[tr.gt_id.value_or(tr.id)];
        for (const Tracklet* p : ps) {
            for (const auto& o : p->obs) {
                auto src = std::find_if(tr.obs.begin(), tr.obs.end(), [&](auto& x) { return x.t == o.t; });
                if (src == tr.obs.end()) throw DataError("noise_audit: corrupted step absent from source");
                ++surviving;
                const double dx = o.p.x - src->p.x;
                const double dy = o.p.y - src->p.y;
                a.sum_sq_residual += dx * dx + dy * dy;
                a.residuals += 2;
            }
        }
        a.boxes_dropped += tr.obs.size() - surviving;
        if (surviving > 0) {
            a.switch_opportunities += surviving - 1;
            a.switches += ps.size() - 1;
        }
    }
    return a;
}

NoiseAudit noise_audit(std::span<const Scene> originals, std::span<const Scene> corrupted) {
    if (originals.size() != corrupted.size()) throw DataError("noise_audit: scene counts differ");
    NoiseAudit total;
    for (std::size_t i = 0; i < originals.size(); ++i) total += noise_audit(originals[i], corrupted[i]);
    return total;
}

std::string audit_csv(const NoiseAudit& a, const NoiseConfig& cfg) {
    std::ostringstream os;
    os.precision(8);
    os << "quantity,configured,realized,samples\n";
    os << "tracklet_drop," << cfg.p_tracklet_drop << ',' << a.tracklet_drop_rate() << ',' << a.tracklets << '\n';
    os << "box_drop," << cfg.p_box_drop << ',' << a.box_drop_rate() << ',' << a.boxes << '\n';
    os << "id_switch," << cfg.p_id_switch << ',' << a.id_switch_rate() << ',' << a.switch_opportunities << '\n';
    os << "sigma_pos," << cfg.sigma_pos << ',' << a.sigma_estimate() << ',' << a.residuals << '\n';
    return os.str();
}

}  // namespace fpvbench
