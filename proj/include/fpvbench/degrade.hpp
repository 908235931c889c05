// FPV-Noisy: stochastic corruption of FPV-GT observation phases.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpvbench/scenegen.hpp"

namespace fpvbench {

enum class IdSwitchBasis {
    kSurvivingSteps,  // one draw per surviving observation after the first
    kVisibleSteps,    // one draw per original observation after the first
};

struct NoiseConfig {
    double p_tracklet_drop{0.01};
    double p_box_drop{0.10};
    double p_id_switch{0.02};
    double sigma_pos{0.05};
    std::uint64_t seed{0};
    IdSwitchBasis id_switch_basis{IdSwitchBasis::kSurvivingSteps};
    void validate() const;
};

/// Synthetic ids handed out after an identity switch are <= this value.
inline constexpr AgentId kSyntheticIdBase = -1;

/// Applies tracklet drop, box drop, identity switches and positional noise,
/// in that order, to every non-ego tracklet. Truth futures are untouched.
Scene corrupt_scene(const Scene& scene, const NoiseConfig& cfg);

struct NoiseAudit {
    std::size_t tracklets{0};            // non-ego source tracklets
    std::size_t tracklets_dropped{0};
    std::size_t boxes{0};                // observations of non-dropped tracklets
    std::size_t boxes_dropped{0};
    std::size_t switch_opportunities{0};
    std::size_t switches{0};
    std::size_t residuals{0};            // per-axis samples
    double sum_sq_residual{0};

    [[nodiscard]] double tracklet_drop_rate() const noexcept;
    [[nodiscard]] double box_drop_rate() const noexcept;
    [[nodiscard]] double id_switch_rate() const noexcept;
    [[nodiscard]] double sigma_estimate() const noexcept;
    NoiseAudit& operator+=(const NoiseAudit& o) noexcept;
};

/// Empirical corruption rates recovered from an original/corrupted pair.
NoiseAudit noise_audit(const Scene& original, const Scene& corrupted);
NoiseAudit noise_audit(std::span<const Scene> originals, std::span<const Scene> corrupted);

std::string audit_csv(const NoiseAudit& audit, const NoiseConfig& cfg);

}  // namespace fpvbench
