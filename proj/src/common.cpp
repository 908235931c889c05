#include "fpvbench/common.hpp"

namespace fpvbench {

std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::kBev: return "BEV";
        case Variant::kFpvGt: return "FPV_GT";
        case Variant::kFpvNoisy: return "FPV_NOISY";
        case Variant::kFpvDet: return "FPV_DET";
    }
    return "?";
}

std::optional<Variant> parse_variant(std::string_view s) noexcept {
    for (Variant v : kAllVariants) {
        if (s == to_string(v)) return v;
    }
    if (s == "bev") return Variant::kBev;
    if (s == "fpv-gt" || s == "fpv_gt") return Variant::kFpvGt;
    if (s == "fpv-noisy" || s == "fpv_noisy") return Variant::kFpvNoisy;
    if (s == "fpv-det" || s == "fpv_det") return Variant::kFpvDet;
    return std::nullopt;
}

}  // namespace fpvbench
