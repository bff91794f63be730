#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "coral/common.hpp"

namespace coral {

// The five data-analysis stages plus a dummy stage for cells no heuristic
// covers. UNLABELED exists only on the supervision side; inference never
// emits it.
enum class Stage : uint8_t {
    IMPORT = 0,
    WRANGLE = 1,
    EXPLORE = 2,
    MODEL = 3,
    EVALUATE = 4,
    UNLABELED = 5,
};

inline constexpr int kNumStages = 6;      // including UNLABELED
inline constexpr int kNumRealStages = 5;  // prediction targets

inline constexpr std::array<const char*, kNumStages> kStageNames = {
    "IMPORT", "WRANGLE", "EXPLORE", "MODEL", "EVALUATE", "UNLABELED"};

inline const char* stage_name(Stage s) { return kStageNames[static_cast<int>(s)]; }

inline Stage stage_from_name(std::string_view name) {
    for (int i = 0; i < kNumStages; ++i) {
        if (name == kStageNames[i]) return static_cast<Stage>(i);
    }
    throw SchemaError("unknown stage name: " + std::string(name));
}

// Conflict-resolution priority between weakly assigned stages:
// IMPORT > MODEL > EVALUATE > EXPLORE > WRANGLE. Smaller rank wins.
inline int stage_priority_rank(Stage s) {
    switch (s) {
        case Stage::IMPORT: return 0;
        case Stage::MODEL: return 1;
        case Stage::EVALUATE: return 2;
        case Stage::EXPLORE: return 3;
        case Stage::WRANGLE: return 4;
        case Stage::UNLABELED: return 5;
    }
    return 5;
}

}  // namespace coral
