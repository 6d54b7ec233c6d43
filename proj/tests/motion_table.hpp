#pragma once

#include <array>

namespace fixture {

// Transcribed by hand from the motion table: facilitator, individual
// participant, participant group. Empty = dash.
inline constexpr std::array<std::array<const char*, 3>, 17> kMotionTable{{
    {"Request", "", ""},
    {"Introduction", "", ""},
    {"Proposal", "", ""},
    {"Neutral", "Neutral", ""},
    {"Divergence", "Divergence", ""},
    {"Convergence", "Convergence", ""},
    {"Confusion", "Confusion", ""},
    {"View change", "View change", ""},
    {"Cooperation", "Cooperation", ""},
    {"Ripe time", "Ripe time", "Ripe time"},
    {"", "Approval", ""},
    {"", "Opposition", ""},
    {"", "", "Scattered"},
    {"", "", "Division"},
    {"", "", "Confrontation"},
    {"", "Compromise", "Consensus"},
    {"", "Unrejection", "Superficial agreement"},
}};

}  // namespace fixture
