#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace tollsim {

enum class Lane : uint8_t { Fast = 0, Economic = 1 };

inline constexpr std::array<Lane, 2> kLanes{Lane::Fast, Lane::Economic};

constexpr const char* to_string(Lane lane) {
    return lane == Lane::Fast ? "Fast" : "Economic";
}

inline std::optional<Lane> lane_from_string(std::string_view s) {
    if (s == "Fast") return Lane::Fast;
    if (s == "Economic") return Lane::Economic;
    return std::nullopt;
}

// Dense per-lane pair; the lane set is closed.
template <typename T>
struct LaneMap {
    T fast{};
    T economic{};

    T& operator[](Lane lane) { return lane == Lane::Fast ? fast : economic; }
    const T& operator[](Lane lane) const { return lane == Lane::Fast ? fast : economic; }

    bool operator==(const LaneMap&) const = default;
};

constexpr Lane other_lane(Lane lane) {
    return lane == Lane::Fast ? Lane::Economic : Lane::Fast;
}

}  // namespace tollsim
