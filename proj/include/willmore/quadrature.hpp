#pragma once

#include <array>

namespace willmore {

/// 8-point Gauss-Legendre rule on [0, 1].
inline constexpr std::array<double, 8> kGaussNodes = {
    0.5 - 0.5 * 0.9602898564975363, 0.5 - 0.5 * 0.7966664774136267, 0.5 - 0.5 * 0.5255324099163290,
    0.5 - 0.5 * 0.1834346424956498, 0.5 + 0.5 * 0.1834346424956498, 0.5 + 0.5 * 0.5255324099163290,
    0.5 + 0.5 * 0.7966664774136267, 0.5 + 0.5 * 0.9602898564975363};
inline constexpr std::array<double, 8> kGaussWeights = {
    0.5 * 0.1012285362903763, 0.5 * 0.2223810344533745, 0.5 * 0.3137066458778873, 0.5 * 0.3626837833783620,
    0.5 * 0.3626837833783620, 0.5 * 0.3137066458778873, 0.5 * 0.2223810344533745, 0.5 * 0.1012285362903763};

} // namespace willmore
