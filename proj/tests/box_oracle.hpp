#pragma once

#include <random>

#include "ncap/geometry.hpp"

namespace ncap::fixtures {

// Point-sampling containment oracle: uniform samples inside each box plus
// its corners, tested for membership in the other box.
inline bool sampled_overlap(const OrientedBox& a, const OrientedBox& b, int samples, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  auto probe = [&](const OrientedBox& from, const OrientedBox& into) {
    for (const auto& c : from.corners()) {
      if (into.contains(c)) return true;
    }
    const Vec2 f = from.center.forward();
    const Vec2 l = from.center.left();
    for (int i = 0; i < samples; ++i) {
      const Vec2 p = from.center.position() + f * (unit(rng) * from.length) + l * (unit(rng) * from.width);
      if (into.contains(p)) return true;
    }
    return false;
  };
  return probe(a, b) || probe(b, a);
}

inline OrientedBox random_box(std::mt19937_64& rng, double spread) {
  std::uniform_real_distribution<double> pos(-spread, spread);
  std::uniform_real_distribution<double> heading(-kPi, kPi);
  std::uniform_real_distribution<double> dim(0.5, 6.0);
  return OrientedBox{Pose2{pos(rng), pos(rng), heading(rng)}, dim(rng), dim(rng)};
}

}  // namespace ncap::fixtures
