#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace fdc {

/// Objective vector, every component to be minimized.
using Objectives = std::array<double, 4>;

/// u dominates v: no worse anywhere, strictly better somewhere.
inline bool dominates(const Objectives& u, const Objectives& v) {
  bool strictly = false;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u[k] > v[k]) return false;
    strictly = strictly || u[k] < v[k];
  }
  return strictly;
}

/// Indices (ascending) of the non-dominated points. Of several identical
/// points only the first index is kept.
///
/// Points are visited in lexicographic order; a point can only be dominated
/// by one that precedes it lexicographically, so it suffices to compare each
/// point against the front members collected so far.
inline std::vector<std::size_t> pareto_front(std::span<const Objectives> points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
  std::vector<std::size_t> front;
  for (std::size_t idx : order) {
    bool keep = true;
    for (std::size_t f : front) {
      if (points[f] == points[idx] || dominates(points[f], points[idx])) {
        keep = false;
        break;
      }
    }
    if (keep) front.push_back(idx);
  }
  std::sort(front.begin(), front.end());
  return front;
}

}  // namespace fdc
