#ifndef FUZZYSEG_NEIGHBORHOOD_HPP
#define FUZZYSEG_NEIGHBORHOOD_HPP

#include "fuzzyseg/types.hpp"

#include <array>

namespace fuzzyseg {

enum class Connectivity { Four = 4, Eight = 8 };

/// Pixel adjacency on a 2-D grid. Out-of-image neighbors are omitted, so the
/// relation is symmetric and never contains the pixel itself.
struct Neighborhood {
  Connectivity connectivity = Connectivity::Four;

  static constexpr std::array<std::array<int, 2>, 8> kOffsets = {{
      {-1, 0}, {0, -1}, {0, 1}, {1, 0},  // face neighbors
      {-1, -1}, {-1, 1}, {1, -1}, {1, 1},
  }};

  int size() const { return static_cast<int>(connectivity); }

  /// Calls fn(l) for every in-bounds neighbor l of pixel (row, col), in a fixed order.
  template <typename Fn>
  void for_each(Index height, Index width, Index row, Index col, Fn&& fn) const {
    for (int i = 0; i < size(); ++i) {
      const Index r = row + kOffsets[i][0];
      const Index c = col + kOffsets[i][1];
      if (r >= 0 && r < height && c >= 0 && c < width) fn(r * width + c);
    }
  }
};

}  // namespace fuzzyseg

#endif  // FUZZYSEG_NEIGHBORHOOD_HPP
