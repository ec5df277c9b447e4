// Magnitude sparsification and error-feedback accumulators.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "fedlab/objectives.hpp"

namespace fedlab {

struct SparsityLevel {
  std::size_t k = 0;  // retained coordinates; k = d means no compression

  double delta(std::size_t d) const { return static_cast<double>(d) / static_cast<double>(k); }
  bool identity(std::size_t d) const { return k >= d; }
};

// Keeps the k largest-magnitude entries (ties keep the lowest index), zeroing
// the rest. Selection is partial; output support is in ascending index order
// by construction.
Vec top_k(const Vec& x, SparsityLevel level);

struct ErrorAccumulator {
  Vec residual;

  explicit ErrorAccumulator(std::size_t d) : residual(d, 0.0) {}
};

// transmitted = top_k(residual + payload); residual' = residual + payload -
// transmitted. The identity transmitted + residual' = residual + payload holds
// exactly (coordinates are either passed through or kept, never rounded).
Vec compress_with_feedback(ErrorAccumulator& acc, const Vec& payload,
                           SparsityLevel level);

// Trace accounting: 4-byte index + 8-byte value per retained coordinate for a
// sparsified vector; 8 bytes per entry when dense.
std::size_t payload_bytes(SparsityLevel level, std::size_t d);

}  // namespace fedlab
