#include "fedlab/compression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedlab {

Vec top_k(const Vec& x, SparsityLevel level) {
  const std::size_t d = x.size();
  if (level.k < 1 || level.k > d)
    throw std::invalid_argument("top_k: k out of range");
  for (double v : x)
    if (std::isnan(v)) throw std::invalid_argument("top_k: NaN entry");
  if (level.k == d) return x;

  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  const auto larger = [&x](std::size_t a, std::size_t b) {
    const double ma = std::abs(x[a]), mb = std::abs(x[b]);
    if (ma != mb) return ma > mb;
    return a < b;  // equal magnitudes keep the lowest index
  };
  std::nth_element(idx.begin(), idx.begin() + (level.k - 1), idx.end(), larger);

  Vec out(d, 0.0);
  for (std::size_t j = 0; j < level.k; ++j) out[idx[j]] = x[idx[j]];
  return out;
}

Vec compress_with_feedback(ErrorAccumulator& acc, const Vec& payload,
                           SparsityLevel level) {
  if (acc.residual.size() != payload.size())
    throw std::invalid_argument("compress_with_feedback: dimension mismatch");
  Vec sum = acc.residual;
  for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += payload[j];
  Vec transmitted = top_k(sum, level);
  for (std::size_t j = 0; j < sum.size(); ++j)
    acc.residual[j] = sum[j] - transmitted[j];
  return transmitted;
}

std::size_t payload_bytes(SparsityLevel level, std::size_t d) {
  return level.identity(d) ? 8 * d : 12 * level.k;
}

}  // namespace fedlab
