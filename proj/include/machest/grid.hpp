#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace machest {

/// Uniform quantization lattice for virtual angles. Grid point k (1-based)
/// sits at -1 + (2k-1)/N, so the N points are symmetric in (-1, 1) with
/// spacing exactly 2/N.
class AngleGrid {
 public:
  explicit AngleGrid(int n) : n_(n) {
    if (n < 2) throw std::invalid_argument("AngleGrid: n must be >= 2");
  }

  int size() const { return n_; }

  double value(int k) const {
    if (k < 1 || k > n_)
      throw std::invalid_argument("AngleGrid::value: k out of [1, N]");
    return -1.0 + (2.0 * k - 1.0) / n_;
  }

  /// Nearest grid index for v in [-1, 1]; exact midpoints resolve to the
  /// lower index.
  int quantize(double v) const {
    if (!(std::abs(v) <= 1.0))
      throw std::invalid_argument("AngleGrid::quantize: |v| > 1");
    // the boundary between bins k and k+1 lies at (v+1)*N/2 = k, so the
    // ceiling sends exact midpoints to the lower index
    const int k = static_cast<int>(std::ceil((v + 1.0) * n_ / 2.0));
    return std::clamp(k, 1, n_);
  }

 private:
  int n_;
};

/// 1-based 4-D grid coordinate (Tx azimuth, Tx elevation, Rx azimuth,
/// Rx elevation indices).
struct GridIndex4 {
  int ntx = 1;
  int nty = 1;
  int nrx = 1;
  int nry = 1;

  friend bool operator==(const GridIndex4&, const GridIndex4&) = default;
};

/// Flat index in [1, N^4]:
///   n = N^2 * [N*(nty-1) + ntx-1] + N*(nry-1) + nrx.
inline std::int64_t flat_index(const GridIndex4& gi, int n) {
  auto check = [n](int c, const char* name) {
    if (c < 1 || c > n)
      throw std::invalid_argument(std::string("flat_index: ") + name +
                                  " out of [1, N]");
  };
  check(gi.ntx, "ntx");
  check(gi.nty, "nty");
  check(gi.nrx, "nrx");
  check(gi.nry, "nry");
  const std::int64_t nn = n;
  return nn * nn * (nn * (gi.nty - 1) + gi.ntx - 1) + nn * (gi.nry - 1) +
         gi.nrx;
}

inline GridIndex4 unflatten(std::int64_t idx, int n) {
  const std::int64_t nn = n;
  const std::int64_t total = nn * nn * nn * nn;
  if (idx < 1 || idx > total)
    throw std::invalid_argument("unflatten: index out of [1, N^4]");
  std::int64_t z = idx - 1;
  GridIndex4 gi;
  gi.nrx = static_cast<int>(z % nn) + 1;
  z /= nn;
  gi.nry = static_cast<int>(z % nn) + 1;
  z /= nn;
  gi.ntx = static_cast<int>(z % nn) + 1;
  z /= nn;
  gi.nty = static_cast<int>(z) + 1;
  return gi;
}

}  // namespace machest
