#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "cmrpipe/volume.hpp"

namespace testing {

/// Brute-force surface distances: a voxel is on the surface when any of its
/// six face neighbours is not `label` (outside the grid counts as not).
inline std::vector<std::array<long, 3>> brute_surface(const cmrpipe::LabelVolume& v,
                                                      std::int16_t label) {
  const auto s = v.shape();
  const auto is = [&](long i, long j, long k) {
    if (i < 0 || j < 0 || k < 0 || i >= long(s[0]) || j >= long(s[1]) || k >= long(s[2]))
      return false;
    return v.at(std::size_t(i), std::size_t(j), std::size_t(k)) == label;
  };
  std::vector<std::array<long, 3>> out;
  for (long i = 0; i < long(s[0]); ++i)
    for (long j = 0; j < long(s[1]); ++j)
      for (long k = 0; k < long(s[2]); ++k) {
        if (!is(i, j, k)) continue;
        int inside = is(i - 1, j, k) + is(i + 1, j, k) + is(i, j - 1, k) + is(i, j + 1, k) +
                     is(i, j, k - 1) + is(i, j, k + 1);
        if (inside < 6) out.push_back({i, j, k});
      }
  return out;
}

inline double brute_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * double(v.size() - 1);
  const auto i = std::size_t(std::floor(pos));
  const std::size_t j = std::min(i + 1, v.size() - 1);
  return v[i] + (v[j] - v[i]) * (pos - std::floor(pos));
}

inline std::optional<double> brute_surface_distance(const cmrpipe::LabelVolume& a,
                                                    const cmrpipe::LabelVolume& b,
                                                    std::int16_t label,
                                                    const cmrpipe::Spacing3& sp, double q) {
  const auto sa = brute_surface(a, label), sb = brute_surface(b, label);
  if (sa.empty() || sb.empty()) return std::nullopt;
  const auto directed = [&sp](const auto& from, const auto& to) {
    std::vector<double> d;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& r : to) {
        const double dx = double(r[0] - p[0]) * sp[0];
        const double dy = double(r[1] - p[1]) * sp[1];
        const double dz = double(r[2] - p[2]) * sp[2];
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      d.push_back(std::sqrt(best));
    }
    return d;
  };
  return std::max(brute_percentile(directed(sa, sb), q), brute_percentile(directed(sb, sa), q));
}

/// Random multi-label volume: a few boxes per label plus speckle.
inline cmrpipe::LabelVolume random_labels(const cmrpipe::Shape3& shape, const cmrpipe::Spacing3& sp,
                                          std::mt19937_64& gen) {
  cmrpipe::LabelVolume v(shape, cmrpipe::diagonal_affine(sp), std::int16_t{0});
  std::uniform_int_distribution<int> nbox(0, 3);
  for (std::int16_t label = 1; label <= 3; ++label) {
    const int boxes = nbox(gen);
    for (int b = 0; b < boxes; ++b) {
      std::array<std::size_t, 3> lo{}, hi{};
      for (int a = 0; a < 3; ++a) {
        std::uniform_int_distribution<std::size_t> d(0, shape[std::size_t(a)] - 1);
        std::size_t x = d(gen), y = d(gen);
        if (x > y) std::swap(x, y);
        lo[std::size_t(a)] = x;
        hi[std::size_t(a)] = y;
      }
      for (std::size_t i = lo[0]; i <= hi[0]; ++i)
        for (std::size_t j = lo[1]; j <= hi[1]; ++j)
          for (std::size_t k = lo[2]; k <= hi[2]; ++k) v.at(i, j, k) = label;
    }
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> l(0, 3);
  for (auto& x : v.data())
    if (u(gen) < 0.05) x = std::int16_t(l(gen));
  return v;
}

}  // namespace testing
