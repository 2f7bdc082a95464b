#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "cmrpipe/volume.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cmrpipe-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& gen, double lo = 0.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(gen);
  return v;
}

inline cmrpipe::Volume random_volume(const cmrpipe::Shape3& shape, const cmrpipe::Affine& affine,
                                     std::mt19937_64& gen) {
  return cmrpipe::Volume(shape, affine, random_values(shape[0] * shape[1] * shape[2], gen));
}

inline cmrpipe::Slice2D random_slice(std::size_t n0, std::size_t n1, std::mt19937_64& gen,
                                     std::array<double, 2> spacing = {1.0, 1.0}) {
  return cmrpipe::Slice2D({n0, n1}, spacing, random_values(n0 * n1, gen));
}

inline std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace testing
