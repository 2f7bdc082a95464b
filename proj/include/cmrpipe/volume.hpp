#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmrpipe/error.hpp"

namespace cmrpipe {

using Affine = Eigen::Matrix4d;
using Shape3 = std::array<std::size_t, 3>;
using Spacing3 = std::array<double, 3>;

/// Dense 3-D grid with a voxel-to-world affine. Axis 0 varies fastest in
/// memory, matching NIfTI storage order.
///
/// Spacing is not stored; it is the norm of each of the first three affine
/// columns, so it can never disagree with the geometry.
template <typename T>
class Grid3 {
 public:
  using value_type = T;

  Grid3() = default;
  Grid3(Shape3 shape, const Affine& affine, std::vector<T> data);
  Grid3(Shape3 shape, const Affine& affine, T fill = T{});

  [[nodiscard]] const Shape3& shape() const noexcept { return shape_; }
  [[nodiscard]] const Affine& affine() const noexcept { return affine_; }
  [[nodiscard]] Spacing3 spacing() const;
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  [[nodiscard]] std::span<const T> data() const noexcept { return data_; }
  [[nodiscard]] std::span<T> data() noexcept { return data_; }
  [[nodiscard]] std::vector<T> release() && { return std::move(data_); }

  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j,
                                  std::size_t k) const noexcept {
    return i + shape_[0] * (j + shape_[1] * k);
  }
  T& at(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[index(i, j, k)];
  }
  [[nodiscard]] const T& at(std::size_t i, std::size_t j,
                            std::size_t k) const noexcept {
    return data_[index(i, j, k)];
  }

  /// World position (mm) of a voxel center, or of any continuous index.
  [[nodiscard]] Eigen::Vector3d world(double i, double j, double k) const {
    return (affine_ * Eigen::Vector4d(i, j, k, 1.0)).head<3>();
  }

  friend bool operator==(const Grid3& a, const Grid3& b) {
    return a.shape_ == b.shape_ && a.affine_ == b.affine_ &&
           a.data_ == b.data_;
  }

 private:
  void validate() const;

  Shape3 shape_{0, 0, 0};
  Affine affine_ = Affine::Identity();
  std::vector<T> data_;
};

using Volume = Grid3<double>;
using LabelVolume = Grid3<std::int16_t>;

/// Affine with the given voxel spacing on the diagonal and an origin.
Affine diagonal_affine(const Spacing3& spacing,
                       const Eigen::Vector3d& origin = Eigen::Vector3d::Zero());

/// Throws GeometryError unless `affine` is invertible with nonzero
/// column norms.
void check_affine(const Affine& affine);

/// True when both grids have equal shape and affines within `tol`.
template <typename A, typename B>
bool same_geometry(const Grid3<A>& a, const Grid3<B>& b, double tol = 1e-6) {
  return a.shape() == b.shape() &&
         (a.affine() - b.affine()).cwiseAbs().maxCoeff() <= tol;
}

// ---------------------------------------------------------------------------
// Reorientation

/// How canonical axis `a` is read from the source: source axis index and
/// whether it runs backwards.
struct OrientationPlan {
  std::array<int, 3> source_axis{0, 1, 2};
  std::array<bool, 3> flip{false, false, false};

  [[nodiscard]] bool is_identity() const noexcept {
    return source_axis == std::array<int, 3>{0, 1, 2} &&
           flip == std::array<bool, 3>{false, false, false};
  }
};

/// Axis permutation and flips that bring `affine` to RAS+. Throws
/// GeometryError for singular affines and DominanceError when a voxel axis
/// has no unique dominant world axis (obliquity at or beyond 45 degrees).
OrientationPlan canonical_plan(const Affine& affine);

/// Reorders and flips voxel storage so that the affine's 3x3 block has a
/// positive dominant diagonal. Voxel centers keep their world coordinates.
/// A volume that is already canonical is returned unchanged.
template <typename T>
Grid3<T> reorient_to_canonical(const Grid3<T>& vol);

[[nodiscard]] bool is_canonical(const Affine& affine);

// ---------------------------------------------------------------------------
// Resampling

enum class Interp { trilinear, nearest };

/// Output grid for a resample: new shape and affine covering the same field
/// of view. Voxel `o` along axis `a` samples continuous input index
/// `(o + 0.5) * r - 0.5`, where `r = target / current` spacing.
struct ResampleGrid {
  Shape3 shape;
  Affine affine;
  Spacing3 ratio;
};

ResampleGrid resample_grid(const Shape3& shape, const Affine& affine,
                           const Spacing3& target_spacing);

/// Resamples to `target_spacing` (mm). Trilinear interpolation clamps
/// sample positions to the grid, so no value outside the input range is
/// produced.
Volume resample(const Volume& vol, const Spacing3& target_spacing,
                Interp interp = Interp::trilinear);

/// Label resampling. Only nearest neighbour is allowed; asking for
/// trilinear throws UsageError.
LabelVolume resample(const LabelVolume& vol, const Spacing3& target_spacing,
                     Interp interp = Interp::nearest);

/// Trilinear sample at a continuous index with clamp-to-edge.
double sample_trilinear(const Volume& vol, double x, double y, double z);

// ---------------------------------------------------------------------------
// In-plane crop / pad

/// In-plane window over axes 0 and 1. `start` may be negative (padding
/// before) and `start + size` may exceed the input (padding after).
struct InplaneWindow {
  std::array<std::ptrdiff_t, 2> start{0, 0};
  std::array<std::size_t, 2> size{0, 0};

  friend bool operator==(const InplaneWindow&,
                         const InplaneWindow&) = default;
};

/// Window of `target` size centered on the input grid.
InplaneWindow center_window(const Shape3& shape,
                            std::array<std::size_t, 2> target);

/// Window of `target` size centered on the in-plane centroid of all
/// nonzero labels. Falls back to the grid center for an empty mask.
InplaneWindow centroid_window(const LabelVolume& labels,
                              std::array<std::size_t, 2> target);

/// Extracts `window`, filling voxels outside the input with `pad_value`.
/// The affine translation moves so retained voxels keep world coordinates.
template <typename T>
Grid3<T> crop_or_pad(const Grid3<T>& vol, const InplaneWindow& window,
                     T pad_value = T{});

/// Inverse of crop_or_pad: places `vol` back on a grid of
/// `original_size` using the recorded window.
template <typename T>
Grid3<T> restore_window(const Grid3<T>& vol, const InplaneWindow& window,
                        std::array<std::size_t, 2> original_size,
                        T pad_value = T{});

template <typename T>
struct Cropped {
  Grid3<T> volume;
  InplaneWindow window;
};

/// Center crop or pad to `target` in-plane size (axis 0, axis 1).
/// Through-plane extent is untouched. Throws ParameterError for a zero
/// target.
template <typename T>
Cropped<T> center_crop_or_pad(const Grid3<T>& vol,
                              std::array<std::size_t, 2> target,
                              T pad_value = T{});

// ---------------------------------------------------------------------------
// Slices

/// One short-axis image: axis 0 varies fastest. `dims` are (n0, n1).
class Slice2D {
 public:
  Slice2D() = default;
  Slice2D(std::array<std::size_t, 2> dims, std::array<double, 2> spacing,
          std::vector<double> data, std::string source_id = {},
          std::size_t slice_index = 0);

  [[nodiscard]] const std::array<std::size_t, 2>& dims() const noexcept {
    return dims_;
  }
  [[nodiscard]] const std::array<double, 2>& spacing() const noexcept {
    return spacing_;
  }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  double& at(std::size_t x, std::size_t y) noexcept {
    return data_[x + dims_[0] * y];
  }
  [[nodiscard]] double at(std::size_t x, std::size_t y) const noexcept {
    return data_[x + dims_[0] * y];
  }

  [[nodiscard]] const std::string& source_id() const noexcept {
    return source_id_;
  }
  [[nodiscard]] std::size_t slice_index() const noexcept {
    return slice_index_;
  }

  /// Same geometry and provenance, new pixel values.
  [[nodiscard]] Slice2D with_data(std::vector<double> data) const;

 private:
  std::array<std::size_t, 2> dims_{0, 0};
  std::array<double, 2> spacing_{1.0, 1.0};
  std::vector<double> data_;
  std::string source_id_;
  std::size_t slice_index_ = 0;
};

/// Splits a volume along axis 2 into slices, in index order.
std::vector<Slice2D> extract_slices(const Volume& vol,
                                    const std::string& source_id = {});

/// Inverse of extract_slices: stacks slices onto the geometry of `like`.
Volume stack_slices(std::span<const Slice2D> slices, const Volume& like);

}  // namespace cmrpipe
