#include "cmrpipe/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cmrpipe {

namespace {

std::string shape_str(const Shape3& s) {
  std::ostringstream os;
  os << "(" << s[0] << "," << s[1] << "," << s[2] << ")";
  return os.str();
}

std::ptrdiff_t floor_half(std::ptrdiff_t d) {
  return d >= 0 ? d / 2 : -((-d + 1) / 2);
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid3

template <typename T>
Grid3<T>::Grid3(Shape3 shape, const Affine& affine, std::vector<T> data)
    : shape_(shape), affine_(affine), data_(std::move(data)) {
  validate();
}

template <typename T>
Grid3<T>::Grid3(Shape3 shape, const Affine& affine, T fill)
    : shape_(shape), affine_(affine) {
  if (shape[0] == 0 || shape[1] == 0 || shape[2] == 0)
    throw GeometryError("grid shape must be positive, got " + shape_str(shape));
  data_.assign(shape[0] * shape[1] * shape[2], fill);
  validate();
}

template <typename T>
void Grid3<T>::validate() const {
  if (shape_[0] == 0 || shape_[1] == 0 || shape_[2] == 0)
    throw GeometryError("grid shape must be positive, got " +
                        shape_str(shape_));
  if (data_.size() != shape_[0] * shape_[1] * shape_[2])
    throw GeometryError("data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_str(shape_));
  check_affine(affine_);
}

template <typename T>
Spacing3 Grid3<T>::spacing() const {
  return {affine_.col(0).head<3>().norm(), affine_.col(1).head<3>().norm(),
          affine_.col(2).head<3>().norm()};
}

template class Grid3<double>;
template class Grid3<std::int16_t>;

Affine diagonal_affine(const Spacing3& spacing, const Eigen::Vector3d& origin) {
  Affine a = Affine::Identity();
  for (int c = 0; c < 3; ++c) a(c, c) = spacing[c];
  a.block<3, 1>(0, 3) = origin;
  return a;
}

void check_affine(const Affine& affine) {
  if (!affine.allFinite()) throw GeometryError("affine has non-finite entries");
  const Eigen::Matrix3d m = affine.topLeftCorner<3, 3>();
  for (int c = 0; c < 3; ++c)
    if (!(m.col(c).norm() > 0.0))
      throw GeometryError("affine column " + std::to_string(c) +
                          " has zero norm");
  const double scale = m.col(0).norm() * m.col(1).norm() * m.col(2).norm();
  if (std::abs(m.determinant()) <= 1e-12 * scale)
    throw GeometryError("affine is not invertible");
  if (affine.row(3) != Eigen::RowVector4d(0, 0, 0, 1))
    throw GeometryError("affine bottom row must be (0,0,0,1)");
}

// ---------------------------------------------------------------------------
// Reorientation

OrientationPlan canonical_plan(const Affine& affine) {
  check_affine(affine);
  const Eigen::Matrix3d m = affine.topLeftCorner<3, 3>();
  OrientationPlan plan;
  std::array<bool, 3> taken{false, false, false};
  for (int c = 0; c < 3; ++c) {
    const Eigen::Vector3d mag = m.col(c).cwiseAbs();
    int best = 0;
    for (int r = 1; r < 3; ++r)
      if (mag[r] > mag[best]) best = r;
    for (int r = 0; r < 3; ++r) {
      if (r != best && mag[r] >= mag[best] * (1.0 - 1e-9))
        throw DominanceError("voxel axis " + std::to_string(c) +
                             " has no unique dominant world axis");
    }
    if (taken[best])
      throw DominanceError("voxel axes share dominant world axis " +
                           std::to_string(best));
    taken[best] = true;
    plan.source_axis[best] = c;
    plan.flip[best] = m(best, c) < 0.0;
  }
  return plan;
}

bool is_canonical(const Affine& affine) {
  return canonical_plan(affine).is_identity();
}

template <typename T>
Grid3<T> reorient_to_canonical(const Grid3<T>& vol) {
  const OrientationPlan plan = canonical_plan(vol.affine());
  if (plan.is_identity()) return vol;

  const Shape3& in_shape = vol.shape();
  Shape3 out_shape{};
  Affine out_affine = vol.affine();
  Eigen::Vector3d origin = vol.affine().template block<3, 1>(0, 3);
  for (int a = 0; a < 3; ++a) {
    const int s = plan.source_axis[a];
    out_shape[a] = in_shape[s];
    Eigen::Vector3d col = vol.affine().template block<3, 1>(0, s);
    if (plan.flip[a]) {
      origin += col * static_cast<double>(in_shape[s] - 1);
      col = -col;
    }
    out_affine.block<3, 1>(0, a) = col;
  }
  out_affine.block<3, 1>(0, 3) = origin;

  // Input stride for each output axis, with direction.
  const std::array<std::ptrdiff_t, 3> in_stride{
      1, static_cast<std::ptrdiff_t>(in_shape[0]),
      static_cast<std::ptrdiff_t>(in_shape[0] * in_shape[1])};
  std::array<std::ptrdiff_t, 3> step{};
  std::ptrdiff_t base = 0;
  for (int a = 0; a < 3; ++a) {
    const int s = plan.source_axis[a];
    if (plan.flip[a]) {
      step[a] = -in_stride[s];
      base += in_stride[s] * static_cast<std::ptrdiff_t>(in_shape[s] - 1);
    } else {
      step[a] = in_stride[s];
    }
  }

  std::vector<T> out(vol.size());
  const auto src = vol.data();
  std::size_t n = 0;
  for (std::size_t k = 0; k < out_shape[2]; ++k) {
    for (std::size_t j = 0; j < out_shape[1]; ++j) {
      std::ptrdiff_t idx = base + step[2] * static_cast<std::ptrdiff_t>(k) +
                           step[1] * static_cast<std::ptrdiff_t>(j);
      for (std::size_t i = 0; i < out_shape[0]; ++i, idx += step[0])
        out[n++] = src[static_cast<std::size_t>(idx)];
    }
  }
  return Grid3<T>(out_shape, out_affine, std::move(out));
}

template Grid3<double> reorient_to_canonical(const Grid3<double>&);
template Grid3<std::int16_t> reorient_to_canonical(const Grid3<std::int16_t>&);

// ---------------------------------------------------------------------------
// Resampling

ResampleGrid resample_grid(const Shape3& shape, const Affine& affine,
                           const Spacing3& target_spacing) {
  for (double s : target_spacing)
    if (!(s > 0.0) || !std::isfinite(s))
      throw ParameterError("target spacing must be positive and finite");
  ResampleGrid g;
  g.affine = affine;
  Eigen::Vector3d origin = affine.block<3, 1>(0, 3);
  for (int a = 0; a < 3; ++a) {
    const double current = affine.block<3, 1>(0, a).norm();
    const double r = target_spacing[a] / current;
    const double extent = static_cast<double>(shape[a]) / r;
    g.shape[a] = static_cast<std::size_t>(std::max(1.0, std::round(extent)));
    g.ratio[a] = r;
    g.affine.block<3, 1>(0, a) = affine.block<3, 1>(0, a) * r;
    origin += affine.block<3, 1>(0, a) * (0.5 * r - 0.5);
  }
  g.affine.block<3, 1>(0, 3) = origin;
  return g;
}

namespace {

struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> w;
};

AxisTaps linear_taps(std::size_t n_out, std::size_t n_in, double r) {
  AxisTaps t;
  t.lo.resize(n_out);
  t.hi.resize(n_out);
  t.w.resize(n_out);
  const double max_pos = static_cast<double>(n_in - 1);
  for (std::size_t o = 0; o < n_out; ++o) {
    double x = (static_cast<double>(o) + 0.5) * r - 0.5;
    x = std::clamp(x, 0.0, max_pos);
    const double f = std::floor(x);
    t.lo[o] = static_cast<std::size_t>(f);
    t.hi[o] = std::min(t.lo[o] + 1, n_in - 1);
    t.w[o] = x - f;
  }
  return t;
}

std::vector<std::size_t> nearest_taps(std::size_t n_out, std::size_t n_in,
                                      double r) {
  std::vector<std::size_t> idx(n_out);
  const double max_pos = static_cast<double>(n_in - 1);
  for (std::size_t o = 0; o < n_out; ++o) {
    const double x = (static_cast<double>(o) + 0.5) * r - 0.5;
    idx[o] = static_cast<std::size_t>(
        std::clamp(std::floor(x + 0.5), 0.0, max_pos));
  }
  return idx;
}

inline double lerp(double a, double b, double w) { return a + w * (b - a); }

template <typename T>
Grid3<T> resample_nearest(const Grid3<T>& vol, const ResampleGrid& g) {
  const Shape3& in = vol.shape();
  std::array<std::vector<std::size_t>, 3> taps;
  for (int a = 0; a < 3; ++a) taps[a] = nearest_taps(g.shape[a], in[a], g.ratio[a]);
  std::vector<T> out(g.shape[0] * g.shape[1] * g.shape[2]);
  std::size_t n = 0;
  for (std::size_t k = 0; k < g.shape[2]; ++k)
    for (std::size_t j = 0; j < g.shape[1]; ++j)
      for (std::size_t i = 0; i < g.shape[0]; ++i)
        out[n++] = vol.at(taps[0][i], taps[1][j], taps[2][k]);
  return Grid3<T>(g.shape, g.affine, std::move(out));
}

}  // namespace

double sample_trilinear(const Volume& vol, double x, double y, double z) {
  const Shape3& s = vol.shape();
  const std::array<double, 3> p{x, y, z};
  std::array<std::size_t, 3> lo{}, hi{};
  std::array<double, 3> w{};
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(p[a], 0.0, static_cast<double>(s[a] - 1));
    const double f = std::floor(c);
    lo[a] = static_cast<std::size_t>(f);
    hi[a] = std::min(lo[a] + 1, s[a] - 1);
    w[a] = c - f;
  }
  const double c00 = lerp(vol.at(lo[0], lo[1], lo[2]), vol.at(hi[0], lo[1], lo[2]), w[0]);
  const double c10 = lerp(vol.at(lo[0], hi[1], lo[2]), vol.at(hi[0], hi[1], lo[2]), w[0]);
  const double c01 = lerp(vol.at(lo[0], lo[1], hi[2]), vol.at(hi[0], lo[1], hi[2]), w[0]);
  const double c11 = lerp(vol.at(lo[0], hi[1], hi[2]), vol.at(hi[0], hi[1], hi[2]), w[0]);
  return lerp(lerp(c00, c10, w[1]), lerp(c01, c11, w[1]), w[2]);
}

Volume resample(const Volume& vol, const Spacing3& target_spacing,
                Interp interp) {
  const ResampleGrid g = resample_grid(vol.shape(), vol.affine(), target_spacing);
  if (interp == Interp::nearest) return resample_nearest(vol, g);

  const Shape3& in = vol.shape();
  std::array<AxisTaps, 3> t;
  for (int a = 0; a < 3; ++a) t[a] = linear_taps(g.shape[a], in[a], g.ratio[a]);

  std::vector<double> out(g.shape[0] * g.shape[1] * g.shape[2]);
  std::size_t n = 0;
  for (std::size_t k = 0; k < g.shape[2]; ++k) {
    const std::size_t k0 = t[2].lo[k], k1 = t[2].hi[k];
    const double wk = t[2].w[k];
    for (std::size_t j = 0; j < g.shape[1]; ++j) {
      const std::size_t j0 = t[1].lo[j], j1 = t[1].hi[j];
      const double wj = t[1].w[j];
      for (std::size_t i = 0; i < g.shape[0]; ++i) {
        const std::size_t i0 = t[0].lo[i], i1 = t[0].hi[i];
        const double wi = t[0].w[i];
        const double c00 = lerp(vol.at(i0, j0, k0), vol.at(i1, j0, k0), wi);
        const double c10 = lerp(vol.at(i0, j1, k0), vol.at(i1, j1, k0), wi);
        const double c01 = lerp(vol.at(i0, j0, k1), vol.at(i1, j0, k1), wi);
        const double c11 = lerp(vol.at(i0, j1, k1), vol.at(i1, j1, k1), wi);
        out[n++] = lerp(lerp(c00, c10, wj), lerp(c01, c11, wj), wk);
      }
    }
  }
  return Volume(g.shape, g.affine, std::move(out));
}

LabelVolume resample(const LabelVolume& vol, const Spacing3& target_spacing,
                     Interp interp) {
  if (interp != Interp::nearest)
    throw UsageError("label volumes can only be resampled with nearest neighbour");
  return resample_nearest(
      vol, resample_grid(vol.shape(), vol.affine(), target_spacing));
}

// ---------------------------------------------------------------------------
// Crop / pad

InplaneWindow center_window(const Shape3& shape,
                            std::array<std::size_t, 2> target) {
  if (target[0] == 0 || target[1] == 0)
    throw ParameterError("crop target must be positive");
  InplaneWindow w;
  w.size = target;
  for (int a = 0; a < 2; ++a)
    w.start[a] = floor_half(static_cast<std::ptrdiff_t>(shape[a]) -
                            static_cast<std::ptrdiff_t>(target[a]));
  return w;
}

InplaneWindow centroid_window(const LabelVolume& labels,
                              std::array<std::size_t, 2> target) {
  if (target[0] == 0 || target[1] == 0)
    throw ParameterError("crop target must be positive");
  const Shape3& s = labels.shape();
  double sx = 0.0, sy = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < s[2]; ++k)
    for (std::size_t j = 0; j < s[1]; ++j)
      for (std::size_t i = 0; i < s[0]; ++i)
        if (labels.at(i, j, k) != 0) {
          sx += static_cast<double>(i);
          sy += static_cast<double>(j);
          ++count;
        }
  if (count == 0) return center_window(s, target);
  const std::array<double, 2> c{sx / static_cast<double>(count),
                                sy / static_cast<double>(count)};
  InplaneWindow w;
  w.size = target;
  for (int a = 0; a < 2; ++a)
    w.start[a] = static_cast<std::ptrdiff_t>(
        std::lround(c[a] - (static_cast<double>(target[a]) - 1.0) / 2.0));
  return w;
}

template <typename T>
Grid3<T> crop_or_pad(const Grid3<T>& vol, const InplaneWindow& window,
                     T pad_value) {
  if (window.size[0] == 0 || window.size[1] == 0)
    throw ParameterError("crop target must be positive");
  const Shape3& in = vol.shape();
  const Shape3 out_shape{window.size[0], window.size[1], in[2]};
  Affine affine = vol.affine();
  affine.block<3, 1>(0, 3) +=
      vol.affine().template block<3, 1>(0, 0) * static_cast<double>(window.start[0]) +
      vol.affine().template block<3, 1>(0, 1) * static_cast<double>(window.start[1]);

  std::vector<T> out(out_shape[0] * out_shape[1] * out_shape[2], pad_value);
  const auto n0 = static_cast<std::ptrdiff_t>(in[0]);
  const auto n1 = static_cast<std::ptrdiff_t>(in[1]);
  // Overlap of the window with the input, in output coordinates.
  const std::ptrdiff_t i_begin = std::max<std::ptrdiff_t>(0, -window.start[0]);
  const std::ptrdiff_t i_end = std::min<std::ptrdiff_t>(
      static_cast<std::ptrdiff_t>(window.size[0]), n0 - window.start[0]);
  const std::ptrdiff_t j_begin = std::max<std::ptrdiff_t>(0, -window.start[1]);
  const std::ptrdiff_t j_end = std::min<std::ptrdiff_t>(
      static_cast<std::ptrdiff_t>(window.size[1]), n1 - window.start[1]);
  if (i_begin < i_end && j_begin < j_end) {
    for (std::size_t k = 0; k < in[2]; ++k)
      for (std::ptrdiff_t j = j_begin; j < j_end; ++j) {
        const auto src = vol.data().begin() +
                         static_cast<std::ptrdiff_t>(vol.index(
                             static_cast<std::size_t>(i_begin + window.start[0]),
                             static_cast<std::size_t>(j + window.start[1]), k));
        auto dst = out.begin() +
                   static_cast<std::ptrdiff_t>(
                       static_cast<std::size_t>(i_begin) +
                       out_shape[0] * (static_cast<std::size_t>(j) + out_shape[1] * k));
        std::copy(src, src + (i_end - i_begin), dst);
      }
  }
  return Grid3<T>(out_shape, affine, std::move(out));
}

template <typename T>
Grid3<T> restore_window(const Grid3<T>& vol, const InplaneWindow& window,
                        std::array<std::size_t, 2> original_size,
                        T pad_value) {
  InplaneWindow back;
  back.start = {-window.start[0], -window.start[1]};
  back.size = original_size;
  return crop_or_pad(vol, back, pad_value);
}

template <typename T>
Cropped<T> center_crop_or_pad(const Grid3<T>& vol,
                              std::array<std::size_t, 2> target, T pad_value) {
  const InplaneWindow w = center_window(vol.shape(), target);
  return {crop_or_pad(vol, w, pad_value), w};
}

template Grid3<double> crop_or_pad(const Grid3<double>&, const InplaneWindow&, double);
template Grid3<std::int16_t> crop_or_pad(const Grid3<std::int16_t>&,
                                         const InplaneWindow&, std::int16_t);
template Grid3<double> restore_window(const Grid3<double>&, const InplaneWindow&,
                                      std::array<std::size_t, 2>, double);
template Grid3<std::int16_t> restore_window(const Grid3<std::int16_t>&,
                                            const InplaneWindow&,
                                            std::array<std::size_t, 2>,
                                            std::int16_t);
template Cropped<double> center_crop_or_pad(const Grid3<double>&,
                                            std::array<std::size_t, 2>, double);
template Cropped<std::int16_t> center_crop_or_pad(const Grid3<std::int16_t>&,
                                                  std::array<std::size_t, 2>,
                                                  std::int16_t);

// ---------------------------------------------------------------------------
// Slices

Slice2D::Slice2D(std::array<std::size_t, 2> dims, std::array<double, 2> spacing,
                 std::vector<double> data, std::string source_id,
                 std::size_t slice_index)
    : dims_(dims),
      spacing_(spacing),
      data_(std::move(data)),
      source_id_(std::move(source_id)),
      slice_index_(slice_index) {
  if (dims_[0] == 0 || dims_[1] == 0) throw GeometryError("slice is empty");
  if (!(spacing_[0] > 0.0) || !(spacing_[1] > 0.0))
    throw GeometryError("slice spacing must be positive");
  if (data_.size() != dims_[0] * dims_[1])
    throw GeometryError("slice data length does not match its dimensions");
}

Slice2D Slice2D::with_data(std::vector<double> data) const {
  return Slice2D(dims_, spacing_, std::move(data), source_id_, slice_index_);
}

std::vector<Slice2D> extract_slices(const Volume& vol,
                                    const std::string& source_id) {
  const Shape3& s = vol.shape();
  const Spacing3 sp = vol.spacing();
  const std::size_t plane = s[0] * s[1];
  std::vector<Slice2D> slices;
  slices.reserve(s[2]);
  const auto data = vol.data();
  for (std::size_t k = 0; k < s[2]; ++k) {
    const auto first = data.begin() + static_cast<std::ptrdiff_t>(k * plane);
    slices.emplace_back(std::array<std::size_t, 2>{s[0], s[1]},
                        std::array<double, 2>{sp[0], sp[1]},
                        std::vector<double>(first, first + static_cast<std::ptrdiff_t>(plane)),
                        source_id, k);
  }
  return slices;
}

Volume stack_slices(std::span<const Slice2D> slices, const Volume& like) {
  const Shape3& s = like.shape();
  if (slices.size() != s[2])
    throw GeometryError("slice count " + std::to_string(slices.size()) +
                        " does not match volume depth " + std::to_string(s[2]));
  std::vector<double> out;
  out.reserve(like.size());
  for (const Slice2D& sl : slices) {
    if (sl.dims()[0] != s[0] || sl.dims()[1] != s[1])
      throw GeometryError("slice dimensions do not match volume");
    out.insert(out.end(), sl.data().begin(), sl.data().end());
  }
  return Volume(s, like.affine(), std::move(out));
}

}  // namespace cmrpipe
