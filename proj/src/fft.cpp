#include "cmrpipe/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include <fftw3.h>

namespace cmrpipe {

namespace {

// FFTW planning is not thread-safe; execution through the new-array
// interface is. Plans are created once per (n0, n1, direction) and kept for
// the life of the process.
class PlanCache {
 public:
  fftw_plan get(std::size_t n0, std::size_t n1, int sign) {
    const std::lock_guard<std::mutex> lock(mutex_);
    const Key key{n0, n1, sign};
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<Complex> scratch(n0 * n1);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    // Storage has axis 0 fastest, so FFTW sees (n1 rows, n0 columns).
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(n1), static_cast<int>(n0),
                                      buf, buf, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  using Key = std::tuple<std::size_t, std::size_t, int>;
  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

// out[(i + s) mod n] = in[i] along both axes, with s = shift[a].
void circular_shift(std::span<const Complex> in, std::span<Complex> out,
                    std::array<std::size_t, 2> dims,
                    std::array<std::size_t, 2> shift, double scale) {
  const auto [n0, n1] = dims;
  for (std::size_t y = 0; y < n1; ++y) {
    const std::size_t ty = (y + shift[1]) % n1;
    for (std::size_t x = 0; x < n0; ++x) {
      const std::size_t tx = (x + shift[0]) % n0;
      out[tx + n0 * ty] = in[x + n0 * y] * scale;
    }
  }
}

void execute(std::vector<Complex>& buf, std::array<std::size_t, 2> dims, int sign) {
  fftw_plan plan = plan_cache().get(dims[0], dims[1], sign);
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(plan, p, p);
}

}  // namespace

Kspace2D::Kspace2D(std::array<std::size_t, 2> dims, std::array<double, 2> spacing,
                   std::vector<Complex> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  if (dims_[0] == 0 || dims_[1] == 0) throw GeometryError("k-space is empty");
  if (data_.size() != dims_[0] * dims_[1])
    throw GeometryError("k-space data length does not match its dimensions");
}

Kspace2D fft2_centered(const Slice2D& slice) {
  const auto dims = slice.dims();
  const std::size_t n = slice.size();
  std::vector<Complex> in(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = slice.data()[i];
    if (!std::isfinite(v)) throw NumericError("slice contains non-finite values");
    in[i] = v;
  }
  // ifftshift: element at index (c + d) moves to index d.
  std::vector<Complex> buf(n);
  circular_shift(in, buf, dims, {dims[0] - dims[0] / 2, dims[1] - dims[1] / 2}, 1.0);
  execute(buf, dims, FFTW_FORWARD);
  std::vector<Complex> out(n);
  circular_shift(buf, out, dims, {dims[0] / 2, dims[1] / 2},
                 1.0 / std::sqrt(static_cast<double>(n)));
  return Kspace2D(dims, slice.spacing(), std::move(out));
}

std::vector<Complex> ifft2_centered_complex(const Kspace2D& k) {
  const auto dims = k.dims();
  const std::size_t n = dims[0] * dims[1];
  std::vector<Complex> buf(n);
  circular_shift(k.data(), buf, dims, {dims[0] - dims[0] / 2, dims[1] - dims[1] / 2}, 1.0);
  execute(buf, dims, FFTW_BACKWARD);
  std::vector<Complex> out(n);
  circular_shift(buf, out, dims, {dims[0] / 2, dims[1] / 2},
                 1.0 / std::sqrt(static_cast<double>(n)));
  return out;
}

Slice2D ifft2_centered(const Kspace2D& k, const Slice2D& like) {
  if (k.dims() != like.dims())
    throw GeometryError("k-space and template slice dimensions differ");
  const std::vector<Complex> c = ifft2_centered_complex(k);
  std::vector<double> re(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) re[i] = c[i].real();
  return like.with_data(std::move(re));
}

}  // namespace cmrpipe
