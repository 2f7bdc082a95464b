#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "cmrpipe/volume.hpp"

namespace cmrpipe {

using Complex = std::complex<double>;

/// Centered 2-D spectrum of a slice. The DC coefficient sits at
/// (floor(n0/2), floor(n1/2)); index c + d along an axis holds frequency d.
class Kspace2D {
 public:
  Kspace2D() = default;
  Kspace2D(std::array<std::size_t, 2> dims, std::array<double, 2> spacing,
           std::vector<Complex> data);

  [[nodiscard]] const std::array<std::size_t, 2>& dims() const noexcept { return dims_; }
  [[nodiscard]] const std::array<double, 2>& spacing() const noexcept { return spacing_; }
  [[nodiscard]] std::span<const Complex> data() const noexcept { return data_; }
  [[nodiscard]] std::span<Complex> data() noexcept { return data_; }

  Complex& at(std::size_t x, std::size_t y) noexcept { return data_[x + dims_[0] * y]; }
  [[nodiscard]] const Complex& at(std::size_t x, std::size_t y) const noexcept {
    return data_[x + dims_[0] * y];
  }

  [[nodiscard]] std::array<std::size_t, 2> center() const noexcept {
    return {dims_[0] / 2, dims_[1] / 2};
  }

 private:
  std::array<std::size_t, 2> dims_{0, 0};
  std::array<double, 2> spacing_{1.0, 1.0};
  std::vector<Complex> data_;
};

/// Orthonormal centered forward transform: fftshift(FFT(ifftshift(x))) / sqrt(N).
/// Throws NumericError on non-finite input.
Kspace2D fft2_centered(const Slice2D& slice);

/// Inverse of fft2_centered, complex result in slice storage order.
std::vector<Complex> ifft2_centered_complex(const Kspace2D& k);

/// Inverse of fft2_centered keeping the real part. Geometry and provenance
/// are taken from `like`.
Slice2D ifft2_centered(const Kspace2D& k, const Slice2D& like);

}  // namespace cmrpipe
