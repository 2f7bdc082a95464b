#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "cmrpipe/volume.hpp"

namespace cmrpipe {

/// NIfTI-1 datatype codes supported for reading and writing.
enum class NiftiDatatype : std::int16_t {
  uint8 = 2,
  int16 = 4,
  int32 = 8,
  float32 = 16,
  float64 = 64,
  int8 = 256,
  uint16 = 512,
};

struct NiftiInfo {
  Shape3 shape{};
  NiftiDatatype datatype = NiftiDatatype::float32;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  /// sform when sform_code > 0, else qform when qform_code > 0, else a
  /// diagonal matrix built from pixdim.
  Affine affine = Affine::Identity();
  bool byte_swapped = false;
};

/// Rotation-plus-scale matrix of a NIfTI quaternion header.
Affine qform_to_affine(double quatern_b, double quatern_c, double quatern_d,
                       const std::array<double, 3>& qoffset,
                       const std::array<double, 3>& pixdim, double qfac);

/// Quaternion parameters (b, c, d), pixdim and qfac for the rotation part
/// of `affine`. Columns are normalized; a negative determinant sets qfac = -1.
struct Quaternion {
  double b = 0.0, c = 0.0, d = 0.0;
  std::array<double, 3> offset{};
  std::array<double, 3> pixdim{1.0, 1.0, 1.0};
  double qfac = 1.0;
};
Quaternion affine_to_quaternion(const Affine& affine);

/// Reads only the header. Plain and gzip-compressed files are both accepted
/// regardless of extension.
NiftiInfo read_nifti_info(const std::string& path);

/// Reads a 3-D scalar image (a 2-D image becomes depth 1). scl_slope /
/// scl_inter are applied when set. Throws FormatError on a bad magic,
/// header size, unsupported datatype or a non-scalar image.
Volume read_nifti(const std::string& path);

/// Reads a label image; every voxel must hold an integer in int16 range.
LabelVolume read_nifti_labels(const std::string& path);

/// Writes NIfTI-1 single-file format; gzip when the path ends in ".gz".
/// Integer datatypes require integral in-range values (FormatError
/// otherwise).
void write_nifti(const Volume& vol, const std::string& path,
                 NiftiDatatype datatype = NiftiDatatype::float32);
void write_nifti(const LabelVolume& vol, const std::string& path,
                 NiftiDatatype datatype = NiftiDatatype::uint8);

}  // namespace cmrpipe
