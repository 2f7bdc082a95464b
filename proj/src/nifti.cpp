#include "cmrpipe/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <vector>

#include <zlib.h>

namespace cmrpipe {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348);

template <typename T>
void swap_bytes(T& v) {
  auto* p = reinterpret_cast<unsigned char*>(&v);
  std::reverse(p, p + sizeof(T));
}

template <typename T, std::size_t N>
void swap_all(T (&arr)[N]) {
  for (auto& v : arr) swap_bytes(v);
}

void swap_header(Nifti1Header& h) {
  swap_bytes(h.sizeof_hdr);
  swap_bytes(h.extents);
  swap_bytes(h.session_error);
  swap_all(h.dim);
  swap_bytes(h.intent_p1);
  swap_bytes(h.intent_p2);
  swap_bytes(h.intent_p3);
  swap_bytes(h.intent_code);
  swap_bytes(h.datatype);
  swap_bytes(h.bitpix);
  swap_bytes(h.slice_start);
  swap_all(h.pixdim);
  swap_bytes(h.vox_offset);
  swap_bytes(h.scl_slope);
  swap_bytes(h.scl_inter);
  swap_bytes(h.slice_end);
  swap_bytes(h.cal_max);
  swap_bytes(h.cal_min);
  swap_bytes(h.slice_duration);
  swap_bytes(h.toffset);
  swap_bytes(h.glmax);
  swap_bytes(h.glmin);
  swap_bytes(h.qform_code);
  swap_bytes(h.sform_code);
  swap_bytes(h.quatern_b);
  swap_bytes(h.quatern_c);
  swap_bytes(h.quatern_d);
  swap_bytes(h.qoffset_x);
  swap_bytes(h.qoffset_y);
  swap_bytes(h.qoffset_z);
  swap_all(h.srow_x);
  swap_all(h.srow_y);
  swap_all(h.srow_z);
}

std::size_t datatype_size(std::int16_t code) {
  switch (static_cast<NiftiDatatype>(code)) {
    case NiftiDatatype::uint8:
    case NiftiDatatype::int8: return 1;
    case NiftiDatatype::int16:
    case NiftiDatatype::uint16: return 2;
    case NiftiDatatype::int32:
    case NiftiDatatype::float32: return 4;
    case NiftiDatatype::float64: return 8;
  }
  return 0;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct GzCloser {
  void operator()(gzFile f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

/// Reads up to `limit` bytes (all when limit == 0); gzread passes plain
/// files through unchanged.
std::vector<unsigned char> read_bytes(const std::string& path, std::size_t limit = 0) {
  GzHandle f(gzopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path);
  gzbuffer(f.get(), 1 << 17);
  std::vector<unsigned char> out;
  constexpr std::size_t chunk = 1 << 20;
  for (;;) {
    std::size_t want = chunk;
    if (limit > 0) {
      if (out.size() >= limit) break;
      want = std::min(chunk, limit - out.size());
    }
    const std::size_t old = out.size();
    out.resize(old + want);
    const int got = gzread(f.get(), out.data() + old, static_cast<unsigned>(want));
    if (got < 0) {
      int errnum = 0;
      throw FormatError(path + ": " + gzerror(f.get(), &errnum));
    }
    out.resize(old + static_cast<std::size_t>(got));
    if (got == 0) break;
  }
  return out;
}

struct Parsed {
  Nifti1Header header;
  NiftiInfo info;
};

Parsed parse_header(const std::vector<unsigned char>& bytes, const std::string& path) {
  if (bytes.size() < sizeof(Nifti1Header)) throw FormatError(path + ": file too short for a NIfTI-1 header");
  Parsed p{};
  std::memcpy(&p.header, bytes.data(), sizeof(Nifti1Header));
  Nifti1Header& h = p.header;
  if (h.sizeof_hdr != 348) {
    swap_header(h);
    if (h.sizeof_hdr != 348) throw FormatError(path + ": header size is not 348");
    p.info.byte_swapped = true;
  }
  if (std::memcmp(h.magic, "n+1\0", 4) != 0)
    throw FormatError(path + ": not a single-file NIfTI-1 image (bad magic)");
  if (h.dim[0] < 1 || h.dim[0] > 7) throw FormatError(path + ": invalid dim[0]");
  for (int d = 4; d <= h.dim[0]; ++d)
    if (h.dim[d] > 1)
      throw FormatError(path + ": only 3-D scalar volumes are supported");
  for (int d = 1; d <= 3; ++d) {
    const int n = d <= h.dim[0] ? h.dim[d] : 1;
    if (n < 1) throw FormatError(path + ": non-positive dimension");
    p.info.shape[static_cast<std::size_t>(d - 1)] = static_cast<std::size_t>(n);
  }
  if (datatype_size(h.datatype) == 0)
    throw FormatError(path + ": unsupported datatype " + std::to_string(h.datatype));
  p.info.datatype = static_cast<NiftiDatatype>(h.datatype);
  p.info.qform_code = h.qform_code;
  p.info.sform_code = h.sform_code;
  p.info.scl_slope = h.scl_slope;
  p.info.scl_inter = h.scl_inter;

  if (h.sform_code > 0) {
    Affine a = Affine::Identity();
    for (int c = 0; c < 4; ++c) {
      a(0, c) = h.srow_x[c];
      a(1, c) = h.srow_y[c];
      a(2, c) = h.srow_z[c];
    }
    p.info.affine = a;
  } else if (h.qform_code > 0) {
    const std::array<double, 3> pix{h.pixdim[1], h.pixdim[2], h.pixdim[3]};
    p.info.affine = qform_to_affine(h.quatern_b, h.quatern_c, h.quatern_d,
                                    {h.qoffset_x, h.qoffset_y, h.qoffset_z}, pix,
                                    h.pixdim[0] < 0.0f ? -1.0 : 1.0);
  } else {
    Spacing3 sp{};
    for (int d = 0; d < 3; ++d) {
      const double v = std::abs(h.pixdim[d + 1]);
      sp[static_cast<std::size_t>(d)] = v > 0.0 ? v : 1.0;
    }
    p.info.affine = diagonal_affine(sp);
  }
  return p;
}

template <typename T>
T load(const unsigned char* p, bool swapped) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swapped) swap_bytes(v);
  return v;
}

std::vector<double> decode(const unsigned char* p, std::size_t count, NiftiDatatype dt,
                           bool swapped) {
  std::vector<double> out(count);
  const std::size_t w = datatype_size(static_cast<std::int16_t>(dt));
  for (std::size_t i = 0; i < count; ++i, p += w) {
    switch (dt) {
      case NiftiDatatype::uint8: out[i] = *p; break;
      case NiftiDatatype::int8: out[i] = static_cast<std::int8_t>(*p); break;
      case NiftiDatatype::int16: out[i] = load<std::int16_t>(p, swapped); break;
      case NiftiDatatype::uint16: out[i] = load<std::uint16_t>(p, swapped); break;
      case NiftiDatatype::int32: out[i] = load<std::int32_t>(p, swapped); break;
      case NiftiDatatype::float32: out[i] = load<float>(p, swapped); break;
      case NiftiDatatype::float64: out[i] = load<double>(p, swapped); break;
    }
  }
  return out;
}

template <typename I>
I checked_integer(double v) {
  if (!(v == std::floor(v)) || v < static_cast<double>(std::numeric_limits<I>::min()) ||
      v > static_cast<double>(std::numeric_limits<I>::max()))
    throw FormatError("value " + std::to_string(v) + " does not fit the integer datatype");
  return static_cast<I>(v);
}

template <typename T>
void store(std::vector<unsigned char>& out, T v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

std::vector<unsigned char> encode(std::span<const double> values, NiftiDatatype dt) {
  std::vector<unsigned char> out;
  out.reserve(values.size() * datatype_size(static_cast<std::int16_t>(dt)));
  for (double v : values) {
    switch (dt) {
      case NiftiDatatype::uint8: store(out, checked_integer<std::uint8_t>(v)); break;
      case NiftiDatatype::int8: store(out, checked_integer<std::int8_t>(v)); break;
      case NiftiDatatype::int16: store(out, checked_integer<std::int16_t>(v)); break;
      case NiftiDatatype::uint16: store(out, checked_integer<std::uint16_t>(v)); break;
      case NiftiDatatype::int32: store(out, checked_integer<std::int32_t>(v)); break;
      case NiftiDatatype::float32: store(out, static_cast<float>(v)); break;
      case NiftiDatatype::float64: store(out, v); break;
    }
  }
  return out;
}

void write_image(const Shape3& shape, const Affine& affine, std::span<const double> values,
                 const std::string& path, NiftiDatatype dt) {
  static_assert(std::endian::native == std::endian::little,
                "writer emits native byte order and assumes little-endian");
  if (datatype_size(static_cast<std::int16_t>(dt)) == 0)
    throw FormatError("unsupported datatype for writing");
  check_affine(affine);

  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  for (int d = 0; d < 3; ++d) {
    if (shape[static_cast<std::size_t>(d)] > 32767)
      throw FormatError("dimension too large for NIfTI-1");
    h.dim[d + 1] = static_cast<std::int16_t>(shape[static_cast<std::size_t>(d)]);
  }
  for (int d = 4; d < 8; ++d) h.dim[d] = 1;
  h.datatype = static_cast<std::int16_t>(dt);
  h.bitpix = static_cast<std::int16_t>(8 * datatype_size(h.datatype));

  const Quaternion q = affine_to_quaternion(affine);
  h.pixdim[0] = static_cast<float>(q.qfac);
  for (int d = 0; d < 3; ++d) h.pixdim[d + 1] = static_cast<float>(q.pixdim[static_cast<std::size_t>(d)]);
  for (int d = 4; d < 8; ++d) h.pixdim[d] = 1.0f;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2 | 8;  // mm, s
  std::strncpy(h.descrip, "cmrpipe", sizeof h.descrip);
  h.qform_code = 1;
  h.sform_code = 1;
  h.quatern_b = static_cast<float>(q.b);
  h.quatern_c = static_cast<float>(q.c);
  h.quatern_d = static_cast<float>(q.d);
  h.qoffset_x = static_cast<float>(q.offset[0]);
  h.qoffset_y = static_cast<float>(q.offset[1]);
  h.qoffset_z = static_cast<float>(q.offset[2]);
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = static_cast<float>(affine(0, c));
    h.srow_y[c] = static_cast<float>(affine(1, c));
    h.srow_z[c] = static_cast<float>(affine(2, c));
  }
  std::memcpy(h.magic, "n+1\0", 4);

  std::vector<unsigned char> bytes(352, 0);
  std::memcpy(bytes.data(), &h, sizeof h);
  const std::vector<unsigned char> payload = encode(values, dt);
  bytes.insert(bytes.end(), payload.begin(), payload.end());

  if (ends_with(path, ".gz")) {
    GzHandle f(gzopen(path.c_str(), "wb1"));
    if (!f) throw IoError("cannot write " + path);
    std::size_t done = 0;
    while (done < bytes.size()) {
      const auto n = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
      if (gzwrite(f.get(), bytes.data() + done, n) != static_cast<int>(n))
        throw IoError("write failed for " + path);
      done += n;
    }
    if (gzclose(f.release()) != Z_OK) throw IoError("write failed for " + path);
  } else {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed for " + path);
  }
}

}  // namespace

Affine qform_to_affine(double b, double c, double d, const std::array<double, 3>& qoffset,
                       const std::array<double, 3>& pixdim, double qfac) {
  double a = 1.0 - (b * b + c * c + d * d);
  if (a < 1e-7) {
    a = 1.0 / std::sqrt(b * b + c * c + d * d);
    b *= a;
    c *= a;
    d *= a;
    a = 0.0;
  } else {
    a = std::sqrt(a);
  }
  const double xd = pixdim[0] > 0.0 ? pixdim[0] : 1.0;
  const double yd = pixdim[1] > 0.0 ? pixdim[1] : 1.0;
  double zd = pixdim[2] > 0.0 ? pixdim[2] : 1.0;
  if (qfac < 0.0) zd = -zd;

  Affine m = Affine::Identity();
  m(0, 0) = (a * a + b * b - c * c - d * d) * xd;
  m(0, 1) = 2.0 * (b * c - a * d) * yd;
  m(0, 2) = 2.0 * (b * d + a * c) * zd;
  m(1, 0) = 2.0 * (b * c + a * d) * xd;
  m(1, 1) = (a * a + c * c - b * b - d * d) * yd;
  m(1, 2) = 2.0 * (c * d - a * b) * zd;
  m(2, 0) = 2.0 * (b * d - a * c) * xd;
  m(2, 1) = 2.0 * (c * d + a * b) * yd;
  m(2, 2) = (a * a + d * d - c * c - b * b) * zd;
  m(0, 3) = qoffset[0];
  m(1, 3) = qoffset[1];
  m(2, 3) = qoffset[2];
  return m;
}

Quaternion affine_to_quaternion(const Affine& affine) {
  Quaternion q;
  Eigen::Matrix3d r = affine.topLeftCorner<3, 3>();
  for (int c = 0; c < 3; ++c) {
    const double n = r.col(c).norm();
    q.pixdim[static_cast<std::size_t>(c)] = n > 0.0 ? n : 1.0;
    if (n > 0.0) r.col(c) /= n;
  }
  if (r.determinant() < 0.0) {
    q.qfac = -1.0;
    r.col(2) = -r.col(2);
  }
  const double r11 = r(0, 0), r12 = r(0, 1), r13 = r(0, 2);
  const double r21 = r(1, 0), r22 = r(1, 1), r23 = r(1, 2);
  const double r31 = r(2, 0), r32 = r(2, 1), r33 = r(2, 2);
  double a = r11 + r22 + r33 + 1.0, b, c, d;
  if (a > 0.5) {
    a = 0.5 * std::sqrt(a);
    b = 0.25 * (r32 - r23) / a;
    c = 0.25 * (r13 - r31) / a;
    d = 0.25 * (r21 - r12) / a;
  } else {
    const double xd = 1.0 + r11 - (r22 + r33);
    const double yd = 1.0 + r22 - (r11 + r33);
    const double zd = 1.0 + r33 - (r11 + r22);
    if (xd > 1.0) {
      b = 0.5 * std::sqrt(xd);
      c = 0.25 * (r12 + r21) / b;
      d = 0.25 * (r13 + r31) / b;
      a = 0.25 * (r32 - r23) / b;
    } else if (yd > 1.0) {
      c = 0.5 * std::sqrt(yd);
      b = 0.25 * (r12 + r21) / c;
      d = 0.25 * (r23 + r32) / c;
      a = 0.25 * (r13 - r31) / c;
    } else {
      d = 0.5 * std::sqrt(zd);
      b = 0.25 * (r13 + r31) / d;
      c = 0.25 * (r23 + r32) / d;
      a = 0.25 * (r21 - r12) / d;
    }
    if (a < 0.0) {
      b = -b;
      c = -c;
      d = -d;
    }
  }
  q.b = b;
  q.c = c;
  q.d = d;
  q.offset = {affine(0, 3), affine(1, 3), affine(2, 3)};
  return q;
}

NiftiInfo read_nifti_info(const std::string& path) {
  return parse_header(read_bytes(path, 352), path).info;
}

Volume read_nifti(const std::string& path) {
  const std::vector<unsigned char> bytes = read_bytes(path);
  const Parsed p = parse_header(bytes, path);
  const auto offset = static_cast<std::size_t>(p.header.vox_offset);
  if (offset < 348) throw FormatError(path + ": vox_offset inside the header");
  const Shape3& s = p.info.shape;
  const std::size_t count = s[0] * s[1] * s[2];
  const std::size_t need = count * datatype_size(p.header.datatype);
  if (bytes.size() < offset + need) throw FormatError(path + ": truncated voxel data");
  std::vector<double> data = decode(bytes.data() + offset, count, p.info.datatype,
                                    p.info.byte_swapped);
  const double slope = p.info.scl_slope, inter = p.info.scl_inter;
  if (slope != 0.0 && std::isfinite(slope) && !(slope == 1.0 && inter == 0.0))
    for (double& v : data) v = v * slope + inter;
  try {
    return Volume(s, p.info.affine, std::move(data));
  } catch (const GeometryError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

LabelVolume read_nifti_labels(const std::string& path) {
  const Volume v = read_nifti(path);
  std::vector<std::int16_t> labels(v.size());
  const auto src = v.data();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    try {
      labels[i] = checked_integer<std::int16_t>(src[i]);
    } catch (const FormatError& e) {
      throw FormatError(path + ": not a label image: " + e.what());
    }
  }
  return LabelVolume(v.shape(), v.affine(), std::move(labels));
}

void write_nifti(const Volume& vol, const std::string& path, NiftiDatatype datatype) {
  write_image(vol.shape(), vol.affine(), vol.data(), path, datatype);
}

void write_nifti(const LabelVolume& vol, const std::string& path, NiftiDatatype datatype) {
  std::vector<double> values(vol.data().begin(), vol.data().end());
  write_image(vol.shape(), vol.affine(), values, path, datatype);
}

}  // namespace cmrpipe
