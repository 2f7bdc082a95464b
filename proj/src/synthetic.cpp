#include "cmrpipe/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "cmrpipe/artifacts.hpp"
#include "cmrpipe/nifti.hpp"
#include "cmrpipe/rng.hpp"

namespace cmrpipe {

namespace fs = std::filesystem;

namespace {

struct Anatomy {
  double cx, cy;       // heart center offset, mm
  double scale;        // overall size factor
  double ellipticity;  // LV y/x radius ratio
};

double gaussian(Rng& rng) {
  // Box-Muller on the portable uniform stream.
  const double u1 = 1.0 - rng.uniform01();
  const double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool inside(double u, double v, double cu, double cv, double ru, double rv) {
  const double a = (u - cu) / ru, b = (v - cv) / rv;
  return a * a + b * b <= 1.0;
}

}  // namespace

Phantom make_phantom(const std::string& subject, int breath_intensity, Phase phase,
                     std::uint64_t seed, const PhantomOptions& options) {
  if (breath_intensity < 1 || breath_intensity > 4)
    throw ParameterError("breath intensity must be 1-4");
  const Shape3& s = options.shape;
  const Spacing3& sp = options.spacing;
  const double fov_u = static_cast<double>(s[0]) * sp[0];
  const double fov_v = static_cast<double>(s[1]) * sp[1];
  if (fov_u < 160.0 || fov_v < 160.0 || s[2] < 3)
    throw ParameterError("phantom field of view must be at least 160 mm with 3 slices");

  Rng anatomy_rng(derive_seed(seed, subject, 0));
  const Anatomy an{anatomy_rng.uniform(-10.0, 10.0), anatomy_rng.uniform(-10.0, 10.0),
                   anatomy_rng.uniform(0.9, 1.1), anatomy_rng.uniform(0.88, 1.0)};
  const std::string id = case_id(subject, breath_intensity, phase);
  Rng rng(derive_seed(seed, id, 1));
  const double gain = rng.uniform(200.0, 800.0);
  const double offset = rng.uniform(0.0, 50.0);

  const bool ed = phase == Phase::ED;
  const double r_lv = (ed ? 24.0 : 16.0) * an.scale;
  const double wall = (ed ? 9.0 : 12.0) * an.scale;
  const double rv_ru = (ed ? 22.0 : 15.0) * an.scale;
  const double rv_rv = (ed ? 34.0 : 28.0) * an.scale;

  std::vector<double> img(s[0] * s[1] * s[2]);
  std::vector<std::int16_t> lab(img.size(), 0);
  const std::array<std::size_t, 2> dims{s[0], s[1]};
  for (std::size_t k = 0; k < s[2]; ++k) {
    const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(s[2]);
    const double taper = std::sqrt(std::max(0.05, 1.0 - std::pow((t - 0.45) / 0.6, 2.0)));
    const double lv_u = r_lv * taper, lv_v = lv_u * an.ellipticity;
    const double ep_u = lv_u + wall, ep_v = lv_v + wall;
    const double rv_cu = an.cx - ep_u - 0.35 * rv_ru * taper;
    const double rv_cv = an.cy + 4.0;

    std::vector<double> plane(dims[0] * dims[1]);
    for (std::size_t j = 0; j < s[1]; ++j) {
      const double v = (static_cast<double>(j) - (static_cast<double>(s[1]) - 1.0) / 2.0) * sp[1];
      for (std::size_t i = 0; i < s[0]; ++i) {
        const double u = (static_cast<double>(i) - (static_cast<double>(s[0]) - 1.0) / 2.0) * sp[0];
        double value = 0.03;
        std::int16_t label = 0;
        if (inside(u, v, 0.0, 0.0, 0.42 * fov_u, 0.33 * fov_v)) value = 0.45;
        if (inside(u, v, an.cx, an.cy, lv_u, lv_v)) {
          value = 1.0;
          label = 1;
        } else if (inside(u, v, an.cx, an.cy, ep_u, ep_v)) {
          value = 0.3;
          label = 2;
        } else if (inside(u, v, rv_cu, rv_cv, rv_ru * taper, rv_rv * taper) &&
                   !inside(u, v, an.cx, an.cy, ep_u + 2.0, ep_v + 2.0)) {
          value = 0.9;
          label = 3;
        }
        plane[i + dims[0] * j] = value;
        lab[i + s[0] * (j + s[1] * k)] = label;
      }
    }

    Slice2D slice(dims, {sp[0], sp[1]}, std::move(plane), id, k);
    if (breath_intensity > 1) {
      const double amp = static_cast<double>(breath_intensity - 1);
      MotionRanges ranges{2, 1.5 * amp, 2.5 * amp};
      const std::array<int, 1> axes{1};
      slice = apply_motion(slice, sample_motion(ranges, axes, rng));
    }
    const auto d = slice.data();
    for (std::size_t p = 0; p < d.size(); ++p) {
      const double noisy = (d[p] + 0.015 * gaussian(rng)) * gain + offset;
      img[p + k * d.size()] = std::max(0.0, std::round(noisy));
    }
  }

  Affine affine = diagonal_affine(sp);
  for (int a = 0; a < 3; ++a) {
    const double half = (static_cast<double>(s[static_cast<std::size_t>(a)]) - 1.0) / 2.0 *
                        sp[static_cast<std::size_t>(a)];
    const bool flip = options.lps && a < 2;
    if (flip) affine(a, a) = -sp[static_cast<std::size_t>(a)];
    affine(a, 3) = flip ? half : -half;
  }
  return {Volume(s, affine, std::move(img)), LabelVolume(s, affine, std::move(lab))};
}

Manifest write_synthetic_cohort(const fs::path& dir, std::size_t subjects, std::uint64_t seed,
                                const PhantomOptions& options) {
  fs::create_directories(dir);
  Manifest m;
  for (std::size_t n = 1; n <= subjects; ++n) {
    char name[16];
    std::snprintf(name, sizeof name, "P%03zu", n);
    Subject subj{name, {}};
    for (int g = 1; g <= 4; ++g)
      for (Phase ph : {Phase::ED, Phase::ES}) {
        const Phantom p = make_phantom(name, g, ph, seed, options);
        const std::string stem = case_id(name, g, ph);
        const fs::path image = dir / (stem + ".nii.gz");
        const fs::path label = dir / (stem + "-label.nii.gz");
        write_nifti(p.image, image.string(), NiftiDatatype::int16);
        write_nifti(p.labels, label.string(), NiftiDatatype::uint8);
        subj.cases.push_back({g, ph, image.string(), label.string()});
      }
    m.subjects.push_back(std::move(subj));
  }
  m.normalize();
  return m;
}

}  // namespace cmrpipe
