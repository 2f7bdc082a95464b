#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cmrpipe/manifest.hpp"
#include "cmrpipe/volume.hpp"

namespace cmrpipe {

/// Geometry of generated short-axis stacks. With `lps` set the affine
/// negates the first two axes, as scanner-exported volumes commonly do, so
/// reorientation has work to do.
struct PhantomOptions {
  Shape3 shape{256, 256, 10};
  Spacing3 spacing{1.4, 1.4, 8.0};
  bool lps = true;
};

struct Phantom {
  Volume image;
  LabelVolume labels;  ///< 1 LV, 2 MYO, 3 RV
};

/// Nested-ellipse cardiac phantom. ES has a smaller blood pool and thicker
/// myocardium than ED. Breath intensity g > 1 adds k-space motion of
/// growing amplitude to every slice. Intensities get a per-case random gain
/// and offset and are rounded to integers, like scanner output.
Phantom make_phantom(const std::string& subject, int breath_intensity, Phase phase,
                     std::uint64_t seed, const PhantomOptions& options = {});

/// Writes subjects P001.. with four breath intensities and both phases as
/// `<subject>-<g>-<phase>.nii.gz` plus `-label` files, and returns the
/// manifest of what was written.
Manifest write_synthetic_cohort(const std::filesystem::path& dir, std::size_t subjects,
                                std::uint64_t seed, const PhantomOptions& options = {});

}  // namespace cmrpipe
