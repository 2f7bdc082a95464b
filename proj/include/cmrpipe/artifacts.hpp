#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "cmrpipe/fft.hpp"
#include "cmrpipe/rng.hpp"
#include "cmrpipe/volume.hpp"

namespace cmrpipe {

enum class TransformKind { motion = 0, ghosting = 1, bias_field = 2, gamma = 3 };

inline constexpr std::array<TransformKind, 4> kAllTransformKinds{
    TransformKind::motion, TransformKind::ghosting, TransformKind::bias_field,
    TransformKind::gamma};

std::string to_string(TransformKind kind);
TransformKind transform_kind_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Parameters. Each `*Params` is a fully sampled draw; each `*Ranges` is the
// configuration it is drawn from.

struct MotionParams {
  std::vector<double> rotations_deg;                 ///< in-plane, one per transform
  std::vector<std::array<double, 2>> translations_mm;  ///< (axis 0, axis 1)
  std::vector<double> times;                         ///< strictly increasing in (0, 1)
  int axis = 1;                                      ///< phase-encode axis

  [[nodiscard]] std::size_t num_transforms() const noexcept { return times.size(); }
  void validate() const;
  friend bool operator==(const MotionParams&, const MotionParams&) = default;
};

struct MotionRanges {
  int num_transforms = 2;
  double degrees_max = 10.0;
  double translation_max_mm = 10.0;
};

struct GhostingParams {
  int num_ghosts = 0;
  int axis = 1;
  double intensity = 0.0;
  double restore_center = 0.02;

  void validate() const;
  friend bool operator==(const GhostingParams&, const GhostingParams&) = default;
};

struct GhostingRanges {
  int min_ghosts = 4;
  int max_ghosts = 10;
  double min_intensity = 0.5;
  double max_intensity = 1.0;
  double restore_center = 0.02;
};

struct BiasFieldParams {
  int order = 3;
  /// Monomials x^p y^q with p + q <= order, ordered by p then q.
  std::vector<double> coefficients;

  void validate() const;
  friend bool operator==(const BiasFieldParams&, const BiasFieldParams&) = default;
};

struct BiasFieldRanges {
  int order = 3;
  double coefficient_max = 0.5;
};

struct GammaParams {
  double log_gamma = 0.0;

  [[nodiscard]] double gamma() const;
  friend bool operator==(const GammaParams&, const GammaParams&) = default;
};

struct GammaRanges {
  double log_gamma_max = 0.3;
};

/// Relative odds of each transform. Defaults give motion three times the
/// odds of each of the others.
struct PolicyWeights {
  double motion = 3.0;
  double ghosting = 1.0;
  double bias_field = 1.0;
  double gamma = 1.0;

  [[nodiscard]] double weight(TransformKind kind) const;
  [[nodiscard]] double probability(TransformKind kind) const;
  void validate() const;
};

struct AugmentConfig {
  PolicyWeights weights;
  MotionRanges motion;
  GhostingRanges ghosting;
  BiasFieldRanges bias_field;
  GammaRanges gamma;
  /// Candidate phase-encode axes; one is drawn per motion/ghosting sample.
  std::vector<int> phase_axes{0, 1};
};

using TransformParams =
    std::variant<MotionParams, GhostingParams, BiasFieldParams, GammaParams>;

TransformKind kind_of(const TransformParams& params);

/// Everything needed to replay one augmentation.
struct TransformRecord {
  TransformKind kind = TransformKind::motion;
  std::uint64_t seed = 0;
  TransformParams params;
  std::string case_id;
  std::size_t slice_index = 0;
};

// ---------------------------------------------------------------------------
// Transforms

/// Rotates by `angle_deg` about the slice center and then translates by
/// `translation_mm`, both in physical (mm) coordinates. Bilinear sampling
/// with clamp-to-edge.
Slice2D rigid_transform(const Slice2D& slice, double angle_deg,
                        std::array<double, 2> translation_mm);

/// Segment boundaries along a phase-encode axis of `n` lines:
/// {0, floor(n*t_1), ..., floor(n*t_k), n}.
std::vector<std::size_t> motion_boundaries(std::span<const double> times,
                                           std::size_t n);

/// Builds a spectrum whose lines in [boundaries[s], boundaries[s+1]) along
/// `axis` come from spectra[s]. No reordering is applied here.
Kspace2D compose_segments(std::span<const Kspace2D> spectra,
                          std::span<const std::size_t> boundaries, int axis);

/// k-space motion: the original image plus one rigidly moved copy per
/// transform each fill one acquisition segment; the segment holding the
/// k-space center always takes the original image.
Slice2D apply_motion(const Slice2D& slice, const MotionParams& p);

/// Scales every num_ghosts-th line (counted from the center line along the
/// ghost axis) by (1 - intensity). Lines within floor(restore_center * n / 2)
/// of the center, including the center line and thus DC, are untouched.
Slice2D apply_ghosting(const Slice2D& slice, const GhostingParams& p);

/// exp(sum c_pq x^p y^q) with x, y normalized to [-1, 1] across the slice.
std::vector<double> bias_field(std::array<std::size_t, 2> dims,
                               const BiasFieldParams& p);
Slice2D apply_bias_field(const Slice2D& slice, const BiasFieldParams& p);

/// Min-max normalize, raise to gamma, rescale to the original range. A
/// constant slice is returned unchanged.
Slice2D apply_gamma(const Slice2D& slice, const GammaParams& p);

Slice2D apply_transform(const Slice2D& slice, const TransformParams& params);

// ---------------------------------------------------------------------------
// Sampling and policy

/// Categorical draw with probabilities weights / sum(weights). Throws
/// ParameterError when all weights are zero.
TransformKind sample_one_of(const PolicyWeights& weights, Rng& rng);

MotionParams sample_motion(const MotionRanges& r, std::span<const int> axes, Rng& rng);
GhostingParams sample_ghosting(const GhostingRanges& r, std::span<const int> axes, Rng& rng);
BiasFieldParams sample_bias_field(const BiasFieldRanges& r, Rng& rng);
GammaParams sample_gamma(const GammaRanges& r, Rng& rng);

struct Augmented {
  Slice2D slice;
  TransformRecord record;
};

/// Draws one transform kind and its parameters from a stream seeded with
/// `seed`, then applies it. The result is a pure function of
/// (slice, config, seed).
Augmented augment_slice(const Slice2D& slice, const AugmentConfig& config,
                        std::uint64_t seed);

/// Reapplies a recorded augmentation.
Slice2D replay(const TransformRecord& record, const Slice2D& slice);

nlohmann::json to_json(const TransformParams& params);
TransformParams transform_params_from_json(TransformKind kind, const nlohmann::json& j);
nlohmann::json to_json(const TransformRecord& record);
TransformRecord transform_record_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AugmentConfig& config);
AugmentConfig augment_config_from_json(const nlohmann::json& j);

}  // namespace cmrpipe
