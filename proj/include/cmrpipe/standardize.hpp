#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cmrpipe/volume.hpp"

namespace cmrpipe {

/// Which voxels contribute to landmark percentiles.
enum class Foreground {
  none,            ///< whole volume
  mean_threshold,  ///< voxels strictly above the volume mean
};

std::string to_string(Foreground fg);
Foreground foreground_from_string(const std::string& s);

/// Lower and upper ends of the reference interval every training volume's
/// landmarks are rescaled onto before averaging.
inline constexpr double kReferenceMin = 0.0;
inline constexpr double kReferenceMax = 100.0;

/// Learned percentile landmarks and the standard intensity scale they map
/// onto.
struct LandmarkModel {
  std::vector<double> percentiles;     ///< strictly increasing, in (0, 100)
  std::vector<double> standard_scale;  ///< nondecreasing, same length
  Foreground foreground = Foreground::none;

  [[nodiscard]] std::pair<double, double> value_range() const {
    return {standard_scale.front(), standard_scale.back()};
  }

  /// Throws ParameterError when the invariants do not hold.
  void validate() const;

  friend bool operator==(const LandmarkModel&, const LandmarkModel&) = default;
};

/// {1, 10, 20, ..., 90, 99}.
std::vector<double> default_percentiles();

/// Percentiles of `values` with linear interpolation between order
/// statistics (position q/100 * (n-1) in the sorted sequence).
std::vector<double> percentile_values(std::vector<double> values,
                                      std::span<const double> percentiles);

/// Intensities selected by the foreground rule. Throws MaskError when the
/// selection is empty.
std::vector<double> foreground_values(const Volume& vol, Foreground fg);

/// A volume's own landmark intensities at the model percentiles. Throws
/// DegenerateHistogramError when the outermost landmarks coincide.
std::vector<double> volume_landmarks(const Volume& vol,
                                     std::span<const double> percentiles,
                                     Foreground fg);

/// Landmarks of one volume linearly mapped so the outermost ones land on
/// [kReferenceMin, kReferenceMax].
std::vector<double> reference_landmarks(const Volume& vol,
                                        std::span<const double> percentiles,
                                        Foreground fg);

/// Position-wise mean of per-volume reference landmarks, summed in input
/// order.
LandmarkModel average_landmarks(std::span<const std::vector<double>> per_volume,
                                std::vector<double> percentiles, Foreground fg);

/// Learns the standard scale: every volume's landmarks are linearly mapped
/// so the outermost ones land on [kReferenceMin, kReferenceMax], then the
/// vectors are averaged position by position in input order.
LandmarkModel fit_landmarks(std::span<const Volume> train_volumes,
                            std::vector<double> percentiles = default_percentiles(),
                            Foreground fg = Foreground::none);

/// Piecewise-linear monotone map from source landmarks to target values.
/// Outside the outermost landmarks the first/last non-flat segment slope is
/// continued.
class LandmarkMap {
 public:
  LandmarkMap(std::vector<double> source, std::vector<double> target);

  double operator()(double x) const;

  [[nodiscard]] const std::vector<double>& source() const noexcept { return source_; }
  [[nodiscard]] const std::vector<double>& target() const noexcept { return target_; }

 private:
  std::vector<double> source_;
  std::vector<double> target_;
  double left_slope_ = 0.0;
  double right_slope_ = 0.0;
};

/// Maps `vol` onto the model's standard scale using its own landmarks.
Volume standardize(const Volume& vol, const LandmarkModel& model);

nlohmann::json to_json(const LandmarkModel& model);
LandmarkModel landmark_model_from_json(const nlohmann::json& j);
void save_landmark_model(const LandmarkModel& model, const std::string& path);
LandmarkModel load_landmark_model(const std::string& path);

}  // namespace cmrpipe
