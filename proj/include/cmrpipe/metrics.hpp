#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cmrpipe/volume.hpp"

namespace cmrpipe {

enum class Structure { lv = 0, myo = 1, rv = 2 };

inline constexpr std::array<Structure, 3> kStructures{Structure::lv, Structure::myo,
                                                      Structure::rv};

std::string to_string(Structure s);  // "LV", "MYO", "RV"

/// Label code for each structure.
struct LabelMap {
  std::int16_t lv = 1;
  std::int16_t myo = 2;
  std::int16_t rv = 3;

  [[nodiscard]] std::int16_t code(Structure s) const;
  /// Throws ConfigError on duplicate or background (0) codes.
  void validate() const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Parses "lv=1,myo=2,rv=3". Keys are case-insensitive; all three are required.
LabelMap parse_label_map(const std::string& text);
std::string to_string(const LabelMap& map);

/// Throws ConfigError when `labels` holds a nonzero code outside `map`.
void check_labels(const LabelVolume& labels, const LabelMap& map);

/// World-mm positions (spacing-scaled voxel indices) of foreground voxels
/// that have at least one 6-connected background neighbour. Voxels outside
/// the grid count as background.
std::vector<std::array<double, 3>> surface_points(const LabelVolume& vol,
                                                  std::int16_t label,
                                                  const Spacing3& spacing);

/// 2|A ∩ B| / (|A| + |B|); 1.0 when both masks are empty.
double dice(const LabelVolume& pred, const LabelVolume& gt, std::int16_t label);

/// Linear-interpolated percentile of an ascending sequence.
double sorted_percentile(std::span<const double> sorted, double q);

/// Symmetric 95th-percentile surface distance in mm. nullopt when either
/// mask is empty for `label`.
std::optional<double> hd95(const LabelVolume& pred, const LabelVolume& gt,
                           std::int16_t label, const Spacing3& spacing);

/// Same, but the maximum (100th percentile) rather than the 95th.
std::optional<double> hausdorff(const LabelVolume& pred, const LabelVolume& gt,
                                std::int16_t label, const Spacing3& spacing);

struct StructureMetrics {
  double dice = 0.0;
  std::optional<double> hd95_mm;
};

struct MetricsReport {
  std::string case_id;
  std::array<StructureMetrics, 3> structures;  ///< indexed by Structure
  double mean_dice = 0.0;

  [[nodiscard]] const StructureMetrics& operator[](Structure s) const {
    return structures[static_cast<std::size_t>(s)];
  }
};

/// Dice and HD95 for LV, MYO and RV. Spacing comes from the ground truth
/// affine.
MetricsReport evaluate_case(const std::string& case_id, const LabelVolume& pred,
                            const LabelVolume& gt, const LabelMap& labels = {});

struct CohortSummary {
  std::size_t cases = 0;
  std::array<double, 3> mean_dice{};
  std::array<std::optional<double>, 3> mean_hd95_mm{};
  std::array<std::size_t, 3> undefined_hd95{};
  double mean_dice_all = 0.0;
};

/// Per-structure means over cases (sorted by case id before reducing);
/// undefined HD95 values are skipped and counted. Throws UsageError on
/// empty input.
CohortSummary aggregate(std::span<const MetricsReport> reports);

/// CSV rows: case_id,structure,dice,hd95_mm (empty hd95 when undefined).
std::string metrics_csv(std::span<const MetricsReport> reports);
nlohmann::json to_json(const CohortSummary& summary);
/// Plain-text table with DICE and Hausdorff (mm) column groups for LV, MYO, RV.
std::string summary_table(const CohortSummary& summary, const std::string& row_name);

}  // namespace cmrpipe
