#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cmrpipe/artifacts.hpp"
#include "cmrpipe/manifest.hpp"
#include "cmrpipe/metrics.hpp"
#include "cmrpipe/standardize.hpp"
#include "cmrpipe/volume.hpp"

namespace cmrpipe {

inline constexpr const char* kToolName = "cmrpipe";
inline constexpr const char* kToolVersion = "0.1.0";

enum class CropMode { center, mask_centroid };
enum class StandardizeOrder { after_crop, before_crop };

/// Everything that shapes pipeline outputs. Loaded from JSON or TOML; the
/// resolved form is embedded in every provenance file.
struct PipelineConfig {
  std::array<double, 2> inplane_spacing{1.25, 1.25};
  std::optional<double> through_plane_spacing;  ///< unset keeps the input spacing
  std::array<std::size_t, 2> crop_size{256, 256};
  CropMode crop_mode = CropMode::center;
  double pad_value = 0.0;

  bool standardize = true;
  StandardizeOrder standardize_order = StandardizeOrder::after_crop;
  std::vector<double> percentiles = default_percentiles();
  Foreground foreground = Foreground::none;

  AugmentConfig augment;
  std::size_t augment_copies = 1;

  LabelMap labels;
  double validation_fraction = 0.2;
  std::string naming_pattern = kDefaultNamingPattern;
};

nlohmann::json to_json(const PipelineConfig& c);
/// Missing keys keep their defaults; unknown top-level keys are rejected.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
/// `.toml` files are parsed as TOML, anything else as JSON.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Hex FNV-1a of the canonical JSON dump.
std::string config_hash(const nlohmann::json& config);

// ---------------------------------------------------------------------------
// Per-case stages

struct PreparedCase {
  Volume image;
  std::optional<LabelVolume> labels;
  InplaneWindow window;                        ///< crop window on the resampled grid
  std::array<std::size_t, 2> resampled_inplane{};  ///< in-plane size before cropping
};

/// Reorient, resample to the configured spacing and crop (labels follow the
/// image grid, nearest neighbour). Standardization is not applied.
PreparedCase prepare_geometry(const Volume& image, const std::optional<LabelVolume>& labels,
                              const PipelineConfig& config);

/// Full preprocessing in the fixed order reorient, resample, crop,
/// standardize (or standardize before crop when configured). `model` may be
/// null to skip standardization.
PreparedCase preprocess_case(const Volume& image, const std::optional<LabelVolume>& labels,
                             const PipelineConfig& config, const LandmarkModel* model);

/// Volume at the stage where landmarks are learned for `config`.
Volume histogram_stage(const Volume& image, const std::optional<LabelVolume>& labels,
                       const PipelineConfig& config);

/// Augments every slice with a stream seeded by
/// derive_seed(master_seed, augment_stream_key(case_id, copy), slice_index).
Volume augment_volume(const Volume& vol, const AugmentConfig& config, std::uint64_t master_seed,
                      const std::string& case_id, std::size_t copy,
                      std::vector<TransformRecord>* records = nullptr);

/// Seed stream key for copy `copy` of a case: the case id, with "#<copy>"
/// appended after the first copy.
std::string augment_stream_key(const std::string& case_id, std::size_t copy);

// ---------------------------------------------------------------------------
// Commands

struct RunOptions {
  std::filesystem::path output;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool keep_going = false;
  std::string manifest_source;  ///< recorded in provenance
};

struct CaseFailure {
  std::string case_id;
  std::string kind;
  std::string message;
};

struct RunResult {
  std::size_t completed = 0;
  std::vector<CaseFailure> failures;
  [[nodiscard]] bool ok() const noexcept { return failures.empty(); }
};

struct FitResult {
  LandmarkModel model;
  RunResult run;
};

/// Fits the landmark model on `train` (geometry stage applied first) and
/// writes `model_path` plus a sibling `.provenance.json`. Failures go to
/// `errors.json` beside the model. With keep_going, failing cases are left
/// out of the fit; otherwise nothing else is written and the returned run
/// carries the failures. Throws UsageError when no case survives.
FitResult fit_histogram_command(const Manifest& train, const PipelineConfig& config,
                                    const RunOptions& options,
                                    const std::filesystem::path& model_path);

/// Writes `<stem>_pre.nii[.gz]` per image (and label; the extension follows
/// the input), `manifest.json`,
/// `provenance.json`, and `errors.json` when cases fail.
RunResult preprocess_command(const Manifest& manifest, const PipelineConfig& config,
                             const std::optional<LandmarkModel>& model, const RunOptions& options);

/// Writes `<stem>_aug[N].nii[.gz]`, one JSON array of transform records per
/// augmented volume, copied labels, one manifest per copy and provenance.
RunResult augment_command(const Manifest& manifest, const PipelineConfig& config,
                          const RunOptions& options);

/// Case id to label file for every NIfTI under `root` matching the naming
/// pattern; "-label" files take precedence over plain ones.
std::vector<std::pair<std::string, std::string>> index_label_files(
    const std::filesystem::path& root, const std::string& pattern);

/// Compares predictions to ground-truth labels; writes `metrics.csv`,
/// `summary.json`, `table.txt` and provenance.
RunResult evaluate_command(const std::vector<std::pair<std::string, std::string>>& predictions,
                           const Manifest& ground_truth, const PipelineConfig& config,
                           const RunOptions& options, std::vector<MetricsReport>* reports = nullptr);

/// PNG montages: top row original slices, bottom row the same slices after
/// augmentation with the seeds `augment` would use.
RunResult preview_command(const Manifest& manifest, const PipelineConfig& config,
                          const RunOptions& options, std::size_t max_slices);

/// Provenance document shared by all commands.
nlohmann::json provenance(const std::string& command, const PipelineConfig& config,
                          const RunOptions& options, nlohmann::json extra = nlohmann::json::object());

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace cmrpipe
