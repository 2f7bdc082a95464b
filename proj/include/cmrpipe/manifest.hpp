#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace cmrpipe {

enum class Phase { ED, ES };

std::string to_string(Phase p);
Phase phase_from_string(const std::string& s);

/// One labelled time point of one acquisition.
struct CaseEntry {
  int breath_intensity = 1;  ///< 1 full hold, 2 half hold, 3 free, 4 intensive
  Phase phase = Phase::ED;
  std::string image;
  std::optional<std::string> label;

  friend bool operator==(const CaseEntry&, const CaseEntry&) = default;
};

struct Subject {
  std::string id;
  std::vector<CaseEntry> cases;

  friend bool operator==(const Subject&, const Subject&) = default;
};

/// "<subject>-<intensity>-<phase>", e.g. "P001-2-ES".
std::string case_id(const std::string& subject, int intensity, Phase phase);

struct CaseRef {
  const Subject* subject;
  const CaseEntry* entry;
  [[nodiscard]] std::string id() const {
    return case_id(subject->id, entry->breath_intensity, entry->phase);
  }
};

struct Manifest {
  std::vector<Subject> subjects;

  [[nodiscard]] std::size_t case_count() const;
  /// All cases in subject, intensity, phase order.
  [[nodiscard]] std::vector<CaseRef> cases() const;
  [[nodiscard]] std::vector<std::string> subject_ids() const;
  /// Subjects restricted to `ids`, in manifest order. Unknown ids throw
  /// ManifestError.
  [[nodiscard]] Manifest subset(std::span<const std::string> ids) const;
  /// Sorts subjects and cases and checks uniqueness and intensity grades.
  void normalize();

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline constexpr const char* kDefaultNamingPattern = "<subject>-<intensity>-<phase>";

/// One NIfTI file whose name parsed under a naming pattern.
struct ScannedFile {
  std::string path;
  std::string subject;
  int breath_intensity = 1;
  Phase phase = Phase::ED;
  bool is_label = false;

  [[nodiscard]] std::string id() const { return case_id(subject, breath_intensity, phase); }
};

struct ScanResult {
  std::vector<ScannedFile> files;    ///< sorted by path
  std::vector<std::string> skipped;  ///< names that do not parse
};

/// Recursive directory scan. Stems follow `pattern` (placeholders
/// <subject>, <intensity>, <phase>), optionally followed by "-label" and any
/// number of "_<stage>" suffixes, with extension .nii or .nii.gz.
/// Intensities outside 1-4 count as unparseable.
ScanResult scan_nifti_files(const std::filesystem::path& root,
                            const std::string& pattern = kDefaultNamingPattern);

struct ManifestBuild {
  Manifest manifest;
  std::vector<std::string> skipped;  ///< paths that could not be placed
};

/// Groups the files of scan_nifti_files into subjects and cases. Files that
/// do not parse, and label files without an image, are reported as skipped.
/// Throws ManifestError on a duplicate (subject, intensity, phase).
ManifestBuild build_manifest(const std::filesystem::path& data_root,
                             const std::string& pattern = kDefaultNamingPattern);

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);
void save_manifest(const Manifest& m, const std::filesystem::path& path);
/// Relative image/label paths are resolved against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);

struct SplitSpec {
  std::uint64_t seed = 0;
  double fraction = 0.2;
  std::vector<std::string> train;
  std::vector<std::string> val;
};

/// Subject-level split: round(fraction * N) subjects go to validation,
/// taken from a seeded Fisher-Yates shuffle of the sorted subject ids.
/// Throws ParameterError when that leaves either side empty.
SplitSpec split_subjects(const Manifest& m, double fraction, std::uint64_t seed);

nlohmann::json to_json(const SplitSpec& s);
SplitSpec split_from_json(const nlohmann::json& j);

}  // namespace cmrpipe
