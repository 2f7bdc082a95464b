#include "doctest.h"

#include <fstream>
#include <set>

#include "cmrpipe/error.hpp"
#include "cmrpipe/manifest.hpp"
#include "support.hpp"

using namespace cmrpipe;
namespace fs = std::filesystem;

namespace {

void touch(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << "";
}

/// 20 subjects x 4 intensities x 2 phases, with labels.
void full_tree(const fs::path& root) {
  for (int s = 1; s <= 20; ++s) {
    char id[8];
    std::snprintf(id, sizeof id, "P%03d", s);
    for (int i = 1; i <= 4; ++i)
      for (const char* ph : {"ED", "ES"}) {
        const std::string stem = std::string(id) + "-" + std::to_string(i) + "-" + ph;
        touch(root / id / (stem + ".nii.gz"));
        touch(root / id / (stem + "-label.nii.gz"));
      }
  }
}

Manifest small_manifest(int subjects) {
  Manifest m;
  for (int s = 0; s < subjects; ++s)
    m.subjects.push_back({"S" + std::to_string(100 + s), {{1, Phase::ED, "x.nii", std::nullopt}}});
  return m;
}

}  // namespace

TEST_CASE("case ids") {
  CHECK(case_id("P001", 2, Phase::ES) == "P001-2-ES");
  CHECK(phase_from_string("ED") == Phase::ED);
  CHECK_THROWS_AS(phase_from_string("MD"), FormatError);
}

TEST_CASE("scanning parses names, labels and stage suffixes") {
  testing::TempDir dir("manifest");
  touch(dir / "P001-2-ES.nii.gz");
  touch(dir / "P001-2-ES-label.nii.gz");
  touch(dir / "sub" / "P-7-1-ED_pre_aug2.nii");
  touch(dir / "P002-5-ED.nii.gz");  // intensity out of range
  touch(dir / "notes.txt");
  touch(dir / "P003-1-XX.nii");
  const ScanResult r = scan_nifti_files(dir.path());
  REQUIRE(r.files.size() == 3);
  CHECK(r.skipped.size() == 3);
  const auto& a = r.files[0];
  CHECK(a.subject == "P001");
  CHECK(a.breath_intensity == 2);
  CHECK(a.phase == Phase::ES);
  CHECK(a.is_label);
  CHECK(a.id() == "P001-2-ES");
  CHECK_FALSE(r.files[1].is_label);
  CHECK(r.files[2].subject == "P-7");
  CHECK(r.files[2].breath_intensity == 1);
  CHECK_THROWS_AS(scan_nifti_files(dir / "nope"), IoError);
}

TEST_CASE("custom naming patterns") {
  testing::TempDir dir("manifest");
  touch(dir / "case_P9_ES_b3.nii");
  const ScanResult r = scan_nifti_files(dir.path(), "case_<subject>_<phase>_b<intensity>");
  REQUIRE(r.files.size() == 1);
  CHECK(r.files[0].id() == "P9-3-ES");
  CHECK_THROWS_AS(scan_nifti_files(dir.path(), "<subject>-<phase>"), ConfigError);
  CHECK_THROWS_AS(scan_nifti_files(dir.path(), "<subject>-<intensity>-<phase>-<slice>"), ConfigError);
  CHECK_THROWS_AS(scan_nifti_files(dir.path(), "<subject>-<intensity>-<phase"), ConfigError);
}

TEST_CASE("full cohort builds 160 cases") {
  testing::TempDir dir("manifest");
  full_tree(dir.path());
  touch(dir / "P005" / "P005-1-ED.txt");
  const ManifestBuild b = build_manifest(dir.path());
  CHECK(b.manifest.subjects.size() == 20);
  CHECK(b.manifest.case_count() == 160);
  CHECK(b.skipped.size() == 1);
  const auto cases = b.manifest.cases();
  CHECK(cases.front().id() == "P001-1-ED");
  CHECK(cases[1].id() == "P001-1-ES");
  CHECK(cases.back().id() == "P020-4-ES");
  for (const CaseRef& c : cases) CHECK(c.entry->label.has_value());
}

TEST_CASE("orphan labels are skipped, missing labels are allowed") {
  testing::TempDir dir("manifest");
  touch(dir / "A-1-ED.nii");
  touch(dir / "A-1-ES-label.nii");
  touch(dir / "A-2-ED.nii");
  touch(dir / "A-2-ED-label.nii");
  const ManifestBuild b = build_manifest(dir.path());
  REQUIRE(b.manifest.case_count() == 2);
  CHECK_FALSE(b.manifest.subjects[0].cases[0].label.has_value());
  CHECK(b.manifest.subjects[0].cases[1].label.has_value());
  REQUIRE(b.skipped.size() == 1);
  CHECK(fs::path(b.skipped[0]).filename() == "A-1-ES-label.nii");
}

TEST_CASE("duplicate cases are rejected") {
  testing::TempDir dir("manifest");
  touch(dir / "A-1-ED.nii");
  touch(dir / "x" / "A-1-ED.nii.gz");
  CHECK_THROWS_AS(build_manifest(dir.path()), ManifestError);

  Manifest m = small_manifest(2);
  m.subjects[1].id = m.subjects[0].id;
  CHECK_THROWS_AS(m.normalize(), ManifestError);
  Manifest bad = small_manifest(1);
  bad.subjects[0].cases[0].breath_intensity = 9;
  CHECK_THROWS_AS(bad.normalize(), ManifestError);
}

TEST_CASE("manifest JSON round trip and relative paths") {
  testing::TempDir dir("manifest");
  full_tree(dir / "data");
  const Manifest m = build_manifest(dir / "data").manifest;
  CHECK(manifest_from_json(nlohmann::json::parse(to_json(m).dump())) == m);
  save_manifest(m, dir / "m.json");
  CHECK(load_manifest(dir / "m.json") == m);

  Manifest rel;
  rel.subjects.push_back({"A", {{1, Phase::ES, "imgs/a.nii", std::string("/abs/a-label.nii")}}});
  fs::create_directories(dir / "sub");
  save_manifest(rel, dir / "sub" / "rel.json");
  const Manifest back = load_manifest(dir / "sub" / "rel.json");
  CHECK(back.subjects[0].cases[0].image == (dir / "sub" / "imgs" / "a.nii").string());
  CHECK(*back.subjects[0].cases[0].label == "/abs/a-label.nii");

  std::ofstream(dir / "broken.json") << "{ nope";
  CHECK_THROWS_AS(load_manifest(dir / "broken.json"), FormatError);
  CHECK_THROWS_AS(load_manifest(dir / "absent.json"), IoError);
  CHECK_THROWS_AS(manifest_from_json(nlohmann::json{{"subjects", 3}}), FormatError);
}

TEST_CASE("subset keeps manifest order and rejects unknown ids") {
  const Manifest m = small_manifest(5);
  const std::vector<std::string> ids{"S103", "S101"};
  const Manifest s = m.subset(ids);
  REQUIRE(s.subjects.size() == 2);
  CHECK(s.subjects[0].id == "S101");
  const std::vector<std::string> unknown{"S999"};
  CHECK_THROWS_AS(m.subset(unknown), ManifestError);
}

TEST_CASE("subject-level split") {
  const Manifest m = small_manifest(20);
  const SplitSpec a = split_subjects(m, 0.2, 42);
  CHECK(a.val.size() == 4);
  CHECK(a.train.size() == 16);
  std::set<std::string> all(a.train.begin(), a.train.end());
  for (const auto& v : a.val) CHECK(all.insert(v).second);
  CHECK(all.size() == 20);
  CHECK(std::is_sorted(a.val.begin(), a.val.end()));

  const SplitSpec b = split_subjects(m, 0.2, 42);
  CHECK(a.val == b.val);
  bool differs = false;
  for (std::uint64_t seed = 0; seed < 10; ++seed) differs |= split_subjects(m, 0.2, seed).val != a.val;
  CHECK(differs);

  const SplitSpec back = split_from_json(nlohmann::json::parse(to_json(a).dump()));
  CHECK(back.val == a.val);
  CHECK(back.train == a.train);
  CHECK(back.seed == 42);

  CHECK_THROWS_AS(split_subjects(small_manifest(2), 0.2, 1), ParameterError);
  CHECK_THROWS_AS(split_subjects(m, 0.99, 1), ParameterError);
  CHECK_THROWS_AS(split_subjects(m, 0.0, 1), ParameterError);
  CHECK_THROWS_AS(split_from_json(nlohmann::json::object()), FormatError);
}
