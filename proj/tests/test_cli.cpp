#include "doctest.h"

#include <fstream>
#include <map>
#include <set>

#include "cmrpipe/cli.hpp"
#include "cmrpipe/nifti.hpp"
#include "cmrpipe/preview.hpp"
#include "json.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "cmrpipe");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cmrpipe::run_cli(int(argv.size()), argv.data());
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream is(p);
  return nlohmann::json::parse(is);
}

/// Every regular file under `root`, relative path to contents.
std::map<std::string, std::vector<char>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<char>> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testing::read_bytes(e.path());
  return out;
}

/// Small cohort plus a config that keeps the pipeline fast.
struct Cohort {
  testing::TempDir dir{"cli"};
  fs::path data = dir / "data";
  fs::path config = dir / "config.json";

  explicit Cohort(int subjects = 3) {
    REQUIRE(run({"synth", "--output", data.string(), "--subjects", std::to_string(subjects), "--seed",
                 "3", "--shape", "64,64,4", "--spacing", "2.6,2.6,8"}) == 0);
    std::ofstream(config) << R"({"resample": {"inplane_spacing": 2.5}, "crop": {"size": 64}})";
  }
  std::string manifest() const { return (data / "manifest.json").string(); }
};

}  // namespace

TEST_CASE("synth and manifest agree") {
  Cohort c(2);
  const auto m = read_json(c.data / "manifest.json");
  CHECK(m["subjects"].size() == 2);
  CHECK(run({"manifest", "--data", c.data.string(), "--output", (c.dir / "m.json").string()}) == 0);
  const auto scanned = read_json(c.dir / "m.json");
  CHECK(scanned["subjects"].size() == 2);
  CHECK(scanned["subjects"][0]["cases"].size() == 8);
  CHECK(read_json(c.dir / "m.skipped.json").size() == 1);  // manifest.json itself
}

TEST_CASE("split, fit, preprocess with provenance") {
  Cohort c(5);
  const auto split = (c.dir / "split.json").string();
  REQUIRE(run({"split", "--manifest", c.manifest(), "--output", split, "--seed", "1"}) == 0);
  const auto s = read_json(split);
  CHECK(s["val"].size() == 1);
  CHECK(s["train"].size() == 4);
  CHECK(s["provenance"]["command"] == "split");

  const auto model = (c.dir / "hist" / "model.json").string();
  REQUIRE(run({"fit-histogram", "--manifest", c.manifest(), "--split", split, "--output", model,
               "--config", c.config.string()}) == 0);
  CHECK(fs::exists(model));

  const fs::path out = c.dir / "pre";
  REQUIRE(run({"preprocess", "--manifest", c.manifest(), "--histogram", model, "--output", out.string(),
               "--config", c.config.string(), "--jobs", "2"}) == 0);
  const auto prov = read_json(out / "provenance.json");
  CHECK(prov["command"] == "preprocess");
  CHECK(prov["config"]["crop"]["size"] == nlohmann::json::array({64, 64}));
  CHECK(prov["cases"].size() == 40);
  CHECK(prov.contains("config_hash"));
  CHECK_FALSE(prov.contains("jobs"));
  CHECK_FALSE(fs::exists(out / "errors.json"));
  const auto pre = read_json(out / "manifest.json");
  const std::string first = pre["subjects"][0]["cases"][0]["image"];
  CHECK(first.find("P001-1-ED_pre.nii.gz") != std::string::npos);
  const cmrpipe::Volume v = cmrpipe::read_nifti((out / "P001-1-ED_pre.nii.gz").string());
  CHECK(v.shape() == cmrpipe::Shape3{64, 64, 4});
}

TEST_CASE("augment is reproducible and independent of job count") {
  Cohort c(2);
  const fs::path a = c.dir / "a", b = c.dir / "b", other = c.dir / "o";
  REQUIRE(run({"augment", "--manifest", c.manifest(), "--output", a.string(), "--seed", "7"}) == 0);
  REQUIRE(run({"augment", "--manifest", c.manifest(), "--output", b.string(), "--seed", "7", "--jobs",
               "4"}) == 0);
  REQUIRE(run({"augment", "--manifest", c.manifest(), "--output", other.string(), "--seed", "8"}) == 0);
  const auto sa = snapshot(a), sb = snapshot(b), so = snapshot(other);
  CHECK(sa.size() == 16 * 3 + 2);  // image, records and label per case; manifest; provenance
  CHECK(sa == sb);
  CHECK(sa.at("P001-1-ED_aug.nii.gz") != so.at("P001-1-ED_aug.nii.gz"));
  const auto rec = read_json(a / "P001-1-ED_aug.records.json");
  REQUIRE(rec.size() == 4);
  CHECK(rec[2]["source"]["slice"] == 2);
  CHECK(rec[0]["source"]["case_id"] == "P001-1-ED");

  const fs::path two = c.dir / "two";
  REQUIRE(run({"augment", "--manifest", c.manifest(), "--output", two.string(), "--seed", "7", "--copies",
               "2"}) == 0);
  CHECK(fs::exists(two / "manifest_aug1.json"));
  CHECK(fs::exists(two / "manifest_aug2.json"));
  CHECK_FALSE(fs::exists(two / "P001-1-ED_aug.nii.gz"));
  CHECK(testing::read_bytes(two / "P001-1-ED_aug1.nii.gz") == sa.at("P001-1-ED_aug.nii.gz"));
  CHECK(testing::read_bytes(two / "P001-1-ED_aug2.nii.gz") != sa.at("P001-1-ED_aug.nii.gz"));
}

TEST_CASE("evaluate ground truth against itself") {
  Cohort c(2);
  const fs::path out = c.dir / "eval";
  REQUIRE(run({"evaluate", "--manifest", c.manifest(), "--predictions", c.data.string(), "--output",
               out.string()}) == 0);
  const auto summary = read_json(out / "summary.json");
  CHECK(summary["cases"] == 16);
  for (const char* s : {"LV", "MYO", "RV"}) {
    CHECK(summary["dice"][s] == 1.0);
    CHECK(summary["hd95_mm"][s] == 0.0);
  }
  std::ifstream csv(out / "metrics.csv");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 1 + 16 * 3);
  CHECK(fs::exists(out / "table.txt"));

  // A missing prediction is a case failure.
  fs::remove(c.data / "P002-4-ES-label.nii.gz");
  fs::remove(c.data / "P002-4-ES.nii.gz");
  const fs::path out2 = c.dir / "eval2";
  CHECK(run({"evaluate", "--manifest", c.manifest(), "--predictions", c.data.string(), "--output",
             out2.string()}) == 1);
  const auto err = read_json(out2 / "errors.json");
  REQUIRE(err["failures"].size() == 1);
  CHECK(err["failures"][0]["case_id"] == "P002-4-ES");
}

TEST_CASE("preview writes one montage per case") {
  Cohort c(1);
  const fs::path out = c.dir / "prev";
  REQUIRE(run({"preview", "--manifest", c.manifest(), "--output", out.string(), "--max-slices", "3"}) == 0);
  const cmrpipe::GrayImage img = cmrpipe::read_png(out / "P001-1-ED_preview.png");
  CHECK(img.width == 3 * 64);
  CHECK(img.height == 2 * 64);
  std::size_t pngs = 0;
  for (const auto& e : fs::directory_iterator(out)) pngs += e.path().extension() == ".png";
  CHECK(pngs == 8);
}

TEST_CASE("usage and config errors exit with 2") {
  Cohort c(1);
  std::ofstream(c.dir / "bad.json") << R"({"crop": {"size": 64, "colour": 1}})";
  CHECK(run({"preprocess", "--manifest", c.manifest(), "--output", (c.dir / "x").string(), "--config",
             (c.dir / "bad.json").string()}) == 2);
  CHECK(run({"augment", "--output", (c.dir / "x").string()}) == 2);
  CHECK(run({"augment", "--manifest", c.manifest(), "--output", (c.dir / "x").string(), "--labels",
             "lv=1,myo=1,rv=2"}) == 2);
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"augment", "--manifest", (c.dir / "nope.json").string(), "--output", "x"}) == 2);
}

TEST_CASE("a corrupt case fails the run; keep-going finishes the rest") {
  Cohort c(2);
  std::ofstream(c.data / "P001-3-ES.nii.gz", std::ios::trunc) << "not a nifti file";
  const fs::path stop = c.dir / "stop", go = c.dir / "go";
  CHECK(run({"augment", "--manifest", c.manifest(), "--output", stop.string()}) == 1);
  const auto e1 = read_json(stop / "errors.json");
  REQUIRE(e1["failures"].size() == 1);
  CHECK(e1["failures"][0]["case_id"] == "P001-3-ES");
  CHECK(e1["failures"][0]["kind"] == "format");

  CHECK(run({"augment", "--manifest", c.manifest(), "--output", go.string(), "--keep-going", "--jobs",
             "3"}) == 1);
  const auto e2 = read_json(go / "errors.json");
  CHECK(e2["completed"] == 15);
  CHECK(e2["total"] == 16);
  CHECK(fs::exists(go / "P002-4-ES_aug.nii.gz"));
  CHECK_FALSE(fs::exists(go / "P001-3-ES_aug.nii.gz"));
  CHECK(read_json(go / "manifest.json")["subjects"][0]["cases"].size() == 7);
}
