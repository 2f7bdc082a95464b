#include "cmrpipe/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "cmrpipe/error.hpp"
#include "cmrpipe/pipeline.hpp"
#include "cmrpipe/synthetic.hpp"

namespace cmrpipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Shared {
  std::string manifest;
  std::string output;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string config;
  std::string labels;
  bool keep_going = false;
};

void add_shared(CLI::App* app, Shared& s, bool needs_manifest = true) {
  auto* m = app->add_option("--manifest", s.manifest, "Manifest JSON or data directory");
  if (needs_manifest) m->required();
  app->add_option("--output", s.output, "Output path")->required();
  app->add_option("--seed", s.seed, "Master seed");
  app->add_option("--jobs", s.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app->add_option("--config", s.config, "Pipeline config (.toml or .json)");
  app->add_option("--labels", s.labels, "Label codes, e.g. lv=1,myo=2,rv=3");
  app->add_flag("--keep-going", s.keep_going, "Continue past failing cases");
}

PipelineConfig load_config(const Shared& s) {
  PipelineConfig c = s.config.empty() ? PipelineConfig{} : load_pipeline_config(s.config);
  if (!s.labels.empty()) {
    try {
      c.labels = parse_label_map(s.labels);
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
    c.labels.validate();
  }
  return c;
}

Manifest load_manifest_source(const std::string& source, const PipelineConfig& config) {
  if (fs::is_directory(source)) {
    ManifestBuild b = build_manifest(source, config.naming_pattern);
    for (const std::string& p : b.skipped) std::cerr << "skipped: " << p << "\n";
    return std::move(b.manifest);
  }
  return load_manifest(source);
}

RunOptions run_options(const Shared& s) {
  return {s.output, s.seed, s.jobs, s.keep_going, s.manifest};
}

int report(const RunResult& r, const std::string& where) {
  if (r.ok()) return 0;
  std::cerr << r.failures.size() << " case(s) failed; see " << where << "\n";
  for (const CaseFailure& f : r.failures)
    std::cerr << "  " << f.case_id << " [" << f.kind << "] " << f.message << "\n";
  return 1;
}

Manifest train_subset(const Manifest& m, const std::string& split_path) {
  if (split_path.empty()) return m;
  std::ifstream is(split_path);
  if (!is) throw IoError("cannot read " + split_path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw FormatError(split_path + ": " + e.what());
  }
  const SplitSpec s = split_from_json(j);
  return m.subset(s.train);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Cardiac MRI preprocessing, augmentation and evaluation"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Shared sh;

  auto* manifest_cmd = app.add_subcommand("manifest", "Build a manifest from a data directory");
  std::string data_dir, pattern;
  manifest_cmd->add_option("--data", data_dir, "Data directory")->required();
  manifest_cmd->add_option("--output", sh.output, "Manifest JSON to write")->required();
  manifest_cmd->add_option("--pattern", pattern, "Filename pattern");
  manifest_cmd->add_option("--config", sh.config, "Pipeline config (.toml or .json)");

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic phantom cohort");
  std::size_t subjects = 20;
  std::vector<std::size_t> shape{256, 256, 10};
  std::vector<double> spacing{1.4, 1.4, 8.0};
  synth_cmd->add_option("--output", sh.output, "Directory")->required();
  synth_cmd->add_option("--subjects", subjects, "Number of subjects")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", sh.seed, "Seed");
  synth_cmd->add_option("--shape", shape, "Voxels per axis")->expected(3)->delimiter(',');
  synth_cmd->add_option("--spacing", spacing, "Millimetres per axis")->expected(3)->delimiter(',');

  auto* split_cmd = app.add_subcommand("split", "Subject-level train/validation split");
  std::optional<double> fraction;
  add_shared(split_cmd, sh);
  split_cmd->add_option("--fraction", fraction, "Validation fraction");

  auto* fit_cmd = app.add_subcommand("fit-histogram", "Learn the histogram standard scale");
  std::string split_path;
  add_shared(fit_cmd, sh);
  fit_cmd->add_option("--split", split_path, "Split JSON; fit on its training subjects");

  auto* pre_cmd = app.add_subcommand("preprocess", "Reorient, resample, crop and standardize");
  std::string histogram_path;
  add_shared(pre_cmd, sh);
  pre_cmd->add_option("--histogram", histogram_path, "Landmark model JSON");
  pre_cmd->add_option("--split", split_path, "Split JSON used when fitting a model");

  auto* aug_cmd = app.add_subcommand("augment", "Apply the artifact augmentation policy");
  std::optional<std::size_t> copies;
  add_shared(aug_cmd, sh);
  aug_cmd->add_option("--copies", copies, "Augmented copies per case")->check(CLI::PositiveNumber);

  auto* eval_cmd = app.add_subcommand("evaluate", "Dice and HD95 against ground truth");
  std::string predictions;
  add_shared(eval_cmd, sh);
  eval_cmd->add_option("--predictions", predictions, "Prediction directory or manifest")
      ->required();

  auto* preview_cmd = app.add_subcommand("preview", "PNG montages of original vs augmented");
  std::size_t max_slices = 6;
  add_shared(preview_cmd, sh);
  preview_cmd->add_option("--max-slices", max_slices, "Slices per montage")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*manifest_cmd) {
      const PipelineConfig cfg = load_config(sh);
      ManifestBuild b = build_manifest(data_dir, pattern.empty() ? cfg.naming_pattern : pattern);
      const fs::path out(sh.output);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_manifest(b.manifest, out);
      fs::path skipped = out;
      skipped.replace_extension(".skipped.json");
      write_json(skipped, b.skipped);
      std::cout << b.manifest.subjects.size() << " subjects, " << b.manifest.case_count()
                << " cases, " << b.skipped.size() << " skipped\n";
      return 0;
    }
    if (*synth_cmd) {
      PhantomOptions opts;
      opts.shape = {shape[0], shape[1], shape[2]};
      opts.spacing = {spacing[0], spacing[1], spacing[2]};
      const Manifest m = write_synthetic_cohort(sh.output, subjects, sh.seed, opts);
      Manifest rel = m;
      for (Subject& s : rel.subjects)
        for (CaseEntry& c : s.cases) {
          c.image = fs::path(c.image).filename().string();
          if (c.label) c.label = fs::path(*c.label).filename().string();
        }
      save_manifest(rel, fs::path(sh.output) / "manifest.json");
      std::cout << m.case_count() << " cases written to " << sh.output << "\n";
      return 0;
    }

    const PipelineConfig cfg = load_config(sh);
    const Manifest manifest = load_manifest_source(sh.manifest, cfg);
    const RunOptions opts = run_options(sh);

    if (*split_cmd) {
      const SplitSpec s = split_subjects(manifest, fraction.value_or(cfg.validation_fraction), sh.seed);
      const fs::path out(sh.output);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      json j = to_json(s);
      j["provenance"] = provenance("split", cfg, opts);
      write_json(out, j);
      std::cout << s.train.size() << " training, " << s.val.size() << " validation subjects\n";
      return 0;
    }
    if (*fit_cmd) {
      const FitResult r =
          fit_histogram_command(train_subset(manifest, split_path), cfg, opts, sh.output);
      const fs::path out(sh.output);
      return report(r.run, (out.has_parent_path() ? out.parent_path() : fs::path(".")) /
                               "errors.json");
    }
    if (*pre_cmd) {
      std::optional<LandmarkModel> model;
      if (cfg.standardize) {
        if (!histogram_path.empty()) {
          model = load_landmark_model(histogram_path);
        } else {
          const FitResult r = fit_histogram_command(train_subset(manifest, split_path), cfg, opts,
                                                    fs::path(sh.output) / "histogram.json");
          if (!r.run.ok() && !sh.keep_going)
            return report(r.run, (fs::path(sh.output) / "errors.json").string());
          model = r.model;
        }
      }
      return report(preprocess_command(manifest, cfg, model, opts),
                    (fs::path(sh.output) / "errors.json").string());
    }
    if (*aug_cmd) {
      PipelineConfig c = cfg;
      if (copies) c.augment_copies = *copies;
      return report(augment_command(manifest, c, opts),
                    (fs::path(sh.output) / "errors.json").string());
    }
    if (*eval_cmd) {
      std::vector<std::pair<std::string, std::string>> preds;
      if (fs::is_directory(predictions)) {
        preds = index_label_files(predictions, cfg.naming_pattern);
      } else {
        for (const CaseRef& c : load_manifest(predictions).cases())
          preds.emplace_back(c.id(), c.entry->label ? *c.entry->label : c.entry->image);
      }
      std::vector<MetricsReport> reports;
      const RunResult r = evaluate_command(preds, manifest, cfg, opts, &reports);
      if (!reports.empty()) {
        std::ifstream table(fs::path(sh.output) / "table.txt");
        std::cout << table.rdbuf();
      }
      return report(r, (fs::path(sh.output) / "errors.json").string());
    }
    if (*preview_cmd) {
      return report(preview_command(manifest, cfg, opts, max_slices),
                    (fs::path(sh.output) / "errors.json").string());
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.kind() << "]: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace cmrpipe
