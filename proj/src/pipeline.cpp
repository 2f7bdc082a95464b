#include "cmrpipe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <toml.hpp>

#include "cmrpipe/error.hpp"
#include "cmrpipe/nifti.hpp"
#include "cmrpipe/preview.hpp"
#include "cmrpipe/rng.hpp"

namespace cmrpipe {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a table/object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
std::array<T, 2> pair_value(const json& j) {
  if (j.is_array()) {
    if (j.size() != 2) throw ConfigError("expected two values, got " + j.dump());
    return {j[0].get<T>(), j[1].get<T>()};
  }
  const T v = j.get<T>();
  return {v, v};
}

const char* to_string(CropMode m) { return m == CropMode::center ? "center" : "mask-centroid"; }

CropMode crop_mode_from_string(const std::string& s) {
  if (s == "center") return CropMode::center;
  if (s == "mask-centroid") return CropMode::mask_centroid;
  throw ConfigError("unknown crop mode '" + s + "'");
}

const char* to_string(StandardizeOrder o) {
  return o == StandardizeOrder::after_crop ? "after-crop" : "before-crop";
}

StandardizeOrder standardize_order_from_string(const std::string& s) {
  if (s == "after-crop") return StandardizeOrder::after_crop;
  if (s == "before-crop") return StandardizeOrder::before_crop;
  throw ConfigError("unknown standardization order '" + s + "'");
}

}  // namespace

json to_json(const PipelineConfig& c) {
  json augment = to_json(c.augment);
  augment["copies"] = c.augment_copies;
  return {
      {"resample",
       {{"inplane_spacing", c.inplane_spacing},
        {"through_plane_spacing",
         c.through_plane_spacing ? json(*c.through_plane_spacing) : json(nullptr)}}},
      {"crop", {{"size", c.crop_size}, {"mode", to_string(c.crop_mode)}, {"pad_value", c.pad_value}}},
      {"standardize",
       {{"enabled", c.standardize},
        {"order", to_string(c.standardize_order)},
        {"percentiles", c.percentiles},
        {"foreground", to_string(c.foreground)}}},
      {"augment", augment},
      {"labels", to_string(c.labels)},
      {"split", {{"validation_fraction", c.validation_fraction}}},
      {"naming_pattern", c.naming_pattern},
  };
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  try {
    check_keys(j, {"resample", "crop", "standardize", "augment", "labels", "split", "naming_pattern"},
               "config");
    if (j.contains("resample")) {
      const json& r = j.at("resample");
      check_keys(r, {"inplane_spacing", "through_plane_spacing"}, "[resample]");
      if (r.contains("inplane_spacing")) c.inplane_spacing = pair_value<double>(r.at("inplane_spacing"));
      if (r.contains("through_plane_spacing") && !r.at("through_plane_spacing").is_null())
        c.through_plane_spacing = r.at("through_plane_spacing").get<double>();
    }
    if (j.contains("crop")) {
      const json& r = j.at("crop");
      check_keys(r, {"size", "mode", "pad_value"}, "[crop]");
      if (r.contains("size")) c.crop_size = pair_value<std::size_t>(r.at("size"));
      if (r.contains("mode")) c.crop_mode = crop_mode_from_string(r.at("mode").get<std::string>());
      c.pad_value = r.value("pad_value", c.pad_value);
    }
    if (j.contains("standardize")) {
      const json& r = j.at("standardize");
      check_keys(r, {"enabled", "order", "percentiles", "foreground"}, "[standardize]");
      c.standardize = r.value("enabled", c.standardize);
      if (r.contains("order"))
        c.standardize_order = standardize_order_from_string(r.at("order").get<std::string>());
      if (r.contains("percentiles")) c.percentiles = r.at("percentiles").get<std::vector<double>>();
      if (r.contains("foreground"))
        c.foreground = foreground_from_string(r.at("foreground").get<std::string>());
    }
    if (j.contains("augment")) {
      json a = j.at("augment");
      check_keys(a, {"weights", "motion", "ghosting", "bias_field", "gamma", "phase_axes", "copies"},
                 "[augment]");
      c.augment_copies = a.value("copies", c.augment_copies);
      a.erase("copies");
      c.augment = augment_config_from_json(a);
    }
    if (j.contains("labels")) c.labels = parse_label_map(j.at("labels").get<std::string>());
    if (j.contains("split")) {
      const json& r = j.at("split");
      check_keys(r, {"validation_fraction"}, "[split]");
      c.validation_fraction = r.value("validation_fraction", c.validation_fraction);
    }
    c.naming_pattern = j.value("naming_pattern", c.naming_pattern);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("[augment]: ") + e.what());
  }

  for (const char* placeholder : {"<subject>", "<intensity>", "<phase>"})
    if (c.naming_pattern.find(placeholder) == std::string::npos)
      throw ConfigError(std::string("naming_pattern lacks ") + placeholder);
  for (double s : c.inplane_spacing)
    if (!(s > 0.0 && std::isfinite(s))) throw ConfigError("in-plane spacing must be positive");
  if (c.through_plane_spacing && !(*c.through_plane_spacing > 0.0))
    throw ConfigError("through-plane spacing must be positive");
  if (c.crop_size[0] == 0 || c.crop_size[1] == 0) throw ConfigError("crop size must be positive");
  if (c.augment_copies == 0) throw ConfigError("augment.copies must be at least 1");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0))
    throw ConfigError("split.validation_fraction must lie in (0, 1)");
  try {
    LandmarkModel probe{c.percentiles, std::vector<double>(c.percentiles.size()), c.foreground};
    for (std::size_t i = 0; i < probe.standard_scale.size(); ++i)
      probe.standard_scale[i] = static_cast<double>(i);
    probe.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("standardize.percentiles: ") + e.what());
  }
  c.labels.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  json j;
  if (path.extension() == ".toml") {
    try {
      const toml::table table = toml::parse(is, path.string());
      std::ostringstream os;
      os << toml::json_formatter{table};
      j = json::parse(os.str());
    } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << path.string() << ": " << e.description() << " at " << e.source().begin;
      throw ConfigError(msg.str());
    }
  } else {
    try {
      j = json::parse(is);
    } catch (const json::parse_error& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  return pipeline_config_from_json(j);
}

std::string config_hash(const json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

struct Resampled {
  Volume image;
  std::optional<LabelVolume> labels;
};

Resampled reorient_and_resample(const Volume& image, const std::optional<LabelVolume>& labels,
                                const PipelineConfig& config) {
  Volume img = reorient_to_canonical(image);
  std::optional<LabelVolume> lab;
  if (labels) {
    lab = reorient_to_canonical(*labels);
    if (!same_geometry(img, *lab, 1e-4))
      throw GeometryError("label volume does not share the image grid");
  }
  const Spacing3 target{config.inplane_spacing[0], config.inplane_spacing[1],
                        config.through_plane_spacing.value_or(img.spacing()[2])};
  img = resample(img, target, Interp::trilinear);
  if (lab) lab = resample(*lab, target, Interp::nearest);
  return {std::move(img), std::move(lab)};
}

InplaneWindow choose_window(const Resampled& r, const PipelineConfig& config) {
  if (config.crop_mode == CropMode::mask_centroid && r.labels)
    return centroid_window(*r.labels, config.crop_size);
  return center_window(r.image.shape(), config.crop_size);
}

PreparedCase crop_stage(Resampled r, const PipelineConfig& config) {
  PreparedCase out;
  out.window = choose_window(r, config);
  out.resampled_inplane = {r.image.shape()[0], r.image.shape()[1]};
  out.image = crop_or_pad(r.image, out.window, config.pad_value);
  if (r.labels) out.labels = crop_or_pad(*r.labels, out.window, std::int16_t{0});
  return out;
}

}  // namespace

PreparedCase prepare_geometry(const Volume& image, const std::optional<LabelVolume>& labels,
                              const PipelineConfig& config) {
  return crop_stage(reorient_and_resample(image, labels, config), config);
}

PreparedCase preprocess_case(const Volume& image, const std::optional<LabelVolume>& labels,
                             const PipelineConfig& config, const LandmarkModel* model) {
  if (labels) check_labels(*labels, config.labels);
  Resampled r = reorient_and_resample(image, labels, config);
  if (model && config.standardize_order == StandardizeOrder::before_crop)
    r.image = standardize(r.image, *model);
  PreparedCase out = crop_stage(std::move(r), config);
  if (model && config.standardize_order == StandardizeOrder::after_crop)
    out.image = standardize(out.image, *model);
  return out;
}

Volume histogram_stage(const Volume& image, const std::optional<LabelVolume>& labels,
                       const PipelineConfig& config) {
  Resampled r = reorient_and_resample(image, labels, config);
  if (config.standardize_order == StandardizeOrder::before_crop) return std::move(r.image);
  return crop_stage(std::move(r), config).image;
}

std::string augment_stream_key(const std::string& case_id, std::size_t copy) {
  return copy == 0 ? case_id : case_id + "#" + std::to_string(copy);
}

Volume augment_volume(const Volume& vol, const AugmentConfig& config, std::uint64_t master_seed,
                      const std::string& case_id, std::size_t copy,
                      std::vector<TransformRecord>* records) {
  const std::string key = augment_stream_key(case_id, copy);
  std::vector<Slice2D> slices = extract_slices(vol, case_id);
  if (records) records->clear();
  for (Slice2D& s : slices) {
    Augmented a = augment_slice(s, config, derive_seed(master_seed, key, s.slice_index()));
    if (records) records->push_back(std::move(a.record));
    s = std::move(a.slice);
  }
  return stack_slices(slices, vol);
}

// ---------------------------------------------------------------------------
// Commands

namespace {

std::string nifti_stem(const std::string& path) {
  std::string name = fs::path(path).filename().string();
  for (const char* ext : {".nii.gz", ".nii"}) {
    const std::string e = ext;
    if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0)
      return name.substr(0, name.size() - e.size());
  }
  return fs::path(name).stem().string();
}

std::string nifti_extension(const std::string& path) {
  const std::string s = fs::path(path).filename().string();
  return s.size() > 3 && s.compare(s.size() - 3, 3, ".gz") == 0 ? ".nii.gz" : ".nii";
}

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Work is handed out
/// by an atomic counter; results must be written to slot i only.
template <typename Body>
void parallel_for(std::size_t n, std::size_t jobs, Body&& body) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) body(i);
  };
  if (jobs == 1) {
    worker();
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
}

/// Per-case driver: failures are captured per slot; without keep_going the
/// remaining unstarted cases are skipped after the first failure.
template <typename Work>
RunResult run_cases(const std::vector<std::string>& ids, const RunOptions& options, Work&& work) {
  const std::size_t n = ids.size();
  std::vector<std::optional<CaseFailure>> failures(n);
  std::vector<char> done(n, 0);
  std::atomic<bool> stop{false};
  parallel_for(n, options.jobs, [&](std::size_t i) {
    if (stop) return;
    try {
      work(i);
      done[i] = 1;
    } catch (const Error& e) {
      failures[i] = CaseFailure{ids[i], e.kind(), e.what()};
    } catch (const std::exception& e) {
      failures[i] = CaseFailure{ids[i], "internal", e.what()};
    }
    if (failures[i] && !options.keep_going) stop = true;
  });
  RunResult r;
  for (std::size_t i = 0; i < n; ++i) {
    r.completed += done[i];
    if (failures[i]) r.failures.push_back(*failures[i]);
  }
  return r;
}

void write_error_report(const fs::path& dir, const std::string& command, const RunResult& r,
                        std::size_t total) {
  const fs::path path = dir / "errors.json";
  if (r.ok()) {
    std::error_code ec;
    fs::remove(path, ec);
    return;
  }
  json failures = json::array();
  for (const CaseFailure& f : r.failures)
    failures.push_back({{"case_id", f.case_id}, {"kind", f.kind}, {"message", f.message}});
  write_json(path, {{"command", command},
                    {"total", total},
                    {"completed", r.completed},
                    {"failures", failures}});
}

std::vector<std::string> ids_of(const std::vector<CaseRef>& cases) {
  std::vector<std::string> ids;
  for (const CaseRef& c : cases) ids.push_back(c.id());
  return ids;
}

std::optional<LabelVolume> read_optional_labels(const CaseEntry& e) {
  if (!e.label) return std::nullopt;
  return read_nifti_labels(*e.label);
}

NiftiDatatype label_datatype(const LabelMap& m) {
  for (Structure s : {Structure::lv, Structure::myo, Structure::rv})
    if (m.code(s) < 0 || m.code(s) > 255) return NiftiDatatype::int16;
  return NiftiDatatype::uint8;
}

json window_json(const PreparedCase& p) {
  return {{"resampled_inplane", p.resampled_inplane},
          {"crop_start", p.window.start},
          {"crop_size", p.window.size}};
}

/// Manifest holding only the cases whose slot is filled, in input order.
Manifest collect_manifest(const std::vector<CaseRef>& cases,
                          const std::vector<std::optional<CaseEntry>>& entries) {
  Manifest m;
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!entries[i]) continue;
    const std::string& sid = cases[i].subject->id;
    auto it = pos.find(sid);
    if (it == pos.end()) {
      it = pos.emplace(sid, m.subjects.size()).first;
      m.subjects.push_back({sid, {}});
    }
    m.subjects[it->second].cases.push_back(*entries[i]);
  }
  return m;
}

}  // namespace

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << "\n";
  if (!os) throw IoError("failed writing " + path.string());
}

json provenance(const std::string& command, const PipelineConfig& config, const RunOptions& options,
                json extra) {
  const json cfg = to_json(config);
  json p = {{"tool", kToolName},
            {"version", kToolVersion},
            {"command", command},
            {"config", cfg},
            {"config_hash", config_hash(cfg)},
            {"seed", options.seed},
            {"manifest", options.manifest_source}};
  for (auto& [k, v] : extra.items()) p[k] = v;
  return p;
}

FitResult fit_histogram_command(const Manifest& train, const PipelineConfig& config,
                                const RunOptions& options, const fs::path& model_path) {
  const auto cases = train.cases();
  const auto ids = ids_of(cases);
  std::vector<std::vector<double>> landmarks(cases.size());
  RunResult run = run_cases(ids, options, [&](std::size_t i) {
    const CaseEntry& e = *cases[i].entry;
    const Volume v = histogram_stage(read_nifti(e.image), read_optional_labels(e), config);
    landmarks[i] = reference_landmarks(v, config.percentiles, config.foreground);
  });
  const fs::path dir = model_path.has_parent_path() ? model_path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  write_error_report(dir, "fit-histogram", run, cases.size());
  if (!run.ok() && !options.keep_going) return {LandmarkModel{}, std::move(run)};
  std::vector<std::vector<double>> used;
  json used_ids = json::array();
  for (std::size_t i = 0; i < cases.size(); ++i)
    if (!landmarks[i].empty()) {
      used.push_back(std::move(landmarks[i]));
      used_ids.push_back(ids[i]);
    }
  if (used.empty()) throw UsageError("no training case available for histogram fitting");
  LandmarkModel model = average_landmarks(used, config.percentiles, config.foreground);

  save_landmark_model(model, model_path.string());
  fs::path prov = model_path;
  prov.replace_extension(".provenance.json");
  json failed = json::array();
  for (const CaseFailure& f : run.failures) failed.push_back(f.case_id);
  write_json(prov, provenance("fit-histogram", config, options,
                              {{"train_cases", used_ids}, {"failed_cases", failed}}));
  return {std::move(model), std::move(run)};
}

RunResult preprocess_command(const Manifest& manifest, const PipelineConfig& config,
                             const std::optional<LandmarkModel>& model, const RunOptions& options) {
  fs::create_directories(options.output);
  const auto cases = manifest.cases();
  const auto ids = ids_of(cases);
  const LandmarkModel* m = config.standardize && model ? &*model : nullptr;
  if (config.standardize && !model)
    throw UsageError("standardization is enabled but no landmark model was given");
  std::vector<std::optional<CaseEntry>> written(cases.size());
  std::vector<json> windows(cases.size());

  RunResult run = run_cases(ids, options, [&](std::size_t i) {
    const CaseEntry& e = *cases[i].entry;
    const PreparedCase p = preprocess_case(read_nifti(e.image), read_optional_labels(e), config, m);
    CaseEntry out{e.breath_intensity, e.phase, nifti_stem(e.image) + "_pre" + nifti_extension(e.image),
                  std::nullopt};
    write_nifti(p.image, (options.output / out.image).string(), NiftiDatatype::float32);
    if (p.labels) {
      out.label = nifti_stem(*e.label) + "_pre" + nifti_extension(*e.label);
      write_nifti(*p.labels, (options.output / *out.label).string(), label_datatype(config.labels));
    }
    windows[i] = window_json(p);
    windows[i]["case_id"] = ids[i];
    written[i] = std::move(out);
  });

  save_manifest(collect_manifest(cases, written), options.output / "manifest.json");
  json case_info = json::array();
  for (std::size_t i = 0; i < cases.size(); ++i)
    if (written[i]) case_info.push_back(windows[i]);
  json extra = {{"cases", case_info}};
  if (m) extra["landmark_model"] = to_json(*m);
  write_json(options.output / "provenance.json", provenance("preprocess", config, options, extra));
  write_error_report(options.output, "preprocess", run, cases.size());
  return run;
}

RunResult augment_command(const Manifest& manifest, const PipelineConfig& config,
                          const RunOptions& options) {
  fs::create_directories(options.output);
  const auto cases = manifest.cases();
  const std::size_t copies = config.augment_copies;
  const auto suffix = [copies](std::size_t c) {
    return copies == 1 ? std::string("_aug") : "_aug" + std::to_string(c + 1);
  };
  // Work unit u covers case u / copies, copy u % copies.
  std::vector<std::string> unit_ids;
  for (const CaseRef& c : cases)
    for (std::size_t k = 0; k < copies; ++k) unit_ids.push_back(augment_stream_key(c.id(), k));
  std::vector<std::optional<CaseEntry>> written(unit_ids.size());

  RunResult run = run_cases(unit_ids, options, [&](std::size_t u) {
    const std::size_t i = u / copies, k = u % copies;
    const CaseEntry& e = *cases[i].entry;
    const std::string id = cases[i].id();
    std::vector<TransformRecord> records;
    const Volume out = augment_volume(read_nifti(e.image), config.augment, options.seed, id, k, &records);
    const std::string stem = nifti_stem(e.image) + suffix(k);
    CaseEntry entry{e.breath_intensity, e.phase, stem + nifti_extension(e.image), std::nullopt};
    write_nifti(out, (options.output / entry.image).string(), NiftiDatatype::float32);
    json recs = json::array();
    for (const TransformRecord& r : records) recs.push_back(to_json(r));
    write_json(options.output / (stem + ".records.json"), recs);
    if (e.label) {
      entry.label = nifti_stem(*e.label) + suffix(k) + nifti_extension(*e.label);
      fs::copy_file(*e.label, options.output / *entry.label, fs::copy_options::overwrite_existing);
    }
    written[u] = std::move(entry);
  });

  json manifests = json::array();
  for (std::size_t k = 0; k < copies; ++k) {
    std::vector<std::optional<CaseEntry>> per_copy(cases.size());
    for (std::size_t i = 0; i < cases.size(); ++i) per_copy[i] = written[i * copies + k];
    const std::string name = copies == 1 ? "manifest.json" : "manifest" + suffix(k) + ".json";
    save_manifest(collect_manifest(cases, per_copy), options.output / name);
    manifests.push_back(name);
  }
  write_json(options.output / "provenance.json",
             provenance("augment", config, options, {{"copies", copies}, {"manifests", manifests}}));
  write_error_report(options.output, "augment", run, unit_ids.size());
  return run;
}

std::vector<std::pair<std::string, std::string>> index_label_files(const fs::path& root,
                                                                   const std::string& pattern) {
  const ScanResult scan = scan_nifti_files(root, pattern);
  std::map<std::string, std::pair<int, std::string>> best;  // rank 1 label file, 0 plain
  for (const ScannedFile& f : scan.files) {
    const int rank = f.is_label ? 1 : 0;
    auto it = best.find(f.id());
    if (it == best.end() || rank > it->second.first) {
      best[f.id()] = {rank, f.path};
    } else if (rank == it->second.first) {
      throw ManifestError("ambiguous prediction for " + f.id() + ": " + it->second.second +
                          " and " + f.path);
    }
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& [id, v] : best) out.emplace_back(id, v.second);
  return out;
}

RunResult evaluate_command(const std::vector<std::pair<std::string, std::string>>& predictions,
                           const Manifest& ground_truth, const PipelineConfig& config,
                           const RunOptions& options, std::vector<MetricsReport>* reports_out) {
  fs::create_directories(options.output);
  const std::map<std::string, std::string> pred(predictions.begin(), predictions.end());
  std::vector<CaseRef> cases;
  for (const CaseRef& c : ground_truth.cases())
    if (c.entry->label) cases.push_back(c);
  if (cases.empty()) throw UsageError("ground-truth manifest has no labelled cases");
  const auto ids = ids_of(cases);
  std::vector<std::optional<MetricsReport>> slots(cases.size());

  RunResult run = run_cases(ids, options, [&](std::size_t i) {
    const auto it = pred.find(ids[i]);
    if (it == pred.end()) throw ManifestError("no prediction for " + ids[i]);
    const LabelVolume gt = read_nifti_labels(*cases[i].entry->label);
    const LabelVolume p = read_nifti_labels(it->second);
    check_labels(gt, config.labels);
    check_labels(p, config.labels);
    slots[i] = evaluate_case(ids[i], p, gt, config.labels);
  });

  std::vector<MetricsReport> reports;
  for (auto& s : slots)
    if (s) reports.push_back(std::move(*s));
  std::set<std::string> gt_ids(ids.begin(), ids.end());
  json unmatched = json::array();
  for (const auto& [id, path] : pred)
    if (!gt_ids.count(id)) unmatched.push_back(id);

  if (!reports.empty()) {
    std::ofstream(options.output / "metrics.csv") << metrics_csv(reports);
    const CohortSummary summary = aggregate(reports);
    write_json(options.output / "summary.json", to_json(summary));
    std::ofstream(options.output / "table.txt") << summary_table(summary, "cohort");
  }
  write_json(options.output / "provenance.json",
             provenance("evaluate", config, options,
                        {{"evaluated", reports.size()}, {"unmatched_predictions", unmatched}}));
  write_error_report(options.output, "evaluate", run, cases.size());
  if (reports_out) *reports_out = std::move(reports);
  return run;
}

RunResult preview_command(const Manifest& manifest, const PipelineConfig& config,
                          const RunOptions& options, std::size_t max_slices) {
  if (max_slices == 0) throw UsageError("preview needs at least one slice per case");
  fs::create_directories(options.output);
  const auto cases = manifest.cases();
  const auto ids = ids_of(cases);

  RunResult run = run_cases(ids, options, [&](std::size_t i) {
    const Volume vol = read_nifti(cases[i].entry->image);
    const std::vector<Slice2D> all = extract_slices(vol, ids[i]);
    std::vector<Slice2D> top, bottom;
    const std::size_t n = all.size(), m = std::min(max_slices, n);
    std::vector<double> values;
    for (std::size_t c = 0; c < m; ++c) {
      const std::size_t k = m == 1 ? n / 2 : (c * (n - 1) + (m - 1) / 2) / (m - 1);
      top.push_back(all[k]);
      const auto d = all[k].data();
      values.insert(values.end(), d.begin(), d.end());
      const std::uint64_t seed = derive_seed(options.seed, augment_stream_key(ids[i], 0), k);
      bottom.push_back(augment_slice(all[k], config.augment, seed).slice);
    }
    const std::array<double, 2> q{1.0, 99.0};
    const auto range = percentile_values(std::move(values), q);
    const std::vector<std::vector<Slice2D>> rows{std::move(top), std::move(bottom)};
    write_png(montage(rows, range[0], range[1]),
              options.output / (nifti_stem(cases[i].entry->image) + "_preview.png"));
  });
  write_json(options.output / "provenance.json",
             provenance("preview", config, options, {{"max_slices", max_slices}}));
  write_error_report(options.output, "preview", run, cases.size());
  return run;
}

}  // namespace cmrpipe
