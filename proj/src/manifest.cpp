#include "cmrpipe/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <tuple>

#include "cmrpipe/error.hpp"
#include "cmrpipe/rng.hpp"

namespace cmrpipe {

namespace fs = std::filesystem;

std::string to_string(Phase p) { return p == Phase::ED ? "ED" : "ES"; }

Phase phase_from_string(const std::string& s) {
  if (s == "ED") return Phase::ED;
  if (s == "ES") return Phase::ES;
  throw FormatError("unknown cardiac phase '" + s + "'");
}

std::string case_id(const std::string& subject, int intensity, Phase phase) {
  return subject + "-" + std::to_string(intensity) + "-" + to_string(phase);
}

std::size_t Manifest::case_count() const {
  std::size_t n = 0;
  for (const Subject& s : subjects) n += s.cases.size();
  return n;
}

std::vector<CaseRef> Manifest::cases() const {
  std::vector<CaseRef> out;
  for (const Subject& s : subjects)
    for (const CaseEntry& c : s.cases) out.push_back({&s, &c});
  return out;
}

std::vector<std::string> Manifest::subject_ids() const {
  std::vector<std::string> ids;
  for (const Subject& s : subjects) ids.push_back(s.id);
  return ids;
}

Manifest Manifest::subset(std::span<const std::string> ids) const {
  const std::set<std::string> wanted(ids.begin(), ids.end());
  Manifest out;
  std::set<std::string> found;
  for (const Subject& s : subjects)
    if (wanted.count(s.id)) {
      out.subjects.push_back(s);
      found.insert(s.id);
    }
  for (const std::string& id : wanted)
    if (!found.count(id)) throw ManifestError("subject '" + id + "' is not in the manifest");
  return out;
}

void Manifest::normalize() {
  std::sort(subjects.begin(), subjects.end(),
            [](const Subject& a, const Subject& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < subjects.size(); ++i)
    if (subjects[i].id == subjects[i - 1].id)
      throw ManifestError("duplicate subject id '" + subjects[i].id + "'");
  for (Subject& s : subjects) {
    if (s.id.empty()) throw ManifestError("empty subject id");
    std::sort(s.cases.begin(), s.cases.end(), [](const CaseEntry& a, const CaseEntry& b) {
      return std::tie(a.breath_intensity, a.phase) < std::tie(b.breath_intensity, b.phase);
    });
    for (std::size_t i = 0; i < s.cases.size(); ++i) {
      const CaseEntry& c = s.cases[i];
      if (c.breath_intensity < 1 || c.breath_intensity > 4)
        throw ManifestError("subject '" + s.id + "': breath intensity must be 1-4");
      if (i > 0 && c.breath_intensity == s.cases[i - 1].breath_intensity &&
          c.phase == s.cases[i - 1].phase)
        throw ManifestError("duplicate case " + case_id(s.id, c.breath_intensity, c.phase));
    }
  }
}

namespace {

struct PatternRegex {
  std::regex re;
  int subject_group = 0, intensity_group = 0, phase_group = 0, label_group = 0;
};

PatternRegex compile_pattern(const std::string& pattern) {
  PatternRegex out;
  std::string re = "^";
  int group = 0;
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern[i] == '<') {
      const auto close = pattern.find('>', i);
      if (close == std::string::npos) throw ConfigError("unterminated placeholder in naming pattern");
      const std::string name = pattern.substr(i + 1, close - i - 1);
      ++group;
      if (name == "subject") {
        re += "(.+?)";
        out.subject_group = group;
      } else if (name == "intensity") {
        re += "([0-9]+)";
        out.intensity_group = group;
      } else if (name == "phase") {
        re += "(ED|ES)";
        out.phase_group = group;
      } else {
        throw ConfigError("unknown placeholder <" + name + "> in naming pattern");
      }
      i = close + 1;
      continue;
    }
    const char c = pattern[i++];
    if (std::string_view("\\^$.|?*+()[]{}").find(c) != std::string_view::npos) re += '\\';
    re += c;
  }
  if (!out.subject_group || !out.intensity_group || !out.phase_group)
    throw ConfigError("naming pattern needs <subject>, <intensity> and <phase>");
  re += "(-label)?(?:_[A-Za-z0-9]+)*\\.nii(?:\\.gz)?$";
  out.label_group = ++group;
  out.re = std::regex(re);
  return out;
}

struct Slot {
  std::optional<std::string> image, label;
};

}  // namespace

ScanResult scan_nifti_files(const fs::path& root, const std::string& pattern) {
  if (!fs::is_directory(root))
    throw IoError("data root '" + root.string() + "' is not a directory");
  const PatternRegex pr = compile_pattern(pattern);

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  ScanResult out;
  for (const fs::path& f : files) {
    const std::string name = f.filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, pr.re)) {
      out.skipped.push_back(f.string());
      continue;
    }
    const int intensity = std::stoi(m[pr.intensity_group].str());
    if (intensity < 1 || intensity > 4) {
      out.skipped.push_back(f.string());
      continue;
    }
    out.files.push_back({f.string(), m[pr.subject_group].str(), intensity,
                         phase_from_string(m[pr.phase_group].str()),
                         m[pr.label_group].matched});
  }
  return out;
}

ManifestBuild build_manifest(const fs::path& data_root, const std::string& pattern) {
  ScanResult scan = scan_nifti_files(data_root, pattern);
  ManifestBuild out;
  out.skipped = std::move(scan.skipped);
  std::map<std::tuple<std::string, int, Phase>, Slot> slots;
  for (const ScannedFile& f : scan.files) {
    const auto key = std::make_tuple(f.subject, f.breath_intensity, f.phase);
    Slot& slot = slots[key];
    auto& dst = f.is_label ? slot.label : slot.image;
    if (dst) throw ManifestError("duplicate case " + f.id() + ": " + *dst + " and " + f.path);
    dst = f.path;
  }

  std::map<std::string, Subject> subjects;
  for (auto& [key, slot] : slots) {
    if (!slot.image) {
      out.skipped.push_back(*slot.label);
      continue;
    }
    Subject& s = subjects[std::get<0>(key)];
    s.id = std::get<0>(key);
    s.cases.push_back({std::get<1>(key), std::get<2>(key), *slot.image, slot.label});
  }
  for (auto& [id, s] : subjects) out.manifest.subjects.push_back(std::move(s));
  out.manifest.normalize();
  std::sort(out.skipped.begin(), out.skipped.end());
  return out;
}

nlohmann::json to_json(const Manifest& m) {
  nlohmann::json subjects = nlohmann::json::array();
  for (const Subject& s : m.subjects) {
    nlohmann::json cases = nlohmann::json::array();
    for (const CaseEntry& c : s.cases)
      cases.push_back({{"breath_intensity", c.breath_intensity},
                       {"phase", to_string(c.phase)},
                       {"image", c.image},
                       {"label", c.label ? nlohmann::json(*c.label) : nlohmann::json(nullptr)}});
    subjects.push_back({{"id", s.id}, {"cases", cases}});
  }
  return {{"version", 1}, {"subjects", subjects}};
}

Manifest manifest_from_json(const nlohmann::json& j) {
  try {
    Manifest m;
    for (const auto& js : j.at("subjects")) {
      Subject s;
      s.id = js.at("id").get<std::string>();
      for (const auto& jc : js.at("cases")) {
        CaseEntry c;
        c.breath_intensity = jc.at("breath_intensity").get<int>();
        c.phase = phase_from_string(jc.at("phase").get<std::string>());
        c.image = jc.at("image").get<std::string>();
        if (jc.contains("label") && !jc.at("label").is_null())
          c.label = jc.at("label").get<std::string>();
        s.cases.push_back(std::move(c));
      }
      m.subjects.push_back(std::move(s));
    }
    m.normalize();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid manifest: ") + e.what());
  }
}

void save_manifest(const Manifest& m, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << to_json(m).dump(2) << "\n";
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  Manifest m;
  try {
    m = manifest_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  const auto resolve = [&base](std::string& p) {
    if (fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  for (Subject& s : m.subjects)
    for (CaseEntry& c : s.cases) {
      resolve(c.image);
      if (c.label) resolve(*c.label);
    }
  return m;
}

SplitSpec split_subjects(const Manifest& m, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ParameterError("validation fraction must lie in (0, 1)");
  std::vector<std::string> ids = m.subject_ids();
  std::sort(ids.begin(), ids.end());
  const auto n = ids.size();
  const auto n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val == n)
    throw ParameterError("fraction " + std::to_string(fraction) + " of " + std::to_string(n) +
                         " subjects leaves an empty split");
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(ids[i], ids[rng.below(i + 1)]);
  SplitSpec s;
  s.seed = seed;
  s.fraction = fraction;
  s.val.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

nlohmann::json to_json(const SplitSpec& s) {
  return {{"seed", s.seed}, {"fraction", s.fraction}, {"train", s.train}, {"val", s.val}};
}

SplitSpec split_from_json(const nlohmann::json& j) {
  try {
    SplitSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.fraction = j.at("fraction").get<double>();
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid split: ") + e.what());
  }
}

}  // namespace cmrpipe
