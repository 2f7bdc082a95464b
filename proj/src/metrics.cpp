#include "cmrpipe/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace cmrpipe {

std::string to_string(Structure s) {
  switch (s) {
    case Structure::lv: return "LV";
    case Structure::myo: return "MYO";
    case Structure::rv: return "RV";
  }
  return "?";
}

std::int16_t LabelMap::code(Structure s) const {
  switch (s) {
    case Structure::lv: return lv;
    case Structure::myo: return myo;
    case Structure::rv: return rv;
  }
  return 0;
}

void LabelMap::validate() const {
  if (lv == 0 || myo == 0 || rv == 0)
    throw ConfigError("label code 0 is reserved for background");
  if (lv == myo || lv == rv || myo == rv) throw ConfigError("label codes must be distinct");
}

LabelMap parse_label_map(const std::string& text) {
  LabelMap m;
  std::set<std::string> seen;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("label entry '" + item + "' lacks '='");
    std::string key = item.substr(0, eq);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    int value = 0;
    try {
      std::size_t used = 0;
      value = std::stoi(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("label entry '" + item + "' has a non-integer code");
    }
    if (value < std::numeric_limits<std::int16_t>::min() ||
        value > std::numeric_limits<std::int16_t>::max())
      throw ConfigError("label code out of range in '" + item + "'");
    const auto code = static_cast<std::int16_t>(value);
    if (key == "lv") m.lv = code;
    else if (key == "myo") m.myo = code;
    else if (key == "rv") m.rv = code;
    else throw ConfigError("unknown structure '" + key + "' in label map");
    seen.insert(key);
  }
  if (seen.size() != 3) throw ConfigError("label map must define lv, myo and rv");
  m.validate();
  return m;
}

std::string to_string(const LabelMap& m) {
  return "lv=" + std::to_string(m.lv) + ",myo=" + std::to_string(m.myo) +
         ",rv=" + std::to_string(m.rv);
}

void check_labels(const LabelVolume& labels, const LabelMap& map) {
  for (std::int16_t v : labels.data())
    if (v != 0 && v != map.lv && v != map.myo && v != map.rv)
      throw ConfigError("label code " + std::to_string(v) + " is not in the label map (" +
                        to_string(map) + ")");
}

namespace {

using Index3 = std::array<int, 3>;

std::vector<Index3> surface_indices(const LabelVolume& vol, std::int16_t label) {
  const Shape3& s = vol.shape();
  const auto n0 = static_cast<int>(s[0]), n1 = static_cast<int>(s[1]),
             n2 = static_cast<int>(s[2]);
  const auto fg = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= n0 || j >= n1 || k >= n2) return false;
    return vol.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                  static_cast<std::size_t>(k)) == label;
  };
  std::vector<Index3> out;
  for (int k = 0; k < n2; ++k)
    for (int j = 0; j < n1; ++j)
      for (int i = 0; i < n0; ++i) {
        if (!fg(i, j, k)) continue;
        if (!fg(i - 1, j, k) || !fg(i + 1, j, k) || !fg(i, j - 1, k) ||
            !fg(i, j + 1, k) || !fg(i, j, k - 1) || !fg(i, j, k + 1))
          out.push_back({i, j, k});
      }
  return out;
}

// Distance from each point of `from` to the nearest point of `to`, in mm.
// `to` is scanned outward along axis 0 from the query position and the scan
// stops once the axis-0 gap alone is no better than the best found.
std::vector<double> directed_distances(const std::vector<Index3>& from,
                                       std::vector<Index3> to, const Spacing3& sp) {
  std::sort(to.begin(), to.end());
  std::vector<double> out;
  out.reserve(from.size());
  const auto sq = [&sp](const Index3& a, const Index3& b) {
    const double dx = static_cast<double>(a[0] - b[0]) * sp[0];
    const double dy = static_cast<double>(a[1] - b[1]) * sp[1];
    const double dz = static_cast<double>(a[2] - b[2]) * sp[2];
    return dx * dx + dy * dy + dz * dz;
  };
  for (const Index3& a : from) {
    const auto mid = std::lower_bound(to.begin(), to.end(), Index3{a[0], INT32_MIN, INT32_MIN});
    double best = std::numeric_limits<double>::infinity();
    for (auto it = mid; it != to.end(); ++it) {
      const double dx = static_cast<double>((*it)[0] - a[0]) * sp[0];
      if (dx * dx >= best) break;
      best = std::min(best, sq(a, *it));
    }
    for (auto it = mid; it != to.begin();) {
      --it;
      const double dx = static_cast<double>(a[0] - (*it)[0]) * sp[0];
      if (dx * dx >= best) break;
      best = std::min(best, sq(a, *it));
    }
    out.push_back(std::sqrt(best));
  }
  return out;
}

void check_same_shape(const LabelVolume& a, const LabelVolume& b) {
  if (a.shape() != b.shape()) throw GeometryError("prediction and ground truth shapes differ");
}

std::optional<double> symmetric_surface_percentile(const LabelVolume& pred,
                                                   const LabelVolume& gt,
                                                   std::int16_t label,
                                                   const Spacing3& spacing, double q) {
  check_same_shape(pred, gt);
  for (double s : spacing)
    if (!(s > 0.0)) throw ParameterError("spacing must be positive");
  const std::vector<Index3> a = surface_indices(pred, label);
  const std::vector<Index3> b = surface_indices(gt, label);
  if (a.empty() || b.empty()) return std::nullopt;
  std::vector<double> ab = directed_distances(a, b, spacing);
  std::vector<double> ba = directed_distances(b, a, spacing);
  std::sort(ab.begin(), ab.end());
  std::sort(ba.begin(), ba.end());
  return std::max(sorted_percentile(ab, q), sorted_percentile(ba, q));
}

}  // namespace

std::vector<std::array<double, 3>> surface_points(const LabelVolume& vol,
                                                  std::int16_t label,
                                                  const Spacing3& spacing) {
  std::vector<std::array<double, 3>> out;
  for (const Index3& p : surface_indices(vol, label))
    out.push_back({static_cast<double>(p[0]) * spacing[0],
                   static_cast<double>(p[1]) * spacing[1],
                   static_cast<double>(p[2]) * spacing[2]});
  return out;
}

double dice(const LabelVolume& pred, const LabelVolume& gt, std::int16_t label) {
  check_same_shape(pred, gt);
  std::size_t a = 0, b = 0, both = 0;
  const auto p = pred.data(), g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool x = p[i] == label, y = g[i] == label;
    a += x;
    b += y;
    both += x && y;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

double sorted_percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw UsageError("percentile of an empty sequence");
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const double lo = std::floor(pos);
  const auto i = static_cast<std::size_t>(lo);
  const std::size_t j = std::min(i + 1, sorted.size() - 1);
  return sorted[i] + (sorted[j] - sorted[i]) * (pos - lo);
}

std::optional<double> hd95(const LabelVolume& pred, const LabelVolume& gt,
                           std::int16_t label, const Spacing3& spacing) {
  return symmetric_surface_percentile(pred, gt, label, spacing, 95.0);
}

std::optional<double> hausdorff(const LabelVolume& pred, const LabelVolume& gt,
                                std::int16_t label, const Spacing3& spacing) {
  return symmetric_surface_percentile(pred, gt, label, spacing, 100.0);
}

MetricsReport evaluate_case(const std::string& case_id, const LabelVolume& pred,
                            const LabelVolume& gt, const LabelMap& labels) {
  labels.validate();
  check_same_shape(pred, gt);
  check_labels(pred, labels);
  check_labels(gt, labels);
  const Spacing3 spacing = gt.spacing();
  MetricsReport r;
  r.case_id = case_id;
  double sum = 0.0;
  for (Structure s : kStructures) {
    auto& m = r.structures[static_cast<std::size_t>(s)];
    m.dice = dice(pred, gt, labels.code(s));
    m.hd95_mm = hd95(pred, gt, labels.code(s), spacing);
    sum += m.dice;
  }
  r.mean_dice = sum / 3.0;
  return r;
}

CohortSummary aggregate(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw UsageError("cannot aggregate zero reports");
  std::vector<const MetricsReport*> sorted;
  for (const auto& r : reports) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto* a, const auto* b) { return a->case_id < b->case_id; });

  CohortSummary s;
  s.cases = sorted.size();
  std::array<double, 3> hd_sum{};
  std::array<std::size_t, 3> hd_count{};
  double all = 0.0;
  for (const MetricsReport* r : sorted) {
    for (std::size_t i = 0; i < 3; ++i) {
      s.mean_dice[i] += r->structures[i].dice;
      if (r->structures[i].hd95_mm) {
        hd_sum[i] += *r->structures[i].hd95_mm;
        ++hd_count[i];
      } else {
        ++s.undefined_hd95[i];
      }
    }
    all += r->mean_dice;
  }
  const auto n = static_cast<double>(s.cases);
  for (std::size_t i = 0; i < 3; ++i) {
    s.mean_dice[i] /= n;
    if (hd_count[i] > 0) s.mean_hd95_mm[i] = hd_sum[i] / static_cast<double>(hd_count[i]);
  }
  s.mean_dice_all = all / n;
  return s;
}

namespace {

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace

std::string metrics_csv(std::span<const MetricsReport> reports) {
  std::ostringstream os;
  os << "case_id,structure,dice,hd95_mm\n";
  for (const MetricsReport& r : reports)
    for (Structure s : kStructures) {
      const auto& m = r[s];
      os << r.case_id << ',' << to_string(s) << ',' << fmt(m.dice, 6) << ','
         << (m.hd95_mm ? fmt(*m.hd95_mm, 6) : std::string()) << '\n';
    }
  return os.str();
}

nlohmann::json to_json(const CohortSummary& s) {
  nlohmann::json dice_j, hd_j, undef_j;
  for (Structure st : kStructures) {
    const auto i = static_cast<std::size_t>(st);
    dice_j[to_string(st)] = s.mean_dice[i];
    hd_j[to_string(st)] =
        s.mean_hd95_mm[i] ? nlohmann::json(*s.mean_hd95_mm[i]) : nlohmann::json(nullptr);
    undef_j[to_string(st)] = s.undefined_hd95[i];
  }
  return {{"cases", s.cases},
          {"dice", dice_j},
          {"dice_all", s.mean_dice_all},
          {"hd95_mm", hd_j},
          {"hd95_undefined", undef_j}};
}

std::string summary_table(const CohortSummary& s, const std::string& row_name) {
  const std::size_t name_w = std::max<std::size_t>(row_name.size(), 8);
  const auto pad = [](std::string v, std::size_t w) {
    if (v.size() < w) v.insert(0, w - v.size(), ' ');
    return v;
  };
  std::ostringstream os;
  os << std::string(name_w, ' ') << " | " << pad("DICE", 22) << " | "
     << pad("Hausdorff (mm)", 24) << '\n';
  os << std::string(name_w, ' ') << " | ";
  for (Structure st : kStructures) os << pad(to_string(st), 7) << ' ';
  os << "| ";
  for (Structure st : kStructures) os << pad(to_string(st), 7) << ' ';
  os << '\n';
  os << row_name << std::string(name_w - row_name.size(), ' ') << " | ";
  for (std::size_t i = 0; i < 3; ++i) os << pad(fmt(s.mean_dice[i], 3), 7) << ' ';
  os << "| ";
  for (std::size_t i = 0; i < 3; ++i)
    os << pad(s.mean_hd95_mm[i] ? fmt(*s.mean_hd95_mm[i], 2) : "n/a", 7) << ' ';
  os << '\n';
  return os.str();
}

}  // namespace cmrpipe
