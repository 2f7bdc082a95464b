#include "cmrpipe/standardize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace cmrpipe {

std::string to_string(Foreground fg) {
  return fg == Foreground::none ? "none" : "mean-threshold";
}

Foreground foreground_from_string(const std::string& s) {
  if (s == "none") return Foreground::none;
  if (s == "mean-threshold") return Foreground::mean_threshold;
  throw ConfigError("unknown foreground mode '" + s + "'");
}

void LandmarkModel::validate() const {
  if (percentiles.size() < 2)
    throw ParameterError("landmark model needs at least two percentiles");
  if (percentiles.size() != standard_scale.size())
    throw ParameterError("percentiles and standard scale differ in length");
  for (std::size_t i = 0; i < percentiles.size(); ++i) {
    if (!(percentiles[i] > 0.0 && percentiles[i] < 100.0))
      throw ParameterError("percentiles must lie in (0, 100)");
    if (i > 0 && !(percentiles[i] > percentiles[i - 1]))
      throw ParameterError("percentiles must be strictly increasing");
    if (!std::isfinite(standard_scale[i]))
      throw ParameterError("standard scale must be finite");
    if (i > 0 && standard_scale[i] < standard_scale[i - 1])
      throw ParameterError("standard scale must be nondecreasing");
  }
}

std::vector<double> default_percentiles() {
  std::vector<double> p{1.0};
  for (int d = 10; d <= 90; d += 10) p.push_back(d);
  p.push_back(99.0);
  return p;
}

std::vector<double> percentile_values(std::vector<double> values,
                                      std::span<const double> percentiles) {
  if (values.empty()) throw MaskError("no values to take percentiles of");
  const std::size_t n = values.size();
  const double last = static_cast<double>(n - 1);
  std::vector<std::size_t> ranks;
  for (double q : percentiles) {
    const auto i = static_cast<std::size_t>(std::floor(q / 100.0 * last));
    ranks.push_back(i);
    ranks.push_back(std::min(i + 1, n - 1));
  }
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
  // Successive selections on the shrinking tail give the same order
  // statistics as a full sort.
  auto from = values.begin();
  for (std::size_t r : ranks) {
    const auto nth = values.begin() + static_cast<std::ptrdiff_t>(r);
    std::nth_element(from, nth, values.end());
    from = nth + 1;
  }

  std::vector<double> out;
  out.reserve(percentiles.size());
  for (double q : percentiles) {
    const double pos = q / 100.0 * last;
    const double lo = std::floor(pos);
    const auto i = static_cast<std::size_t>(lo);
    const std::size_t j = std::min(i + 1, n - 1);
    const double frac = pos - lo;
    out.push_back(values[i] + (values[j] - values[i]) * frac);
  }
  return out;
}

std::vector<double> foreground_values(const Volume& vol, Foreground fg) {
  const auto data = vol.data();
  std::vector<double> out;
  if (fg == Foreground::none) {
    out.assign(data.begin(), data.end());
  } else {
    const double mean =
        std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(data.size());
    std::copy_if(data.begin(), data.end(), std::back_inserter(out),
                 [mean](double v) { return v > mean; });
  }
  if (out.empty()) throw MaskError("foreground selection is empty");
  return out;
}

std::vector<double> volume_landmarks(const Volume& vol,
                                     std::span<const double> percentiles,
                                     Foreground fg) {
  std::vector<double> lm = percentile_values(foreground_values(vol, fg), percentiles);
  if (!(lm.back() > lm.front()))
    throw DegenerateHistogramError(
        "outermost landmarks coincide; intensity histogram is degenerate");
  return lm;
}

std::vector<double> reference_landmarks(const Volume& vol,
                                        std::span<const double> percentiles,
                                        Foreground fg) {
  std::vector<double> lm = volume_landmarks(vol, percentiles, fg);
  const double lo = lm.front();
  const double span = lm.back() - lo;
  for (double& v : lm) v = kReferenceMin + (v - lo) / span * (kReferenceMax - kReferenceMin);
  return lm;
}

LandmarkModel average_landmarks(std::span<const std::vector<double>> per_volume,
                                std::vector<double> percentiles, Foreground fg) {
  if (per_volume.empty()) throw ParameterError("fit_landmarks needs at least one volume");
  LandmarkModel model;
  model.percentiles = std::move(percentiles);
  model.foreground = fg;
  model.standard_scale.assign(model.percentiles.size(), 0.0);
  for (const std::vector<double>& lm : per_volume) {
    if (lm.size() != model.percentiles.size())
      throw ParameterError("landmark vector length does not match percentiles");
    for (std::size_t i = 0; i < lm.size(); ++i) model.standard_scale[i] += lm[i];
  }
  const auto n = static_cast<double>(per_volume.size());
  for (double& s : model.standard_scale) s /= n;
  model.validate();
  return model;
}

LandmarkModel fit_landmarks(std::span<const Volume> train_volumes,
                            std::vector<double> percentiles, Foreground fg) {
  if (train_volumes.empty())
    throw ParameterError("fit_landmarks needs at least one volume");
  {
    LandmarkModel probe{percentiles, std::vector<double>(percentiles.size(), 0.0), fg};
    probe.validate();
  }
  std::vector<std::vector<double>> per_volume;
  per_volume.reserve(train_volumes.size());
  for (const Volume& vol : train_volumes)
    per_volume.push_back(reference_landmarks(vol, percentiles, fg));
  return average_landmarks(per_volume, std::move(percentiles), fg);
}

LandmarkMap::LandmarkMap(std::vector<double> source, std::vector<double> target)
    : source_(std::move(source)), target_(std::move(target)) {
  if (source_.size() < 2 || source_.size() != target_.size())
    throw ParameterError("landmark map needs two or more matched landmarks");
  if (!(source_.back() > source_.front()))
    throw DegenerateHistogramError("source landmarks are all equal");
  for (std::size_t i = 1; i < source_.size(); ++i)
    if (source_[i] < source_[i - 1] || target_[i] < target_[i - 1])
      throw ParameterError("landmarks must be nondecreasing");

  const std::size_t m = source_.size();
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double w = source_[i + 1] - source_[i];
    if (w > 0.0) {
      left_slope_ = (target_[i + 1] - target_[i]) / w;
      break;
    }
  }
  for (std::size_t i = m - 1; i > 0; --i) {
    const double w = source_[i] - source_[i - 1];
    if (w > 0.0) {
      right_slope_ = (target_[i] - target_[i - 1]) / w;
      break;
    }
  }
}

double LandmarkMap::operator()(double x) const {
  if (x < source_.front())
    return target_.front() + (x - source_.front()) * left_slope_;
  if (x >= source_.back())
    return target_.back() + (x - source_.back()) * right_slope_;
  // source_[i] <= x < source_[i + 1], so the segment has positive width.
  const auto it = std::upper_bound(source_.begin(), source_.end(), x);
  const auto i = static_cast<std::size_t>(it - source_.begin()) - 1;
  const double y = target_[i] + (x - source_[i]) * (target_[i + 1] - target_[i]) /
                                    (source_[i + 1] - source_[i]);
  // Rounding must not carry a value past the next landmark.
  return std::min(y, target_[i + 1]);
}

Volume standardize(const Volume& vol, const LandmarkModel& model) {
  model.validate();
  const LandmarkMap map(volume_landmarks(vol, model.percentiles, model.foreground),
                        model.standard_scale);
  std::vector<double> out(vol.size());
  std::transform(vol.data().begin(), vol.data().end(), out.begin(),
                 [&map](double v) { return map(v); });
  return Volume(vol.shape(), vol.affine(), std::move(out));
}

nlohmann::json to_json(const LandmarkModel& model) {
  return {{"version", 1},
          {"percentiles", model.percentiles},
          {"standard_scale", model.standard_scale},
          {"foreground", to_string(model.foreground)}};
}

LandmarkModel landmark_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1)
      throw FormatError("unsupported landmark model version");
    LandmarkModel m;
    m.percentiles = j.at("percentiles").get<std::vector<double>>();
    m.standard_scale = j.at("standard_scale").get<std::vector<double>>();
    if (j.contains("foreground"))
      m.foreground = foreground_from_string(j.at("foreground").get<std::string>());
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid landmark model: ") + e.what());
  }
}

void save_landmark_model(const LandmarkModel& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << to_json(model).dump(2) << "\n";
}

LandmarkModel load_landmark_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  try {
    return landmark_model_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace cmrpipe
