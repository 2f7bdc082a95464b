#include "cmrpipe/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cmrpipe {

std::string to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::motion: return "motion";
    case TransformKind::ghosting: return "ghosting";
    case TransformKind::bias_field: return "bias_field";
    case TransformKind::gamma: return "gamma";
  }
  return "unknown";
}

TransformKind transform_kind_from_string(const std::string& s) {
  for (TransformKind k : kAllTransformKinds)
    if (to_string(k) == s) return k;
  throw FormatError("unknown transform kind '" + s + "'");
}

namespace {

void check_axis(int axis) {
  if (axis != 0 && axis != 1) throw ParameterError("phase-encode axis must be 0 or 1");
}

double bilinear(const Slice2D& s, double x, double y) {
  const auto [n0, n1] = s.dims();
  x = std::clamp(x, 0.0, static_cast<double>(n0 - 1));
  y = std::clamp(y, 0.0, static_cast<double>(n1 - 1));
  const double fx = std::floor(x), fy = std::floor(y);
  const auto x0 = static_cast<std::size_t>(fx), y0 = static_cast<std::size_t>(fy);
  const std::size_t x1 = std::min(x0 + 1, n0 - 1), y1 = std::min(y0 + 1, n1 - 1);
  const double wx = x - fx, wy = y - fy;
  const double a = s.at(x0, y0) + wx * (s.at(x1, y0) - s.at(x0, y0));
  const double b = s.at(x0, y1) + wx * (s.at(x1, y1) - s.at(x0, y1));
  return a + wy * (b - a);
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter validation

void MotionParams::validate() const {
  check_axis(axis);
  if (rotations_deg.size() != times.size() || translations_mm.size() != times.size())
    throw ParameterError("motion parameter lists differ in length");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0 && times[i] < 1.0))
      throw ParameterError("motion times must lie in (0, 1)");
    if (i > 0 && !(times[i] > times[i - 1]))
      throw ParameterError("motion times must be strictly increasing");
    if (!std::isfinite(rotations_deg[i]) || !std::isfinite(translations_mm[i][0]) ||
        !std::isfinite(translations_mm[i][1]))
      throw ParameterError("motion parameters must be finite");
  }
}

void GhostingParams::validate() const {
  check_axis(axis);
  if (num_ghosts < 0) throw ParameterError("num_ghosts must be >= 0");
  if (!(intensity >= 0.0 && intensity <= 1.0))
    throw ParameterError("ghost intensity must lie in [0, 1]");
  if (!(restore_center >= 0.0 && restore_center < 1.0))
    throw ParameterError("restore_center must lie in [0, 1)");
}

void BiasFieldParams::validate() const {
  if (order < 0) throw ParameterError("bias field order must be >= 0");
  const auto expected = static_cast<std::size_t>((order + 1) * (order + 2) / 2);
  if (coefficients.size() != expected)
    throw ParameterError("bias field of order " + std::to_string(order) + " needs " +
                         std::to_string(expected) + " coefficients");
}

double GammaParams::gamma() const { return std::exp(log_gamma); }

double PolicyWeights::weight(TransformKind kind) const {
  switch (kind) {
    case TransformKind::motion: return motion;
    case TransformKind::ghosting: return ghosting;
    case TransformKind::bias_field: return bias_field;
    case TransformKind::gamma: return gamma;
  }
  return 0.0;
}

void PolicyWeights::validate() const {
  double total = 0.0;
  for (TransformKind k : kAllTransformKinds) {
    const double w = weight(k);
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ParameterError("policy weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ParameterError("policy weights sum to zero");
}

double PolicyWeights::probability(TransformKind kind) const {
  validate();
  return weight(kind) / (motion + ghosting + bias_field + gamma);
}

TransformKind kind_of(const TransformParams& params) {
  return static_cast<TransformKind>(params.index());
}

// ---------------------------------------------------------------------------
// Motion

Slice2D rigid_transform(const Slice2D& slice, double angle_deg,
                        std::array<double, 2> translation_mm) {
  const auto [n0, n1] = slice.dims();
  const auto [s0, s1] = slice.spacing();
  const double c0 = (static_cast<double>(n0) - 1.0) / 2.0;
  const double c1 = (static_cast<double>(n1) - 1.0) / 2.0;
  const double theta = angle_deg * std::numbers::pi / 180.0;
  // Inverse mapping: output point -> source point, R(-theta) (p - t).
  const double cs = std::cos(theta), sn = std::sin(theta);
  std::vector<double> out(slice.size());
  for (std::size_t y = 0; y < n1; ++y) {
    const double py = (static_cast<double>(y) - c1) * s1 - translation_mm[1];
    for (std::size_t x = 0; x < n0; ++x) {
      const double px = (static_cast<double>(x) - c0) * s0 - translation_mm[0];
      const double qx = cs * px + sn * py;
      const double qy = -sn * px + cs * py;
      out[x + n0 * y] = bilinear(slice, qx / s0 + c0, qy / s1 + c1);
    }
  }
  return slice.with_data(std::move(out));
}

std::vector<std::size_t> motion_boundaries(std::span<const double> times,
                                           std::size_t n) {
  std::vector<std::size_t> b{0};
  for (double t : times) {
    const auto idx = static_cast<std::size_t>(static_cast<double>(n) * t);
    b.push_back(std::clamp(idx, b.back(), n));
  }
  b.push_back(n);
  return b;
}

Kspace2D compose_segments(std::span<const Kspace2D> spectra,
                          std::span<const std::size_t> boundaries, int axis) {
  check_axis(axis);
  if (spectra.empty() || boundaries.size() != spectra.size() + 1)
    throw ParameterError("need one boundary more than spectra");
  const auto dims = spectra.front().dims();
  for (const Kspace2D& k : spectra)
    if (k.dims() != dims) throw GeometryError("spectra differ in shape");
  if (boundaries.front() != 0 || boundaries.back() != dims[axis])
    throw ParameterError("segment boundaries must cover the phase-encode axis");

  Kspace2D out = spectra.front();
  for (std::size_t s = 1; s < spectra.size(); ++s) {
    for (std::size_t line = boundaries[s]; line < boundaries[s + 1]; ++line) {
      if (axis == 0) {
        for (std::size_t y = 0; y < dims[1]; ++y) out.at(line, y) = spectra[s].at(line, y);
      } else {
        for (std::size_t x = 0; x < dims[0]; ++x) out.at(x, line) = spectra[s].at(x, line);
      }
    }
  }
  return out;
}

Slice2D apply_motion(const Slice2D& slice, const MotionParams& p) {
  p.validate();
  if (slice.size() == 0) throw GeometryError("slice is empty");
  const std::size_t k = p.num_transforms();
  std::vector<Kspace2D> spectra;
  spectra.reserve(k + 1);
  spectra.push_back(fft2_centered(slice));
  for (std::size_t i = 0; i < k; ++i)
    spectra.push_back(
        fft2_centered(rigid_transform(slice, p.rotations_deg[i], p.translations_mm[i])));

  const std::size_t n = slice.dims()[static_cast<std::size_t>(p.axis)];
  const std::vector<std::size_t> b = motion_boundaries(p.times, n);
  const std::size_t center = n / 2;
  std::size_t center_segment = 0;
  while (!(b[center_segment] <= center && center < b[center_segment + 1])) ++center_segment;
  std::swap(spectra[0], spectra[center_segment]);

  return ifft2_centered(compose_segments(spectra, b, p.axis), slice);
}

// ---------------------------------------------------------------------------
// Ghosting

Slice2D apply_ghosting(const Slice2D& slice, const GhostingParams& p) {
  p.validate();
  if (p.num_ghosts == 0) return slice;
  Kspace2D k = fft2_centered(slice);
  const auto dims = k.dims();
  const auto axis = static_cast<std::size_t>(p.axis);
  const std::size_t n = dims[axis];
  const auto center = static_cast<std::ptrdiff_t>(n / 2);
  const auto keep = static_cast<std::ptrdiff_t>(
      std::floor(p.restore_center * static_cast<double>(n) / 2.0));
  const double factor = 1.0 - p.intensity;
  for (std::size_t line = 0; line < n; ++line) {
    const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(line) - center;
    if (std::abs(d) <= keep || d % p.num_ghosts != 0) continue;
    if (axis == 0) {
      for (std::size_t y = 0; y < dims[1]; ++y) k.at(line, y) *= factor;
    } else {
      for (std::size_t x = 0; x < dims[0]; ++x) k.at(x, line) *= factor;
    }
  }
  return ifft2_centered(k, slice);
}

// ---------------------------------------------------------------------------
// Bias field

std::vector<double> bias_field(std::array<std::size_t, 2> dims,
                               const BiasFieldParams& p) {
  p.validate();
  const auto coord = [](std::size_t i, std::size_t n) {
    return n == 1 ? 0.0
                  : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  const auto order = static_cast<std::size_t>(p.order);
  std::vector<double> field(dims[0] * dims[1]);
  std::vector<double> by_p(order + 1);
  for (std::size_t yi = 0; yi < dims[1]; ++yi) {
    const double y = coord(yi, dims[1]);
    // by_p[xp] = sum_q c(xp, q) y^q
    std::size_t c = 0;
    for (std::size_t xp = 0; xp <= order; ++xp) {
      double acc = 0.0, ypow = 1.0;
      for (std::size_t yq = 0; yq + xp <= order; ++yq, ++c) {
        acc += p.coefficients[c] * ypow;
        ypow *= y;
      }
      by_p[xp] = acc;
    }
    for (std::size_t xi = 0; xi < dims[0]; ++xi) {
      const double x = coord(xi, dims[0]);
      double acc = 0.0, xpow = 1.0;
      for (std::size_t xp = 0; xp <= order; ++xp) {
        acc += by_p[xp] * xpow;
        xpow *= x;
      }
      field[xi + dims[0] * yi] = std::exp(acc);
    }
  }
  return field;
}

Slice2D apply_bias_field(const Slice2D& slice, const BiasFieldParams& p) {
  std::vector<double> out = bias_field(slice.dims(), p);
  const auto in = slice.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= in[i];
  return slice.with_data(std::move(out));
}

// ---------------------------------------------------------------------------
// Gamma

Slice2D apply_gamma(const Slice2D& slice, const GammaParams& p) {
  if (!std::isfinite(p.log_gamma)) throw ParameterError("log_gamma must be finite");
  const auto in = slice.data();
  const auto [lo_it, hi_it] = std::minmax_element(in.begin(), in.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return slice;
  const double range = hi - lo;
  const double g = p.gamma();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = lo + range * std::pow((in[i] - lo) / range, g);
  return slice.with_data(std::move(out));
}

Slice2D apply_transform(const Slice2D& slice, const TransformParams& params) {
  return std::visit(
      [&slice](const auto& p) -> Slice2D {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, MotionParams>) return apply_motion(slice, p);
        else if constexpr (std::is_same_v<P, GhostingParams>) return apply_ghosting(slice, p);
        else if constexpr (std::is_same_v<P, BiasFieldParams>) return apply_bias_field(slice, p);
        else return apply_gamma(slice, p);
      },
      params);
}

// ---------------------------------------------------------------------------
// Sampling

TransformKind sample_one_of(const PolicyWeights& weights, Rng& rng) {
  weights.validate();
  const double total = weights.motion + weights.ghosting + weights.bias_field + weights.gamma;
  const double u = rng.uniform01() * total;
  double cum = 0.0;
  TransformKind last_positive = TransformKind::motion;
  for (TransformKind k : kAllTransformKinds) {
    const double w = weights.weight(k);
    if (w <= 0.0) continue;
    cum += w;
    last_positive = k;
    if (u < cum) return k;
  }
  return last_positive;
}

namespace {

int pick_axis(std::span<const int> axes, Rng& rng) {
  if (axes.empty()) throw ParameterError("no phase-encode axes configured");
  const int a = axes[rng.below(axes.size())];
  check_axis(a);
  return a;
}

}  // namespace

MotionParams sample_motion(const MotionRanges& r, std::span<const int> axes, Rng& rng) {
  if (r.num_transforms < 0 || r.degrees_max < 0.0 || r.translation_max_mm < 0.0)
    throw ParameterError("motion ranges must be nonnegative");
  MotionParams p;
  const auto k = static_cast<std::size_t>(r.num_transforms);
  for (std::size_t i = 0; i < k; ++i) {
    p.rotations_deg.push_back(rng.uniform(-r.degrees_max, r.degrees_max));
    const double tx = rng.uniform(-r.translation_max_mm, r.translation_max_mm);
    const double ty = rng.uniform(-r.translation_max_mm, r.translation_max_mm);
    p.translations_mm.push_back({tx, ty});
  }
  for (;;) {
    p.times.clear();
    for (std::size_t i = 0; i < k; ++i) p.times.push_back(rng.uniform01());
    std::sort(p.times.begin(), p.times.end());
    const bool ok = std::adjacent_find(p.times.begin(), p.times.end()) == p.times.end() &&
                    (k == 0 || p.times.front() > 0.0);
    if (ok) break;
  }
  p.axis = pick_axis(axes, rng);
  return p;
}

GhostingParams sample_ghosting(const GhostingRanges& r, std::span<const int> axes, Rng& rng) {
  if (r.min_ghosts < 0 || r.max_ghosts < r.min_ghosts || r.min_intensity < 0.0 ||
      r.max_intensity > 1.0 || r.max_intensity < r.min_intensity)
    throw ParameterError("invalid ghosting ranges");
  GhostingParams p;
  p.num_ghosts = static_cast<int>(rng.integer(r.min_ghosts, r.max_ghosts));
  p.intensity = rng.uniform(r.min_intensity, r.max_intensity);
  p.axis = pick_axis(axes, rng);
  p.restore_center = r.restore_center;
  p.validate();
  return p;
}

BiasFieldParams sample_bias_field(const BiasFieldRanges& r, Rng& rng) {
  if (r.order < 0 || r.coefficient_max < 0.0) throw ParameterError("invalid bias field ranges");
  BiasFieldParams p;
  p.order = r.order;
  const int n = (r.order + 1) * (r.order + 2) / 2;
  for (int i = 0; i < n; ++i)
    p.coefficients.push_back(rng.uniform(-r.coefficient_max, r.coefficient_max));
  return p;
}

GammaParams sample_gamma(const GammaRanges& r, Rng& rng) {
  if (r.log_gamma_max < 0.0) throw ParameterError("invalid gamma range");
  return GammaParams{rng.uniform(-r.log_gamma_max, r.log_gamma_max)};
}

Augmented augment_slice(const Slice2D& slice, const AugmentConfig& config,
                        std::uint64_t seed) {
  Rng rng(seed);
  const TransformKind kind = sample_one_of(config.weights, rng);
  TransformParams params;
  switch (kind) {
    case TransformKind::motion:
      params = sample_motion(config.motion, config.phase_axes, rng);
      break;
    case TransformKind::ghosting:
      params = sample_ghosting(config.ghosting, config.phase_axes, rng);
      break;
    case TransformKind::bias_field:
      params = sample_bias_field(config.bias_field, rng);
      break;
    case TransformKind::gamma:
      params = sample_gamma(config.gamma, rng);
      break;
  }
  TransformRecord record{kind, seed, params, slice.source_id(), slice.slice_index()};
  return {apply_transform(slice, params), std::move(record)};
}

Slice2D replay(const TransformRecord& record, const Slice2D& slice) {
  if (kind_of(record.params) != record.kind)
    throw FormatError("record kind does not match its parameters");
  return apply_transform(slice, record.params);
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const TransformParams& params) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, MotionParams>) {
          return {{"num_transforms", p.num_transforms()},
                  {"degrees", p.rotations_deg},
                  {"translations_mm", p.translations_mm},
                  {"times", p.times},
                  {"axis", p.axis}};
        } else if constexpr (std::is_same_v<P, GhostingParams>) {
          return {{"num_ghosts", p.num_ghosts},
                  {"axis", p.axis},
                  {"intensity", p.intensity},
                  {"restore_center", p.restore_center}};
        } else if constexpr (std::is_same_v<P, BiasFieldParams>) {
          return {{"order", p.order}, {"coefficients", p.coefficients}};
        } else {
          return {{"log_gamma", p.log_gamma}, {"gamma", p.gamma()}};
        }
      },
      params);
}

TransformParams transform_params_from_json(TransformKind kind, const nlohmann::json& j) {
  try {
    switch (kind) {
      case TransformKind::motion: {
        MotionParams p;
        p.rotations_deg = j.at("degrees").get<std::vector<double>>();
        p.translations_mm = j.at("translations_mm").get<std::vector<std::array<double, 2>>>();
        p.times = j.at("times").get<std::vector<double>>();
        p.axis = j.at("axis").get<int>();
        p.validate();
        return p;
      }
      case TransformKind::ghosting: {
        GhostingParams p;
        p.num_ghosts = j.at("num_ghosts").get<int>();
        p.axis = j.at("axis").get<int>();
        p.intensity = j.at("intensity").get<double>();
        p.restore_center = j.at("restore_center").get<double>();
        p.validate();
        return p;
      }
      case TransformKind::bias_field: {
        BiasFieldParams p;
        p.order = j.at("order").get<int>();
        p.coefficients = j.at("coefficients").get<std::vector<double>>();
        p.validate();
        return p;
      }
      case TransformKind::gamma:
        return GammaParams{j.at("log_gamma").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid transform parameters: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid transform parameters: ") + e.what());
  }
  throw FormatError("unknown transform kind");
}

nlohmann::json to_json(const TransformRecord& record) {
  return {{"kind", to_string(record.kind)},
          {"seed", record.seed},
          {"params", to_json(record.params)},
          {"source", {{"case_id", record.case_id}, {"slice", record.slice_index}}}};
}

TransformRecord transform_record_from_json(const nlohmann::json& j) {
  try {
    TransformRecord r;
    r.kind = transform_kind_from_string(j.at("kind").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.params = transform_params_from_json(r.kind, j.at("params"));
    r.case_id = j.at("source").at("case_id").get<std::string>();
    r.slice_index = j.at("source").at("slice").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid transform record: ") + e.what());
  }
}

nlohmann::json to_json(const AugmentConfig& c) {
  return {
      {"weights",
       {{"motion", c.weights.motion},
        {"ghosting", c.weights.ghosting},
        {"bias_field", c.weights.bias_field},
        {"gamma", c.weights.gamma}}},
      {"motion",
       {{"num_transforms", c.motion.num_transforms},
        {"degrees_max", c.motion.degrees_max},
        {"translation_max_mm", c.motion.translation_max_mm}}},
      {"ghosting",
       {{"min_ghosts", c.ghosting.min_ghosts},
        {"max_ghosts", c.ghosting.max_ghosts},
        {"min_intensity", c.ghosting.min_intensity},
        {"max_intensity", c.ghosting.max_intensity},
        {"restore_center", c.ghosting.restore_center}}},
      {"bias_field",
       {{"order", c.bias_field.order}, {"coefficient_max", c.bias_field.coefficient_max}}},
      {"gamma", {{"log_gamma_max", c.gamma.log_gamma_max}}},
      {"phase_axes", c.phase_axes},
  };
}

AugmentConfig augment_config_from_json(const nlohmann::json& j) {
  AugmentConfig c;
  try {
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      c.weights.motion = w.value("motion", c.weights.motion);
      c.weights.ghosting = w.value("ghosting", c.weights.ghosting);
      c.weights.bias_field = w.value("bias_field", c.weights.bias_field);
      c.weights.gamma = w.value("gamma", c.weights.gamma);
    }
    if (j.contains("motion")) {
      const auto& m = j.at("motion");
      c.motion.num_transforms = m.value("num_transforms", c.motion.num_transforms);
      c.motion.degrees_max = m.value("degrees_max", c.motion.degrees_max);
      c.motion.translation_max_mm = m.value("translation_max_mm", c.motion.translation_max_mm);
    }
    if (j.contains("ghosting")) {
      const auto& g = j.at("ghosting");
      c.ghosting.min_ghosts = g.value("min_ghosts", c.ghosting.min_ghosts);
      c.ghosting.max_ghosts = g.value("max_ghosts", c.ghosting.max_ghosts);
      c.ghosting.min_intensity = g.value("min_intensity", c.ghosting.min_intensity);
      c.ghosting.max_intensity = g.value("max_intensity", c.ghosting.max_intensity);
      c.ghosting.restore_center = g.value("restore_center", c.ghosting.restore_center);
    }
    if (j.contains("bias_field")) {
      const auto& b = j.at("bias_field");
      c.bias_field.order = b.value("order", c.bias_field.order);
      c.bias_field.coefficient_max = b.value("coefficient_max", c.bias_field.coefficient_max);
    }
    if (j.contains("gamma"))
      c.gamma.log_gamma_max = j.at("gamma").value("log_gamma_max", c.gamma.log_gamma_max);
    if (j.contains("phase_axes")) c.phase_axes = j.at("phase_axes").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid augmentation config: ") + e.what());
  }
  c.weights.validate();
  return c;
}

}  // namespace cmrpipe
