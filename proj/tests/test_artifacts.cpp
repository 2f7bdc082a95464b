#include "doctest.h"

#include <cmath>
#include <numbers>

#include "cmrpipe/artifacts.hpp"
#include "cmrpipe/error.hpp"
#include "cmrpipe/fft.hpp"
#include "cmrpipe/rng.hpp"
#include "fourier_oracle.hpp"
#include "support.hpp"

using namespace cmrpipe;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Spatial shift by whole pixels, replicating edge pixels.
Slice2D shift_clamped(const Slice2D& s, long dx, long dy) {
  const auto [n0, n1] = s.dims();
  std::vector<double> out(s.size());
  for (std::size_t y = 0; y < n1; ++y)
    for (std::size_t x = 0; x < n0; ++x) {
      const long sx = std::clamp(long(x) - dx, 0L, long(n0) - 1);
      const long sy = std::clamp(long(y) - dy, 0L, long(n1) - 1);
      out[x + n0 * y] = s.at(std::size_t(sx), std::size_t(sy));
    }
  return s.with_data(out);
}

Slice2D gaussian_blob(std::size_t n0, std::size_t n1, double cx, double cy, double sigma) {
  std::vector<double> v(n0 * n1);
  for (std::size_t y = 0; y < n1; ++y)
    for (std::size_t x = 0; x < n0; ++x) {
      const double dx = double(x) - cx, dy = double(y) - cy;
      v[x + n0 * y] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    }
  return Slice2D({n0, n1}, {1, 1}, v);
}

}  // namespace

// ---------------------------------------------------------------------------
// Neutral parameters

TEST_CASE("neutral parameters reproduce the input") {
  std::mt19937_64 gen(31);
  const Slice2D s = testing::random_slice(48, 40, gen, {1.25, 1.25});
  CHECK(max_abs_diff(apply_motion(s, MotionParams{}).data(), s.data()) <= 1e-6);
  for (int axis : {0, 1}) {
    CHECK(max_abs_diff(apply_ghosting(s, GhostingParams{4, axis, 0.0, 0.02}).data(), s.data()) <= 1e-6);
  }
  CHECK(apply_ghosting(s, GhostingParams{0, 1, 0.8, 0.02}).data()[7] == s.data()[7]);
  CHECK(max_abs_diff(apply_bias_field(s, BiasFieldParams{3, std::vector<double>(10, 0.0)}).data(),
                     s.data()) == 0.0);
  CHECK(max_abs_diff(apply_gamma(s, GammaParams{0.0}).data(), s.data()) <= 1e-12);
  // A motion whose transforms are identities changes nothing either.
  const MotionParams still{{0.0, 0.0}, {{0.0, 0.0}, {0.0, 0.0}}, {0.3, 0.7}, 1};
  CHECK(max_abs_diff(apply_motion(s, still).data(), s.data()) <= 1e-6);
}

// ---------------------------------------------------------------------------
// Motion

TEST_CASE("rigid transform: quarter turn about the center is a pixel permutation") {
  std::mt19937_64 gen(32);
  const Slice2D s = testing::random_slice(9, 9, gen);
  const Slice2D r = rigid_transform(s, 90.0, {0.0, 0.0});
  // Content rotates counter-clockwise: out(px, py) = in(py, -px) about the center.
  for (std::size_t y = 0; y < 9; ++y)
    for (std::size_t x = 0; x < 9; ++x) {
      const long px = long(x) - 4, py = long(y) - 4;
      CHECK(std::abs(r.at(x, y) - s.at(std::size_t(py + 4), std::size_t(-px + 4))) < 1e-12);
    }
}

TEST_CASE("rigid transform: translations are in millimetres") {
  std::mt19937_64 gen(33);
  const Slice2D s = testing::random_slice(12, 10, gen, {2.0, 0.5});
  const Slice2D t = rigid_transform(s, 0.0, {4.0, -1.5});  // 2 px and -3 px
  CHECK(max_abs_diff(t.data(), shift_clamped(s, 2, -3).data()) < 1e-12);
}

TEST_CASE("motion segment boundaries") {
  const std::vector<double> t{0.25, 0.5};
  CHECK(motion_boundaries(t, 8) == std::vector<std::size_t>{0, 2, 4, 8});
  CHECK(motion_boundaries(t, 9) == std::vector<std::size_t>{0, 2, 4, 9});
  CHECK(motion_boundaries({}, 5) == std::vector<std::size_t>{0, 5});
}

TEST_CASE("uniform translation in k-space equals the spatial translation") {
  // Every segment carries the same Fourier-shifted spectrum, so the
  // composite must be the shifted image. The oracle is the blob itself
  // evaluated at the shifted center.
  for (int axis : {0, 1}) {
    const std::size_t n0 = 64, n1 = 48;
    const double tx = 2.3, ty = -1.7;
    const Slice2D blob = gaussian_blob(n0, n1, 31.0, 23.0, 3.0);
    const Kspace2D k = fft2_centered(blob);
    std::vector<Complex> shifted(k.data().begin(), k.data().end());
    for (std::size_t v = 0; v < n1; ++v)
      for (std::size_t u = 0; u < n0; ++u) {
        const double fu = (double(u) - double(n0 / 2)) / double(n0);
        const double fv = (double(v) - double(n1 / 2)) / double(n1);
        const double ph = -2.0 * std::numbers::pi * (fu * tx + fv * ty);
        shifted[u + n0 * v] *= Complex(std::cos(ph), std::sin(ph));
      }
    const Kspace2D ks({n0, n1}, {1, 1}, shifted);
    const std::vector<Kspace2D> spectra{ks, ks, ks};
    const std::size_t n = axis == 0 ? n0 : n1;
    const std::vector<std::size_t> b{0, n / 3, 2 * n / 3, n};
    const Slice2D out = ifft2_centered(compose_segments(spectra, b, axis), blob);
    const Slice2D expect = gaussian_blob(n0, n1, 31.0 + tx, 23.0 + ty, 3.0);
    double err = 0.0;
    for (std::size_t y = 8; y + 8 < n1; ++y)
      for (std::size_t x = 8; x + 8 < n0; ++x) err = std::max(err, std::abs(out.at(x, y) - expect.at(x, y)));
    CHECK(err <= 1e-3);
  }
}

TEST_CASE("motion keeps the k-space center from the original image") {
  std::mt19937_64 gen(34);
  const std::size_t n0 = 16, n1 = 12;
  const Slice2D s = testing::random_slice(n0, n1, gen);
  for (int axis : {0, 1}) {
    // One integer-pixel shift from t = 0.5 on: the center line n/2 lies in
    // the second segment, which therefore comes from the original, and the
    // first segment from the shifted image.
    const MotionParams p{{0.0}, {{3.0, -2.0}}, {0.5}, axis};
    const Slice2D out = apply_motion(s, p);
    const Kspace2D ko = fft2_centered(s);
    const Kspace2D kt = fft2_centered(shift_clamped(s, 3, -2));
    const std::size_t n = axis == 0 ? n0 : n1;
    std::vector<Complex> mix(ko.data().begin(), ko.data().end());
    for (std::size_t y = 0; y < n1; ++y)
      for (std::size_t x = 0; x < n0; ++x)
        if ((axis == 0 ? x : y) < n / 2) mix[x + n0 * y] = kt.at(x, y);
    std::vector<double> expect;
    for (const Complex& c : ifft2_centered_complex(Kspace2D({n0, n1}, {1, 1}, mix)))
      expect.push_back(c.real());
    CHECK(max_abs_diff(out.data(), expect) < 1e-12);
  }
}

TEST_CASE("motion with rotation matches a reference composition") {
  std::mt19937_64 gen(35);
  const Slice2D s = testing::random_slice(20, 18, gen, {1.25, 1.25});
  const MotionParams p{{10.0, -4.0}, {{1.0, 2.0}, {-3.0, 0.5}}, {0.3, 0.8}, 1};
  const Slice2D out = apply_motion(s, p);
  // Lines [0,5) from transform 1, [5,14) from the original (it holds the
  // center line 9), [14,18) from transform 2.
  const Kspace2D k0 = fft2_centered(s);
  const Kspace2D k1 = fft2_centered(rigid_transform(s, 10.0, {1.0, 2.0}));
  const Kspace2D k2 = fft2_centered(rigid_transform(s, -4.0, {-3.0, 0.5}));
  std::vector<Complex> mix(k0.data().begin(), k0.data().end());
  for (std::size_t y = 0; y < 18; ++y)
    for (std::size_t x = 0; x < 20; ++x) {
      if (y < 5) mix[x + 20 * y] = k1.at(x, y);
      if (y >= 14) mix[x + 20 * y] = k2.at(x, y);
    }
  std::vector<double> expect;
  for (const Complex& c : ifft2_centered_complex(Kspace2D({20, 18}, {1.25, 1.25}, mix)))
    expect.push_back(c.real());
  CHECK(max_abs_diff(out.data(), expect) < 1e-12);
}

TEST_CASE("motion parameter validation") {
  const Slice2D s({4, 4}, {1, 1}, std::vector<double>(16, 1.0));
  CHECK_THROWS_AS(apply_motion(s, MotionParams{{1.0}, {{0, 0}}, {1.2}, 1}), ParameterError);
  CHECK_THROWS_AS(apply_motion(s, MotionParams{{1.0, 1.0}, {{0, 0}, {0, 0}}, {0.5, 0.4}, 1}),
                  ParameterError);
  CHECK_THROWS_AS(apply_motion(s, MotionParams{{1.0}, {}, {0.5}, 1}), ParameterError);
  CHECK_THROWS_AS(apply_motion(s, MotionParams{{}, {}, {}, 2}), ParameterError);
}

// ---------------------------------------------------------------------------
// Ghosting

TEST_CASE("impulse ghosting matches the closed-form comb response") {
  for (int axis : {0, 1}) {
    for (int g : {2, 4, 8}) {
      const std::size_t n0 = 32, n1 = 24;
      const double a = 0.7;
      std::vector<double> v(n0 * n1, 0.0);
      const std::size_t qx = 5, qy = 9;
      v[qx + n0 * qy] = 1.0;
      const Slice2D s({n0, n1}, {1, 1}, v);
      const Slice2D out = apply_ghosting(s, GhostingParams{g, axis, a, 0.0});
      const std::size_t n = axis == 0 ? n0 : n1;
      double err = 0.0;
      for (std::size_t y = 0; y < n1; ++y)
        for (std::size_t x = 0; x < n0; ++x) {
          const std::size_t along = axis == 0 ? x : y, across = axis == 0 ? y : x;
          const double expect = testing::ghost_impulse_response(
              along, across, axis == 0 ? qx : qy, axis == 0 ? qy : qx, n, g, a);
          err = std::max(err, std::abs(out.at(x, y) - expect));
        }
      CHECK(err <= 1e-5);
    }
  }
}

TEST_CASE("ghosting with a restored center band matches a direct spectral model") {
  std::mt19937_64 gen(36);
  const std::size_t n0 = 40, n1 = 36;
  const Slice2D s = testing::random_slice(n0, n1, gen);
  const GhostingParams p{3, 1, 0.6, 0.2};
  const Slice2D out = apply_ghosting(s, p);
  const Kspace2D k = fft2_centered(s);
  std::vector<Complex> mod(k.data().begin(), k.data().end());
  const long keep = long(std::floor(0.2 * double(n1) / 2.0));  // 3 lines each side
  for (std::size_t y = 0; y < n1; ++y) {
    const long d = long(y) - long(n1 / 2);
    if (std::labs(d) <= keep || d % 3 != 0) continue;
    for (std::size_t x = 0; x < n0; ++x) mod[x + n0 * y] *= 0.4;
  }
  std::vector<double> expect;
  for (const Complex& c : ifft2_centered_complex(Kspace2D({n0, n1}, {1, 1}, mod))) expect.push_back(c.real());
  CHECK(max_abs_diff(out.data(), expect) <= 1e-12);
  // The DC line is never touched, so the mean survives.
  double m_in = 0.0, m_out = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    m_in += s.data()[i];
    m_out += out.data()[i];
  }
  CHECK(std::abs(m_in - m_out) <= 1e-9);
}

// ---------------------------------------------------------------------------
// Bias field and gamma

TEST_CASE("bias field matches the monomial expansion") {
  std::mt19937_64 gen(37);
  for (int order : {0, 1, 3, 4}) {
    const std::size_t nc = std::size_t((order + 1) * (order + 2) / 2);
    const BiasFieldParams p{order, testing::random_values(nc, gen, -0.5, 0.5)};
    const std::size_t n0 = 11, n1 = 7;
    const auto field = bias_field({n0, n1}, p);
    for (std::size_t y = 0; y < n1; ++y)
      for (std::size_t x = 0; x < n0; ++x) {
        const double cx = -1.0 + 2.0 * double(x) / double(n0 - 1);
        const double cy = -1.0 + 2.0 * double(y) / double(n1 - 1);
        double e = 0.0;
        std::size_t c = 0;
        for (int i = 0; i <= order; ++i)
          for (int j = 0; i + j <= order; ++j) e += p.coefficients[c++] * std::pow(cx, i) * std::pow(cy, j);
        CHECK(field[x + n0 * y] == doctest::Approx(std::exp(e)).epsilon(1e-12));
      }
  }
  CHECK_THROWS_AS(bias_field({4, 4}, BiasFieldParams{2, {1.0, 2.0}}), ParameterError);
}

TEST_CASE("bias field multiplies the slice") {
  std::mt19937_64 gen(38);
  const Slice2D s = testing::random_slice(6, 5, gen);
  const BiasFieldParams p{1, {0.2, -0.1, 0.3}};
  const auto f = bias_field(s.dims(), p);
  const Slice2D out = apply_bias_field(s, p);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(out.data()[i] == s.data()[i] * f[i]);
}

TEST_CASE("gamma works on the min-max normalized range") {
  const Slice2D s({4, 1}, {1, 1}, {0.0, 0.25, 0.5, 1.0});
  const Slice2D out = apply_gamma(s, GammaParams{std::log(2.0)});
  CHECK(out.data()[0] == 0.0);
  CHECK(out.data()[1] == doctest::Approx(0.0625).epsilon(1e-14));
  CHECK(out.data()[2] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(out.data()[3] == 1.0);
  // Shifted and scaled input gives the shifted and scaled result.
  const Slice2D s2({4, 1}, {1, 1}, {10.0, 12.5, 15.0, 20.0});
  const Slice2D o2 = apply_gamma(s2, GammaParams{std::log(2.0)});
  CHECK(o2.data()[1] == doctest::Approx(10.625).epsilon(1e-14));
  const Slice2D flat({3, 1}, {1, 1}, {2.0, 2.0, 2.0});
  CHECK(apply_gamma(flat, GammaParams{1.0}).data()[1] == 2.0);
}

TEST_CASE("gamma preserves order") {
  std::mt19937_64 gen(39);
  const Slice2D s = testing::random_slice(30, 30, gen);
  for (double lg : {-0.3, 0.15, 0.3}) {
    const Slice2D out = apply_gamma(s, GammaParams{lg});
    int bad = 0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i)
      bad += (s.data()[i] < s.data()[i + 1]) && !(out.data()[i] <= out.data()[i + 1]);
    CHECK(bad == 0);
  }
}

// ---------------------------------------------------------------------------
// Policy, sampling, records

TEST_CASE("policy frequencies follow the weights") {
  Rng rng(2024);
  std::array<int, 4> counts{};
  const int n = 120000;
  for (int i = 0; i < n; ++i) ++counts[std::size_t(sample_one_of(PolicyWeights{}, rng))];
  CHECK(std::abs(counts[0] / double(n) - 0.5) <= 0.01);
  for (int k = 1; k < 4; ++k) CHECK(std::abs(counts[std::size_t(k)] / double(n) - 1.0 / 6.0) <= 0.01);
  CHECK(PolicyWeights{}.probability(TransformKind::motion) == doctest::Approx(0.5));
}

TEST_CASE("zero weights are never drawn") {
  Rng rng(1);
  const PolicyWeights w{0.0, 0.0, 2.0, 0.0};
  for (int i = 0; i < 1000; ++i) CHECK(sample_one_of(w, rng) == TransformKind::bias_field);
  CHECK_THROWS_AS(sample_one_of(PolicyWeights{0, 0, 0, 0}, rng), ParameterError);
  CHECK_THROWS_AS(sample_one_of(PolicyWeights{-1, 1, 1, 1}, rng), ParameterError);
}

TEST_CASE("sampled parameters respect their ranges") {
  Rng rng(5);
  const std::vector<int> axes{0, 1};
  for (int i = 0; i < 500; ++i) {
    const MotionParams m = sample_motion(MotionRanges{}, axes, rng);
    REQUIRE(m.num_transforms() == 2);
    CHECK_NOTHROW(m.validate());
    for (std::size_t t = 0; t < 2; ++t) {
      CHECK(std::abs(m.rotations_deg[t]) <= 10.0);
      CHECK(std::abs(m.translations_mm[t][0]) <= 10.0);
      CHECK(std::abs(m.translations_mm[t][1]) <= 10.0);
    }
    const GhostingParams g = sample_ghosting(GhostingRanges{}, axes, rng);
    CHECK(g.num_ghosts >= 4);
    CHECK(g.num_ghosts <= 10);
    CHECK(g.intensity >= 0.5);
    CHECK(g.intensity <= 1.0);
    const BiasFieldParams b = sample_bias_field(BiasFieldRanges{}, rng);
    CHECK(b.coefficients.size() == 10);
    for (double c : b.coefficients) CHECK(std::abs(c) <= 0.5);
    CHECK(std::abs(sample_gamma(GammaRanges{}, rng).log_gamma) <= 0.3);
  }
  const std::vector<int> only0{0};
  CHECK(sample_motion(MotionRanges{}, only0, rng).axis == 0);
}

TEST_CASE("augmentation is a pure function of the seed and replays exactly") {
  std::mt19937_64 gen(40);
  Slice2D s({32, 32}, {1.25, 1.25}, testing::random_values(1024, gen), "P001-1-ED", 3);
  const AugmentConfig cfg;
  std::array<int, 4> kinds{};
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Augmented a = augment_slice(s, cfg, seed);
    const Augmented b = augment_slice(s, cfg, seed);
    CHECK(a.slice.data().size() == b.slice.data().size());
    CHECK(max_abs_diff(a.slice.data(), b.slice.data()) == 0.0);
    CHECK(a.record.seed == seed);
    CHECK(a.record.case_id == "P001-1-ED");
    CHECK(a.record.slice_index == 3);
    ++kinds[std::size_t(a.record.kind)];
    // Replay from the in-memory record and from its JSON form.
    CHECK(max_abs_diff(replay(a.record, s).data(), a.slice.data()) == 0.0);
    const auto text = to_json(a.record).dump();
    const TransformRecord back = transform_record_from_json(nlohmann::json::parse(text));
    CHECK(back.kind == a.record.kind);
    CHECK(back.params == a.record.params);
    CHECK(max_abs_diff(replay(back, s).data(), a.slice.data()) == 0.0);
  }
  for (int k : kinds) CHECK(k > 0);
  CHECK(max_abs_diff(augment_slice(s, cfg, 1).slice.data(), augment_slice(s, cfg, 2).slice.data()) > 0.0);
}

TEST_CASE("records with inconsistent content are rejected") {
  TransformRecord r;
  r.kind = TransformKind::gamma;
  r.params = GhostingParams{};
  const Slice2D s({2, 2}, {1, 1}, {1, 2, 3, 4});
  CHECK_THROWS_AS(replay(r, s), FormatError);
  CHECK_THROWS_AS(transform_record_from_json(nlohmann::json{{"kind", "blur"}}), FormatError);
  CHECK_THROWS_AS(transform_kind_from_string("blur"), FormatError);
}

TEST_CASE("augmentation config JSON round trip") {
  AugmentConfig c;
  c.weights.motion = 5.0;
  c.ghosting.max_ghosts = 12;
  c.phase_axes = {1};
  const AugmentConfig back = augment_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS(augment_config_from_json(nlohmann::json{{"weights", {{"motion", -1.0}}}}));
}
