#include "sweep/bspline.hpp"
#include "sweep/io.hpp"
#include "sweep/scene.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

using namespace sweep;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Config error message for `text`, or "" when it parses.
std::string config_error(const std::string& text) {
  try {
    parse_scene_config(text, "s.json");
  } catch (const SweepError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    return e.what();
  }
  return "";
}

const char* kMinimal = R"({
  "name": "m",
  "solid": {"type": "sphere", "radius": 1},
  "motion": {"family": "translation-line", "interval": [0, 1], "velocity": [1, 0, 0]}
})";

}  // namespace

TEST(SceneConfig, BundledFilesMatchBuiltins) {
  for (const std::string& name : golden_scene_names()) {
    const std::string path = std::string(SWEEP_SOURCE_DIR) + "/scenes/" + name + ".json";
    const std::string text = slurp(path);
    ASSERT_FALSE(text.empty()) << path;
    EXPECT_EQ(text, dump_json(to_json(golden_scene(name)))) << name;
    EXPECT_EQ(dump_json(to_json(parse_scene_config(text, path))), text) << name;
  }
}

TEST(SceneConfig, EchoRoundTripsAndFillsDefaults) {
  const SceneConfig c = parse_scene_config(kMinimal);
  const std::string echo = dump_json(to_json(c));
  EXPECT_NE(echo.find("\"resolution\": 128"), std::string::npos);
  EXPECT_NE(echo.find("\"boundary_margin\": 0.001"), std::string::npos);
  EXPECT_EQ(dump_json(to_json(parse_scene_config(echo))), echo);
  EXPECT_NO_THROW(c.build());
}

TEST(SceneConfig, ErrorsCarrySourceAndLine) {
  EXPECT_EQ(config_error(kMinimal), "");
  std::string bad = kMinimal;
  bad.replace(bad.find("\"radius\": 1"), 11, "\"radius\": \"x\"");
  EXPECT_EQ(config_error(bad).find("config error: s.json:3:"), 0u) << config_error(bad);

  bad = kMinimal;
  bad.replace(bad.find("translation"), 11, "teleport");
  EXPECT_EQ(config_error(bad).find("config error: s.json:4:"), 0u) << config_error(bad);

  bad = std::string(kMinimal);
  bad.insert(bad.rfind('\n'), ",\n  \"sampling\": {\"n_t\": 1}");
  EXPECT_NE(config_error(bad).find("s.json:5: 'n_t' must be at least 2"), std::string::npos) << config_error(bad);

  bad = std::string(kMinimal);
  bad.insert(bad.rfind('\n'), ",\n  \"colour\": 3");
  EXPECT_NE(config_error(bad).find("s.json:5: unknown key 'colour'"), std::string::npos) << config_error(bad);

  // Truncated document: the reported line is the last one present.
  EXPECT_NE(config_error("{\n  \"name\": \"m\",\n  \"solid\": {").find("s.json:3: malformed JSON"), std::string::npos);
}

TEST(SceneConfig, ScaledTolerances) {
  const Tolerances t = Tolerances{}.scaled(10.0);
  const Tolerances d;
  EXPECT_DOUBLE_EQ(t.funnel, 10 * d.funnel);
  EXPECT_DOUBLE_EQ(t.coincidence, 10 * d.coincidence);
  EXPECT_DOUBLE_EQ(t.procedural, 10 * d.procedural);
  EXPECT_DOUBLE_EQ(t.membership, 10 * d.membership);
  EXPECT_EQ(t.classify_eps, d.classify_eps);
  EXPECT_EQ(t.boundary_margin, d.boundary_margin);
}

TEST(SceneConfig, UnknownBundledScene) {
  try {
    golden_scene("no_such_scene");
    FAIL();
  } catch (const SweepError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}

TEST(BSpline, PartitionOfUnityAndDerivatives) {
  for (const bool periodic : {false, true}) {
    for (int p = 1; p <= 5; ++p) {
      const BSplineBasis b = periodic ? BSplineBasis::periodic_uniform(p, 9, -1, 2) : BSplineBasis::clamped_uniform(p, 9, -1, 2);
      for (double x = -1; x < 2; x += 0.0137) {
        int first = 0;
        double N[3][8];
        b.evaluate(x, 2, first, N);
        double s0 = 0, s1 = 0, s2 = 0;
        for (int i = 0; i <= p; ++i) {
          EXPECT_GE(N[0][i], -1e-15);
          s0 += N[0][i];
          s1 += N[1][i];
          s2 += N[2][i];
        }
        EXPECT_NEAR(s0, 1.0, 1e-13);
        EXPECT_NEAR(s1, 0.0, 1e-10);
        EXPECT_NEAR(s2, 0.0, 1e-8);
      }
    }
  }
}

TEST(BSpline, FitReproducesSplineFromTheSameSpace) {
  const BSplineBasis a = BSplineBasis::clamped_uniform(3, 7);
  const BSplineBasis b = BSplineBasis::periodic_uniform(3, 8, 0, 2 * kPi);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<Vec3> ctrl(7 * 8);
  for (Vec3& c : ctrl) c = Vec3(U(rng), U(rng), U(rng));
  const TensorSpline<3> truth(a, b, ctrl);

  std::vector<double> xs, ys;
  for (int i = 0; i < 15; ++i) xs.push_back(i / 14.0);
  for (int j = 0; j < 16; ++j) ys.push_back(2 * kPi * j / 16.0);
  std::vector<std::vector<Vec3>> vals(xs.size(), std::vector<Vec3>(ys.size()));
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j) vals[i][j] = truth.eval(xs[i], ys[j]);
  const TensorSpline<3> fit = fit_tensor_spline<3>(a, b, xs, ys, vals);
  for (std::size_t k = 0; k < ctrl.size(); ++k) EXPECT_LT((fit.ctrl()[k] - ctrl[k]).norm(), 1e-10);
}

TEST(BSpline, SurfaceJetMatchesFiniteDifferences) {
  const std::string text = R"(# bicubic patch
3 2
4 3
0 0 0 0 1 1 1 1
0 0 0 1 1 1
0 0 0
0 0.5 0.2
0 1 0
0.3 0 0.1
0.4 0.5 0.6
0.3 1 0
0.7 0 0
0.6 0.5 -0.4
0.7 1 0.1
1 0 0
1 0.5 0.3
1 1 0
)";
  const auto s = BSplineSurface::parse(text);
  const auto again = BSplineSurface::parse(s->serialize());
  const double h = 1e-5;
  for (double u : {0.1, 0.45, 0.9})
    for (double v : {0.2, 0.5, 0.8}) {
      const SurfaceJet j = s->jet(u, v);
      EXPECT_LT((again->eval(u, v) - j.S).norm(), 1e-15);
      EXPECT_LT((j.Su - (s->eval(u + h, v) - s->eval(u - h, v)) / (2 * h)).norm(), 1e-8);
      EXPECT_LT((j.Sv - (s->eval(u, v + h) - s->eval(u, v - h)) / (2 * h)).norm(), 1e-8);
      EXPECT_LT((j.Suv - (s->jet(u, v + h).Su - s->jet(u, v - h).Su) / (2 * h)).norm(), 1e-7);
      EXPECT_LT((j.Suu - (s->jet(u + h, v).Su - s->jet(u - h, v).Su) / (2 * h)).norm(), 1e-7);
    }
  EXPECT_THROW(BSplineSurface::parse("3 3\n4 4\n0 0 0 0 1 1 1 1\n"), SweepError);
}
