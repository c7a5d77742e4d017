// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "mcdk/core/tns.hpp"
#include "mcdk/io/image.hpp"
#include "mcdk/render/dataset.hpp"
#include "fixtures.hpp"

namespace mcdk::render {
namespace {

Material emitter(double value) {
  Material m;
  m.albedo = Vec3::Zero();
  m.emission = Vec3::Constant(value);
  return m;
}

// Camera at the origin looking down -Z, enclosed by an emitting sphere.
Scene emitter_shell() {
  Scene s;
  s.name = "shell";
  s.primitives.push_back(Primitive{Sphere{Vec3::Zero(), 10.0}, emitter(1.0)});
  s.key_nodes = {s.camera, s.camera};
  return s;
}

// A diffuse wall at z = -3 facing the camera, with a small light behind it.
Scene facing_wall(double half_width) {
  Scene s;
  s.name = "wall";
  Material white;
  s.primitives.push_back(Primitive{Box{Vec3(-half_width, -half_width, -3.1),
                                       Vec3(half_width, half_width, -3.0)},
                                   white});
  s.primitives.push_back(Primitive{Sphere{Vec3(0, 0, 2), 0.2}, emitter(5.0)});
  s.key_nodes = {s.camera, s.camera};
  return s;
}

double mean_squared_deviation(const Tensor<float>& a, const Tensor<float>& b) {
  double acc = 0;
  for (Index i = 0; i < a.size(); ++i) acc += std::pow(double(a[i]) - double(b[i]), 2);
  return acc / static_cast<double>(a.size());
}

class ScopedThreads {
 public:
  explicit ScopedThreads(int n) {
    if (const char* v = std::getenv("MCDK_THREADS")) saved_ = v;
    setenv("MCDK_THREADS", std::to_string(n).c_str(), 1);
  }
  ~ScopedThreads() {
    if (saved_.empty()) {
      unsetenv("MCDK_THREADS");
    } else {
      setenv("MCDK_THREADS", saved_.c_str(), 1);
    }
  }

 private:
  std::string saved_;
};

TEST(RendererTest, EmitterFillingFrameReturnsEmission) {
  const Renderer renderer(emitter_shell());
  for (int spp : {1, 4}) {
    const auto image = renderer.render(CameraPose{}, spp, SampleKey{3, 0, 0}, {8, 12});
    EXPECT_EQ(image.shape(), (Shape{3, 8, 12}));
    for (float v : image.data()) ASSERT_EQ(v, 1.0f);
  }
}

TEST(RendererTest, DeterministicAcrossRunsAndWorkerCounts) {
  const Renderer renderer(builtin_scene("box_room"));
  const auto pose = builtin_scene("box_room").camera;
  const SampleKey key{7, 2, 1};
  Tensor<float> single, many;
  {
    ScopedThreads threads(1);
    single = renderer.render(pose, 2, key, {24, 20});
  }
  {
    ScopedThreads threads(5);
    many = renderer.render(pose, 2, key, {24, 20});
  }
  const auto again = renderer.render(pose, 2, key, {24, 20});
  for (Index i = 0; i < single.size(); ++i) {
    ASSERT_EQ(single[i], many[i]);
    ASSERT_EQ(single[i], again[i]);
  }
  const auto other = renderer.render(pose, 2, SampleKey{8, 2, 1}, {24, 20});
  EXPECT_GT(mean_squared_deviation(single, other), 0.0);
}

TEST(RendererTest, RenderAveragesPixelSamples) {
  const Renderer renderer(builtin_scene("sphere_grid"));
  const auto pose = builtin_scene("sphere_grid").camera;
  const SampleKey key{1, 0, 3};
  const ImageSize size{16, 16};
  const auto image = renderer.render(pose, 4, key, size);
  for (Index y : {3, 9}) {
    for (Index x : {2, 13}) {
      Vec3 acc = Vec3::Zero();
      for (const Vec3& s : renderer.pixel_samples(pose, x, y, 0, 4, key, size)) acc += s;
      for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(image[(c * 16 + y) * 16 + x], acc[c] / 4.0, 1e-5 * (1 + acc[c]));
      }
    }
  }
}

TEST(RendererTest, RadianceIsNonNegative) {
  for (const auto& name : builtin_scene_names()) {
    const Scene scene = builtin_scene(name);
    const auto image = Renderer(scene).render(scene.camera, 2, SampleKey{1, 0, 0}, {24, 24});
    for (float v : image.data()) {
      ASSERT_TRUE(std::isfinite(v)) << name;
      ASSERT_GE(v, 0.0f) << name;
    }
  }
}

TEST(RendererTest, VarianceFallsInverselyWithSampleCount) {
  const Scene scene = builtin_scene("box_room");
  const Renderer renderer(scene);
  const ImageSize size{24, 24};
  const auto reference = renderer.render(scene.camera, 1024, SampleKey{0, 0, 1000}, size);
  std::vector<double> log_spp, log_var;
  for (int spp : {1, 4, 16}) {
    double acc = 0;
    constexpr int kSeeds = 8;
    for (int seed = 1; seed <= kSeeds; ++seed) {
      acc += mean_squared_deviation(
          renderer.render(scene.camera, spp, SampleKey{std::uint64_t(seed), 0, 0}, size),
          reference);
    }
    log_spp.push_back(std::log(spp));
    log_var.push_back(std::log(acc / kSeeds));
  }
  const double mx = (log_spp[0] + log_spp[1] + log_spp[2]) / 3;
  const double my = (log_var[0] + log_var[1] + log_var[2]) / 3;
  double num = 0, den = 0;
  for (int k = 0; k < 3; ++k) {
    num += (log_spp[k] - mx) * (log_var[k] - my);
    den += (log_spp[k] - mx) * (log_spp[k] - mx);
  }
  EXPECT_NEAR(num / den, -1.0, 0.15);
}

TEST(RendererTest, InvalidArguments) {
  const Renderer renderer(emitter_shell());
  EXPECT_THROW(renderer.render(CameraPose{}, 0, {}, {8, 8}), ConfigError);
  EXPECT_THROW(renderer.render(CameraPose{}, 1, {}, {7, 8}), ConfigError);
  EXPECT_THROW(look_at(Vec3::Ones(), Vec3::Ones()), ConfigError);
  EXPECT_THROW(look_at(Vec3::Zero(), Vec3(0, 2, 0)), ConfigError);
}

TEST(GBufferTest, SphereOnAxisIsNearestAtCenter) {
  Scene scene = emitter_shell();
  Material white;
  scene.primitives.push_back(Primitive{Sphere{Vec3(0, 0, -4), 1.0}, white});
  const auto g = Renderer(scene).render_gbuffers(CameraPose{}, {17, 17}).gbuffers;
  const Index center = 8 * 17 + 8;
  for (Index p = 0; p < 17 * 17; ++p) EXPECT_LE(g[center], g[p]);
  // The center normal points back at the camera.
  EXPECT_NEAR(g[3 * 289 + center], 1.0f, 1e-3);
}

TEST(GBufferTest, FacingPlaneAndBackground) {
  const Scene scene = facing_wall(0.5);
  const Renderer renderer(scene);
  const auto out = renderer.render_gbuffers(CameraPose{}, {16, 16});
  const auto again = renderer.render_gbuffers(CameraPose{}, {16, 16});
  const Index plane = 256;
  for (Index i = 0; i < out.gbuffers.size(); ++i) ASSERT_EQ(out.gbuffers[i], again.gbuffers[i]);
  const Index center = 8 * 16 + 8, corner = 0;
  EXPECT_FLOAT_EQ(out.gbuffers[plane + center], 0.5f);
  EXPECT_FLOAT_EQ(out.gbuffers[2 * plane + center], 0.5f);
  EXPECT_FLOAT_EQ(out.gbuffers[3 * plane + center], 1.0f);
  EXPECT_NEAR(out.gbuffers[4 * plane + center], luminance(Vec3::Constant(0.75)), 1e-6);
  EXPECT_NEAR(out.albedo_rgb[center], 0.75f, 1e-6);
  EXPECT_GT(out.gbuffers[center], 0.0f);
  EXPECT_LT(out.gbuffers[center], 1.0f);
  // The wall spans a narrow cone; the corner pixel sees the background.
  EXPECT_EQ(out.gbuffers[corner], 1.0f);
  for (int c = 1; c <= 3; ++c) EXPECT_EQ(out.gbuffers[c * plane + corner], 0.5f);
  EXPECT_EQ(out.gbuffers[4 * plane + corner], 0.0f);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(out.albedo_rgb[c * plane + corner], 0.0f);
}

TEST(TrajectoryTest, EndpointsAndLinearPositions) {
  const auto a = look_at({0, 1, 4}, {0, 0, 0});
  const auto b = look_at({2, 1, 3}, {0, 0.5, 0});
  const auto poses = interpolate_trajectory({a, b}, 3);
  ASSERT_EQ(poses.size(), 3u);
  EXPECT_EQ(poses[0].position, a.position);
  EXPECT_EQ(poses[2].position, b.position);
  EXPECT_TRUE(poses[0].orientation.coeffs() == a.orientation.coeffs());
  EXPECT_TRUE(poses[2].orientation.coeffs() == b.orientation.coeffs());
  EXPECT_TRUE(poses[1].position.isApprox(0.5 * (a.position + b.position), 1e-15));

  const auto same = interpolate_trajectory({a, a}, 4);
  for (const auto& p : same) {
    EXPECT_TRUE(p.position.isApprox(a.position));
    EXPECT_LT(p.orientation.angularDistance(a.orientation), 1e-12);
  }
  EXPECT_THROW(interpolate_trajectory({a}, 4), ConfigError);
  EXPECT_THROW(interpolate_trajectory({a, b}, 0), ConfigError);
}

TEST(TrajectoryTest, SlerpHalfwayIsHalfAngle) {
  const CameraPose a{Vec3::Zero(), Quat::Identity()};
  const CameraPose b{Vec3::Zero(), Quat(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitY()))};
  const auto poses = interpolate_trajectory({a, b}, 3);
  const Quat want(Eigen::AngleAxisd(std::numbers::pi / 4, Vec3::UnitY()));
  EXPECT_LT(poses[1].orientation.angularDistance(want), 1e-12);
  EXPECT_NEAR(poses[1].orientation.angularDistance(a.orientation), std::numbers::pi / 4, 1e-12);
}

TEST(TrajectoryTest, MultiSegmentPassesThroughKeyNodes) {
  const auto a = look_at({0, 1, 4}, {0, 0, 0});
  const auto b = look_at({1, 1, 4}, {0, 0, 0});
  const auto c = look_at({2, 1, 3}, {0, 0, 0});
  const auto poses = interpolate_trajectory({a, b, c}, 5);
  EXPECT_TRUE(poses[2].position.isApprox(b.position, 1e-15));
  EXPECT_TRUE(poses[1].position.isApprox(0.5 * (a.position + b.position), 1e-15));
  EXPECT_EQ(poses[4].position, c.position);
}

TEST(SceneTest, BuiltinScenesAreValid) {
  for (const auto& name : builtin_scene_names()) {
    const Scene scene = builtin_scene(name);
    EXPECT_NO_THROW(scene.validate()) << name;
    int emitters = 0;
    for (const auto& p : scene.primitives) emitters += p.material.emissive();
    EXPECT_GE(emitters, 2) << name;
    EXPECT_GE(scene.key_nodes.size(), 2u);
    EXPECT_EQ(resolve_scene(name).name, name);
  }
  EXPECT_THROW(builtin_scene("nope"), ConfigError);
  EXPECT_THROW(resolve_scene("/does/not/exist.json"), ConfigError);
}

constexpr const char* kSceneJson = R"({
  "name": "test",
  "camera": {"position": [0, 1, 5], "look_at": [0, 1, 0], "vfov": 40},
  "environment": [0.1, 0.1, 0.1],
  "materials": {
    "white": {"albedo": [0.8, 0.8, 0.8]},
    "lamp": {"albedo": [0, 0, 0], "emission": [4, 4, 4]}
  },
  "primitives": [
    {"type": "box", "min": [-2, -0.1, -2], "max": [2, 0, 2], "material": "white"},
    {"type": "sphere", "center": [0, 3, 0], "radius": 0.5, "material": "lamp"},
    {"type": "sphere", "center": [0, 0.5, 0], "radius": 0.5,
     "material": {"albedo": [0.9, 0.2, 0.2], "roughness": 0.2}}
  ],
  "key_nodes": [
    {"position": [0, 1, 5], "look_at": [0, 1, 0]},
    {"position": [1, 1, 5], "orientation": [1, 0, 0, 0]}
  ]
})";

TEST(SceneTest, ParsesJson) {
  const Scene s = parse_scene(kSceneJson);
  EXPECT_EQ(s.name, "test");
  EXPECT_DOUBLE_EQ(s.vfov_degrees, 40.0);
  ASSERT_EQ(s.primitives.size(), 3u);
  EXPECT_TRUE(s.primitives[1].material.emissive());
  EXPECT_DOUBLE_EQ(s.primitives[2].material.roughness, 0.2);
  EXPECT_TRUE(std::holds_alternative<Box>(s.primitives[0].shape));
  ASSERT_EQ(s.key_nodes.size(), 2u);
  EXPECT_TRUE(s.key_nodes[1].orientation.coeffs().isApprox(Quat::Identity().coeffs()));
  // The camera looks toward -Z.
  EXPECT_TRUE((s.camera.orientation * Vec3(0, 0, -1)).isApprox(Vec3(0, 0, -1), 1e-12));

  const auto dir = testing::scratch_dir("scene_json");
  std::ofstream(dir / "scene.json") << kSceneJson;
  EXPECT_EQ(resolve_scene((dir / "scene.json").string()).primitives.size(), 3u);
}

TEST(SceneTest, RejectsInvalidJson) {
  std::string base = kSceneJson;
  const auto with = [&](const std::string& from, const std::string& to) {
    std::string s = base;
    const auto at = s.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    return s.replace(at, from.size(), to);
  };
  EXPECT_THROW(parse_scene("{"), ConfigError);
  EXPECT_THROW(parse_scene(with("\"vfov\": 40", "\"vfov\": 180")), ConfigError);
  EXPECT_THROW(parse_scene(with("\"emission\": [4, 4, 4]", "\"emission\": [0, 0, 0]")),
               ConfigError);
  EXPECT_THROW(parse_scene(with("\"material\": \"white\"", "\"material\": \"grey\"")),
               ConfigError);
  EXPECT_THROW(parse_scene(with("\"type\": \"box\"", "\"type\": \"cone\"")), ConfigError);
  EXPECT_THROW(parse_scene(with("\"look_at\": [0, 1, 0], \"vfov\"", "\"look_at\": [0, 1, 5], \"vfov\"")),
               ConfigError);
  EXPECT_THROW(parse_scene(with("\"radius\": 0.5, \"material\": \"lamp\"",
                                "\"radius\": -1, \"material\": \"lamp\"")),
               ConfigError);
  EXPECT_THROW(parse_scene(with("\"center\": [0, 3, 0]", "\"center\": [0, 3]")), ConfigError);
  EXPECT_THROW(parse_scene(R"({"primitives": []})"), ConfigError);
}

DatasetSettings small_settings(int frames, std::uint64_t seed) {
  DatasetSettings s;
  s.size = {16, 16};
  s.frames = frames;
  s.seed = seed;
  s.reference_spp = 64;
  return s;
}

TEST(DatasetTest, BundleStructureAndSeeds) {
  const Scene scene = builtin_scene("box_room");
  const auto a = build_dataset(scene, small_settings(1, 1));
  const auto b = build_dataset(scene, small_settings(1, 2));
  ASSERT_EQ(a.size(), 1u);
  for (const auto& level : a[0].spp_stack) EXPECT_EQ(level.shape(), (Shape{3, 16, 16}));
  EXPECT_EQ(a[0].gbuffers.shape(), (Shape{5, 16, 16}));
  EXPECT_EQ(a[0].albedo_rgb.shape(), (Shape{3, 16, 16}));
  EXPECT_EQ(a[0].reference.shape(), (Shape{3, 16, 16}));
  EXPECT_GT(mean_squared_deviation(a[0].spp_stack[2], b[0].spp_stack[2]), 0.0);
  for (Index i = 0; i < a[0].gbuffers.size(); ++i) ASSERT_EQ(a[0].gbuffers[i], b[0].gbuffers[i]);
  // Levels are independent renders, not prefixes of one another.
  EXPECT_GT(mean_squared_deviation(a[0].spp_stack[0], a[0].spp_stack[1]), 0.0);

  const auto seq = build_dataset(scene, small_settings(3, 1));
  ASSERT_EQ(seq.size(), 3u);
  for (int f = 0; f < 3; ++f) EXPECT_EQ(seq[f].frame_index, f);
  for (Index i = 0; i < seq[0].reference.size(); ++i) {
    ASSERT_EQ(seq[0].reference[i], a[0].reference[i]);
  }
}

TEST(DatasetTest, MaxCountMatchesSampleMean) {
  const Scene scene = builtin_scene("mirror_corridor");
  const Renderer renderer(scene);
  const auto settings = small_settings(1, 9);
  const auto bundle = render_bundle(renderer, scene.camera, 0, settings);
  const std::vector<int> m(256, 63);
  const auto image = sampling::assemble_adaptive(bundle.spp_stack, std::span<const int>(m));
  for (Index y : {2, 8, 13}) {
    for (Index x : {1, 7, 15}) {
      Vec3 acc = Vec3::Zero();
      for (int level = 0; level < sampling::kStackLevels; ++level) {
        for (const Vec3& s : renderer.pixel_samples(scene.camera, x, y, 0, 1 << level,
                                                    SampleKey{9, 0, std::uint64_t(level)},
                                                    settings.size)) {
          acc += s;
        }
      }
      for (int c = 0; c < 3; ++c) {
        const double want = acc[c] / 63.0;
        EXPECT_NEAR(image[(c * 16 + y) * 16 + x], want, 1e-5 * std::max(1.0, want));
      }
    }
  }
}

TEST(DatasetTest, AdaptiveEstimateIsUnbiased) {
  const Scene scene = builtin_scene("box_room");
  const Renderer renderer(scene);
  const ImageSize size{16, 16};
  const Index x = 8, y = 9;
  constexpr int kSeeds = 10000;
  // m = 5 combines the 1-spp and 4-spp levels.
  double sum = 0, sum_sq = 0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto one = renderer.pixel_samples(scene.camera, x, y, 0, 1, {std::uint64_t(seed), 0, 0}, size);
    const auto four = renderer.pixel_samples(scene.camera, x, y, 0, 4, {std::uint64_t(seed), 0, 2}, size);
    double v = luminance(one[0]);
    for (const Vec3& s : four) v += luminance(s);
    v /= 5.0;
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / kSeeds;
  const double stderr_i = std::sqrt((sum_sq / kSeeds - mean * mean) / kSeeds);
  constexpr int kReference = 100000;
  double ref = 0, ref_sq = 0;
  for (const Vec3& s : renderer.pixel_samples(scene.camera, x, y, 0, kReference,
                                              {0, 0, kReferenceStream}, size)) {
    ref += luminance(s);
    ref_sq += luminance(s) * luminance(s);
  }
  ref /= kReference;
  const double stderr_ref = std::sqrt((ref_sq / kReference - ref * ref) / kReference);
  EXPECT_GT(ref, 0.0);
  EXPECT_LT(std::abs(mean - ref), 3.0 * std::hypot(stderr_i, stderr_ref));
}

TEST(DatasetTest, HigherLevelsAreCloserToReference) {
  for (const auto& name : builtin_scene_names()) {
    const Scene scene = builtin_scene(name);
    const Renderer renderer(scene);
    const ImageSize size{24, 24};
    const auto reference = renderer.render(scene.camera, 1024, {0, 0, kReferenceStream}, size);
    std::array<double, sampling::kStackLevels> mse{};
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      DatasetSettings settings;
      settings.size = size;
      settings.seed = seed;
      settings.reference_spp = 1;
      const auto bundle = render_bundle(renderer, scene.camera, 0, settings);
      for (int level = 0; level < sampling::kStackLevels; ++level) {
        mse[level] += mean_squared_deviation(bundle.spp_stack[level], reference);
      }
    }
    for (int level = 1; level < sampling::kStackLevels; ++level) {
      EXPECT_LE(mse[level], mse[level - 1]) << name << " level " << level;
    }
  }
}

// Per-pixel expected squared error, estimated over independent seeds. Rare
// caustic paths give the squared error a heavy tail, so many seeds on a
// small frame are needed for the estimate to settle.
TEST(DatasetTest, ThreeSampleBlendBeatsOneSample) {
  const Scene scene = builtin_scene("box_room");
  const Renderer renderer(scene);
  const ImageSize size{8, 8};
  constexpr Index kPixels = 64;
  const auto reference = renderer.render(scene.camera, 16384, {0, 0, kReferenceStream}, size);
  constexpr int kSeeds = 8192;
  std::vector<double> err1(3 * kPixels, 0.0), err3(3 * kPixels, 0.0);
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const auto c1 = renderer.render(scene.camera, 1, {std::uint64_t(seed), 0, 0}, size);
    const auto c2 = renderer.render(scene.camera, 2, {std::uint64_t(seed), 0, 1}, size);
    for (Index i = 0; i < c1.size(); ++i) {
      const double three = (double(c1[i]) + 2.0 * double(c2[i])) / 3.0;
      err1[i] += std::pow(double(c1[i]) - reference[i], 2);
      err3[i] += std::pow(three - reference[i], 2);
    }
  }
  Index better = 0;
  for (Index p = 0; p < kPixels; ++p) {
    double e1 = 0, e3 = 0;
    for (Index c = 0; c < 3; ++c) {
      e1 += err1[c * kPixels + p];
      e3 += err3[c * kPixels + p];
    }
    better += e3 <= e1;
  }
  EXPECT_GE(static_cast<double>(better) / kPixels, 0.95);
}

TEST(DatasetTest, SaveLoadRoundTrip) {
  const auto bundles = build_dataset(builtin_scene("box_room"), small_settings(2, 5));
  const auto root = testing::scratch_dir("dataset_roundtrip");
  save_dataset(root, bundles);
  EXPECT_TRUE(std::filesystem::exists(root / frame_dir_name(1) / "c_32.tns"));
  EXPECT_TRUE(std::filesystem::exists(root / frame_dir_name(0) / "ref.ppm"));
  EXPECT_EQ(frame_dir_name(7), "frame_0007");
  const auto loaded = load_dataset(root);
  ASSERT_EQ(loaded.size(), 2u);
  for (int f = 0; f < 2; ++f) {
    EXPECT_EQ(loaded[f].frame_index, f);
    EXPECT_EQ(loaded[f].seed, 5u);
    for (int level = 0; level < sampling::kStackLevels; ++level) {
      for (Index i = 0; i < loaded[f].spp_stack[level].size(); ++i) {
        ASSERT_EQ(loaded[f].spp_stack[level][i], bundles[f].spp_stack[level][i]);
      }
    }
    for (Index i = 0; i < loaded[f].reference.size(); ++i) {
      ASSERT_EQ(loaded[f].reference[i], bundles[f].reference[i]);
    }
  }
  const auto sequences = load_sequences(root);
  ASSERT_EQ(sequences.size(), 1u);
  EXPECT_EQ(sequences[0].size(), 2u);

  std::filesystem::remove(root / frame_dir_name(1) / "c_8.tns");
  EXPECT_THROW(load_bundle(root / frame_dir_name(1)), DataError);
  save_tns(root / frame_dir_name(0) / "gbuf.tns", Tensor<float>({5, 8, 16}));
  EXPECT_THROW(load_bundle(root / frame_dir_name(0)), DataError);
  EXPECT_THROW(load_dataset(root / "missing"), DataError);
}

TEST(ImageTest, ToneMapAndPpmRoundTrip) {
  EXPECT_EQ(tone_map(0.0f), 0.0f);
  EXPECT_NEAR(tone_map(1.0f), std::pow(0.5f, 1.0f / 2.2f), 1e-7);
  EXPECT_LT(tone_map(1e6f), 1.0f);
  Rng rng(3);
  const auto image = testing::random_tensor<float>({3, 5, 7}, rng, 0, 1);
  const auto dir = testing::scratch_dir("ppm");
  save_ppm(dir / "a.ppm", image);
  const auto back = load_ppm(dir / "a.ppm");
  ASSERT_EQ(back.shape(), image.shape());
  for (Index i = 0; i < image.size(); ++i) EXPECT_NEAR(back[i], image[i], 0.5 / 255 + 1e-6);
  save_ppm(dir / "gray.ppm", testing::random_tensor<float>({1, 5, 7}, rng, -1, 2));
  const auto gray = load_ppm(dir / "gray.ppm");
  for (Index i = 0; i < 35; ++i) {
    EXPECT_EQ(gray[i], gray[35 + i]);
    EXPECT_GE(gray[i], 0.0f);
    EXPECT_LE(gray[i], 1.0f);
  }
}

}  // namespace
}  // namespace mcdk::render
