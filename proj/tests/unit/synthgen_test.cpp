#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "obsmerge/clustering.hpp"
#include "obsmerge/error.hpp"
#include "obsmerge/observation.hpp"
#include "obsmerge/synthgen.hpp"
#include "test_support.hpp"

using namespace obsmerge;
using obsmerge::testing::for_all;

namespace {

GenConfig small_config(int samples = 20, int classes = 5) {
  GenConfig c;
  c.seed = 42;
  c.num_samples = samples;
  c.num_classes = classes;
  return c;
}

SceneSpec one_object(BoundingBox box, std::size_t label, double p, double jitter, double kappa) {
  SceneSpec s;
  s.image_id = "s";
  KnownObjectSpec o;
  o.box = box;
  o.class_label = label;
  o.p_detect = p;
  o.jitter = jitter;
  o.concentration = kappa;
  s.known.push_back(o);
  return s;
}

double mean_detection_entropy(const Corpus& corpus) {
  double sum = 0.0;
  long n = 0;
  for (const auto& set : corpus.sample_sets) {
    for (const auto& sample : set.samples) {
      for (const auto& d : sample) {
        sum += entropy(d.scores);
        ++n;
      }
    }
  }
  return sum / static_cast<double>(n);
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
  Rng a(5), b(5), c(6);
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_NE(Rng(5).next(), c.next());
}

TEST(Rng, PoissonMeanAndDirichletSimplex) {
  Rng rng(11);
  double total = 0;
  for (int i = 0; i < 20000; ++i) total += rng.poisson(3.5);
  EXPECT_NEAR(total / 20000.0, 3.5, 0.05);
  const std::vector<double> alpha{0.1, 1.0, 4.0};
  for (int i = 0; i < 100; ++i) {
    const auto d = rng.dirichlet(alpha);
    double s = 0;
    for (double v : d) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(GenerateCorpus, NoiselessObjectIsCopiedExactly) {
  const BoundingBox box{100, 50, 180, 150};
  const SceneSpec s = one_object(box, 2, 1.0, 0.0, 1e6);
  const GenConfig config = small_config();
  const auto g = generate_corpus(std::span(&s, 1), config);
  const SampleSet& set = g.corpus.sample_sets.at(0);
  ASSERT_EQ(set.num_samples(), 20u);
  for (const auto& sample : set.samples) {
    ASSERT_EQ(sample.size(), 1u);
    EXPECT_EQ(sample[0].box, box);
    EXPECT_EQ(sample[0].scores.argmax(), 2u);
    EXPECT_GT(sample[0].scores.max(), 0.999);
  }
  ASSERT_EQ(g.ground_truth.size(), 1u);
  EXPECT_EQ(g.ground_truth[0].box, box);
  EXPECT_EQ(g.ground_truth[0].class_label, 2u);
}

TEST(GenerateCorpus, ByteIdenticalForFixedSeed) {
  GenConfig config = small_config();
  config.closed_scenes = 6;
  config.near_scenes = 3;
  config.distant_scenes = 3;
  const auto a = generate_corpus(random_scenes(config), config);
  const auto b = generate_corpus(random_scenes(config), config);
  EXPECT_EQ(format_corpus(a.corpus), format_corpus(b.corpus));
  EXPECT_EQ(format_ground_truth(a.ground_truth), format_ground_truth(b.ground_truth));
  config.seed = 43;
  const auto c = generate_corpus(random_scenes(config), config);
  EXPECT_NE(format_corpus(a.corpus), format_corpus(c.corpus));
}

TEST(GenerateCorpus, SceneOutputDoesNotDependOnItsNeighbours) {
  GenConfig config = small_config();
  config.closed_scenes = 4;
  const auto scenes = random_scenes(config);
  const auto all = generate_corpus(scenes, config);
  const auto first_two = generate_corpus(std::span(scenes).first(2), config);
  EXPECT_EQ(all.corpus.sample_sets[1], first_two.corpus.sample_sets[1]);
}

TEST(GenerateCorpus, ClutterCountWithinThreeSigmaOfPoisson) {
  SceneSpec s;
  s.image_id = "clutter";
  s.clutter_rate = 2.0;
  const GenConfig config = small_config(100);
  const auto g = generate_corpus(std::span(&s, 1), config);
  const double count = static_cast<double>(g.corpus.sample_sets[0].num_detections());
  EXPECT_LE(std::abs(count - 200.0), 3.0 * std::sqrt(200.0)) << count;
}

TEST(GenerateCorpus, RejectsObjectsInconsistentWithRegime) {
  SceneSpec s = one_object({0, 0, 10, 10}, 0, 1, 0, 10);
  s.regime = Regime::NearOpenSet;
  const GenConfig config = small_config();
  EXPECT_THROW(generate_corpus(std::span(&s, 1), config), Error);
}

TEST(ExpectedClusterCount, CountsWellSeparatedObjects) {
  SceneSpec s;
  for (double x : {10.0, 150.0, 300.0}) {
    s.known.push_back(one_object({x, 100, x + 60, 160}, 0, 1.0, 2.0, 50).known[0]);
  }
  EXPECT_EQ(expected_cluster_count(s, small_config()), 3);
}

TEST(ExpectedClusterCount, ExcludesRarelyDetectedObjects) {
  SceneSpec s;
  s.known.push_back(one_object({10, 100, 70, 160}, 0, 1.0, 2.0, 50).known[0]);
  s.known.push_back(one_object({300, 100, 360, 160}, 0, 0.02, 2.0, 50).known[0]);
  EXPECT_EQ(expected_cluster_count(s, small_config()), 1);
}

TEST(ExpectedClusterCount, CloseObjectsAreAmbiguous) {
  SceneSpec s;
  s.known.push_back(one_object({10, 100, 70, 160}, 0, 1.0, 5.0, 50).known[0]);
  s.known.push_back(one_object({11, 100, 71, 160}, 1, 1.0, 5.0, 50).known[0]);
  try {
    expected_cluster_count(s, small_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OverlapAmbiguity);
  }
}

TEST(SynthgenProperty, GeneratedCorporaPassValidation) {
  for_all(0x20, 60, [](Rng& rng, int) {
    GenConfig config = small_config(rng.uniform_int(1, 25), rng.uniform_int(1, 25));
    config.seed = rng.next();
    config.closed_scenes = rng.uniform_int(0, 4);
    config.near_scenes = rng.uniform_int(0, 3);
    config.distant_scenes = rng.uniform_int(0, 3);
    config.closed.overlap_pairs = rng.uniform_int(0, 1);
    config.closed.crowd_size = rng.uniform_int(0, 3);
    const auto g = generate_corpus(random_scenes(config), config);
    for (const auto& set : g.corpus.sample_sets) {
      ASSERT_EQ(validate_sample_set(set), set);
      ASSERT_EQ(set.num_samples(), static_cast<std::size_t>(config.num_samples));
    }
    // The written corpus reads back unchanged.
    std::istringstream in(format_corpus(g.corpus));
    ASSERT_EQ(parse_corpus(in), g.corpus);
  });
}

TEST(SynthgenProperty, HigherConcentrationLowersEntropy) {
  for_all(0x21, 20, [](Rng& rng, int) {
    const GenConfig config = [&] {
      GenConfig c = small_config(200, rng.uniform_int(2, 20));
      c.seed = rng.next();
      return c;
    }();
    const double low = rng.uniform(1.0, 10.0);
    const double high = low * rng.uniform(5.0, 20.0);
    const SceneSpec a = one_object({50, 50, 150, 150}, 0, 1.0, 1.0, low);
    const SceneSpec b = one_object({50, 50, 150, 150}, 0, 1.0, 1.0, high);
    const double h_low = mean_detection_entropy(generate_corpus(std::span(&a, 1), config).corpus);
    const double h_high = mean_detection_entropy(generate_corpus(std::span(&b, 1), config).corpus);
    ASSERT_LT(h_high, h_low) << "kappa " << low << " vs " << high;
  });
}

TEST(SynthgenProperty, OpenSetScenesHaveNoGroundTruthAndOnlyOpenSetErrors) {
  for_all(0x22, 30, [](Rng& rng, int) {
    GenConfig config = small_config();
    config.seed = rng.next();
    config.near_scenes = 2;
    config.distant_scenes = 2;
    const auto g = generate_corpus(random_scenes(config), config);
    ASSERT_TRUE(g.ground_truth.empty());
    ClusterConfig cc;
    cc.affinity = AffinityKind::parse("iou");
    cc.theta = 0.7;
    for (const auto& set : g.corpus.sample_sets) {
      ASSERT_TRUE(is_open_set(set.regime));
      const auto obs = form_observations(cluster_sample_set(set, cc));
      for (const auto& r : label_correctness(obs, {}, set.regime, UncertaintyKind::Entropy)) {
        ASSERT_EQ(r.correctness, Correctness::OpenSetError);
      }
    }
  });
}

TEST(SceneFile, ParsesExplicitScenes) {
  const auto file = parse_scene_file(R"({
    "seed": 9, "num_samples": 5, "num_classes": 3,
    "scenes": [
      {"image_id": "a", "regime": "closed", "clutter_rate": 0.5,
       "known": [{"box": [10, 10, 50, 60], "class": 2, "p_detect": 0.9, "jitter": 1.5, "concentration": 30}]},
      {"image_id": "b", "regime": "near",
       "unknown": [{"box": [0, 0, 20, 20], "confusion": [0.7, 0.3, 0.0]}]}
    ]})");
  EXPECT_EQ(file.config.seed, 9u);
  EXPECT_EQ(file.config.num_samples, 5);
  ASSERT_EQ(file.scenes.size(), 2u);
  EXPECT_EQ(file.scenes[0].known.at(0).class_label, 2u);
  EXPECT_DOUBLE_EQ(file.scenes[0].known[0].jitter, 1.5);
  EXPECT_DOUBLE_EQ(file.scenes[0].clutter_rate, 0.5);
  EXPECT_EQ(file.scenes[1].regime, Regime::NearOpenSet);
  EXPECT_DOUBLE_EQ(file.scenes[1].unknown.at(0).concentration, 5.0);
  const auto g = generate_corpus(file.scenes, file.config);
  EXPECT_EQ(g.corpus.sample_sets.size(), 2u);
}

TEST(SceneFile, ParsesRandomSection) {
  const auto file = parse_scene_file(R"({"seed": 3, "random": {"closed": 4, "near": 2, "distant": 1}})");
  ASSERT_EQ(file.scenes.size(), 7u);
  EXPECT_EQ(file.scenes[6].regime, Regime::DistantOpenSet);
}

TEST(SceneFile, RejectsBadInput) {
  for (const char* text : {"[]", "{", R"({"num_classes": 2, "scenes": [{"image_id": "a",
                           "known": [{"box": [0, 0, 5, 5], "class": 2}]}]})",
                           R"({"scenes": [{"image_id": "a", "known": [{"box": [5, 0, 5, 5], "class": 0}]}]})",
                           R"({"scenes": [{"known": []}]})"}) {
    try {
      parse_scene_file(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedInput) << text;
    }
  }
}
