#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "obsmerge/io.hpp"
#include "obsmerge/metrics.hpp"
#include "obsmerge/types.hpp"

namespace obsmerge {

/// Seedable generator with a documented algorithm: std::mt19937_64 (whose
/// output sequence is fixed by the C++ standard) feeding hand-written
/// transforms, so no draw depends on the standard library's distribution
/// implementations.
///   uniform:   top 53 bits of one draw, scaled by 2^-53
///   normal:    Box-Muller, one normal per two uniforms
///   gamma:     Marsaglia-Tsang; shape < 1 via the U^(1/shape) boost
///   poisson:   Knuth's product method on chunks of rate <= 30
///   dirichlet: normalised gammas
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Integer in [lo, hi].
  int uniform_int(int lo, int hi);
  double normal(double mean, double stddev);
  double gamma(double shape);
  int poisson(double rate);
  std::vector<double> dirichlet(std::span<const double> alpha);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
/// Seed for scene `index` derived from the corpus seed.
std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t index);

struct KnownObjectSpec {
  BoundingBox box;
  std::size_t class_label = 0;
  double p_detect = 1.0;
  /// Standard deviation of the per-coordinate Gaussian box noise, pixels.
  double jitter = 0.0;
  /// Dirichlet concentration; larger means peakier scores.
  double concentration = 100.0;
  /// Optional class profile the scores concentrate on; one-hot on
  /// class_label when empty.
  std::vector<double> confusion;
};

struct UnknownObjectSpec {
  BoundingBox box;
  /// Known classes the object masquerades as; sums to 1.
  std::vector<double> confusion;
  double p_detect = 1.0;
  double jitter = 0.0;
  double concentration = 5.0;
};

struct SceneSpec {
  std::string image_id;
  double width = 500.0;
  double height = 375.0;
  Regime regime = Regime::ClosedSet;
  std::vector<KnownObjectSpec> known;
  std::vector<UnknownObjectSpec> unknown;
  /// Expected spurious detections per sample.
  double clutter_rate = 0.0;
};

/// Ranges used to draw random scenes for one regime. Known objects get a
/// difficulty d in [min_difficulty, max_difficulty]; jitter, concentration
/// and detectability interpolate between their easy and hard values, and a
/// hard object's scores may split between its class and a confuser.
struct SceneProfile {
  int min_objects = 1;
  int max_objects = 4;
  double min_size = 40.0;
  double max_size = 160.0;
  double min_difficulty = 0.0;
  double max_difficulty = 1.0;
  double jitter_easy = 1.0;
  double jitter_hard = 8.0;
  double concentration_easy = 60.0;
  double concentration_hard = 4.0;
  double p_detect_easy = 1.0;
  double p_detect_hard = 0.6;
  /// Probability (scaled by difficulty) that a known object's scores split
  /// between its class and a confuser.
  double confusion_probability = 0.6;
  double clutter_rate = 0.1;
  /// Place objects so that expected_cluster_count's separation precondition
  /// holds.
  bool well_separated = false;
  /// Pairs of distinct-class known objects sharing nearly the same box.
  int overlap_pairs = 0;
  /// Same-class known objects placed in an overlapping row.
  int crowd_size = 0;

  static SceneProfile closed_default();
  static SceneProfile near_default();
  static SceneProfile distant_default();
};

struct GenConfig {
  std::uint64_t seed = 0;
  int num_samples = 20;
  int num_classes = 20;
  std::vector<std::string> class_names;  ///< empty: generated names
  std::string corpus_name = "synthetic";
  double image_width = 500.0;
  double image_height = 375.0;
  int closed_scenes = 0;
  int near_scenes = 0;
  int distant_scenes = 0;
  SceneProfile closed = SceneProfile::closed_default();
  SceneProfile near = SceneProfile::near_default();
  SceneProfile distant = SceneProfile::distant_default();
};

struct GeneratedCorpus {
  Corpus corpus;
  std::vector<GroundTruthObject> ground_truth;
};

/// Draws closed_scenes + near_scenes + distant_scenes scene specs from the
/// profiles. Deterministic in config.seed.
std::vector<SceneSpec> random_scenes(const GenConfig& config);

/// Per scene and sample: every object fires with probability p_detect,
/// coordinates get independent N(0, jitter) noise (clamped, rounded to 1e-4),
/// scores are a Dirichlet draw over the known classes plus background with
/// alpha = concentration * profile + 0.05. Clutter is Poisson(clutter_rate)
/// uniform boxes with near-uniform scores. Scenes use derived seeds, so the
/// output only depends on config.seed and the specs.
GeneratedCorpus generate_corpus(std::span<const SceneSpec> specs, const GenConfig& config);

/// Number of objects expected to yield at least two detections
/// (p_detect * n >= 2). Throws Error(OverlapAmbiguity) when two objects'
/// centers are closer than 4 * max jitter + half the sum of their diagonals.
int expected_cluster_count(const SceneSpec& spec, const GenConfig& config);

/// Scene configuration file (JSON). Either explicit scenes
///   {"seed":1,"num_samples":20,"num_classes":20,
///    "scenes":[{"image_id":"a","width":500,"height":375,"regime":"closed",
///               "clutter_rate":0.1,
///               "known":[{"box":[x1,y1,x2,y2],"class":3,"p_detect":0.95,
///                         "jitter":2,"concentration":50,"confusion":[...]}],
///               "unknown":[{"box":[...],"confusion":[...],"p_detect":0.9,
///                           "jitter":4,"concentration":5}]}]}
/// or random scenes {"random":{"closed":100,"near":50,"distant":50}}; both
/// forms accept the GenConfig scalars at top level.
struct SceneFile {
  GenConfig config;
  std::vector<SceneSpec> scenes;
};
SceneFile parse_scene_file(std::string_view text);
SceneFile load_scene_file(const std::filesystem::path& path);

}  // namespace obsmerge
