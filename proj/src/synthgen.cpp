#include "obsmerge/synthgen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "obsmerge/error.hpp"

namespace obsmerge {

namespace {

constexpr double kAlphaFloor = 0.05;
constexpr double kPoissonChunk = 30.0;
constexpr std::uint64_t kSceneStream = 0x5ce4e5eed0000001ULL;
constexpr std::uint64_t kLayoutStream = 0x1a7007000000002ULL;

const std::vector<std::string>& voc_names() {
  static const std::vector<std::string> names = {
      "aeroplane", "bicycle", "bird",  "boat",        "bottle", "bus",         "car",
      "cat",       "chair",   "cow",   "diningtable", "dog",    "horse",       "motorbike",
      "person",    "pottedplant", "sheep", "sofa",    "train",  "tvmonitor"};
  return names;
}

double quantize(double v) { return std::round(v * 1e4) / 1e4; }

double lerp(double a, double b, double t) { return a + (b - a) * t; }

std::vector<double> one_hot(std::size_t m, std::size_t k) {
  std::vector<double> v(m, 0.0);
  v[k] = 1.0;
  return v;
}

std::vector<double> draw_scores(Rng& rng, std::span<const double> profile, double concentration) {
  std::vector<double> alpha(profile.size() + 1, kAlphaFloor);
  for (std::size_t i = 0; i < profile.size(); ++i) alpha[i] += concentration * profile[i];
  std::vector<double> draw = rng.dirichlet(alpha);
  draw.pop_back();  // background mass stays implicit
  return draw;
}

std::optional<BoundingBox> jitter_box(Rng& rng, const BoundingBox& box, double sigma, double w, double h) {
  BoundingBox b = box;
  if (sigma > 0.0) {
    b.x1 = rng.normal(b.x1, sigma);
    b.y1 = rng.normal(b.y1, sigma);
    b.x2 = rng.normal(b.x2, sigma);
    b.y2 = rng.normal(b.y2, sigma);
  }
  b.x1 = quantize(std::clamp(b.x1, 0.0, w));
  b.x2 = quantize(std::clamp(b.x2, 0.0, w));
  b.y1 = quantize(std::clamp(b.y1, 0.0, h));
  b.y2 = quantize(std::clamp(b.y2, 0.0, h));
  if (!b.valid()) return std::nullopt;
  return b;
}

double half_diagonal(const BoundingBox& b) { return 0.5 * std::hypot(b.width(), b.height()); }

bool separated(const BoundingBox& a, double sigma_a, const BoundingBox& b, double sigma_b) {
  const double d = std::hypot(a.center_x() - b.center_x(), a.center_y() - b.center_y());
  return d > 4.0 * std::max(sigma_a, sigma_b) + half_diagonal(a) + half_diagonal(b);
}

std::vector<std::string> class_names_for(const GenConfig& config) {
  if (!config.class_names.empty()) return config.class_names;
  if (config.num_classes == 20) return voc_names();
  std::vector<std::string> names;
  for (int i = 0; i < config.num_classes; ++i) names.push_back(fmt::format("class_{:02d}", i));
  return names;
}

BoundingBox random_box(Rng& rng, const SceneProfile& p, double w, double h) {
  const double bw = std::min(rng.uniform(p.min_size, p.max_size), 0.9 * w);
  const double bh = std::min(rng.uniform(p.min_size, p.max_size), 0.9 * h);
  const double x = rng.uniform(0.0, w - bw);
  const double y = rng.uniform(0.0, h - bh);
  return {quantize(x), quantize(y), quantize(x + bw), quantize(y + bh)};
}

struct Placed {
  BoundingBox box;
  double sigma;
};

// Draws a box for a new object; with well_separated it must clear every
// already placed one. Gives up after a bounded number of attempts.
std::optional<BoundingBox> place(Rng& rng, const SceneProfile& p, double w, double h, double sigma,
                                 const std::vector<Placed>& placed) {
  constexpr int kAttempts = 200;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const BoundingBox b = random_box(rng, p, w, h);
    if (!p.well_separated) return b;
    const bool ok = std::all_of(placed.begin(), placed.end(),
                                [&](const Placed& o) { return separated(b, sigma, o.box, o.sigma); });
    if (ok) return b;
  }
  return std::nullopt;
}

KnownObjectSpec known_object(Rng& rng, const SceneProfile& p, std::size_t m, double difficulty) {
  KnownObjectSpec o;
  o.class_label = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(m) - 1));
  o.jitter = lerp(p.jitter_easy, p.jitter_hard, difficulty);
  o.concentration = std::exp(lerp(std::log(p.concentration_easy), std::log(p.concentration_hard), difficulty));
  o.p_detect = lerp(p.p_detect_easy, p.p_detect_hard, difficulty);
  if (m > 1 && rng.bernoulli(difficulty * p.confusion_probability)) {
    std::size_t confuser = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(m) - 2));
    if (confuser >= o.class_label) ++confuser;
    const double share = rng.uniform(0.3, 0.7);
    o.confusion.assign(m, 0.0);
    o.confusion[o.class_label] = 1.0 - share;
    o.confusion[confuser] = share;
  }
  return o;
}

SceneSpec closed_scene(Rng& rng, const GenConfig& config, const SceneProfile& p) {
  const auto m = static_cast<std::size_t>(config.num_classes);
  const double w = config.image_width;
  const double h = config.image_height;
  SceneSpec s;
  s.width = w;
  s.height = h;
  s.regime = Regime::ClosedSet;
  s.clutter_rate = p.clutter_rate;
  std::vector<Placed> placed;

  const int count = rng.uniform_int(p.min_objects, p.max_objects);
  for (int i = 0; i < count; ++i) {
    KnownObjectSpec o = known_object(rng, p, m, rng.uniform(p.min_difficulty, p.max_difficulty));
    const auto box = place(rng, p, w, h, o.jitter, placed);
    if (!box) continue;
    o.box = *box;
    placed.push_back({o.box, o.jitter});
    s.known.push_back(std::move(o));
  }

  for (int i = 0; i < p.overlap_pairs && m > 1; ++i) {
    const BoundingBox base = random_box(rng, p, w, h);
    KnownObjectSpec a = known_object(rng, p, m, rng.uniform(0.0, 0.2));
    a.confusion.clear();
    KnownObjectSpec b = a;
    std::size_t other = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(m) - 2));
    if (other >= a.class_label) ++other;
    b.class_label = other;
    a.box = base;
    // Shift the partner by at most 1% of the box size: IoU stays above ~0.96.
    const double dx = 0.01 * base.width() * rng.uniform(-1.0, 1.0);
    const double dy = 0.01 * base.height() * rng.uniform(-1.0, 1.0);
    b.box = {quantize(std::clamp(base.x1 + dx, 0.0, w)), quantize(std::clamp(base.y1 + dy, 0.0, h)),
             quantize(std::clamp(base.x2 + dx, 0.0, w)), quantize(std::clamp(base.y2 + dy, 0.0, h))};
    s.known.push_back(std::move(a));
    s.known.push_back(std::move(b));
  }

  if (p.crowd_size > 0) {
    const std::size_t label = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(m) - 1));
    const double bw = rng.uniform(p.min_size, p.max_size);
    const double bh = rng.uniform(p.min_size, p.max_size);
    // Neighbours overlap with IoU around 0.75.
    const double step = bw * rng.uniform(0.12, 0.16);
    const double span_w = bw + step * (p.crowd_size - 1);
    const double x0 = rng.uniform(0.0, std::max(0.0, w - span_w));
    const double y0 = rng.uniform(0.0, std::max(0.0, h - bh));
    for (int i = 0; i < p.crowd_size; ++i) {
      KnownObjectSpec o = known_object(rng, p, m, rng.uniform(p.min_difficulty, p.max_difficulty));
      o.class_label = label;
      o.confusion.clear();
      const double x = x0 + step * i;
      o.box = {quantize(std::min(x, w)), quantize(y0), quantize(std::min(x + bw, w)),
               quantize(std::min(y0 + bh, h))};
      if (o.box.valid()) s.known.push_back(std::move(o));
    }
  }
  return s;
}

SceneSpec open_scene(Rng& rng, const GenConfig& config, const SceneProfile& p, Regime regime) {
  const auto m = static_cast<std::size_t>(config.num_classes);
  const double w = config.image_width;
  const double h = config.image_height;
  SceneSpec s;
  s.width = w;
  s.height = h;
  s.regime = regime;
  s.clutter_rate = p.clutter_rate;
  std::vector<Placed> placed;

  const int count = rng.uniform_int(p.min_objects, p.max_objects);
  for (int i = 0; i < count; ++i) {
    const double d = rng.uniform(p.min_difficulty, p.max_difficulty);
    UnknownObjectSpec o;
    o.jitter = lerp(p.jitter_easy, p.jitter_hard, d);
    o.concentration = std::exp(lerp(std::log(p.concentration_easy), std::log(p.concentration_hard), d));
    o.p_detect = lerp(p.p_detect_easy, p.p_detect_hard, d);
    if (regime == Regime::NearOpenSet && m > 1) {
      // Masquerades as two plausible known classes, roughly 70/30.
      const std::size_t first = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(m) - 1));
      std::size_t second = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(m) - 2));
      if (second >= first) ++second;
      const double major = rng.uniform(0.65, 0.75);
      o.confusion.assign(m, 0.0);
      o.confusion[first] = major;
      o.confusion[second] = 1.0 - major;
    } else {
      // Near-uniform profile over every known class.
      std::vector<double> alpha(m, 20.0);
      o.confusion = rng.dirichlet(alpha);
    }
    const auto box = place(rng, p, w, h, o.jitter, placed);
    if (!box) continue;
    o.box = *box;
    placed.push_back({o.box, o.jitter});
    s.unknown.push_back(std::move(o));
  }
  return s;
}

// Uniform box for spurious detections.
BoundingBox clutter_box(Rng& rng, double w, double h) {
  const double bw = rng.uniform(0.05, 0.3) * w;
  const double bh = rng.uniform(0.05, 0.3) * h;
  const double x = rng.uniform(0.0, w - bw);
  const double y = rng.uniform(0.0, h - bh);
  return {quantize(x), quantize(y), quantize(x + bw), quantize(y + bh)};
}

BoundingBox parse_box(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::MalformedInput, "box must be [x1,y1,x2,y2]");
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw Error(ErrorCode::MalformedInput, "scene box is degenerate");
  return b;
}

}  // namespace

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

int Rng::uniform_int(int lo, int hi) {
  if (hi <= lo) return lo;
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(engine_() % span);
}

double Rng::normal(double mean, double stddev) {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape) {
  if (shape < 1.0) {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = normal(0.0, 1.0);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

int Rng::poisson(double rate) {
  int total = 0;
  while (rate > 0.0) {
    const double chunk = std::min(rate, kPoissonChunk);
    rate -= chunk;
    const double limit = std::exp(-chunk);
    double product = uniform();
    while (product > limit) {
      ++total;
      product *= uniform();
    }
  }
  return total;
}

std::vector<double> Rng::dirichlet(std::span<const double> alpha) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = gamma(alpha[i]);
    total += out[i];
  }
  if (!(total > 0.0)) {
    // Every gamma underflowed; fall back to the mean.
    double a = 0.0;
    for (double x : alpha) a += x;
    for (std::size_t i = 0; i < alpha.size(); ++i) out[i] = alpha[i] / a;
    return out;
  }
  for (double& x : out) x /= total;
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + kSceneStream));
}

SceneProfile SceneProfile::closed_default() { return {}; }

SceneProfile SceneProfile::near_default() {
  SceneProfile p;
  p.min_objects = 1;
  p.max_objects = 3;
  p.jitter_easy = 2.0;
  p.jitter_hard = 8.0;
  p.concentration_easy = 40.0;
  p.concentration_hard = 8.0;
  p.p_detect_easy = 0.95;
  p.p_detect_hard = 0.6;
  return p;
}

SceneProfile SceneProfile::distant_default() {
  SceneProfile p;
  p.min_objects = 1;
  p.max_objects = 3;
  p.jitter_easy = 3.0;
  p.jitter_hard = 10.0;
  p.concentration_easy = 8.0;
  p.concentration_hard = 2.0;
  p.p_detect_easy = 0.9;
  p.p_detect_hard = 0.5;
  return p;
}

std::vector<SceneSpec> random_scenes(const GenConfig& config) {
  if (config.num_classes < 1) throw Error(ErrorCode::MalformedInput, "num_classes must be positive");
  std::vector<SceneSpec> out;
  std::uint64_t index = 0;
  auto add = [&](int count, Regime regime, const SceneProfile& profile) {
    for (int i = 0; i < count; ++i, ++index) {
      Rng rng(scene_seed(config.seed ^ kLayoutStream, index));
      SceneSpec s = regime == Regime::ClosedSet ? closed_scene(rng, config, profile)
                                                : open_scene(rng, config, profile, regime);
      s.image_id = fmt::format("{}_{:05d}", to_string(regime), i);
      out.push_back(std::move(s));
    }
  };
  add(config.closed_scenes, Regime::ClosedSet, config.closed);
  add(config.near_scenes, Regime::NearOpenSet, config.near);
  add(config.distant_scenes, Regime::DistantOpenSet, config.distant);
  return out;
}

GeneratedCorpus generate_corpus(std::span<const SceneSpec> specs, const GenConfig& config) {
  if (config.num_samples < 1) throw Error(ErrorCode::MalformedInput, "num_samples must be at least 1");
  const auto m = static_cast<std::size_t>(config.num_classes);
  GeneratedCorpus out;
  out.corpus.manifest.name = config.corpus_name;
  out.corpus.manifest.class_names = class_names_for(config);
  if (out.corpus.manifest.class_names.size() != m) {
    throw Error(ErrorCode::MalformedInput, "class_names does not match num_classes");
  }
  const std::vector<double> uniform_profile(m, 1.0 / static_cast<double>(m));

  for (std::size_t idx = 0; idx < specs.size(); ++idx) {
    const SceneSpec& spec = specs[idx];
    if (is_open_set(spec.regime) && !spec.known.empty()) {
      throw Error(ErrorCode::MalformedInput, "open-set scene " + spec.image_id + " has known objects");
    }
    if (!is_open_set(spec.regime) && !spec.unknown.empty()) {
      throw Error(ErrorCode::MalformedInput, "closed-set scene " + spec.image_id + " has unknown objects");
    }
    Rng rng(scene_seed(config.seed, idx));
    SampleSet set;
    set.image_id = spec.image_id;
    set.image_width = spec.width;
    set.image_height = spec.height;
    set.regime = spec.regime;
    set.samples.resize(static_cast<std::size_t>(config.num_samples));

    for (int j = 0; j < config.num_samples; ++j) {
      auto& sample = set.samples[static_cast<std::size_t>(j)];
      auto emit = [&](const BoundingBox& box, double sigma, std::span<const double> profile,
                      double concentration) {
        const auto b = jitter_box(rng, box, sigma, spec.width, spec.height);
        auto scores = draw_scores(rng, profile, concentration);
        if (b) sample.push_back({*b, ScoreDistribution(std::move(scores)), j});
      };
      for (const auto& o : spec.known) {
        if (!rng.bernoulli(o.p_detect)) continue;
        if (o.confusion.empty()) {
          emit(o.box, o.jitter, one_hot(m, o.class_label), o.concentration);
        } else {
          emit(o.box, o.jitter, o.confusion, o.concentration);
        }
      }
      for (const auto& o : spec.unknown) {
        if (!rng.bernoulli(o.p_detect)) continue;
        emit(o.box, o.jitter, o.confusion, o.concentration);
      }
      const int clutter = rng.poisson(spec.clutter_rate);
      for (int c = 0; c < clutter; ++c) {
        emit(clutter_box(rng, spec.width, spec.height), 0.0, uniform_profile, 5.0);
      }
    }

    out.corpus.manifest.images.push_back(
        {spec.image_id, spec.width, spec.height, spec.regime, config.num_samples});
    out.corpus.sample_sets.push_back(validate_sample_set(std::move(set)));
    if (spec.regime == Regime::ClosedSet) {
      for (const auto& o : spec.known) out.ground_truth.push_back({spec.image_id, o.box, o.class_label});
    }
  }
  return out;
}

int expected_cluster_count(const SceneSpec& spec, const GenConfig& config) {
  std::vector<Placed> objects;
  std::vector<double> p_detect;
  for (const auto& o : spec.known) {
    objects.push_back({o.box, o.jitter});
    p_detect.push_back(o.p_detect);
  }
  for (const auto& o : spec.unknown) {
    objects.push_back({o.box, o.jitter});
    p_detect.push_back(o.p_detect);
  }
  for (std::size_t a = 0; a < objects.size(); ++a) {
    for (std::size_t b = a + 1; b < objects.size(); ++b) {
      if (!separated(objects[a].box, objects[a].sigma, objects[b].box, objects[b].sigma)) {
        throw Error(ErrorCode::OverlapAmbiguity,
                    fmt::format("objects {} and {} in {} are too close to separate", a, b, spec.image_id));
      }
    }
  }
  int count = 0;
  for (double p : p_detect) {
    if (p * config.num_samples >= 2.0) ++count;
  }
  return count;
}

SceneFile parse_scene_file(std::string_view text) {
  using nlohmann::json;
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::MalformedInput, "scene file must be a JSON object");
  }
  SceneFile file;
  GenConfig& c = file.config;
  try {
    c.seed = j.value("seed", std::uint64_t{0});
    c.num_samples = j.value("num_samples", 20);
    c.num_classes = j.value("num_classes", 20);
    c.corpus_name = j.value("name", std::string("synthetic"));
    c.image_width = j.value("image_width", 500.0);
    c.image_height = j.value("image_height", 375.0);
    if (j.contains("class_names")) c.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (j.contains("random")) {
      const json& r = j.at("random");
      c.closed_scenes = r.value("closed", 0);
      c.near_scenes = r.value("near", 0);
      c.distant_scenes = r.value("distant", 0);
      file.scenes = random_scenes(c);
    }
    if (j.contains("scenes")) {
      const auto m = static_cast<std::size_t>(c.num_classes);
      for (const json& sj : j.at("scenes")) {
        SceneSpec s;
        s.image_id = sj.at("image_id").get<std::string>();
        s.width = sj.value("width", c.image_width);
        s.height = sj.value("height", c.image_height);
        s.regime = parse_regime(sj.value("regime", std::string("closed")));
        s.clutter_rate = sj.value("clutter_rate", 0.0);
        for (const json& kj : sj.value("known", json::array())) {
          KnownObjectSpec o;
          o.box = parse_box(kj.at("box"));
          o.class_label = kj.at("class").get<std::size_t>();
          if (o.class_label >= m) throw Error(ErrorCode::MalformedInput, "known object class out of range");
          o.p_detect = kj.value("p_detect", 1.0);
          o.jitter = kj.value("jitter", 0.0);
          o.concentration = kj.value("concentration", 100.0);
          o.confusion = kj.value("confusion", std::vector<double>{});
          if (!o.confusion.empty() && o.confusion.size() != m) {
            throw Error(ErrorCode::MalformedInput, "confusion profile must have num_classes entries");
          }
          s.known.push_back(std::move(o));
        }
        for (const json& uj : sj.value("unknown", json::array())) {
          UnknownObjectSpec o;
          o.box = parse_box(uj.at("box"));
          o.confusion = uj.at("confusion").get<std::vector<double>>();
          if (o.confusion.size() != m) {
            throw Error(ErrorCode::MalformedInput, "confusion profile must have num_classes entries");
          }
          o.p_detect = uj.value("p_detect", 1.0);
          o.jitter = uj.value("jitter", 0.0);
          o.concentration = uj.value("concentration", 5.0);
          s.unknown.push_back(std::move(o));
        }
        file.scenes.push_back(std::move(s));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("scene file: ") + e.what());
  }
  return file;
}

SceneFile load_scene_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scene_file(ss.str());
}

}  // namespace obsmerge
