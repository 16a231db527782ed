#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace obsmerge {

/// Axis-aligned box in pixel coordinates, (x1, y1) top-left, (x2, y2)
/// bottom-right. Coordinates are real-valued because merged boxes are means.
struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  /// Finite coordinates with strictly positive width and height.
  bool valid() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Softmax scores over the m known classes. Background mass is not stored;
/// it is implicitly 1 - sum().
class ScoreDistribution {
 public:
  ScoreDistribution() = default;
  explicit ScoreDistribution(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  double sum() const;
  /// Index of the maximum entry, lowest index on ties.
  std::size_t argmax() const;
  double max() const;

  /// Every entry finite and in [0, 1], total at most 1 + 1e-6.
  bool valid() const;

  friend bool operator==(const ScoreDistribution&, const ScoreDistribution&) = default;

 private:
  std::vector<double> values_;
};

inline constexpr double kScoreSumTolerance = 1e-6;

struct Detection {
  BoundingBox box;
  ScoreDistribution scores;
  int sample_index = 0;

  std::size_t winning_label() const { return scores.argmax(); }
  double winning_score() const { return scores.max(); }

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class Regime { ClosedSet, NearOpenSet, DistantOpenSet };

std::string_view to_string(Regime regime);
/// Accepts "closed", "near", "distant" (and the CamelCase enum names).
/// Throws Error(UnknownRegime).
Regime parse_regime(std::string_view text);
inline bool is_open_set(Regime r) { return r != Regime::ClosedSet; }

/// All detections of one image: samples[j] holds the output of forward
/// pass j.
struct SampleSet {
  std::string image_id;
  double image_width = 0.0;
  double image_height = 0.0;
  Regime regime = Regime::ClosedSet;
  std::vector<std::vector<Detection>> samples;

  std::size_t num_samples() const { return samples.size(); }
  std::size_t num_detections() const;
  /// Class count of the first detection, nullopt when there are none.
  std::optional<std::size_t> num_classes() const;
  /// Detections of every sample, concatenated in sample order.
  std::vector<Detection> flatten() const;

  friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

/// Merged cluster of detections. spatial_variance is absent only for the
/// single-pass baseline where an observation has one member.
struct Observation {
  BoundingBox box;
  ScoreDistribution scores;
  int member_count = 0;
  double entropy = 0.0;
  std::optional<double> spatial_variance;
  double variance_x = 0.0;
  double variance_y = 0.0;
  std::size_t winning_label = 0;
  double winning_score = 0.0;
};

/// Ascending sample_index, then descending winning score, then
/// lexicographic (x1, y1, x2, y2). Stable.
std::vector<Detection> canonical_order(std::vector<Detection> detections);
bool canonical_less(const Detection& a, const Detection& b);

/// Clamps boxes to the image, drops degenerate boxes and invalid score
/// vectors, and rewrites sample indices to match their enclosing sample.
/// Throws Error(MalformedInput) for non-positive image dimensions, an empty
/// sample list, or inconsistent class counts.
SampleSet validate_sample_set(SampleSet raw);

}  // namespace obsmerge
