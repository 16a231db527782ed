#include "obsmerge/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "obsmerge/error.hpp"

namespace obsmerge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::UnknownRegime: return "UnknownRegime";
    case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::InsufficientMembers: return "InsufficientMembers";
    case ErrorCode::NotSingleSample: return "NotSingleSample";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::OverlapAmbiguity: return "OverlapAmbiguity";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

bool BoundingBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
         std::isfinite(y2) && x1 < x2 && y1 < y2;
}

double ScoreDistribution::sum() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0);
}

std::size_t ScoreDistribution::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values_.size(); ++i) {
    if (values_[i] > values_[best]) best = i;
  }
  return best;
}

double ScoreDistribution::max() const {
  return values_.empty() ? 0.0 : values_[argmax()];
}

bool ScoreDistribution::valid() const {
  if (values_.empty()) return false;
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
  }
  return sum() <= 1.0 + kScoreSumTolerance;
}

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::ClosedSet: return "closed";
    case Regime::NearOpenSet: return "near";
    case Regime::DistantOpenSet: return "distant";
  }
  return "closed";
}

Regime parse_regime(std::string_view text) {
  if (text == "closed" || text == "ClosedSet") return Regime::ClosedSet;
  if (text == "near" || text == "NearOpenSet") return Regime::NearOpenSet;
  if (text == "distant" || text == "DistantOpenSet") return Regime::DistantOpenSet;
  throw Error(ErrorCode::UnknownRegime, "unknown regime '" + std::string(text) + "'");
}

std::size_t SampleSet::num_detections() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.size();
  return n;
}

std::optional<std::size_t> SampleSet::num_classes() const {
  for (const auto& s : samples) {
    if (!s.empty()) return s.front().scores.size();
  }
  return std::nullopt;
}

std::vector<Detection> SampleSet::flatten() const {
  std::vector<Detection> out;
  out.reserve(num_detections());
  for (const auto& s : samples) out.insert(out.end(), s.begin(), s.end());
  return out;
}

bool canonical_less(const Detection& a, const Detection& b) {
  if (a.sample_index != b.sample_index) return a.sample_index < b.sample_index;
  const double sa = a.winning_score();
  const double sb = b.winning_score();
  if (sa != sb) return sa > sb;
  return std::tie(a.box.x1, a.box.y1, a.box.x2, a.box.y2) <
         std::tie(b.box.x1, b.box.y1, b.box.x2, b.box.y2);
}

std::vector<Detection> canonical_order(std::vector<Detection> detections) {
  std::stable_sort(detections.begin(), detections.end(), canonical_less);
  return detections;
}

SampleSet validate_sample_set(SampleSet raw) {
  if (!(raw.image_width > 0.0) || !(raw.image_height > 0.0) ||
      !std::isfinite(raw.image_width) || !std::isfinite(raw.image_height)) {
    throw Error(ErrorCode::MalformedInput,
                "image '" + raw.image_id + "' has non-positive dimensions");
  }
  if (raw.samples.empty()) {
    throw Error(ErrorCode::MalformedInput, "image '" + raw.image_id + "' has no samples");
  }

  std::optional<std::size_t> classes;
  for (const auto& sample : raw.samples) {
    for (const auto& det : sample) {
      if (!classes) {
        classes = det.scores.size();
      } else if (*classes != det.scores.size()) {
        throw Error(ErrorCode::MalformedInput,
                    "image '" + raw.image_id + "' mixes class counts " +
                        std::to_string(*classes) + " and " +
                        std::to_string(det.scores.size()));
      }
    }
  }

  SampleSet out;
  out.image_id = std::move(raw.image_id);
  out.image_width = raw.image_width;
  out.image_height = raw.image_height;
  out.regime = raw.regime;
  out.samples.resize(raw.samples.size());
  for (std::size_t j = 0; j < raw.samples.size(); ++j) {
    for (auto& det : raw.samples[j]) {
      BoundingBox& b = det.box;
      if (std::isnan(b.x1) || std::isnan(b.y1) || std::isnan(b.x2) || std::isnan(b.y2)) continue;
      b.x1 = std::clamp(b.x1, 0.0, out.image_width);
      b.x2 = std::clamp(b.x2, 0.0, out.image_width);
      b.y1 = std::clamp(b.y1, 0.0, out.image_height);
      b.y2 = std::clamp(b.y2, 0.0, out.image_height);
      if (!b.valid()) continue;
      if (!det.scores.valid() || !(det.scores.max() > 0.0)) continue;
      det.sample_index = static_cast<int>(j);
      out.samples[j].push_back(std::move(det));
    }
  }
  return out;
}

}  // namespace obsmerge
