#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "obsmerge/metrics.hpp"
#include "obsmerge/types.hpp"

namespace obsmerge {

// Detection corpus (UTF-8, one JSON value per line):
//   line 1   {"format":"obsmerge-corpus","version":1,"name":...,"num_classes":m,
//             "class_names":[...],
//             "images":[{"image_id":...,"width":W,"height":H,
//                        "regime":"closed|near|distant","num_samples":n}, ...]}
//   line 2.. [image_id, sample_index, x1, y1, x2, y2, s_1, ..., s_m]
// Box coordinates are written with four fractional digits.
//
// Ground truth (one JSON array per line):
//   [image_id, class_index, x1, y1, x2, y2]

inline constexpr std::string_view kCorpusFormat = "obsmerge-corpus";
inline constexpr int kCorpusVersion = 1;

struct ImageEntry {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  Regime regime = Regime::ClosedSet;
  int num_samples = 1;

  friend bool operator==(const ImageEntry&, const ImageEntry&) = default;
};

struct CorpusManifest {
  std::string name;
  std::vector<std::string> class_names;
  std::vector<ImageEntry> images;

  std::size_t num_classes() const { return class_names.size(); }
  const ImageEntry* find(std::string_view image_id) const;

  friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

struct Corpus {
  CorpusManifest manifest;
  /// One per manifest image, in manifest order.
  std::vector<SampleSet> sample_sets;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Throws Error(MalformedInput) with a line number, Error(UnknownRegime) for
/// a bad regime string. Every returned SampleSet has passed
/// validate_sample_set.
Corpus parse_corpus(std::istream& in, std::string_view source = "<stream>");
Corpus load_corpus(const std::filesystem::path& path);
std::string format_corpus(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Labels must be below the manifest's class count and open-set images may
/// not carry ground truth. Records for images missing from the manifest are
/// rejected.
std::vector<GroundTruthObject> parse_ground_truth(std::istream& in, const CorpusManifest& manifest,
                                                  std::string_view source = "<stream>");
std::vector<GroundTruthObject> load_ground_truth(const std::filesystem::path& path,
                                                 const CorpusManifest& manifest);
std::string format_ground_truth(const std::vector<GroundTruthObject>& gts);
void write_ground_truth(const std::vector<GroundTruthObject>& gts, const std::filesystem::path& path);

/// One line of the experiment report.
struct ReportRow {
  std::string method;
  std::string affinity;
  std::optional<double> theta;
  std::string dataset_regimes;
  std::string uncertainty_kind;
  double map = 0.0;
  double ue_min = 0.0;
  double delta_star = 0.0;
  double auroc = 0.0;
  double aupr_in = 0.0;
  double aupr_out = 0.0;
  long n_correct = 0;
  long n_closed_err = 0;
  long n_open_err = 0;
};

inline constexpr std::string_view kReportHeader =
    "method,affinity,theta,dataset_regimes,uncertainty_kind,map,ue_min,delta_star,auroc,"
    "aupr_in,aupr_out,n_correct,n_closed_err,n_open_err";

/// Sorts rows by (method, affinity, theta, dataset_regimes, uncertainty_kind)
/// and renders the CSV: six decimals, empty theta when not applicable, "nan"
/// for undefined metrics.
std::string format_report(std::vector<ReportRow> rows);
void write_report(const std::vector<ReportRow>& rows, const std::filesystem::path& path);
std::vector<ReportRow> parse_report(std::istream& in);
std::vector<ReportRow> load_report(const std::filesystem::path& path);

/// Writes `content` to `path`, surfacing failures as Error(Io).
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace obsmerge
