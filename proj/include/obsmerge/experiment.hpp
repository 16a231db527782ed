#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "obsmerge/clustering.hpp"
#include "obsmerge/hdbscan.hpp"
#include "obsmerge/io.hpp"
#include "obsmerge/metrics.hpp"
#include "obsmerge/observation.hpp"

namespace obsmerge {

enum class CellKind {
  Sequential,   ///< BSAS, BSAS-exclusive or Hungarian
  Hdbscan,
  Passthrough,  ///< single forward pass, no sampling
};

/// One configuration of the experiment grid.
struct GridCell {
  std::string method;    ///< report label: bsas, bsas_excl, hungarian, hdbscan, ssd, bsas_baseline
  std::string affinity;  ///< affinity name, embedding name for hdbscan, empty for ssd
  std::optional<double> theta;
  CellKind kind = CellKind::Sequential;
  ClusterConfig cluster;
  EmbeddingKind embedding = EmbeddingKind::Centroid;
  std::optional<HdbscanConfig> hdbscan;  ///< per-image defaults when absent

  std::string label() const;
};

GridCell sequential_cell(SequentialMethod method, AffinityKind affinity, double theta);
GridCell hdbscan_cell(EmbeddingKind embedding);
GridCell standard_detector_cell();
GridCell bsas_baseline_cell();

/// BSAS and BSAS-exclusive over theta {0.7, 0.8, 0.9, 0.95} x {iou, iou+sl,
/// iou+kl}; Hungarian over {iou, pac, eac} x {none, sl, kl} gated at 0.5;
/// HDBSCAN over the three embeddings; the single-pass detector and the
/// BSAS IoU 0.95 baseline. 38 cells.
std::vector<GridCell> paper_default_grid();

inline constexpr double kHungarianDefaultGate = 0.5;

/// Grid file (JSON):
///   {"cells":[{"method":"bsas","affinity":"iou+sl","theta":0.9},
///             {"method":"hungarian","affinity":"pac+kl","gate":0.5},
///             {"method":"hdbscan","embedding":"corner","min_cluster_size":5,"min_samples":1},
///             {"method":"ssd"},{"method":"bsas_baseline"}]}
/// Throws Error(MalformedInput) for structural problems; out-of-range
/// parameters surface as a failure of that cell in run_grid.
std::vector<GridCell> parse_grid(std::string_view text);
/// "paper-default" or a path to a grid file.
std::vector<GridCell> load_grid(std::string_view spec);

struct RegimeUnion {
  std::string name;
  std::vector<Regime> regimes;

  bool contains(Regime r) const;
};

/// closed, closed+distant, closed+near, all.
const std::vector<RegimeUnion>& regime_unions();

/// Observations of one image under one grid cell.
struct ImageObservations {
  std::string image_id;
  Regime regime = Regime::ClosedSet;
  std::vector<Observation> observations;
};

/// Clusters every image of the corpus and forms its observations.
std::vector<ImageObservations> run_cell(const Corpus& corpus, const GridCell& cell);
std::vector<Observation> observe_image(const SampleSet& sample_set, const GridCell& cell);

/// Scores one cell on one regime union. Metrics use the observations that
/// carry the requested uncertainty; they are NaN when either the correct or
/// the incorrect group is empty. mAP is computed over the observations
/// accepted at delta*, or over all observations when delta* is undefined.
ReportRow evaluate_union(const GridCell& cell, std::span<const ImageObservations> images,
                         std::span<const GroundTruthObject> ground_truth, const RegimeUnion& regimes,
                         UncertaintyKind kind);

/// Total variance of one observation paired with its localisation accuracy.
struct SpatialPoint {
  std::string cell;
  std::string image_id;
  double gt_iou = 0.0;
  double total_variance = 0.0;
};

struct CellFailure {
  std::string cell;
  std::string message;
};

struct GridOptions {
  std::vector<UncertaintyKind> kinds{UncertaintyKind::Entropy, UncertaintyKind::SpatialVariance};
  int jobs = 1;
};

struct GridResult {
  std::vector<ReportRow> rows;
  std::vector<SpatialPoint> spatial;
  std::vector<CellFailure> failures;

  bool partial() const { return !failures.empty(); }
};

/// Runs every cell (in parallel up to options.jobs) and every regime union.
/// A cell that throws is recorded in failures and skipped. Output order does
/// not depend on the thread count. Throws Error(EmptyCorpus) when the corpus
/// has no images.
GridResult run_grid(const Corpus& corpus, std::span<const GroundTruthObject> ground_truth,
                    std::span<const GridCell> cells, const GridOptions& options = {});

/// cell,image_id,gt_iou,total_variance
std::string format_spatial_points(std::span<const SpatialPoint> points);
std::vector<SpatialPoint> parse_spatial_points(std::istream& in);

/// Writes scatter_<union>_<kind>.svg (mAP against min-UE, one point per row)
/// for every union and kind present in rows, and, when points are given,
/// spatial_variance.svg (log10 total variance of observations with
/// GT-IoU >= 0.7 against those with GT-IoU <= 0.3, per cell). Returns the
/// written paths.
std::vector<std::filesystem::path> emit_plots(std::span<const ReportRow> rows,
                                              std::span<const SpatialPoint> points,
                                              const std::filesystem::path& out_dir);

std::string render_scatter_svg(std::span<const ReportRow> rows, std::string_view title);
std::string render_variance_svg(std::span<const SpatialPoint> points);

}  // namespace obsmerge
