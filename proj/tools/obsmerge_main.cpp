// obsmerge command line: generate synthetic corpora, run the experiment grid,
// plot reports and dump per-image clusters.

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "obsmerge/error.hpp"
#include "obsmerge/experiment.hpp"
#include "obsmerge/io.hpp"
#include "obsmerge/synthgen.hpp"

namespace fs = std::filesystem;
using namespace obsmerge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMalformed = 2;
constexpr int kExitPartial = 3;

struct GenerateArgs {
  std::string scenes;
  std::string out = ".";
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> seed_override;
  int closed = 100;
  int near = 50;
  int distant = 50;
  int samples = 20;
};

struct RunArgs {
  std::string corpus;
  std::string gt;
  std::string grid = "paper-default";
  std::string uncertainty = "both";
  std::string out = ".";
  int jobs = 1;
};

struct PlotArgs {
  std::string report;
  std::string spatial;
  std::string out = ".";
};

struct InspectArgs {
  std::string corpus;
  std::string image;
  std::string method = "bsas";
  std::string affinity = "iou";
  double theta = 0.95;
  std::string embedding = "centroid";
};

int do_generate(const GenerateArgs& a) {
  GenConfig config;
  std::vector<SceneSpec> scenes;
  if (!a.scenes.empty()) {
    SceneFile file = load_scene_file(a.scenes);
    config = file.config;
    if (a.seed_override) {
      config.seed = *a.seed_override;
      if (file.scenes.empty() || config.closed_scenes + config.near_scenes + config.distant_scenes > 0) {
        file.scenes = random_scenes(config);
      }
    }
    scenes = std::move(file.scenes);
  } else {
    config.seed = a.seed_override.value_or(a.seed);
    config.num_samples = a.samples;
    config.closed_scenes = a.closed;
    config.near_scenes = a.near;
    config.distant_scenes = a.distant;
    scenes = random_scenes(config);
  }
  const GeneratedCorpus g = generate_corpus(scenes, config);
  const fs::path out(a.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  write_corpus(g.corpus, out / "corpus.jsonl");
  write_ground_truth(g.ground_truth, out / "gt.jsonl");
  std::cout << fmt::format("wrote {} images, {} ground-truth objects to {}\n", g.corpus.sample_sets.size(),
                           g.ground_truth.size(), out.string());
  return kExitOk;
}

std::vector<UncertaintyKind> kinds_from(std::string_view s) {
  if (s == "both") return {UncertaintyKind::Entropy, UncertaintyKind::SpatialVariance};
  return {parse_uncertainty_kind(s)};
}

int do_run(const RunArgs& a) {
  const Corpus corpus = load_corpus(a.corpus);
  std::vector<GroundTruthObject> gts;
  if (!a.gt.empty()) gts = load_ground_truth(a.gt, corpus.manifest);
  const auto grid = load_grid(a.grid);
  GridOptions options;
  options.kinds = kinds_from(a.uncertainty);
  options.jobs = a.jobs;
  const GridResult result = run_grid(corpus, gts, grid, options);

  const fs::path out(a.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  write_report(result.rows, out / "report.csv");
  write_text_file(out / "spatial.csv", format_spatial_points(result.spatial));
  std::cout << fmt::format("{} cells, {} rows -> {}\n", grid.size(), result.rows.size(),
                           (out / "report.csv").string());
  for (const auto& f : result.failures) {
    std::cerr << fmt::format("cell '{}' failed: {}\n", f.cell, f.message);
  }
  return result.partial() ? kExitPartial : kExitOk;
}

int do_plot(const PlotArgs& a) {
  const auto rows = load_report(a.report);
  std::vector<SpatialPoint> points;
  if (!a.spatial.empty()) {
    std::ifstream in(a.spatial);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + a.spatial);
    points = parse_spatial_points(in);
  }
  for (const auto& p : emit_plots(rows, points, a.out)) std::cout << p.string() << '\n';
  return kExitOk;
}

int do_inspect(const InspectArgs& a) {
  const Corpus corpus = load_corpus(a.corpus);
  GridCell cell;
  if (a.method == "hdbscan") {
    cell = hdbscan_cell(parse_embedding_kind(a.embedding));
  } else if (a.method == "ssd") {
    cell = standard_detector_cell();
  } else if (a.method == "bsas") {
    cell = sequential_cell(SequentialMethod::BSAS, AffinityKind::parse(a.affinity), a.theta);
  } else if (a.method == "bsas_excl") {
    cell = sequential_cell(SequentialMethod::BSASExclusive, AffinityKind::parse(a.affinity), a.theta);
  } else if (a.method == "hungarian") {
    cell = sequential_cell(SequentialMethod::Hungarian, AffinityKind::parse(a.affinity), a.theta);
  } else {
    throw Error(ErrorCode::MalformedInput, "unknown method '" + a.method + "'");
  }
  bool found = false;
  for (const auto& set : corpus.sample_sets) {
    if (!a.image.empty() && set.image_id != a.image) continue;
    found = true;
    const auto obs = observe_image(set, cell);
    std::cout << fmt::format("{} [{}] {} samples, {} detections, {} observations ({})\n", set.image_id,
                             to_string(set.regime), set.num_samples(), set.num_detections(), obs.size(),
                             cell.label());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const auto& o = obs[i];
      std::cout << fmt::format(
          "  #{:<3} n={:<3} box=({:.1f},{:.1f},{:.1f},{:.1f}) label={} ({}) score={:.3f} H={:.4f} var={}\n", i,
          o.member_count, o.box.x1, o.box.y1, o.box.x2, o.box.y2, o.winning_label,
          o.winning_label < corpus.manifest.class_names.size() ? corpus.manifest.class_names[o.winning_label]
                                                                : "?",
          o.winning_score, o.entropy,
          o.spatial_variance ? fmt::format("{:.3f}", *o.spatial_variance) : std::string("-"));
    }
  }
  if (!found) throw Error(ErrorCode::MalformedInput, "image '" + a.image + "' not in corpus");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Merge MC-Dropout detection samples into observations and evaluate their uncertainty"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic corpus (corpus.jsonl, gt.jsonl)");
  g->add_option("--scenes", gen.scenes, "Scene configuration file (JSON)");
  g->add_option("--out", gen.out, "Output directory");
  g->add_option("--seed", gen.seed_override, "Seed (overrides the scene file)");
  g->add_option("--closed", gen.closed, "Random closed-set scenes")->capture_default_str();
  g->add_option("--near", gen.near, "Random near open-set scenes")->capture_default_str();
  g->add_option("--distant", gen.distant, "Random distant open-set scenes")->capture_default_str();
  g->add_option("--samples", gen.samples, "Forward passes per image")->capture_default_str();

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run the clustering grid and write report.csv and spatial.csv");
  r->add_option("--corpus", run.corpus, "Detection corpus")->required();
  r->add_option("--gt", run.gt, "Ground truth file");
  r->add_option("--grid", run.grid, "Grid file or paper-default")->capture_default_str();
  r->add_option("--uncertainty", run.uncertainty, "entropy, spatial or both")
      ->check(CLI::IsMember({"entropy", "spatial", "both"}))
      ->capture_default_str();
  r->add_option("--out", run.out, "Output directory");
  r->add_option("--jobs", run.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "Render SVG plots from a report");
  p->add_option("--report", plot.report, "report.csv from run")->required();
  p->add_option("--spatial", plot.spatial, "spatial.csv from run");
  p->add_option("--out", plot.out, "Output directory");

  InspectArgs ins;
  auto* i = app.add_subcommand("inspect", "Print the observations formed for each image");
  i->add_option("--corpus", ins.corpus, "Detection corpus")->required();
  i->add_option("--image", ins.image, "Only this image");
  i->add_option("--method", ins.method, "bsas, bsas_excl, hungarian, hdbscan or ssd")->capture_default_str();
  i->add_option("--affinity", ins.affinity, "Affinity name, e.g. iou+sl")->capture_default_str();
  i->add_option("--theta", ins.theta, "Threshold or Hungarian gate")->capture_default_str();
  i->add_option("--embedding", ins.embedding, "HDBSCAN embedding")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitMalformed;
  }

  try {
    if (*g) return do_generate(gen);
    if (*r) return do_run(run);
    if (*p) return do_plot(plot);
    if (*i) return do_inspect(ins);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::Io ? 1 : kExitMalformed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
