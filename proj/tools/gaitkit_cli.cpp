// gaitkit command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gaitkit/gaitkit.hpp"

namespace {

using namespace gaitkit;

constexpr int kExitData = 2;

PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

bool keep_run(const TrackletRecord& r, const std::vector<std::int64_t>& runs) {
  if (runs.empty()) return true;
  return r.run && std::find(runs.begin(), runs.end(), *r.run) != runs.end();
}

std::vector<TrackletRecord> select_runs(std::vector<TrackletRecord> records, const std::vector<std::int64_t>& runs) {
  std::erase_if(records, [&](const TrackletRecord& r) { return !keep_run(r, runs); });
  return records;
}

json pose_frames(const NormalizedSequence& ns) {
  json frames = json::array();
  for (const auto& pose : ns.frames) {
    json joints = json::array();
    for (const auto& p : pose) joints.push_back(json::array({p.x, p.y}));
    frames.push_back(std::move(joints));
  }
  return frames;
}

struct Options {
  std::uint64_t seed = 7;
  std::string in;
  std::string out;
  std::string config;
  std::string poses;
  std::string report;
  std::string hist_out;
  std::string loss_curve;
  std::string model;
  std::string gallery;
  std::string probe;
  std::string nearest_out;
  std::string camera = "cam0";
  double fps = 24.0;
  std::size_t bin_width = 24;
  std::size_t ids = 32;
  std::size_t runs_per_id = 4;
  std::size_t frames = 108;
  std::int64_t track = 0;
  std::vector<std::int64_t> runs;
  bool benchmark = false;
};

int cmd_ingest(const Options& o) {
  auto cfg = config_or_default(o.config);
  cfg.tracking.fps = o.fps;
  cfg.tracking.camera = o.camera;
  const auto ingested = ingest(o.poses);
  const auto tracks = track_stream(ingested.frames, cfg.tracking);
  std::vector<TrackletRecord> records;
  for (const auto& t : tracks) records.push_back({t, std::nullopt, std::nullopt});
  write_tracklets(o.out, records);
  std::cerr << "ingest: " << ingested.records << " records, " << ingested.skipped << " skipped, "
            << ingested.frames.size() << " frames, " << records.size() << " tracklets\n";
  return 0;
}

int cmd_filter(const Options& o) {
  const auto cfg = config_or_default(o.config);
  const auto records = read_tracklets(o.in);
  std::vector<Tracklet> tracks;
  for (const auto& r : records) tracks.push_back(r.tracklet);
  const auto report = run_filters(tracks, cfg.filter);
  std::vector<TrackletRecord> admitted;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (report.verdicts[i].passed) admitted.push_back(records[i]);
  write_tracklets(o.out, admitted);
  if (!o.report.empty()) {
    auto os = detail::open_out(o.report);
    write_filter_report(os, report);
  }
  std::cerr << "filter: " << report.passed << " of " << report.total() << " admitted\n";
  return 0;
}

int cmd_stats(const Options& o) {
  const auto records = read_tracklets(o.in);
  std::vector<Tracklet> tracks;
  for (const auto& r : records) tracks.push_back(r.tracklet);
  const auto stats = dataset_stats(tracks, o.fps, o.bin_width);
  if (!o.hist_out.empty()) {
    auto os = detail::open_out(o.hist_out);
    write_histogram_csv(os, stats);
  }
  const auto text = to_json(stats).dump();
  if (!o.out.empty()) {
    auto os = detail::open_out(o.out);
    os << text << '\n';
  }
  std::cout << text << '\n';
  return 0;
}

SequenceStore normalized_store(const std::vector<TrackletRecord>& records) {
  SequenceStore store;
  for (const auto& r : records) store.push_back({r.identity(), normalize_tracklet(r.tracklet)});
  return store;
}

int cmd_train(const Options& o) {
  auto cfg = config_or_default(o.config);
  cfg.train.seed = o.seed;
  const auto records = select_runs(read_tracklets(o.in), o.runs);
  const auto store = normalized_store(records);
  const auto graph = build_graph(GraphConfig::coco17());
  const auto result = train(store, graph, cfg.model, cfg.augment, cfg.train);
  save_checkpoint(o.out, result.params);
  if (!o.loss_curve.empty()) {
    auto os = detail::open_out(o.loss_curve);
    write_loss_csv(os, result.loss_curve);
  }
  std::cerr << "train: " << result.loss_curve.size() << " steps on " << store.size() << " sequences, final loss "
            << (result.loss_curve.empty() ? 0.0 : result.loss_curve.back()) << '\n';
  return 0;
}

int cmd_embed(const Options& o) {
  const auto params = load_checkpoint(o.model);
  const auto records = select_runs(read_tracklets(o.in), o.runs);
  const auto store = normalized_store(records);
  const auto graph = build_graph(GraphConfig::coco17());
  const auto table = embed_store(params, graph, store);
  std::vector<EmbeddingRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    EmbeddingRecord e{records[i].tracklet.track_id, records[i].identity(), records[i].run, {}};
    for (Eigen::Index d = 0; d < table.cols(); ++d)
      e.embedding.push_back(static_cast<double>(table(static_cast<Eigen::Index>(i), d)));
    out.push_back(std::move(e));
  }
  auto os = detail::open_out(o.out);
  write_embeddings(os, out);
  return 0;
}

int cmd_eval(const Options& o) {
  auto gis = detail::open_in(o.gallery);
  auto pis = detail::open_in(o.probe);
  const auto gallery = to_embeddings(read_embeddings(gis, o.gallery));
  const auto probe = to_embeddings(read_embeddings(pis, o.probe));
  const auto result = evaluate_retrieval(gallery, probe);
  auto os = detail::open_out(o.out);
  write_metrics_csv(os, result, gallery.size(), probe.size());
  if (!o.nearest_out.empty()) {
    auto ns = detail::open_out(o.nearest_out);
    ns << "probe,probe_label,nearest_gallery,gallery_label,similarity\n";
    for (const auto& m : result.nearest)
      ns << m.probe << ',' << m.probe_label << ',' << m.nearest_gallery << ',' << m.gallery_label << ','
         << format_double(m.similarity) << '\n';
  }
  std::cout << "rank1=" << result.rank1 << " rank5=" << result.rank5 << '\n';
  return 0;
}

int cmd_synth(const Options& o) {
  SynthConfig sc = o.benchmark ? SynthConfig::benchmark() : SynthConfig{};
  sc.fps = o.fps;
  const auto tracks = generate_synthetic_walkers(o.ids, o.runs_per_id, o.frames, o.seed, sc);
  std::vector<TrackletRecord> records;
  for (const auto& t : tracks) records.push_back({t.tracklet, t.label, static_cast<std::int64_t>(t.run)});
  write_tracklets(o.out, records);
  return 0;
}

int cmd_augment_preview(const Options& o) {
  const auto cfg = config_or_default(o.config);
  const auto records = read_tracklets(o.in);
  const auto it = std::find_if(records.begin(), records.end(),
                               [&](const TrackletRecord& r) { return r.tracklet.track_id == o.track; });
  require(it != records.end(), ErrorCode::InvalidArgument, "track " + std::to_string(o.track) + " not found");
  const auto ns = normalize_tracklet(it->tracklet);
  Rng rng(o.seed, static_cast<std::uint64_t>(o.track));
  const auto [a, b] = make_views(ns, cfg.augment, rng);
  auto os = detail::open_out(o.out);
  os << json{{"kind", "original"}, {"track_id", o.track}, {"frames", pose_frames(ns)}}.dump() << '\n';
  os << json{{"kind", "view_a"}, {"track_id", o.track}, {"frames", pose_frames(a)}}.dump() << '\n';
  os << json{{"kind", "view_b"}, {"track_id", o.track}, {"frames", pose_frames(b)}}.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gaitkit: pose tracklets to gait embeddings"};
  app.require_subcommand(1);
  Options o;

  auto seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Seed for all randomness")->capture_default_str(); };

  auto* ingest_cmd = app.add_subcommand("ingest", "Group pose records into frames and track them");
  ingest_cmd->add_option("--poses", o.poses, "JSON array of pose records")->required();
  ingest_cmd->add_option("--fps", o.fps, "Frame rate of the source stream")->capture_default_str();
  ingest_cmd->add_option("--camera", o.camera, "Camera name stored on tracklets")->capture_default_str();
  ingest_cmd->add_option("--config", o.config, "Pipeline TOML config");
  ingest_cmd->add_option("--out", o.out, "Output tracklets (JSONL)")->required();
  seed(ingest_cmd);

  auto* filter_cmd = app.add_subcommand("filter", "Apply the tracklet admission filters");
  filter_cmd->add_option("--in", o.in, "Input tracklets (JSONL)")->required();
  filter_cmd->add_option("--config", o.config, "Pipeline TOML config");
  filter_cmd->add_option("--out", o.out, "Admitted tracklets (JSONL)")->required();
  filter_cmd->add_option("--report", o.report, "Per-tracklet verdicts (JSONL)");
  seed(filter_cmd);

  auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics and track-duration histogram");
  stats_cmd->add_option("--in", o.in, "Tracklets (JSONL)")->required();
  stats_cmd->add_option("--fps", o.fps, "Frame rate used for durations")->capture_default_str();
  stats_cmd->add_option("--bin-width", o.bin_width, "Histogram bin width in frames")->capture_default_str();
  stats_cmd->add_option("--hist-out", o.hist_out, "Histogram CSV");
  stats_cmd->add_option("--out", o.out, "Statistics JSON");
  seed(stats_cmd);

  auto* train_cmd = app.add_subcommand("train", "Train the embedding network");
  train_cmd->add_option("--in", o.in, "Admitted tracklets (JSONL)")->required();
  train_cmd->add_option("--config", o.config, "Pipeline TOML config");
  train_cmd->add_option("--out", o.out, "Model checkpoint")->required();
  train_cmd->add_option("--loss-curve", o.loss_curve, "Loss curve CSV");
  train_cmd->add_option("--runs", o.runs, "Only use records with these run numbers")->delimiter(',');
  seed(train_cmd);

  auto* embed_cmd = app.add_subcommand("embed", "Embed tracklets with a trained model");
  embed_cmd->add_option("--model", o.model, "Model checkpoint")->required();
  embed_cmd->add_option("--in", o.in, "Tracklets (JSONL)")->required();
  embed_cmd->add_option("--out", o.out, "Embeddings (JSONL)")->required();
  embed_cmd->add_option("--runs", o.runs, "Only embed records with these run numbers")->delimiter(',');
  seed(embed_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Rank-1 / rank-5 retrieval of probes against a gallery");
  eval_cmd->add_option("--gallery", o.gallery, "Gallery embeddings (JSONL)")->required();
  eval_cmd->add_option("--probe", o.probe, "Probe embeddings (JSONL)")->required();
  eval_cmd->add_option("--out", o.out, "Metrics CSV")->required();
  eval_cmd->add_option("--nearest-out", o.nearest_out, "Per-probe nearest gallery CSV");
  seed(eval_cmd);

  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic labelled walkers");
  synth_cmd->add_option("--ids", o.ids, "Identities")->capture_default_str();
  synth_cmd->add_option("--runs", o.runs_per_id, "Runs per identity")->capture_default_str();
  synth_cmd->add_option("--frames", o.frames, "Frames per run")->capture_default_str();
  synth_cmd->add_option("--fps", o.fps, "Frame rate")->capture_default_str();
  synth_cmd->add_flag("--benchmark", o.benchmark, "Use the harder retrieval-benchmark walkers");
  synth_cmd->add_option("--out", o.out, "Output tracklets (JSONL)")->required();
  seed(synth_cmd);

  auto* preview_cmd = app.add_subcommand("augment-preview", "Dump a tracklet and two augmented views");
  preview_cmd->add_option("--in", o.in, "Tracklets (JSONL)")->required();
  preview_cmd->add_option("--track", o.track, "track_id to preview")->required();
  preview_cmd->add_option("--config", o.config, "Pipeline TOML config");
  preview_cmd->add_option("--out", o.out, "Output views (JSONL)")->required();
  seed(preview_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(o);
    if (*filter_cmd) return cmd_filter(o);
    if (*stats_cmd) return cmd_stats(o);
    if (*train_cmd) return cmd_train(o);
    if (*embed_cmd) return cmd_embed(o);
    if (*eval_cmd) return cmd_eval(o);
    if (*synth_cmd) return cmd_synth(o);
    if (*preview_cmd) return cmd_augment_preview(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 1;
}
