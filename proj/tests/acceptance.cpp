// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>

#include "fd_check.hpp"
#include "gaitkit/gaitkit.hpp"
#include "oracles.hpp"

using namespace gaitkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void criterion(int n, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs >= budget_s) {
    o.pass = false;
    o.detail += fmt(" over the %.0f s budget", budget_s);
  }
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

// 1 ---------------------------------------------------------------------------

Outcome normalization_invariance() {
  Rng rng(101);
  double worst_moved = 0.0;
  double worst_twice = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Tracklet t;
    t.frames.push_back(oracle::random_skeleton(rng));
    const double scale = rng.uniform(0.1, 10.0);
    const double tx = rng.uniform(-1e3, 1e3);
    const double ty = rng.uniform(-1e3, 1e3);
    Tracklet moved = t;
    for (auto& k : moved.frames[0].joints) k = {scale * k.x + tx, scale * k.y + ty, k.confidence};
    const Pose a = normalize_tracklet(t).frames[0];
    const Pose b = normalize_tracklet(moved).frames[0];
    const Pose twice = normalize_skeleton(to_skeleton(a), 1.0, 1.0);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      worst_moved = std::max({worst_moved, std::abs(a[j].x - b[j].x), std::abs(a[j].y - b[j].y)});
      worst_twice = std::max({worst_twice, std::abs(a[j].x - twice[j].x), std::abs(a[j].y - twice[j].y)});
    }
  }
  return {worst_moved <= 1e-9 && worst_twice <= 1e-9,
          fmt("max deviation %.2e under transform, %.2e on renormalizing", worst_moved, worst_twice)};
}

// 2 ---------------------------------------------------------------------------

Skeleton standing(double conf) {
  Skeleton s;
  for (auto& k : s.joints) k = {100.0, 175.0, conf};
  s[Joint::LeftHip] = {90.0, 200.0, conf};
  s[Joint::RightHip] = {110.0, 200.0, conf};
  s[Joint::LeftShoulder] = {90.0, 150.0, conf};
  s[Joint::RightShoulder] = {110.0, 150.0, conf};
  return s;
}

Tracklet still(std::size_t n, double conf) {
  Tracklet t;
  t.frames.assign(n, standing(conf));
  return t;
}

Tracklet low_feet(std::size_t run) {
  Tracklet t = still(60, 0.9);
  for (std::size_t f = 10; f < 10 + run; ++f) {
    t.frames[f][Joint::LeftAnkle].confidence = 0.49;
    t.frames[f][Joint::RightAnkle].confidence = 0.49;
  }
  return t;
}

// Joint 15 moves `dx` once; the four leg joints average to dx / 4.
NormalizedSequence one_step(double dx) {
  NormalizedSequence ns;
  ns.frames.resize(2);
  ns.frames[1][15].x = dx;
  return ns;
}

Outcome filter_boundaries() {
  const FilterConfig cfg;
  struct Fixture {
    const char* name;
    bool got;
    bool want;
  };
  const Fixture fixtures[] = {
      {"mean conf 0.60", mean_confidence_ok(still(60, 0.60), cfg), false},
      {"mean conf 0.61", mean_confidence_ok(still(60, 0.61), cfg), true},
      {"3 low-feet frames", feet_visibility_ok(low_feet(3), cfg), true},
      {"4 low-feet frames", feet_visibility_ok(low_feet(4), cfg), false},
      {"53 frames", length_ok(still(53, 0.9), cfg), false},
      {"54 frames", length_ok(still(54, 0.9), cfg), true},
      {"velocity 0.01", walking_ok(one_step(0.04), cfg), true},
      {"velocity 0.0099", walking_ok(one_step(0.0396), cfg), false},
  };
  int ok = 0;
  std::string wrong;
  for (const auto& f : fixtures) {
    if (f.got == f.want)
      ++ok;
    else
      wrong += std::string(" [") + f.name + "]";
  }
  return {ok == 8, fmt("%d/8 boundary fixtures", ok) + wrong};
}

// 3 ---------------------------------------------------------------------------

Outcome gradient_check() {
  ModelConfig cfg;
  cfg.channels = {2, 6, 6};
  cfg.embedding_dim = 5;
  cfg.frames = 10;
  const auto graph = build_graph(GraphConfig::coco17());
  const std::vector<std::int64_t> labels{0, 0, 1, 1, 2, 2, 3, 3};
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  bool coverage = true;
  for (const std::uint64_t seed : {1u, 2u, 3u}) {
    auto p = init_params<double>(cfg, seed);
    Rng rng(seed, 99);
    for_each_tensor(p, [&](const std::string&, Mat<double>& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += 0.1 * rng.normal();
    });
    BatchTensor batch;
    batch.n = 8;
    batch.t = cfg.frames;
    batch.values.resize(batch.n * batch.c * batch.t * batch.v);
    Rng data(seed + 10);
    for (auto& x : batch.values) x = data.normal();
    for (const auto& r : fdcheck::check(p, graph, batch, labels, LossConfig{0.5}, 1e-4)) {
      worst = std::max(worst, r.rel_error);
      checked += r.checked;
      skipped += r.skipped;
      coverage = coverage && r.checked * 10 >= (r.checked + r.skipped) * 9;
    }
  }
  return {worst < 1e-4 && coverage,
          fmt("max relative error %.2e over %zu coordinates, %zu skipped at ReLU kinks", worst, checked, skipped)};
}

// 4 ---------------------------------------------------------------------------

Outcome supcon_closed_values() {
  Mat<double> same = Mat<double>::Zero(4, 3);
  same.col(0).setOnes();
  const double three = supcon_loss<double>(same, {0, 0, 1, 1}, LossConfig{0.5}).loss;
  Mat<double> ortho(4, 2);
  ortho << 1, 0, 1, 0, 0, 1, 0, 1;
  const double warm = supcon_loss<double>(ortho, {0, 0, 1, 1}, LossConfig{1.0}).loss;
  const double cold = supcon_loss<double>(ortho, {0, 0, 1, 1}, LossConfig{0.01}).loss;
  const double closed = std::log(std::exp(1.0) + 2.0) - 1.0;
  const bool ok = std::abs(three - std::log(3.0)) <= 1e-9 && std::abs(warm - closed) <= 1e-6 &&
                  std::abs(warm - 0.5514) <= 1e-4 && cold < 1e-10;
  return {ok, fmt("identical %.12f, orthogonal %.9f at tau 1, %.2e at tau 0.01", three, warm, cold)};
}

// 5 ---------------------------------------------------------------------------

Outcome pace_oracle() {
  Rng rng(55);
  double worst = 0.0;
  const AugmentConfig aug;
  for (int i = 0; i < 100; ++i) {
    NormalizedSequence seq;
    seq.frames.resize(2 + rng.uniform_int(150));
    for (auto& f : seq.frames)
      for (auto& p : f) p = {rng.normal(), rng.normal()};
    for (const double factor : aug.pace_factors) {
      const auto got = pace_resample(seq, factor, aug.window_len);
      const auto want = oracle::resample(seq, factor, aug.window_len);
      for (std::size_t t = 0; t < aug.window_len; ++t)
        for (std::size_t j = 0; j < kNumJoints; ++j)
          worst = std::max({worst, std::abs(got.frames[t][j].x - want.frames[t][j].x),
                            std::abs(got.frames[t][j].y - want.frames[t][j].y)});
    }
  }
  return {worst <= 1e-12 && aug.pace_factors.size() == 8,
          fmt("max deviation %.2e over 100 sequences x %zu factors", worst, aug.pace_factors.size())};
}

// 6 ---------------------------------------------------------------------------

Outcome retrieval_benchmark() {
  const auto walkers = generate_synthetic_walkers(32, 4, 108, 7, SynthConfig::benchmark());
  SequenceStore gallery;
  SequenceStore probe;
  for (const auto& w : walkers) (w.run == 0 ? gallery : probe).push_back({w.label, normalize_tracklet(w.tracklet)});
  const auto graph = build_graph(GraphConfig::coco17());
  const ModelConfig model;
  const AugmentConfig aug;
  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.ids_per_batch = 12;
  cfg.seed = 7;
  auto rank1 = [&](const ModelParams<float>& p) {
    const auto embed = [&](const SequenceStore& s) {
      Embeddings e;
      e.vectors = embed_store(p, graph, s).cast<double>();
      for (const auto& x : s) e.labels.push_back(x.label);
      return e;
    };
    return rank_k(embed(gallery), embed(probe), 1);
  };
  const double baseline = rank1(init_params<float>(model, cfg.seed));
  const auto trained = train(gallery, graph, model, aug, cfg);
  const double r1 = rank1(trained.params);
  return {r1 >= 0.90 && baseline <= 0.25,
          fmt("rank-1 %.4f after %zu steps, untrained baseline %.4f", r1, cfg.steps, baseline)};
}

// 7 ---------------------------------------------------------------------------

Outcome tracker_sanity() {
  Rng rng(3);
  WalkerParams a = sample_walker(rng);
  WalkerParams b = sample_walker(rng);
  a.direction = 1.0;
  b.direction = -1.0;
  std::vector<DetectionFrame> frames;
  for (std::int64_t f = 0; f < 200; ++f) {
    const double t = static_cast<double>(f);
    DetectionFrame df{f, {}};
    df.detections.push_back(Detection::from_skeleton(f, walker_pose(a, 0.2 * t, {100.0 + a.speed * t, 200.0})));
    df.detections.push_back(Detection::from_skeleton(f, walker_pose(b, 0.2 * t + 1.0, {700.0 - b.speed * t, 500.0})));
    frames.push_back(std::move(df));
  }
  const auto tracks = track_stream(frames, TrackerConfig{});
  // A switch would put the other walker's pelvis (300 px away vertically) in the track.
  int switches = 0;
  for (const auto& t : tracks) {
    const double y0 = derived_joints(t.frames.front()).pelvis.y;
    for (const auto& s : t.frames)
      if (std::abs(derived_joints(s).pelvis.y - y0) > 150.0) ++switches;
  }

  Rng noise(17);
  TrackState ts = TrackState::from_bbox({100, 100, 140, 200});
  double min_eig = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    ts = predict(ts);
    if (noise.bernoulli(0.7)) {
      const double cx = ts.mean(0) + 5.0 * noise.normal();
      const double cy = ts.mean(1) + 5.0 * noise.normal();
      const double w = noise.uniform(10, 60);
      const double h = noise.uniform(30, 150);
      Detection d;
      d.bbox = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
      ts = update(ts, d);
    }
    const Eigen::SelfAdjointEigenSolver<Mat7> es(ts.covariance);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  const bool ok = tracks.size() == 2 && switches == 0 && tracks[0].size() == 200 && tracks[1].size() == 200 &&
                  min_eig >= -1e-9;
  return {ok, fmt("%zu tracklets, %d switched frames, min covariance eigenvalue %.2e", tracks.size(), switches,
                  min_eig)};
}

// 8 ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GAITKIT_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome pipeline_determinism() {
  const fs::path root = fs::temp_directory_path() / ("gaitkit_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const char* outputs[] = {"synth.jsonl", "admitted.jsonl", "report.jsonl", "model.ckpt", "loss.csv",
                           "gallery.jsonl", "probe.jsonl", "metrics.csv", "nearest.csv"};
  for (int r = 0; r < 2; ++r) {
    const fs::path d = root / std::to_string(r);
    fs::create_directories(d);
    auto p = [&](const char* name) { return (d / name).string(); };
    std::ofstream(p("config.toml")) << "[train]\nsteps = 25\nids_per_batch = 4\nseed = 3\n";
    const std::string steps[] = {
        "synth --ids 6 --runs 2 --frames 80 --seed 5 --out " + p("synth.jsonl"),
        "filter --in " + p("synth.jsonl") + " --out " + p("admitted.jsonl") + " --report " + p("report.jsonl"),
        "train --in " + p("admitted.jsonl") + " --config " + p("config.toml") + " --runs 0 --out " +
            p("model.ckpt") + " --loss-curve " + p("loss.csv"),
        "embed --model " + p("model.ckpt") + " --in " + p("admitted.jsonl") + " --runs 0 --out " + p("gallery.jsonl"),
        "embed --model " + p("model.ckpt") + " --in " + p("admitted.jsonl") + " --runs 1 --out " + p("probe.jsonl"),
        "eval --gallery " + p("gallery.jsonl") + " --probe " + p("probe.jsonl") + " --out " + p("metrics.csv") +
            " --nearest-out " + p("nearest.csv"),
    };
    for (const auto& s : steps) {
      if (const int code = run_cli(s); code != 0) {
        fs::remove_all(root);
        return {false, "`gaitkit " + s.substr(0, s.find(' ')) + "` exited with " + std::to_string(code)};
      }
    }
  }
  std::size_t differing = 0;
  for (const char* o : outputs)
    if (slurp(root / "0" / o) != slurp(root / "1" / o) || slurp(root / "0" / o).empty()) ++differing;
  fs::remove_all(root);
  return {differing == 0, fmt("%zu of %zu output files differ or are empty", differing, std::size(outputs))};
}

// 9 ---------------------------------------------------------------------------

Outcome stats_arithmetic() {
  std::vector<Tracklet> store;
  for (int i = 0; i < 10; ++i) {
    Tracklet t = still(108, 0.9);
    t.track_id = i;
    t.fps = 24.0;
    store.push_back(t);
  }
  const auto s = dataset_stats(store, 24.0);
  std::size_t sum = 0;
  for (const auto& b : s.histogram) sum += b.count;
  const bool ok = s.total_walk_hours == 0.0125 && s.avg_run_length == 108.0 && sum == 10;
  return {ok, fmt("%g hours, avg run length %g, histogram sum %zu", s.total_walk_hours, s.avg_run_length, sum)};
}

}  // namespace

int main() {
  criterion(1, "normalization invariance", 5, normalization_invariance);
  criterion(2, "filter thresholds", 0, filter_boundaries);
  criterion(3, "gradient correctness", 60, gradient_check);
  criterion(4, "SupCon closed values", 0, supcon_closed_values);
  criterion(5, "pace resample oracle", 0, pace_oracle);
  criterion(6, "synthetic retrieval", 300, retrieval_benchmark);
  criterion(7, "tracker sanity", 0, tracker_sanity);
  criterion(8, "pipeline determinism", 0, pipeline_determinism);
  criterion(9, "stats arithmetic", 0, stats_arithmetic);
  return failures == 0 ? 0 : 1;
}
