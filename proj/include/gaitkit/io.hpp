#pragma once

#include <json.hpp>
#include <toml.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "gaitkit/augment.hpp"
#include "gaitkit/error.hpp"
#include "gaitkit/model.hpp"
#include "gaitkit/quality.hpp"
#include "gaitkit/retrieval.hpp"
#include "gaitkit/skeleton.hpp"
#include "gaitkit/stats.hpp"
#include "gaitkit/tracking.hpp"
#include "gaitkit/train.hpp"

namespace gaitkit {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Tracklet records: one JSON object per line.

struct TrackletRecord {
  Tracklet tracklet;
  std::optional<std::int64_t> label;  // ground-truth identity, when known
  std::optional<std::int64_t> run;

  std::int64_t identity() const { return label.value_or(tracklet.track_id); }

  friend bool operator==(const TrackletRecord&, const TrackletRecord&) = default;
};

inline json to_json(const TrackletRecord& r) {
  const auto& t = r.tracklet;
  json frames = json::array();
  for (const auto& s : t.frames) {
    json joints = json::array();
    for (const auto& k : s.joints) joints.push_back(json::array({k.x, k.y, k.confidence}));
    frames.push_back(std::move(joints));
  }
  json j = {{"track_id", t.track_id}, {"camera", t.camera}, {"fps", t.fps}, {"start_frame", t.start_frame}};
  if (r.label) j["label"] = *r.label;
  if (r.run) j["run"] = *r.run;
  j["frames"] = std::move(frames);
  return j;
}

inline TrackletRecord tracklet_from_json(const json& j) {
  try {
    TrackletRecord r;
    auto& t = r.tracklet;
    t.track_id = j.at("track_id").get<std::int64_t>();
    t.camera = j.at("camera").get<std::string>();
    t.fps = j.at("fps").get<double>();
    t.start_frame = j.at("start_frame").get<std::int64_t>();
    if (j.contains("label")) r.label = j.at("label").get<std::int64_t>();
    if (j.contains("run")) r.run = j.at("run").get<std::int64_t>();
    for (const auto& f : j.at("frames")) {
      require(f.is_array() && f.size() == kNumJoints, ErrorCode::ParseError, "frame must hold 17 joints");
      Skeleton s;
      for (std::size_t i = 0; i < kNumJoints; ++i) {
        const auto& k = f[i];
        require(k.is_array() && k.size() == 3, ErrorCode::ParseError, "joint must be [x, y, c]");
        s.joints[i] = {k[0].get<double>(), k[1].get<double>(), k[2].get<double>()};
      }
      t.frames.push_back(s);
    }
    t.validate();
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("bad tracklet record: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::ParseError, std::string("bad tracklet record: ") + e.what());
  }
}

namespace detail {

template <class F>
void for_each_line(std::istream& is, const std::string& source, F&& f) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": offset " + std::to_string(e.byte) +
                                      ": " + e.what());
    }
    try {
      f(j);
    } catch (const Error& e) {
      fail(e.code(), source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path);
  return is;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path + " for writing");
  return os;
}

}  // namespace detail

inline std::vector<TrackletRecord> read_tracklets(std::istream& is, const std::string& source = "<stream>") {
  std::vector<TrackletRecord> out;
  detail::for_each_line(is, source, [&](const json& j) { out.push_back(tracklet_from_json(j)); });
  return out;
}

inline std::vector<TrackletRecord> read_tracklets(const std::string& path) {
  auto is = detail::open_in(path);
  return read_tracklets(is, path);
}

inline void write_tracklets(std::ostream& os, const std::vector<TrackletRecord>& records) {
  for (const auto& r : records) os << to_json(r).dump() << '\n';
}

inline void write_tracklets(const std::string& path, const std::vector<TrackletRecord>& records) {
  auto os = detail::open_out(path);
  write_tracklets(os, records);
}

// ---------------------------------------------------------------------------
// Pose ingest: a JSON array of {"image_id", "keypoints": [51 numbers], "score"}.

/// Natural ordering: digit runs compare numerically, everything else
/// byte-wise; equal keys fall back to plain lexicographic order.
inline bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ie = i;
      std::size_t je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      auto na = a.substr(i, ie - i);
      auto nb = b.substr(j, je - j);
      while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return static_cast<unsigned char>(a[i]) < static_cast<unsigned char>(b[j]);
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

struct PoseRecord {
  std::string image_id;
  Skeleton skeleton;
  double score = 0.0;
};

struct IngestResult {
  std::vector<DetectionFrame> frames;  // frame_idx = rank of image_id in natural order
  std::vector<std::string> image_ids;
  std::size_t records = 0;
  std::size_t skipped = 0;
};

inline std::optional<PoseRecord> pose_from_json(const json& j) {
  if (!j.is_object() || !j.contains("image_id") || !j.contains("keypoints")) return std::nullopt;
  PoseRecord r;
  const auto& id = j["image_id"];
  if (id.is_string()) {
    r.image_id = id.get<std::string>();
  } else if (id.is_number_integer()) {
    r.image_id = std::to_string(id.get<std::int64_t>());
  } else {
    return std::nullopt;
  }
  const auto& kp = j["keypoints"];
  if (!kp.is_array() || kp.size() != 3 * kNumJoints) return std::nullopt;
  for (std::size_t i = 0; i < 3 * kNumJoints; ++i)
    if (!kp[i].is_number()) return std::nullopt;
  for (std::size_t i = 0; i < kNumJoints; ++i)
    r.skeleton.joints[i] = {kp[3 * i].get<double>(), kp[3 * i + 1].get<double>(), kp[3 * i + 2].get<double>()};
  if (!r.skeleton.valid()) return std::nullopt;
  if (j.contains("score")) {
    if (!j["score"].is_number()) return std::nullopt;
    r.score = j["score"].get<double>();
  }
  return r;
}

inline IngestResult ingest(std::istream& is, const std::string& source = "<stream>") {
  const std::string text{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset > 0 ? offset - 1 : 0), '\n');
    fail(ErrorCode::ParseError, source + ": line " + std::to_string(line) + ", offset " + std::to_string(e.byte) +
                                    ": " + e.what());
  }
  require(doc.is_array(), ErrorCode::ParseError, source + ": expected a JSON array of pose records");
  IngestResult out;
  out.records = doc.size();
  std::map<std::string, std::vector<Skeleton>, decltype(&natural_less)> by_image(&natural_less);
  for (const auto& j : doc) {
    auto r = pose_from_json(j);
    if (!r) {
      ++out.skipped;
      continue;
    }
    by_image[r->image_id].push_back(r->skeleton);
  }
  require(!by_image.empty(), ErrorCode::EmptyInput,
          source + ": no usable pose records (" + std::to_string(out.skipped) + " malformed)");
  std::int64_t frame_idx = 0;
  for (const auto& [id, skeletons] : by_image) {
    DetectionFrame f{frame_idx++, {}};
    for (const auto& s : skeletons) f.detections.push_back(Detection::from_skeleton(f.frame_idx, s));
    out.frames.push_back(std::move(f));
    out.image_ids.push_back(id);
  }
  return out;
}

inline IngestResult ingest(const std::string& path) {
  auto is = detail::open_in(path);
  return ingest(is, path);
}

// ---------------------------------------------------------------------------
// Filter reports, embeddings, stats and metric outputs.

inline void write_filter_report(std::ostream& os, const FilterReport& report) {
  for (const auto& v : report.verdicts) {
    os << json{{"type", "verdict"},
               {"track_id", v.track_id},
               {"verdict", v.passed ? "pass" : "reject"},
               {"reason", std::string(to_string(v.reason))}}
              .dump()
       << '\n';
  }
  json counts = json::object();
  for (const auto& [reason, n] : report.rejected) counts[std::string(to_string(reason))] = n;
  os << json{{"type", "summary"}, {"total", report.total()}, {"passed", report.passed}, {"rejected", counts}}.dump()
     << '\n';
}

struct EmbeddingRecord {
  std::int64_t track_id = 0;
  std::int64_t label = 0;
  std::optional<std::int64_t> run;
  std::vector<double> embedding;
};

inline void write_embeddings(std::ostream& os, const std::vector<EmbeddingRecord>& records) {
  for (const auto& r : records) {
    json j = {{"track_id", r.track_id}, {"label", r.label}};
    if (r.run) j["run"] = *r.run;
    j["embedding"] = r.embedding;
    os << j.dump() << '\n';
  }
}

inline std::vector<EmbeddingRecord> read_embeddings(std::istream& is, const std::string& source = "<stream>") {
  std::vector<EmbeddingRecord> out;
  detail::for_each_line(is, source, [&](const json& j) {
    try {
      EmbeddingRecord r;
      r.track_id = j.at("track_id").get<std::int64_t>();
      r.label = j.at("label").get<std::int64_t>();
      if (j.contains("run")) r.run = j.at("run").get<std::int64_t>();
      r.embedding = j.at("embedding").get<std::vector<double>>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      fail(ErrorCode::ParseError, std::string("bad embedding record: ") + e.what());
    }
  });
  return out;
}

inline Embeddings to_embeddings(const std::vector<EmbeddingRecord>& records) {
  Embeddings e;
  const std::size_t dim = records.empty() ? 0 : records.front().embedding.size();
  e.vectors.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < records.size(); ++i) {
    require(records[i].embedding.size() == dim, ErrorCode::ShapeMismatch, "embedding dimensions differ");
    for (std::size_t d = 0; d < dim; ++d)
      e.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = records[i].embedding[d];
    e.labels.push_back(records[i].label);
  }
  return e;
}

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline json to_json(const DatasetStats& s) {
  return json{{"id_count", s.id_count},
              {"total_frames", s.total_frames},
              {"total_walk_hours", s.total_walk_hours},
              {"avg_run_length", s.avg_run_length}};
}

inline void write_histogram_csv(std::ostream& os, const DatasetStats& s) {
  os << "bin_start_frames,bin_end_frames,count\n";
  for (const auto& b : s.histogram) os << b.start_frames << ',' << b.end_frames << ',' << b.count << '\n';
}

inline void write_loss_csv(std::ostream& os, const std::vector<double>& curve) {
  os << "step,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) os << i << ',' << format_double(curve[i]) << '\n';
}

inline void write_metrics_csv(std::ostream& os, const RetrievalResult& r, std::size_t gallery, std::size_t probes) {
  os << "metric,value\n";
  os << "rank1," << format_double(r.rank1) << '\n';
  os << "rank5," << format_double(r.rank5) << '\n';
  os << "gallery_size," << gallery << '\n';
  os << "probe_count," << probes << '\n';
}

// ---------------------------------------------------------------------------
// Pipeline configuration (TOML). Every key is optional; unknown keys fail.

struct PipelineConfig {
  FilterConfig filter;
  TrackerConfig tracking;
  AugmentConfig augment;
  ModelConfig model;
  TrainConfig train;

  void validate() const {
    filter.validate();
    augment.validate();
    model.validate();
    train.validate();
    require(augment.window_len == model.frames, ErrorCode::ConfigError, "window_len must equal model frames");
  }
};

namespace detail {

class TomlSection {
 public:
  TomlSection(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  void read(std::string_view key, double& out) {
    if (const auto* node = take(key)) {
      const auto v = node->value<double>();
      require(v.has_value() && (node->is_floating_point() || node->is_integer()), ErrorCode::ConfigError,
              where(key) + " must be a number");
      out = *v;
    }
  }

  template <class Int>
    requires std::is_integral_v<Int>
  void read(std::string_view key, Int& out) {
    if (const auto* node = take(key)) {
      require(node->is_integer(), ErrorCode::ConfigError, where(key) + " must be an integer");
      const auto v = *node->value<std::int64_t>();
      require(v >= 0 || std::is_signed_v<Int>, ErrorCode::ConfigError, where(key) + " must be >= 0");
      out = static_cast<Int>(v);
    }
  }

  template <class T>
  void read(std::string_view key, std::vector<T>& out) {
    if (const auto* node = take(key)) {
      const auto* arr = node->as_array();
      require(arr != nullptr, ErrorCode::ConfigError, where(key) + " must be an array");
      out.clear();
      for (const auto& el : *arr) {
        if constexpr (std::is_floating_point_v<T>) {
          require(el.is_number(), ErrorCode::ConfigError, where(key) + " must hold numbers");
          out.push_back(static_cast<T>(*el.value<double>()));
        } else {
          require(el.is_integer() && *el.value<std::int64_t>() >= 0, ErrorCode::ConfigError,
                  where(key) + " must hold non-negative integers");
          out.push_back(static_cast<T>(*el.value<std::int64_t>()));
        }
      }
    }
  }

  void finish() const {
    if (table_ == nullptr) return;
    for (const auto& [key, node] : *table_) {
      if (!seen_.contains(std::string(key.str()))) fail(ErrorCode::ConfigError, "unknown key " + where(key.str()));
    }
  }

 private:
  const toml::node* take(std::string_view key) {
    seen_.insert(std::string(key));
    return table_ ? table_->get(key) : nullptr;
  }

  std::string where(std::string_view key) const { return "[" + name_ + "]." + std::string(key); }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline PipelineConfig parse_config(std::string_view text, const std::string& source = "<config>") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    fail(ErrorCode::ConfigError, msg.str());
  }
  static const std::set<std::string, std::less<>> sections{"filter", "tracking", "augment", "model", "train"};
  for (const auto& [key, node] : root) {
    require(sections.contains(key.str()), ErrorCode::ConfigError, "unknown section [" + std::string(key.str()) + "]");
    require(node.is_table(), ErrorCode::ConfigError, "[" + std::string(key.str()) + "] must be a table");
  }
  PipelineConfig cfg;
  auto section = [&](const char* name) { return detail::TomlSection(root[name].as_table(), name); };

  auto f = section("filter");
  f.read("min_mean_conf", cfg.filter.min_mean_conf);
  f.read("feet_conf_floor", cfg.filter.feet_conf_floor);
  f.read("max_consec_low_feet", cfg.filter.max_consec_low_feet);
  f.read("min_len", cfg.filter.min_len);
  f.read("max_len", cfg.filter.max_len);
  f.read("min_leg_velocity", cfg.filter.min_leg_velocity);
  f.finish();

  auto tr = section("tracking");
  tr.read("iou_threshold", cfg.tracking.iou_threshold);
  tr.read("max_age", cfg.tracking.max_age);
  tr.read("min_hits", cfg.tracking.min_hits);
  tr.finish();

  auto a = section("augment");
  a.read("window_len", cfg.augment.window_len);
  a.read("pace_factors", cfg.augment.pace_factors);
  a.read("shuffle_segments", cfg.augment.shuffle_segments);
  a.read("squeeze_min", cfg.augment.squeeze_min);
  a.read("squeeze_max", cfg.augment.squeeze_max);
  a.read("p_shuffle", cfg.augment.p_shuffle);
  a.read("p_squeeze", cfg.augment.p_squeeze);
  a.read("p_flip", cfg.augment.p_flip);
  a.read("p_mirror", cfg.augment.p_mirror);
  a.read("p_joint_drop", cfg.augment.p_joint_drop);
  a.read("p_frame_drop", cfg.augment.p_frame_drop);
  a.finish();

  auto m = section("model");
  m.read("channels", cfg.model.channels);
  m.read("temporal_kernel", cfg.model.temporal_kernel);
  m.read("embedding_dim", cfg.model.embedding_dim);
  m.finish();
  cfg.model.frames = cfg.augment.window_len;

  auto t = section("train");
  t.read("ids_per_batch", cfg.train.ids_per_batch);
  t.read("steps", cfg.train.steps);
  t.read("learning_rate", cfg.train.learning_rate);
  t.read("beta1", cfg.train.beta1);
  t.read("beta2", cfg.train.beta2);
  t.read("epsilon", cfg.train.epsilon);
  t.read("temperature", cfg.train.temperature);
  t.read("seed", cfg.train.seed);
  t.finish();

  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, source + ": " + e.what());
  }
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  auto is = detail::open_in(path);
  const std::string text{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  return parse_config(text, path);
}

}  // namespace gaitkit
