#pragma once

// Sequence extraction, dataset splits, re-weighted sampling, training with
// early stopping, grouped evaluation and report writing.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drivatt/calibration.hpp"
#include "drivatt/metrics.hpp"
#include "drivatt/models.hpp"
#include "drivatt/types.hpp"

namespace drivatt::pipeline {

// Half-open frame range [begin, end).
struct FrameRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

// Approaches: from the first frame with dist <= radius to the first frame
// of minimum dist in that run. Runs whose minimum is their first frame
// (driving away) are not approaches.
std::vector<FrameRange> extract_intersection_sequences(const SessionRecord& session, double radius);

// Maximal runs with dist > radius.
std::vector<FrameRange> extract_lane_following(const SessionRecord& session, double radius);

// `session` tags whole-session units (calibration).
enum class Scenario { intersection, lane_following, session };
std::string_view to_string(Scenario s);

struct SplitSpec {
  double intersection_radius = 30.0;
  int sequences_per_label_per_split = 20;
  // Distraction sequences are constant-state chunks of at most this length.
  int max_sequence_frames = 16;
  int min_sequence_frames = 4;
  // Sessions of other modes are skipped. Defaults per condition type:
  // intention uses manual drives, distraction uses autopilot.
  std::optional<DriveMode> mode_filter;

  void validate() const;
  static SplitSpec defaults(ConditionType condition);
};

struct Sequence {
  std::size_t session = 0;
  FrameRange range;
  Scenario scenario = Scenario::intersection;
  std::string label;  // driver-state label used for splitting and sampling
};

// Intention: intersection approaches labelled by the announced intention.
// Distraction: constant-state chunks of both scenario types.
std::vector<Sequence> extract_sequences(std::span<const SessionRecord> sessions, ConditionType condition,
                                        const SplitSpec& spec);

struct Splits {
  std::vector<std::size_t> train, val, test;
};

// Per label: shuffle, `count` to val, `count` to test, the rest to train.
Splits make_splits(std::span<const Sequence> sequences, int count, std::mt19937_64& rng);

// Uniform over labels, then uniform within the label.
class ReweightedSampler {
 public:
  ReweightedSampler(std::span<const std::string> labels, std::uint64_t seed);
  std::size_t next();
  std::size_t label_count() const { return groups_.size(); }

 private:
  std::vector<std::vector<std::size_t>> groups_;
  std::mt19937_64 rng_;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_opt = 1e-8;
  double weight_decay = 1e-4;
  int batch_size = 8;
  int max_epochs = 50;
  int early_stop_patience = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

// One training or evaluation unit.
struct Example {
  std::span<const FrameSample> frames;
  std::vector<DriverState> states;
  // Per-frame gaze input maps (calibration network only).
  std::vector<AttentionMap> inputs;
  std::string label;
  Scenario scenario = Scenario::intersection;
};

std::vector<Example> make_examples(std::span<const SessionRecord> sessions, std::span<const Sequence> sequences,
                                   std::span<const std::size_t> indices);

// Calibration examples over fixed-length chunks of whole sessions (the
// whole session when chunk_frames is 0); inputs come from the coarse stage
// configured by `cfg`.
std::vector<Example> make_calibration_examples(std::span<const SessionRecord> sessions,
                                               const calibration::CalibrationConfig& cfg, int chunk_frames);

class Trainable {
 public:
  virtual ~Trainable() = default;
  virtual nn::ParameterSet& parameters() = 0;
  virtual nn::Var loss(const Example& ex, const models::ForwardContext& ctx) const = 0;
  virtual std::vector<AttentionMap> infer(const Example& ex) const = 0;
};

class ModelTrainable : public Trainable {
 public:
  explicit ModelTrainable(models::AttentionModel& model) : model_(model) {}
  nn::ParameterSet& parameters() override { return model_.parameters(); }
  nn::Var loss(const Example& ex, const models::ForwardContext& ctx) const override;
  std::vector<AttentionMap> infer(const Example& ex) const override;

 private:
  models::AttentionModel& model_;
};

class CalibrationTrainable : public Trainable {
 public:
  explicit CalibrationTrainable(calibration::CalibrationNet& net) : net_(net) {}
  nn::ParameterSet& parameters() override { return net_.parameters(); }
  nn::Var loss(const Example& ex, const models::ForwardContext& ctx) const override;
  std::vector<AttentionMap> infer(const Example& ex) const override;

 private:
  calibration::CalibrationNet& net_;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<metrics::MetricReport> val;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // epoch whose weights were kept
  bool early_stopped = false;
};

// Adam with weight decay on the mean per-sequence cross-entropy; each epoch
// draws ceil(|train| / batch_size) batches from the re-weighted sampler.
// With validation data, keeps the weights of the best validation KL and
// stops after `early_stop_patience` non-improving epochs. Throws
// DivergenceError on a non-finite loss. `on_epoch` (optional) is called
// after every epoch.
TrainHistory train(Trainable& model, std::span<const Example> train_data, std::span<const Example> val_data,
                   const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch = {});

// Per-frame metrics averaged over the examples.
metrics::MetricReport evaluate_examples(const Trainable& model, std::span<const Example> data);

struct EvalRow {
  std::string scenario;
  std::string condition;
  metrics::MetricReport report;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by (scenario, condition)
  metrics::MetricReport overall;
};

// Groups frames by (scenario of their sequence, their own state label).
EvalReport evaluate(const models::AttentionPredictor& predictor, std::span<const Example> data);

// Same grouping for precomputed predictions (one vector per example).
EvalReport evaluate_predictions(std::span<const Example> data,
                                std::span<const std::vector<AttentionMap>> predictions);

struct RunMeta {
  std::string command;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<std::pair<std::string, std::string>> extra;
};

// JSON document {"meta": {...}, "records": [{scenario, condition, metric,
// value, frames}, ...]}; metric is one of cc, kl, entropy.
std::string report_json(const EvalReport& report, const RunMeta& meta);
void write_report(const std::filesystem::path& path, const EvalReport& report, const RunMeta& meta);
// Plain-text table with columns CC (higher is better), H and KL (lower is better).
std::string format_table(const EvalReport& report);

std::string history_json(const TrainHistory& history, const RunMeta& meta);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

}  // namespace drivatt::pipeline
