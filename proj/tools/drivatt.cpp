// drivatt: synthetic data generation, training, evaluation, calibration
// and road-risk analysis from the command line.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "drivatt/analysis.hpp"
#include "drivatt/calibration.hpp"
#include "drivatt/checkpoint.hpp"
#include "drivatt/errors.hpp"
#include "drivatt/pipeline.hpp"
#include "drivatt/session_io.hpp"
#include "drivatt/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace drivatt;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr const char* kSessionExt = ".drvs";

// Bad flag values detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t hash_json(const json& j) { return pipeline::fnv1a64(j.dump()); }

bool on_off(const std::string& v) { return v == "on"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::vector<SessionRecord> load_sessions(const fs::path& dir) {
  if (dir.empty()) throw UsageError("no data directory given (use --data or set DRIVATT_DATA)");
  if (!fs::is_directory(dir)) throw std::runtime_error("data directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == kSessionExt) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no session files (*" + std::string(kSessionExt) + ") in '" + dir.string() + "'");
  std::vector<SessionRecord> out;
  for (const fs::path& f : files) out.push_back(pipeline::load_session(f));
  return out;
}

ConditionType data_condition(const std::vector<SessionRecord>& sessions) {
  for (const SessionRecord& s : sessions)
    if (!s.frames.empty()) return s.frames.front().state.kind;
  throw std::runtime_error("sessions contain no frames");
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::uint64_t seed = 0;
  int sessions = 4;
  int frames = 64;
  std::string condition = "intention";
  std::string mode = "auto";
  std::string scale = "full";
  std::string out;
  double tunnel = -1.0;
  double cross = 1.0;
  std::string tunnel_scope = "everywhere";
  int shift_jitter = 0;
};

json synth_config_json(const synth::SynthScenarioConfig& c) {
  return {{"seed", c.seed},
          {"n_sessions", c.n_sessions},
          {"frames_per_session", c.frames_per_session},
          {"mode", std::string(to_string(c.mode))},
          {"condition_type", std::string(to_string(c.condition_type))},
          {"tunnel_strength", c.tunnel_strength},
          {"cross_gaze_strength", c.cross_gaze_strength},
          {"webcam_shift", {c.webcam_shift.row, c.webcam_shift.col}},
          {"webcam_dispersion", c.webcam_dispersion},
          {"intersection_spacing", c.intersection_spacing},
          {"map_height", c.map_height},
          {"map_width", c.map_width},
          {"fps", c.fps},
          {"speed", c.speed},
          {"segment_frames", c.segment_frames},
          {"intention_radius", c.intention_radius},
          {"tunnel_scope", std::string(synth::to_string(c.tunnel_scope))},
          {"tunnel_radius", c.tunnel_radius},
          {"with_webcam", c.with_webcam},
          {"webcam_shift_jitter", c.webcam_shift_jitter},
          {"car_rate", c.car_rate}};
}

int run_synth(const SynthArgs& a) {
  if (a.frames < 1) throw UsageError("--frames must be >= 1");
  if (a.sessions < 1) throw UsageError("--sessions must be >= 1");
  const ConditionType condition = parse_condition_type(a.condition);
  if (condition == ConditionType::none) throw UsageError("--condition must be intention or distraction");
  const DriveMode mode = a.mode == "auto"
                             ? (condition == ConditionType::intention ? DriveMode::manual : DriveMode::autopilot)
                             : parse_drive_mode(a.mode);
  synth::SynthScenarioConfig cfg = synth::SynthScenarioConfig::defaults(mode, condition);
  cfg.seed = a.seed;
  cfg.n_sessions = a.sessions;
  cfg.frames_per_session = a.frames;
  cfg.cross_gaze_strength = a.cross;
  if (a.tunnel >= 0.0) cfg.tunnel_strength = a.tunnel;
  cfg.tunnel_scope = synth::parse_tunnel_scope(a.tunnel_scope);
  cfg.webcam_shift_jitter = a.shift_jitter;
  if (a.scale == "reduced") {
    cfg.map_height = 8;
    cfg.map_width = 16;
    cfg.webcam_shift = {2, 4};
    cfg.webcam_dispersion = 0.75;
  }
  cfg.validate();

  const json config = synth_config_json(cfg);
  const std::uint64_t hash = hash_json(config);
  const fs::path out(a.out);
  fs::create_directories(out);
  json files = json::array();
  for (int i = 0; i < cfg.n_sessions; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "session_%04d%s", i, kSessionExt);
    pipeline::save_session(out / name, synth::generate_session(cfg, i), hash);
    files.push_back({{"file", name}, {"session_index", i}, {"seed", cfg.seed}});
  }
  const json manifest = {{"config_hash", pipeline::hash_hex(hash)}, {"config", config}, {"files", files}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << cfg.n_sessions << " sessions to " << out.string() << " (config " << pipeline::hash_hex(hash)
            << ")\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string model;
  std::string condition;
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  int epochs = 50;
  double lr = 1e-4;
  int batch_size = 8;
  int per_split = 20;
  int patience = 10;
  int feature_channels = 0;
  int head_channels = 0;
  std::string coarse = "on";
};

models::EncoderConfig encoder_for(const std::vector<SessionRecord>& sessions, int feature_channels) {
  const SceneTensor& f = sessions.front().frames.front().frame;
  models::EncoderConfig e;
  e.scene_height = f.height;
  e.scene_width = f.width;
  const bool reduced = f.height < kDefaultMapHeight * kSceneScale;
  e.feature_channels = feature_channels > 0 ? feature_channels : (reduced ? 2 : 8);
  e.stem_channels = reduced ? 4 : 8;
  return e;
}

int default_head_channels(const models::EncoderConfig& e, int requested) {
  if (requested > 0) return requested;
  return e.scene_height < kDefaultMapHeight * kSceneScale ? 12 : 8;
}

void print_epoch(const pipeline::EpochRecord& r) {
  std::cerr << "epoch " << r.epoch << " train_loss " << r.train_loss;
  if (r.val) std::cerr << " val_kl " << r.val->kl;
  std::cerr << '\n';
}

int run_train(const TrainArgs& a) {
  const bool calibration_model = a.model == "calibration";
  models::ModelType type = models::ModelType::unconditioned;
  if (!calibration_model) type = models::parse_model_type(a.model);
  if (type == models::ModelType::unconditioned && !a.condition.empty() && !calibration_model)
    throw UsageError("--model unconditioned does not take --condition");
  if (type != models::ModelType::unconditioned && a.condition.empty())
    throw UsageError("--model " + a.model + " needs --condition intention|distraction");
  if (calibration_model && !a.condition.empty()) throw UsageError("--model calibration does not take --condition");
  ConditionType condition = ConditionType::none;
  if (!a.condition.empty()) {
    condition = parse_condition_type(a.condition);
    if (condition == ConditionType::none) throw UsageError("--condition must be intention or distraction");
  }
  if (a.epochs < 1 || a.batch_size < 1 || a.per_split < 1 || a.patience < 1 || !(a.lr >= 0.0))
    throw UsageError("--epochs, --batch-size, --per-split and --patience must be >= 1 and --lr >= 0");

  const std::vector<SessionRecord> sessions = load_sessions(a.data);
  pipeline::TrainConfig tc;
  tc.learning_rate = a.lr;
  tc.batch_size = a.batch_size;
  tc.max_epochs = a.epochs;
  tc.early_stop_patience = a.patience;
  tc.seed = a.seed;
  const models::EncoderConfig enc = encoder_for(sessions, a.feature_channels);

  json config = {{"model", a.model},     {"condition", a.condition}, {"lr", a.lr},
                 {"epochs", a.epochs},   {"batch_size", a.batch_size}, {"per_split", a.per_split},
                 {"patience", a.patience}, {"feature_channels", enc.feature_channels},
                 {"head_channels", default_head_channels(enc, a.head_channels)}, {"seed", a.seed}};
  if (calibration_model) config["coarse"] = a.coarse;
  const std::uint64_t hash = hash_json(config);
  const pipeline::RunMeta meta{"train", a.seed, hash, {{"model", a.model}}};
  const fs::path history_path = fs::path(a.out).string() + ".history.json";

  pipeline::TrainHistory history;
  if (calibration_model) {
    calibration::CalibrationConfig cc;
    cc.coarse = on_off(a.coarse);
    cc.fine_tune = false;
    const std::size_t n_val = sessions.size() >= 2 ? std::max<std::size_t>(1, sessions.size() / 5) : 0;
    const std::span<const SessionRecord> all(sessions);
    const auto train_ex = pipeline::make_calibration_examples(all.first(sessions.size() - n_val), cc, 16);
    const auto val_ex = pipeline::make_calibration_examples(all.last(n_val), cc, 16);
    calibration::CalibrationNetConfig nc;
    nc.encoder = enc;
    nc.head.channels = default_head_channels(enc, a.head_channels);
    nc.trained_on_centered = cc.coarse;
    calibration::CalibrationNet net(nc, a.seed);
    pipeline::CalibrationTrainable trainable(net);
    history = pipeline::train(trainable, train_ex, val_ex, tc, print_epoch);
    checkpoint::save_calibration_net(a.out, net, {a.seed, hash, a.per_split});
  } else {
    const ConditionType data_kind = data_condition(sessions);
    if (condition != ConditionType::none && condition != data_kind)
      throw std::runtime_error("--condition " + a.condition + " does not match the data's condition type '" +
                               std::string(to_string(data_kind)) + "'");
    pipeline::SplitSpec spec = pipeline::SplitSpec::defaults(data_kind);
    spec.sequences_per_label_per_split = a.per_split;
    const auto seqs = pipeline::extract_sequences(sessions, data_kind, spec);
    if (seqs.empty()) throw std::runtime_error("no training sequences found in '" + a.data + "'");
    std::mt19937_64 split_rng(a.seed);
    const pipeline::Splits splits = pipeline::make_splits(seqs, a.per_split, split_rng);
    if (splits.train.empty()) throw std::runtime_error("training split is empty; lower --per-split or add data");
    const auto train_ex = pipeline::make_examples(sessions, seqs, splits.train);
    const auto val_ex = pipeline::make_examples(sessions, seqs, splits.val);
    models::ModelConfig mc;
    mc.kind = {type, condition};
    mc.encoder = enc;
    mc.head.channels = default_head_channels(enc, a.head_channels);
    models::AttentionModel model(mc, a.seed);
    pipeline::ModelTrainable trainable(model);
    try {
      history = pipeline::train(trainable, train_ex, val_ex, tc, print_epoch);
    } catch (const DivergenceError&) {
      write_text(history_path, pipeline::history_json(history, meta));
      throw;
    }
    checkpoint::save_attention_model(a.out, model, {a.seed, hash, a.per_split});
  }
  write_text(history_path, pipeline::history_json(history, meta));
  const auto& best = history.epochs.at(static_cast<std::size_t>(std::max(history.best_epoch, 0)));
  std::cout << "trained " << a.model << " for " << history.epochs.size() << " epochs; best epoch " << history.best_epoch;
  if (best.val) std::cout << " val_kl " << best.val->kl;
  std::cout << " -> " << a.out << '\n';
  return 0;
}

// ------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string ckpt;
  std::string data;
  std::string report;
  std::string split = "test";
};

int run_evaluate(const EvaluateArgs& a) {
  if (a.split != "test" && a.split != "all") throw UsageError("--split must be test or all");
  const std::vector<SessionRecord> sessions = load_sessions(a.data);
  const std::unique_ptr<models::AttentionPredictor> predictor = checkpoint::load_predictor(a.ckpt);
  const checkpoint::Meta ck = checkpoint::checkpoint_meta(a.ckpt);
  const ConditionType data_kind = data_condition(sessions);
  if (predictor->condition_type() != ConditionType::none && predictor->condition_type() != data_kind)
    throw std::runtime_error("checkpoint condition '" + std::string(to_string(predictor->condition_type())) +
                             "' does not match the data's '" + std::string(to_string(data_kind)) + "'");
  pipeline::SplitSpec spec = pipeline::SplitSpec::defaults(data_kind);
  spec.sequences_per_label_per_split = ck.per_split;
  const auto seqs = pipeline::extract_sequences(sessions, data_kind, spec);
  std::vector<std::size_t> indices;
  if (a.split == "all") {
    indices.resize(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) indices[i] = i;
  } else {
    std::mt19937_64 split_rng(ck.seed);
    indices = pipeline::make_splits(seqs, ck.per_split, split_rng).test;
  }
  if (indices.empty()) throw std::runtime_error("no evaluation sequences found in '" + a.data + "'");
  const auto examples = pipeline::make_examples(sessions, seqs, indices);
  const pipeline::EvalReport report = pipeline::evaluate(*predictor, examples);

  const json config = {{"ckpt_hash", pipeline::hash_hex(ck.config_hash)}, {"split", a.split}, {"seed", ck.seed}};
  const pipeline::RunMeta meta{"evaluate", ck.seed, hash_json(config), {{"split", a.split}}};
  pipeline::write_report(a.report, report, meta);
  write_text(a.report + ".table.txt", pipeline::format_table(report));
  std::cout << "evaluated " << report.overall.count << " frames: CC " << report.overall.cc << " KL "
            << report.overall.kl << " H " << report.overall.entropy << " -> " << a.report << '\n';
  return 0;
}

// ------------------------------------------------------------ calibrate

struct CalibrateArgs {
  std::string data;
  std::string coarse = "on";
  std::string fine = "on";
  std::string ckpt;
  std::string report;
  int window = 64;
  int max_offset = 12;
  bool per_sequence = false;
};

int run_calibrate(const CalibrateArgs& a) {
  calibration::CalibrationConfig cfg;
  cfg.coarse = on_off(a.coarse);
  cfg.fine_tune = on_off(a.fine);
  cfg.window = a.window;
  cfg.max_offset = a.max_offset;
  cfg.per_sequence = a.per_sequence;
  if (a.window < 1 || a.max_offset < 0) throw UsageError("--window must be >= 1 and --max-offset >= 0");
  if (cfg.fine_tune && a.ckpt.empty()) throw UsageError("--fine on needs --ckpt");

  const std::vector<SessionRecord> sessions = load_sessions(a.data);
  std::unique_ptr<calibration::CalibrationNet> net;
  if (cfg.fine_tune) net = checkpoint::load_calibration_net(a.ckpt);
  std::vector<pipeline::Example> examples;
  std::vector<std::vector<AttentionMap>> predictions;
  for (const SessionRecord& s : sessions) {
    pipeline::Example ex;
    ex.frames = s.frames;
    ex.label = "all";
    ex.scenario = pipeline::Scenario::session;
    examples.push_back(std::move(ex));
    predictions.push_back(calibration::calibrate_pipeline(s, cfg, net.get()));
  }
  const pipeline::EvalReport report = pipeline::evaluate_predictions(examples, predictions);
  const json config = {{"coarse", a.coarse}, {"fine", a.fine},         {"window", a.window},
                       {"max_offset", a.max_offset}, {"per_sequence", a.per_sequence},
                       {"ckpt_hash", cfg.fine_tune ? pipeline::hash_hex(checkpoint::checkpoint_meta(a.ckpt).config_hash) : ""}};
  const pipeline::RunMeta meta{"calibrate", 0, hash_json(config), {{"coarse", a.coarse}, {"fine", a.fine}}};
  pipeline::write_report(a.report, report, meta);
  write_text(a.report + ".table.txt", pipeline::format_table(report));
  std::cout << "calibration coarse=" << a.coarse << " fine=" << a.fine << ": KL " << report.overall.kl << " CC "
            << report.overall.cc << " -> " << a.report << '\n';
  return 0;
}

// ------------------------------------------------------------- risk map

struct RiskArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  int neighborhood = 3;
  double cell_size = 5.0;
  int downsample = 0;
};

int run_risk(const RiskArgs& a) {
  if (a.neighborhood < 1 || a.neighborhood % 2 == 0) throw UsageError("--neighborhood must be a positive odd number");
  if (!(a.cell_size > 0.0) || a.downsample < 0) throw UsageError("--cell-size must be > 0 and --downsample >= 0");
  const std::vector<SessionRecord> sessions = load_sessions(a.data);
  const std::unique_ptr<models::AttentionPredictor> predictor = checkpoint::load_predictor(a.ckpt);
  analysis::RiskMapConfig cfg;
  cfg.neighborhood = a.neighborhood;
  cfg.cell_size = a.cell_size;
  cfg.downsample_factor = a.downsample;
  const auto points = analysis::risk_map(*predictor, sessions, cfg);
  const checkpoint::Meta ck = checkpoint::checkpoint_meta(a.ckpt);
  const json config = {{"ckpt_hash", pipeline::hash_hex(ck.config_hash)}, {"neighborhood", a.neighborhood},
                       {"cell_size", a.cell_size}, {"downsample", a.downsample}};
  analysis::write_risk_table(a.out, points,
                             {{"config_hash", pipeline::hash_hex(hash_json(config))}, {"seed", std::to_string(ck.seed)}});
  double peak = 0.0;
  for (const auto& p : points) peak = std::max(peak, p.risk);
  std::cout << "risk map: " << points.size() << " cells, max risk " << peak << " -> " << a.out << '\n';
  return 0;
}

int run_render(const std::string& table, const std::string& out, int width, int height) {
  if (width < 16 || height < 16) throw UsageError("--width and --height must be >= 16");
  const auto points = analysis::read_risk_table(table);
  analysis::render_risk_ppm(out, points, width, height);
  std::cout << "rendered " << points.size() << " cells -> " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drivatt: driver attention toolkit"};
  app.require_subcommand(1);
  const std::vector<std::string> on_off_values{"on", "off"};

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth-generate", "Generate seeded synthetic sessions");
  synth_cmd->add_option("--seed", sa.seed, "Generator seed");
  synth_cmd->add_option("--sessions", sa.sessions, "Number of sessions");
  synth_cmd->add_option("--frames", sa.frames, "Frames per session");
  synth_cmd->add_option("--condition", sa.condition, "intention or distraction")
      ->check(CLI::IsMember({"intention", "distraction"}));
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();
  synth_cmd->add_option("--mode", sa.mode, "auto, manual or autopilot")
      ->check(CLI::IsMember({"auto", "manual", "autopilot"}));
  synth_cmd->add_option("--scale", sa.scale, "full (32x64 maps) or reduced (8x16 maps)")
      ->check(CLI::IsMember({"full", "reduced"}));
  synth_cmd->add_option("--tunnel-strength", sa.tunnel, "Distraction center bias (default depends on mode)");
  synth_cmd->add_option("--cross-gaze", sa.cross, "Intention side bias")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--tunnel-scope", sa.tunnel_scope, "everywhere or near_intersections")
      ->check(CLI::IsMember({"everywhere", "near_intersections"}));
  synth_cmd->add_option("--shift-jitter", sa.shift_jitter, "Per-session webcam shift jitter (cells)")
      ->check(CLI::NonNegativeNumber);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train an attention model or a calibration network");
  train_cmd->add_option("--model", ta.model, "unconditioned, multi-branch, cond-conv or calibration")
      ->required()
      ->check(CLI::IsMember({"unconditioned", "multi-branch", "multi_branch", "cond-conv", "cond_conv", "calibration"}));
  train_cmd->add_option("--condition", ta.condition, "intention or distraction")
      ->check(CLI::IsMember({"intention", "distraction"}));
  train_cmd->add_option("--data", ta.data, "Session directory")->envname("DRIVATT_DATA");
  train_cmd->add_option("--out", ta.out, "Checkpoint path")->required();
  train_cmd->add_option("--seed", ta.seed, "Seed for initialization, splits and sampling");
  train_cmd->add_option("--epochs", ta.epochs, "Maximum epochs");
  train_cmd->add_option("--lr", ta.lr, "Adam learning rate");
  train_cmd->add_option("--batch-size", ta.batch_size, "Sequences per batch");
  train_cmd->add_option("--per-split", ta.per_split, "Sequences per label in validation and test");
  train_cmd->add_option("--patience", ta.patience, "Early-stopping patience (epochs)");
  train_cmd->add_option("--feature-channels", ta.feature_channels, "Encoder channels (0 = by scale)");
  train_cmd->add_option("--head-channels", ta.head_channels, "Decoder channels (0 = by scale)");
  train_cmd->add_option("--coarse", ta.coarse, "Calibration network input: centered (on) or raw (off)")
      ->check(CLI::IsMember(on_off_values));

  EvaluateArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
  eval_cmd->add_option("--ckpt", ea.ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--data", ea.data, "Session directory")->envname("DRIVATT_DATA");
  eval_cmd->add_option("--report", ea.report, "Report path (JSON)")->required();
  eval_cmd->add_option("--split", ea.split, "test or all")->check(CLI::IsMember({"test", "all"}));

  CalibrateArgs ca;
  auto* cal_cmd = app.add_subcommand("calibrate", "Run one cell of the two-stage calibration");
  cal_cmd->add_option("--data", ca.data, "Session directory")->envname("DRIVATT_DATA");
  cal_cmd->add_option("--coarse", ca.coarse, "on or off")->check(CLI::IsMember(on_off_values));
  cal_cmd->add_option("--fine", ca.fine, "on or off")->check(CLI::IsMember(on_off_values));
  cal_cmd->add_option("--ckpt", ca.ckpt, "Calibration network checkpoint (for --fine on)");
  cal_cmd->add_option("--report", ca.report, "Report path (JSON)")->required();
  cal_cmd->add_option("--window", ca.window, "Sliding window (frames)");
  cal_cmd->add_option("--max-offset", ca.max_offset, "Offset clamp (cells)");
  cal_cmd->add_flag("--per-sequence", ca.per_sequence, "One offset per session instead of a causal window");

  RiskArgs ra;
  auto* risk_cmd = app.add_subcommand("risk-map", "Compute the attentive-vs-distracted EMD risk map");
  risk_cmd->add_option("--ckpt", ra.ckpt, "Distraction-conditioned checkpoint")->required();
  risk_cmd->add_option("--data", ra.data, "Session directory")->envname("DRIVATT_DATA");
  risk_cmd->add_option("--out", ra.out, "Risk table path")->required();
  risk_cmd->add_option("--neighborhood", ra.neighborhood, "Median window side (world cells)");
  risk_cmd->add_option("--cell-size", ra.cell_size, "World cell size (meters)");
  risk_cmd->add_option("--downsample", ra.downsample, "Map downsampling factor (0 = auto)");

  std::string render_table, render_out;
  int render_w = 640, render_h = 320;
  auto* render_cmd = app.add_subcommand("render-risk", "Render a risk table as a PPM heat-scatter");
  render_cmd->add_option("--table", render_table, "Risk table")->required();
  render_cmd->add_option("--out", render_out, "Image path (.ppm)")->required();
  render_cmd->add_option("--width", render_w, "Image width");
  render_cmd->add_option("--height", render_h, "Image height");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(sa);
    if (*train_cmd) return run_train(ta);
    if (*eval_cmd) return run_evaluate(ea);
    if (*cal_cmd) return run_calibrate(ca);
    if (*risk_cmd) return run_risk(ra);
    if (*render_cmd) return run_render(render_table, render_out, render_w, render_h);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
