#include "drivatt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <json.hpp>
#include <sstream>

#include "drivatt/errors.hpp"

namespace drivatt::pipeline {

using nlohmann::json;

std::vector<FrameRange> extract_intersection_sequences(const SessionRecord& session, double radius) {
  std::vector<FrameRange> out;
  const auto& f = session.frames;
  std::size_t i = 0;
  while (i < f.size()) {
    if (!(f[i].dist_to_intersection <= radius)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    std::size_t best = i;
    while (i < f.size() && f[i].dist_to_intersection <= radius) {
      if (f[i].dist_to_intersection < f[best].dist_to_intersection) best = i;
      ++i;
    }
    if (best > start) out.push_back({start, best + 1});
  }
  return out;
}

std::vector<FrameRange> extract_lane_following(const SessionRecord& session, double radius) {
  std::vector<FrameRange> out;
  const auto& f = session.frames;
  std::size_t i = 0;
  while (i < f.size()) {
    if (!(f[i].dist_to_intersection > radius)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < f.size() && f[i].dist_to_intersection > radius) ++i;
    out.push_back({start, i});
  }
  return out;
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::intersection:
      return "intersection";
    case Scenario::lane_following:
      return "lane_following";
    case Scenario::session:
      return "session";
  }
  return "?";
}

void SplitSpec::validate() const {
  if (!(intersection_radius > 0.0)) throw InvalidArgument("intersection_radius must be > 0");
  if (sequences_per_label_per_split < 1) throw InvalidArgument("sequences per label per split must be >= 1");
  if (min_sequence_frames < 1 || max_sequence_frames < min_sequence_frames)
    throw InvalidArgument("need 1 <= min_sequence_frames <= max_sequence_frames");
}

SplitSpec SplitSpec::defaults(ConditionType condition) {
  SplitSpec s;
  if (condition == ConditionType::intention) s.mode_filter = DriveMode::manual;
  if (condition == ConditionType::distraction) s.mode_filter = DriveMode::autopilot;
  return s;
}

namespace {

void push_chunks(std::vector<Sequence>& out, const SessionRecord& s, std::size_t session, FrameRange r,
                 Scenario scenario, const SplitSpec& spec) {
  std::size_t i = r.begin;
  while (i < r.end) {
    std::size_t j = i + 1;
    while (j < r.end && s.frames[j].state == s.frames[i].state) ++j;
    for (std::size_t a = i; a < j; a += static_cast<std::size_t>(spec.max_sequence_frames)) {
      const std::size_t b = std::min(j, a + static_cast<std::size_t>(spec.max_sequence_frames));
      if (b - a >= static_cast<std::size_t>(spec.min_sequence_frames))
        out.push_back({session, {a, b}, scenario, state_label(s.frames[a].state)});
    }
    i = j;
  }
}

}  // namespace

std::vector<Sequence> extract_sequences(std::span<const SessionRecord> sessions, ConditionType condition,
                                        const SplitSpec& spec) {
  spec.validate();
  if (condition == ConditionType::none) throw InvalidArgument("sequence extraction needs a condition type");
  std::vector<Sequence> out;
  for (std::size_t si = 0; si < sessions.size(); ++si) {
    const SessionRecord& s = sessions[si];
    if (spec.mode_filter && s.mode != *spec.mode_filter) continue;
    const bool matches = std::all_of(s.frames.begin(), s.frames.end(),
                                     [&](const FrameSample& f) { return f.state.kind == condition; });
    if (!matches) continue;
    const auto approaches = extract_intersection_sequences(s, spec.intersection_radius);
    if (condition == ConditionType::intention) {
      for (const FrameRange& r : approaches) {
        if (r.size() < static_cast<std::size_t>(spec.min_sequence_frames)) continue;
        out.push_back({si, r, Scenario::intersection, state_label(s.frames[r.end - 1].state)});
      }
    } else {
      for (const FrameRange& r : approaches) push_chunks(out, s, si, r, Scenario::intersection, spec);
      for (const FrameRange& r : extract_lane_following(s, spec.intersection_radius))
        push_chunks(out, s, si, r, Scenario::lane_following, spec);
    }
  }
  return out;
}

Splits make_splits(std::span<const Sequence> sequences, int count, std::mt19937_64& rng) {
  if (count < 1) throw InvalidArgument("split count must be >= 1");
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < sequences.size(); ++i) by_label[sequences[i].label].push_back(i);
  const auto n = static_cast<std::size_t>(count);
  for (const auto& [label, idx] : by_label)
    if (idx.size() < 2 * n)
      throw InvalidArgument("label '" + label + "' has " + std::to_string(idx.size()) + " sequences, need at least " +
                            std::to_string(2 * n) + " for validation and test");
  Splits s;
  for (auto& [label, idx] : by_label) {
    std::shuffle(idx.begin(), idx.end(), rng);
    s.val.insert(s.val.end(), idx.begin(), idx.begin() + n);
    s.test.insert(s.test.end(), idx.begin() + n, idx.begin() + 2 * n);
    s.train.insert(s.train.end(), idx.begin() + 2 * n, idx.end());
  }
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

ReweightedSampler::ReweightedSampler(std::span<const std::string> labels, std::uint64_t seed) : rng_(seed) {
  if (labels.empty()) throw InvalidArgument("sampler needs at least one sequence");
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  for (auto& [label, idx] : by_label) groups_.push_back(std::move(idx));
}

std::size_t ReweightedSampler::next() {
  const auto g = std::uniform_int_distribution<std::size_t>(0, groups_.size() - 1)(rng_);
  const auto& group = groups_[g];
  return group[std::uniform_int_distribution<std::size_t>(0, group.size() - 1)(rng_)];
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning_rate must be >= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) throw InvalidArgument("betas must lie in (0, 1)");
  if (!(eps_opt > 0.0)) throw InvalidArgument("eps_opt must be > 0");
  if (!(weight_decay > 0.0)) throw InvalidArgument("weight_decay must be > 0");
  if (batch_size < 1 || max_epochs < 1 || early_stop_patience < 1)
    throw InvalidArgument("batch_size, max_epochs and early_stop_patience must be >= 1");
}

std::vector<Example> make_examples(std::span<const SessionRecord> sessions, std::span<const Sequence> sequences,
                                   std::span<const std::size_t> indices) {
  std::vector<Example> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const Sequence& q = sequences[i];
    if (q.session >= sessions.size() || q.range.end > sessions[q.session].frames.size() || q.range.size() == 0)
      throw InvalidArgument("sequence refers to frames outside its session");
    Example ex;
    ex.frames = std::span<const FrameSample>(sessions[q.session].frames).subspan(q.range.begin, q.range.size());
    for (const FrameSample& f : ex.frames) ex.states.push_back(f.state);
    ex.label = q.label;
    ex.scenario = q.scenario;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> make_calibration_examples(std::span<const SessionRecord> sessions,
                                               const calibration::CalibrationConfig& cfg, int chunk_frames) {
  if (chunk_frames < 0) throw InvalidArgument("chunk_frames must be >= 0");
  std::vector<Example> out;
  for (const SessionRecord& s : sessions) {
    const std::vector<AttentionMap> inputs = calibration::coarse_stage(s, cfg);
    const std::size_t chunk = chunk_frames ? static_cast<std::size_t>(chunk_frames) : s.frames.size();
    for (std::size_t a = 0; a < s.frames.size(); a += chunk) {
      const std::size_t b = std::min(s.frames.size(), a + chunk);
      Example ex;
      ex.frames = std::span<const FrameSample>(s.frames).subspan(a, b - a);
      for (const FrameSample& f : ex.frames) ex.states.push_back(f.state);
      ex.inputs.assign(inputs.begin() + static_cast<std::ptrdiff_t>(a), inputs.begin() + static_cast<std::ptrdiff_t>(b));
      ex.label = "all";
      ex.scenario = Scenario::session;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

namespace {

std::span<const DriverState> states_for(const models::AttentionPredictor& p, const Example& ex) {
  if (p.condition_type() == ConditionType::none) return {};
  return ex.states;
}

}  // namespace

nn::Var ModelTrainable::loss(const Example& ex, const models::ForwardContext& ctx) const {
  return model_.sequence_loss(ex.frames, states_for(model_, ex), ctx);
}

std::vector<AttentionMap> ModelTrainable::infer(const Example& ex) const {
  return model_.predict(ex.frames, states_for(model_, ex));
}

nn::Var CalibrationTrainable::loss(const Example& ex, const models::ForwardContext& ctx) const {
  return net_.sequence_loss(ex.frames, ex.inputs, ctx);
}

std::vector<AttentionMap> CalibrationTrainable::infer(const Example& ex) const {
  return net_.calibrate(ex.frames, ex.inputs);
}

metrics::MetricReport evaluate_examples(const Trainable& model, std::span<const Example> data) {
  metrics::MetricAccumulator acc;
  for (const Example& ex : data) {
    const std::vector<AttentionMap> pred = model.infer(ex);
    for (std::size_t t = 0; t < ex.frames.size(); ++t) acc.add(pred[t], ex.frames[t].gt_map);
  }
  return acc.report();
}

TrainHistory train(Trainable& model, std::span<const Example> train_data, std::span<const Example> val_data,
                   const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train_data.empty()) throw InvalidArgument("training data is empty");

  nn::ParameterSet& params = model.parameters();
  nn::Adam adam(params, {cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps_opt, cfg.weight_decay});
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x7a11u};
  std::mt19937_64 dropout_rng(seq);
  std::vector<std::string> labels;
  for (const Example& ex : train_data) labels.push_back(ex.label);
  ReweightedSampler sampler(labels, dropout_rng());
  const models::ForwardContext ctx{true, &dropout_rng};

  auto snapshot = [&] {
    std::vector<std::vector<double>> s;
    for (const auto& [name, v] : params.entries()) s.emplace_back(v->value.data().begin(), v->value.data().end());
    return s;
  };

  TrainHistory history;
  std::vector<std::vector<double>> best;
  double best_kl = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const std::size_t batches = (train_data.size() + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      params.zero_grad();
      for (int k = 0; k < cfg.batch_size; ++k) {
        const Example& ex = train_data[sampler.next()];
        nn::Var loss = model.loss(ex, ctx);
        const double value = loss->value.item();
        if (!std::isfinite(value))
          throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
        nn::backward(nn::scale(loss, 1.0 / cfg.batch_size));
        loss_sum += value;
        ++loss_count;
      }
      adam.step();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(loss_count);
    if (!val_data.empty()) {
      rec.val = evaluate_examples(model, val_data);
      if (!std::isfinite(rec.val->kl)) throw DivergenceError("validation KL became non-finite");
      if (rec.val->kl < best_kl) {
        best_kl = rec.val->kl;
        best = snapshot();
        history.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      history.best_epoch = epoch;
    }
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (!val_data.empty() && since_best >= cfg.early_stop_patience) {
      history.early_stopped = true;
      break;
    }
  }
  if (!best.empty()) {
    std::size_t i = 0;
    for (const auto& [name, v] : params.entries()) std::copy(best[i].begin(), best[i].end(), v->value.data().begin()), ++i;
  }
  return history;
}

EvalReport evaluate_predictions(std::span<const Example> data,
                                std::span<const std::vector<AttentionMap>> predictions) {
  if (data.size() != predictions.size()) throw ShapeMismatch("one prediction list per example is required");
  std::map<std::pair<std::string, std::string>, metrics::MetricAccumulator> groups;
  metrics::MetricAccumulator overall;
  for (std::size_t e = 0; e < data.size(); ++e) {
    const Example& ex = data[e];
    if (predictions[e].size() != ex.frames.size()) throw ShapeMismatch("one prediction per frame is required");
    for (std::size_t t = 0; t < ex.frames.size(); ++t) {
      const AttentionMap& gt = ex.frames[t].gt_map;
      groups[{std::string(to_string(ex.scenario)), state_label(ex.frames[t].state)}].add(predictions[e][t], gt);
      overall.add(predictions[e][t], gt);
    }
  }
  if (overall.count() == 0) throw InvalidArgument("evaluation data contains no frames");
  EvalReport r;
  for (const auto& [key, acc] : groups) r.rows.push_back({key.first, key.second, acc.report()});
  r.overall = overall.report();
  return r;
}

EvalReport evaluate(const models::AttentionPredictor& predictor, std::span<const Example> data) {
  std::vector<std::vector<AttentionMap>> predictions;
  predictions.reserve(data.size());
  for (const Example& ex : data) predictions.push_back(predictor.predict(ex.frames, states_for(predictor, ex)));
  return evaluate_predictions(data, predictions);
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json meta_json(const RunMeta& m) {
  json j = {{"command", m.command}, {"seed", m.seed}, {"config_hash", hash_hex(m.config_hash)}};
  for (const auto& [k, v] : m.extra) j[k] = v;
  return j;
}

json report_record(const std::string& scenario, const std::string& condition, const char* metric, double value,
                   std::size_t frames) {
  return {{"scenario", scenario}, {"condition", condition}, {"metric", metric}, {"value", number_or_null(value)},
          {"frames", frames}};
}

}  // namespace

std::string report_json(const EvalReport& report, const RunMeta& meta) {
  json records = json::array();
  auto add = [&](const std::string& scenario, const std::string& condition, const metrics::MetricReport& m) {
    records.push_back(report_record(scenario, condition, "cc", m.cc, m.cc_count));
    records.push_back(report_record(scenario, condition, "kl", m.kl, m.count));
    records.push_back(report_record(scenario, condition, "entropy", m.entropy, m.count));
  };
  for (const EvalRow& row : report.rows) add(row.scenario, row.condition, row.report);
  add("all", "all", report.overall);
  return json{{"meta", meta_json(meta)}, {"records", records}}.dump(2) + "\n";
}

void write_report(const std::filesystem::path& path, const EvalReport& report, const RunMeta& meta) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report '" + path.string() + "'");
  out << report_json(report, meta);
  if (!out) throw std::runtime_error("failed writing report '" + path.string() + "'");
}

std::string format_table(const EvalReport& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %-12s %8s %8s %8s %7s\n", "scenario", "condition", "CC(+)", "H(-)", "KL(-)",
                "frames");
  os << line;
  auto row = [&](const std::string& s, const std::string& c, const metrics::MetricReport& m) {
    std::snprintf(line, sizeof line, "%-16s %-12s %8.4f %8.4f %8.4f %7zu\n", s.c_str(), c.c_str(), m.cc, m.entropy,
                  m.kl, m.count);
    os << line;
  };
  for (const EvalRow& r : report.rows) row(r.scenario, r.condition, r.report);
  row("all", "all", report.overall);
  return os.str();
}

std::string history_json(const TrainHistory& history, const RunMeta& meta) {
  json epochs = json::array();
  for (const EpochRecord& e : history.epochs) {
    json rec = {{"epoch", e.epoch}, {"train_loss", number_or_null(e.train_loss)}};
    if (e.val)
      rec["val"] = {{"cc", number_or_null(e.val->cc)}, {"kl", number_or_null(e.val->kl)},
                    {"entropy", number_or_null(e.val->entropy)}};
    epochs.push_back(rec);
  }
  return json{{"meta", meta_json(meta)},
              {"epochs", epochs},
              {"best_epoch", history.best_epoch},
              {"early_stopped", history.early_stopped}}
             .dump(2) +
         "\n";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace drivatt::pipeline
