#include "drivatt/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "drivatt/errors.hpp"

namespace drivatt::checkpoint {

using nlohmann::json;

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::attention_model:
      return "attention_model";
    case Kind::calibration_net:
      return "calibration_net";
    case Kind::reference_oracle:
      return "reference_oracle";
    case Kind::reference_uniform:
      return "reference_uniform";
  }
  return "?";
}

namespace {

Kind parse_kind(const std::string& s) {
  for (Kind k : {Kind::attention_model, Kind::calibration_net, Kind::reference_oracle, Kind::reference_uniform})
    if (s == to_string(k)) return k;
  throw FormatError("unknown checkpoint kind '" + s + "'");
}

json encoder_json(const models::EncoderConfig& e) {
  return {{"backbone", std::string(models::to_string(e.backbone))},
          {"feature_channels", e.feature_channels},
          {"temporal", std::string(models::to_string(e.temporal))},
          {"stem_channels", e.stem_channels},
          {"scene_height", e.scene_height},
          {"scene_width", e.scene_width}};
}

models::EncoderConfig encoder_from(const json& j) {
  models::EncoderConfig e;
  e.backbone = models::parse_backbone(j.at("backbone").get<std::string>());
  e.feature_channels = j.at("feature_channels").get<int>();
  e.temporal = models::parse_temporal(j.at("temporal").get<std::string>());
  e.stem_channels = j.at("stem_channels").get<int>();
  e.scene_height = j.at("scene_height").get<int>();
  e.scene_width = j.at("scene_width").get<int>();
  return e;
}

json head_json(const models::HeadConfig& h) {
  return {{"channels", h.channels}, {"dropout", h.dropout}, {"coord_channels", h.coord_channels}};
}

models::HeadConfig head_from(const json& j) {
  models::HeadConfig h;
  h.channels = j.at("channels").get<int>();
  h.dropout = j.at("dropout").get<double>();
  h.coord_channels = j.at("coord_channels").get<bool>();
  return h;
}

json params_json(const nn::ParameterSet& params) {
  json out = json::array();
  for (const auto& [name, v] : params.entries()) {
    const auto d = v->value.data();
    out.push_back({{"name", name}, {"shape", v->value.shape()}, {"data", std::vector<double>(d.begin(), d.end())}});
  }
  return out;
}

void load_params(const json& j, nn::ParameterSet& params, const std::string& path) {
  if (j.size() != params.size())
    throw FormatError("checkpoint '" + path + "' holds " + std::to_string(j.size()) + " parameter tensors, expected " +
                      std::to_string(params.size()));
  for (const json& p : j) {
    const auto name = p.at("name").get<std::string>();
    const nn::Var v = params.find(name);
    if (!v) throw FormatError("checkpoint '" + path + "' has unexpected parameter '" + name + "'");
    const auto shape = p.at("shape").get<std::vector<int>>();
    if (shape != v->value.shape())
      throw FormatError("checkpoint '" + path + "' parameter '" + name + "' has shape " + nn::shape_string(shape) +
                        ", model expects " + nn::shape_string(v->value.shape()));
    const auto data = p.at("data").get<std::vector<double>>();
    if (data.size() != v->value.size()) throw FormatError("checkpoint '" + path + "' parameter '" + name + "' is truncated");
    std::copy(data.begin(), data.end(), v->value.data().begin());
  }
}

json meta_json(const Meta& m) {
  return {{"seed", m.seed}, {"config_hash", m.config_hash}, {"per_split", m.per_split}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out << j.dump() << '\n';
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  const int version = j.value("format_version", -1);
  if (version != kCheckpointFormatVersion)
    throw VersionMismatch("checkpoint '" + path.string() + "' has format version " + std::to_string(version) +
                          ", expected " + std::to_string(kCheckpointFormatVersion));
  return j;
}

json header(Kind kind) { return {{"format_version", kCheckpointFormatVersion}, {"kind", std::string(to_string(kind))}}; }

template <typename F>
auto guarded(const std::filesystem::path& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError("checkpoint '" + path.string() + "' is malformed: " + e.what());
  }
}

}  // namespace

void save_attention_model(const std::filesystem::path& path, const models::AttentionModel& model, const Meta& meta) {
  const models::ModelConfig& c = model.config();
  json j = header(Kind::attention_model);
  j["meta"] = meta_json(meta);
  j["config"] = {{"model", std::string(models::to_string(c.kind.kind))},
                 {"condition", std::string(to_string(c.kind.condition_type))},
                 {"encoder", encoder_json(c.encoder)},
                 {"head", head_json(c.head)},
                 {"num_experts", c.num_experts},
                 {"cond_dropout", c.cond_dropout}};
  j["parameters"] = params_json(model.parameters());
  write_json(path, j);
}

void save_calibration_net(const std::filesystem::path& path, const calibration::CalibrationNet& net,
                          const Meta& meta) {
  const calibration::CalibrationNetConfig& c = net.config();
  json j = header(Kind::calibration_net);
  j["meta"] = meta_json(meta);
  j["config"] = {{"encoder", encoder_json(c.encoder)},
                 {"head", head_json(c.head)},
                 {"trained_on_centered", c.trained_on_centered}};
  j["parameters"] = params_json(net.parameters());
  write_json(path, j);
}

void save_reference(const std::filesystem::path& path, Kind kind, ConditionType condition) {
  if (kind != Kind::reference_oracle && kind != Kind::reference_uniform)
    throw InvalidArgument("save_reference needs a reference kind");
  json j = header(kind);
  j["meta"] = meta_json({});
  j["config"] = {{"condition", std::string(to_string(condition))}};
  write_json(path, j);
}

Kind checkpoint_kind(const std::filesystem::path& path) {
  const json j = read_json(path);
  return guarded(path, [&] { return parse_kind(j.at("kind").get<std::string>()); });
}

Meta checkpoint_meta(const std::filesystem::path& path) {
  const json j = read_json(path);
  return guarded(path, [&] {
    const json& m = j.at("meta");
    return Meta{m.at("seed").get<std::uint64_t>(), m.at("config_hash").get<std::uint64_t>(), m.value("per_split", 20)};
  });
}

std::unique_ptr<models::AttentionModel> load_attention_model(const std::filesystem::path& path) {
  const json j = read_json(path);
  return guarded(path, [&] {
    const Kind kind = parse_kind(j.at("kind").get<std::string>());
    if (kind != Kind::attention_model)
      throw InvalidArgument("checkpoint '" + path.string() + "' holds a " + std::string(to_string(kind)) +
                            ", not an attention model");
    const json& c = j.at("config");
    models::ModelConfig cfg;
    cfg.kind.kind = models::parse_model_type(c.at("model").get<std::string>());
    cfg.kind.condition_type = parse_condition_type(c.at("condition").get<std::string>());
    cfg.encoder = encoder_from(c.at("encoder"));
    cfg.head = head_from(c.at("head"));
    cfg.num_experts = c.at("num_experts").get<int>();
    cfg.cond_dropout = c.at("cond_dropout").get<double>();
    if (cfg.encoder.backbone == models::Backbone::pretrained_external)
      throw FormatError("checkpoint '" + path.string() + "' needs an externally supplied feature extractor");
    auto model = std::make_unique<models::AttentionModel>(cfg, 0);
    load_params(j.at("parameters"), model->parameters(), path.string());
    return model;
  });
}

std::unique_ptr<calibration::CalibrationNet> load_calibration_net(const std::filesystem::path& path) {
  const json j = read_json(path);
  return guarded(path, [&] {
    const Kind kind = parse_kind(j.at("kind").get<std::string>());
    if (kind != Kind::calibration_net)
      throw InvalidArgument("checkpoint '" + path.string() + "' holds a " + std::string(to_string(kind)) +
                            ", not a calibration network");
    const json& c = j.at("config");
    calibration::CalibrationNetConfig cfg;
    cfg.encoder = encoder_from(c.at("encoder"));
    cfg.head = head_from(c.at("head"));
    cfg.trained_on_centered = c.at("trained_on_centered").get<bool>();
    auto net = std::make_unique<calibration::CalibrationNet>(cfg, 0);
    load_params(j.at("parameters"), net->parameters(), path.string());
    return net;
  });
}

std::unique_ptr<models::AttentionPredictor> load_predictor(const std::filesystem::path& path) {
  const Kind kind = checkpoint_kind(path);
  if (kind == Kind::attention_model) return load_attention_model(path);
  if (kind == Kind::calibration_net)
    throw InvalidArgument("checkpoint '" + path.string() + "' holds a calibration network, not an attention model");
  const json j = read_json(path);
  const ConditionType condition =
      guarded(path, [&] { return parse_condition_type(j.at("config").at("condition").get<std::string>()); });
  if (kind == Kind::reference_oracle) return std::make_unique<models::OraclePredictor>(condition);
  return std::make_unique<models::UniformPredictor>(condition);
}

void copy_parameters(const nn::ParameterSet& from, nn::ParameterSet& to) {
  if (from.size() != to.size()) throw ShapeMismatch("parameter sets differ in size");
  for (const auto& [name, v] : from.entries()) {
    const nn::Var dst = to.find(name);
    if (!dst || dst->value.shape() != v->value.shape()) throw ShapeMismatch("parameter '" + name + "' does not match");
    std::copy(v->value.data().begin(), v->value.data().end(), dst->value.data().begin());
  }
}

}  // namespace drivatt::checkpoint
