#include "ami/inference/types.hpp"

#include "ami/core/error.hpp"

namespace ami::inference {

using json = nlohmann::json;

std::string_view to_string(BinaryLabel label) { return label == BinaryLabel::moth ? "moth" : "non_moth"; }

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::detector: return "detector";
    case Stage::binary: return "binary";
    case Stage::species: return "species";
    case Stage::life_stage: return "life_stage";
  }
  return "?";
}

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::stub_fixture: return "stub_fixture";
    case Backend::blob: return "blob";
    case Backend::external_runtime: return "external_runtime";
  }
  return "?";
}

Stage parse_stage(std::string_view text) {
  for (Stage s : {Stage::detector, Stage::binary, Stage::species, Stage::life_stage})
    if (to_string(s) == text) return s;
  throw ConfigurationError("unknown stage '" + std::string(text) + "'");
}

Backend parse_backend(std::string_view text) {
  for (Backend b : {Backend::stub_fixture, Backend::blob, Backend::external_runtime})
    if (to_string(b) == text) return b;
  throw ConfigurationError("unknown backend '" + std::string(text) + "'");
}

void validate(const ModelSpec& spec) {
  if (!(spec.threshold >= 0.0 && spec.threshold <= 1.0))
    throw ConfigurationError(std::string(to_string(spec.stage)) + " threshold must lie in [0,1]");
  if (spec.input_resolution <= 0) throw ConfigurationError("input_resolution must be positive");
  if (spec.backend == Backend::blob && spec.stage != Stage::detector)
    throw ConfigurationError("the blob backend only implements the detector stage");
}

json to_json(const ModelSpec& spec) {
  return {{"stage", to_string(spec.stage)},
          {"backend", to_string(spec.backend)},
          {"model_uri", spec.model_uri},
          {"threshold", spec.threshold},
          {"input_resolution", spec.input_resolution}};
}

ModelSpec model_spec_from_json(const json& j) {
  try {
    ModelSpec s;
    s.stage = parse_stage(j.at("stage").get<std::string>());
    s.backend = parse_backend(j.at("backend").get<std::string>());
    s.model_uri = j.value("model_uri", "");
    s.threshold = j.value("threshold", 0.5);
    s.input_resolution = j.value("input_resolution", 128);
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("model spec: ") + e.what());
  }
}

json to_json(const StageSpecs& specs) {
  json j = {{"detector", to_json(specs.detector)}, {"binary", to_json(specs.binary)}, {"top_k", specs.top_k}};
  if (specs.species) j["species"] = to_json(*specs.species);
  if (specs.life_stage) j["life_stage"] = to_json(*specs.life_stage);
  return j;
}

StageSpecs stage_specs_from_json(const json& j) {
  if (!j.is_object()) throw ConfigurationError("stage specs must be a JSON object");
  if (!j.contains("detector") || !j.contains("binary"))
    throw ConfigurationError("stage specs require detector and binary entries");
  StageSpecs s;
  auto expect = [](const ModelSpec& m, Stage st) {
    if (m.stage != st)
      throw ConfigurationError("spec under '" + std::string(to_string(st)) + "' declares stage '" +
                               std::string(to_string(m.stage)) + "'");
    return m;
  };
  s.detector = expect(model_spec_from_json(j["detector"]), Stage::detector);
  s.binary = expect(model_spec_from_json(j["binary"]), Stage::binary);
  if (j.contains("species") && !j["species"].is_null())
    s.species = expect(model_spec_from_json(j["species"]), Stage::species);
  if (j.contains("life_stage") && !j["life_stage"].is_null())
    s.life_stage = expect(model_spec_from_json(j["life_stage"]), Stage::life_stage);
  s.top_k = j.value("top_k", 5);
  if (s.top_k < 1) throw ConfigurationError("top_k must be at least 1");
  return s;
}

json to_json(const BoundingBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BoundingBox bounding_box_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

json to_json(const Detection& d) {
  json j = {{"index", d.index}, {"box", to_json(d.box)}, {"det_score", d.det_score}};
  if (d.binary) j["binary"] = {{"label", to_string(d.binary->label)}, {"score", d.binary->score}};
  if (d.species) {
    json arr = json::array();
    for (const auto& s : *d.species) arr.push_back({{"taxon_key", s.taxon_key}, {"probability", s.probability}});
    j["species"] = std::move(arr);
  }
  if (d.feature) j["feature"] = *d.feature;
  if (d.life_stage) j["life_stage"] = {{"label", d.life_stage->label}, {"score", d.life_stage->score}};
  return j;
}

Detection detection_from_json(const json& j) {
  Detection d;
  d.index = j.at("index").get<std::size_t>();
  d.box = bounding_box_from_json(j.at("box"));
  d.det_score = j.at("det_score").get<double>();
  if (j.contains("binary")) {
    const auto& b = j["binary"];
    d.binary = BinaryResult{b.at("label").get<std::string>() == "moth" ? BinaryLabel::moth : BinaryLabel::non_moth,
                            b.at("score").get<double>()};
  }
  if (j.contains("species")) {
    d.species.emplace();
    for (const auto& s : j["species"])
      d.species->push_back({s.at("taxon_key").get<TaxonKey>(), s.at("probability").get<double>()});
  }
  if (j.contains("feature")) d.feature = j["feature"].get<std::vector<double>>();
  if (j.contains("life_stage"))
    d.life_stage = LifeStageResult{j["life_stage"].at("label").get<std::string>(),
                                   j["life_stage"].at("score").get<double>()};
  return d;
}

}  // namespace ami::inference
