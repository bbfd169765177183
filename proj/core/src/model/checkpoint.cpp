#include "sigpointer/model/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "sigpointer/errors.hpp"
#include "sigpointer/numcore/tensor_io.hpp"

namespace sigpointer::model {

namespace fs = std::filesystem;

AnyModel::AnyModel(const ModelConfig& config, std::uint64_t seed) {
  using Variant = std::variant<SigPointer<float>, EncoderBaseline<float>>;
  if (config.kind == ModelKind::sigpointer) {
    model_ = std::make_unique<Variant>(std::in_place_type<SigPointer<float>>, config, seed);
  } else {
    model_ = std::make_unique<Variant>(std::in_place_type<EncoderBaseline<float>>, config, seed);
  }
}

const ModelConfig& AnyModel::config() const {
  return std::visit([](const auto& m) -> const ModelConfig& { return m.config(); }, *model_);
}

ParameterSet<float>& AnyModel::parameters() {
  return std::visit([](auto& m) -> ParameterSet<float>& { return m.parameters(); }, *model_);
}

const ParameterSet<float>& AnyModel::parameters() const {
  return std::visit([](const auto& m) -> const ParameterSet<float>& { return m.parameters(); }, *model_);
}

std::vector<std::size_t> AnyModel::predict(const num::Tensor<float>& frames) const {
  if (const auto* p = pointer()) return p->infer(frames).labels;
  return baseline()->infer(frames);
}

void AnyModel::copy_parameters_from(const AnyModel& other) {
  auto& mine = parameters().items();
  const auto& theirs = other.parameters().items();
  if (mine.size() != theirs.size()) throw VersionError("parameter layouts differ");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    auto dst = mine[i].second;
    const auto& src = theirs[i].second;
    if (mine[i].first != theirs[i].first || dst.shape() != src.shape()) throw VersionError("parameter layouts differ");
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  }
}

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(c.kind);
  j["encoder_layers"] = c.encoder_layers;
  j["decoder_layers"] = c.decoder_layers;
  j["heads"] = c.heads;
  j["ff_width"] = c.ff_width;
  j["dropout"] = c.dropout;
  j["latent"] = c.latent;
  j["max_frames"] = c.max_frames;
  j["max_decode_steps"] = c.max_decode_steps;
  j["activation"] = to_string(c.activation);
  j["eos_position"] = to_string(c.eos_position);
  j["prune_pointer_tail"] = c.prune_pointer_tail;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.kind = model_kind_from_string(j.at("kind").get<std::string>());
    c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
    c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.ff_width = j.at("ff_width").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.latent = j.at("latent").get<std::size_t>();
    c.max_frames = j.at("max_frames").get<std::size_t>();
    c.max_decode_steps = j.at("max_decode_steps").get<std::size_t>();
    c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.eos_position = eos_position_from_string(j.at("eos_position").get<std::string>());
    c.prune_pointer_tail = j.at("prune_pointer_tail").get<bool>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw VersionError(std::string("unreadable model config: ") + e.what());
  }
}

namespace {

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace

void save_checkpoint(const fs::path& dir, const AnyModel& model, const features::FeatureNormalizer& normalizer,
                     const nlohmann::json& meta) {
  fs::create_directories(dir / "params");
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["model"] = config_to_json(model.config());
  j["parameters"] = nlohmann::ordered_json::array();
  for (const auto& [name, t] : model.parameters().items()) {
    j["parameters"].push_back(name);
    num::save_tensor(dir / "params" / (name + ".sgpt"), t);
  }
  j["meta"] = meta;
  if (normalizer.fitted()) {
    num::save_tensor(dir / "feature_mean.sgpt", {normalizer.mean.size()}, to_float(normalizer.mean));
    num::save_tensor(dir / "feature_std.sgpt", {normalizer.stddev.size()}, to_float(normalizer.stddev));
  }
  std::ofstream out(dir / "config.json", std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing checkpoint " + dir.string());
}

bool is_checkpoint(const fs::path& dir) { return fs::is_regular_file(dir / "config.json"); }

namespace {

nlohmann::json read_config(const fs::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw DataError("no checkpoint at " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint config in " + dir.string() + ": " + e.what());
  }
  if (j.value("format", -1) != kCheckpointFormat) {
    throw VersionError("checkpoint " + dir.string() + " has format " + std::to_string(j.value("format", -1)) +
                       ", expected " + std::to_string(kCheckpointFormat));
  }
  return j;
}

}  // namespace

void load_parameters(const fs::path& dir, AnyModel& model) {
  const auto j = read_config(dir);
  if (config_from_json(j.at("model")) != model.config())
    throw VersionError("checkpoint " + dir.string() + " was written for a different model config");
  for (auto& [name, t] : model.parameters().items()) {
    const auto path = dir / "params" / (name + ".sgpt");
    if (!fs::exists(path)) throw VersionError("checkpoint lacks parameter " + name);
    const auto stored = num::load_tensor(path);
    if (stored.shape != t.shape()) {
      throw VersionError("parameter " + name + " has shape " + num::shape_string(stored.shape) + ", model expects " +
                         num::shape_string(t.shape()));
    }
    auto dst = t;
    std::copy(stored.values.begin(), stored.values.end(), dst.mutable_data().begin());
  }
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const auto j = read_config(dir);
  Checkpoint ck;
  ck.model = std::make_unique<AnyModel>(config_from_json(j.at("model")), 0);
  load_parameters(dir, *ck.model);
  ck.meta = j.value("meta", nlohmann::json::object());
  if (fs::exists(dir / "feature_mean.sgpt")) {
    const auto mean = num::load_tensor(dir / "feature_mean.sgpt");
    const auto sd = num::load_tensor(dir / "feature_std.sgpt");
    ck.normalizer.mean.assign(mean.values.begin(), mean.values.end());
    ck.normalizer.stddev.assign(sd.values.begin(), sd.values.end());
  }
  return ck;
}

}  // namespace sigpointer::model
