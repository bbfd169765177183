#include "sigpointer/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sigpointer/errors.hpp"
#include "sigpointer/numcore/random.hpp"

namespace sigpointer::cli {

namespace pt = boost::property_tree;

// Seeds share the size_t overloads below.
static_assert(std::is_same_v<std::uint64_t, std::size_t>);

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

namespace {

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) throw InputError("config: " + key + " is not a number: " + text);
  return v;
}

template <typename U>
U parse_unsigned(const std::string& key, const std::string& text) {
  U v{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw InputError("config: " + key + " is not a non-negative integer: " + text);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw InputError("config: " + key + " must be true or false, got " + text);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// Binds every config field to a section.key, in both directions.
template <typename Visit>
void visit_fields(Visit&& v, auto& c) {
  v("experiment.out_dir", c.out_dir);
  v("experiment.seed", c.seed);
  v("experiment.stages", c.stages);
  for (int s = 1; s <= 3; ++s) {
    const std::string p = "data.stage" + std::to_string(s) + "_";
    v(p + "train", c.sizes[s - 1].train);
    v(p + "val", c.sizes[s - 1].val);
    v(p + "test", c.sizes[s - 1].test);
  }
  auto& d = c.data;
  v("data.variant", d.variant);
  v("data.min_seconds", d.min_seconds);
  v("data.max_seconds", d.max_seconds);
  v("data.min_segment_seconds", d.min_segment_seconds);
  v("data.add_noise", d.add_noise);
  v("data.snr_min_db", d.snr_min_db);
  v("data.snr_max_db", d.snr_max_db);
  v("data.noise_type", d.noise_type);
  v("data.codecs", d.codecs);
  v("data.strength_min", d.strength_min);
  v("data.strength_max", d.strength_max);
  v("data.codec_runs", d.codec_runs);
  v("data.external_command", d.external_command);
  v("data.environments", d.environments);
  v("data.write_audio", d.write_audio);
  auto& f = d.features;
  v("features.sample_rate", f.sample_rate);
  v("features.win_len", f.win_len);
  v("features.hop", f.hop);
  v("features.n_fft", f.n_fft);
  v("features.n_mels", f.n_mels);
  v("features.n_mfcc", f.n_mfcc);
  v("features.block_seconds", f.block_seconds);
  v("features.min_seconds", f.min_seconds);
  auto& m = c.model;
  v("model.kind", m.kind);
  v("model.encoder_layers", m.encoder_layers);
  v("model.decoder_layers", m.decoder_layers);
  v("model.heads", m.heads);
  v("model.ff_width", m.ff_width);
  v("model.dropout", m.dropout);
  v("model.latent", m.latent);
  v("model.max_frames", m.max_frames);
  v("model.max_decode_steps", m.max_decode_steps);
  v("model.activation", m.activation);
  v("model.eos_position", m.eos_position);
  v("model.prune_pointer_tail", m.prune_pointer_tail);
  auto& t = c.train;
  v("train.lr", t.lr);
  v("train.batch", t.batch);
  v("train.epochs", t.epochs);
  v("train.patience", t.patience);
  v("train.warmup_steps", t.warmup_steps);
  v("train.final_lr_ratio", t.final_lr_ratio);
  v("train.seed", t.seed);
  v("train.log_wall_time", t.log_wall_time);
}

struct Writer {
  pt::ptree& tree;
  void put(const std::string& key, const std::string& value) { tree.put(key, value); }
  void operator()(const std::string& k, const std::filesystem::path& p) { put(k, p.string()); }
  void operator()(const std::string& k, const std::string& s) { put(k, s); }
  void operator()(const std::string& k, double x) { put(k, format_double(x)); }
  void operator()(const std::string& k, bool b) { put(k, b ? "true" : "false"); }
  void operator()(const std::string& k, int x) { put(k, std::to_string(x)); }
  void operator()(const std::string& k, std::size_t x) { put(k, std::to_string(x)); }
  void operator()(const std::string& k, const std::vector<int>& xs) {
    std::vector<std::string> s;
    for (int x : xs) s.push_back(std::to_string(x));
    put(k, join(s));
  }
  void operator()(const std::string& k, const std::vector<splicegen::Codec>& xs) {
    std::vector<std::string> s;
    for (auto x : xs) s.push_back(splicegen::to_string(x));
    put(k, join(s));
  }
  void operator()(const std::string& k, splicegen::Variant x) { put(k, splicegen::to_string(x)); }
  void operator()(const std::string& k, splicegen::NoiseType x) { put(k, splicegen::to_string(x)); }
  void operator()(const std::string& k, model::ModelKind x) { put(k, model::to_string(x)); }
  void operator()(const std::string& k, model::Activation x) { put(k, model::to_string(x)); }
  void operator()(const std::string& k, model::EosPosition x) { put(k, model::to_string(x)); }
};

struct Reader {
  const pt::ptree& tree;
  std::set<std::string>& seen;

  const std::string* get(const std::string& key) {
    seen.insert(key);
    auto node = tree.get_child_optional(pt::ptree::path_type(key, '.'));
    return node ? &node->data() : nullptr;
  }
  void operator()(const std::string& k, std::filesystem::path& p) {
    if (auto s = get(k)) p = *s;
  }
  void operator()(const std::string& k, std::string& x) {
    if (auto s = get(k)) x = *s;
  }
  void operator()(const std::string& k, double& x) {
    if (auto s = get(k)) x = parse_double(k, *s);
  }
  void operator()(const std::string& k, bool& x) {
    if (auto s = get(k)) x = parse_bool(k, *s);
  }
  void operator()(const std::string& k, int& x) {
    if (auto s = get(k)) {
      auto [end, ec] = std::from_chars(s->data(), s->data() + s->size(), x);
      if (ec != std::errc{} || end != s->data() + s->size()) throw InputError("config: " + k + " is not an integer: " + *s);
    }
  }
  void operator()(const std::string& k, std::size_t& x) {
    if (auto s = get(k)) x = parse_unsigned<std::size_t>(k, *s);
  }
  void operator()(const std::string& k, std::vector<int>& xs) {
    if (auto s = get(k)) {
      xs.clear();
      for (const auto& item : split_list(*s)) xs.push_back(static_cast<int>(parse_unsigned<unsigned>(k, item)));
    }
  }
  void operator()(const std::string& k, std::vector<splicegen::Codec>& xs) {
    if (auto s = get(k)) {
      xs.clear();
      for (const auto& item : split_list(*s)) xs.push_back(splicegen::codec_from_string(item));
    }
  }
  template <typename E, typename Parse>
  void parse_enum(const std::string& k, E& x, Parse parse) {
    if (auto s = get(k)) x = parse(*s);
  }
  void operator()(const std::string& k, splicegen::Variant& x) { parse_enum(k, x, splicegen::variant_from_string); }
  void operator()(const std::string& k, splicegen::NoiseType& x) { parse_enum(k, x, splicegen::noise_from_string); }
  void operator()(const std::string& k, model::ModelKind& x) { parse_enum(k, x, model::model_kind_from_string); }
  void operator()(const std::string& k, model::Activation& x) { parse_enum(k, x, model::activation_from_string); }
  void operator()(const std::string& k, model::EosPosition& x) { parse_enum(k, x, model::eos_position_from_string); }
};

}  // namespace

void ExperimentConfig::validate() const {
  if (stages.empty()) throw InputError("config: experiment.stages is empty");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i] < 1 || stages[i] > 3) throw InputError("config: stages must be 1, 2 or 3");
    if (i > 0 && stages[i] <= stages[i - 1]) throw InputError("config: stages must be strictly increasing");
  }
  if (data.features.feature_dim() != model.latent) {
    throw InputError("config: model.latent (" + std::to_string(model.latent) + ") must equal the feature dimension (" +
                     std::to_string(data.features.feature_dim()) + ")");
  }
  auto d = data;
  d.n_samples = 1;
  d.validate();
  model.validate();
  train.validate();
}

std::string ExperimentConfig::to_ini() const {
  pt::ptree tree;
  visit_fields(Writer{tree}, *this);
  std::ostringstream os;
  pt::write_ini(os, tree);
  return os.str();
}

ExperimentConfig ExperimentConfig::from_ini(const std::string& text) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  std::set<std::string> known;
  visit_fields(Reader{tree, known}, c);
  for (const auto& [section, body] : tree) {
    for (const auto& [key, value] : body) {
      if (!known.count(section + "." + key)) throw InputError("config: unknown key " + section + "." + key);
    }
    if (body.empty()) throw InputError("config: empty or stray entry " + section);
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_ini(ss.str());
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config " + path.string());
  out << to_ini();
}

splicegen::DatasetConfig ExperimentConfig::split_config(int stage, Split split) const {
  auto d = data;
  d.stage = stage;
  const auto& s = sizes.at(static_cast<std::size_t>(stage - 1));
  d.n_samples = split == Split::train ? s.train : split == Split::val ? s.val : s.test;
  d.seed = num::derive_seed(seed, {static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(split)});
  return d;
}

std::filesystem::path ExperimentConfig::data_dir(int stage, Split split) const {
  return out_dir / "data" / ("stage" + std::to_string(stage)) / to_string(split);
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const { return to_ini() == other.to_ini(); }

}  // namespace sigpointer::cli
