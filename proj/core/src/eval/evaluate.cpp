#include "sigpointer/eval/evaluate.hpp"

#include <cstdio>
#include <sstream>

#include "sigpointer/errors.hpp"

namespace sigpointer::eval {

namespace {

struct Accumulator {
  std::size_t samples = 0;
  std::vector<double> j, r;

  void add(const std::vector<double>& js, const std::vector<double>& rs) {
    if (j.empty()) j.assign(js.size(), 0.0), r.assign(rs.size(), 0.0);
    for (std::size_t i = 0; i < js.size(); ++i) j[i] += js[i], r[i] += rs[i];
    ++samples;
  }
  GroupScores finish(std::size_t bins) const {
    GroupScores g;
    g.samples = samples;
    g.mean_j.assign(bins, 0.0);
    g.mean_r.assign(bins, 0.0);
    for (std::size_t i = 0; i < bins && samples > 0; ++i) g.mean_j[i] = j[i] / samples, g.mean_r[i] = r[i] / samples;
    return g;
  }
};

nlohmann::ordered_json group_json(const GroupScores& g, std::span<const std::size_t> bins) {
  nlohmann::ordered_json j;
  j["samples"] = g.samples;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const std::string f = std::to_string(bins[i]);
    j["J@" + f] = g.mean_j[i];
    j["R@" + f] = g.mean_r[i];
  }
  return j;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

bool EvalReport::monotone_in_bins() const {
  for (std::size_t i = 1; i < bins.size(); ++i)
    if (overall.mean_j[i] + 1e-12 < overall.mean_j[i - 1] || overall.mean_r[i] + 1e-12 < overall.mean_r[i - 1])
      return false;
  return true;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["bins"] = bins;
  j["overall"] = group_json(overall, bins);
  j["monotone_in_bins"] = monotone_in_bins();
  auto& by_n = j["per_splice_count"] = nlohmann::ordered_json::object();
  for (const auto& [n, g] : per_splice_count) by_n[std::to_string(n)] = group_json(g, bins);
  auto& by_c = j["per_condition"] = nlohmann::ordered_json::object();
  for (const auto& [c, g] : per_condition) by_c[c] = group_json(g, bins);
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "scope,samples";
  for (auto f : bins) out << ",J@" << f << ",R@" << f;
  out << '\n';
  auto row = [&](const std::string& scope, const GroupScores& g) {
    out << scope << ',' << g.samples;
    for (std::size_t i = 0; i < bins.size(); ++i) out << ',' << fixed(g.mean_j[i]) << ',' << fixed(g.mean_r[i]);
    out << '\n';
  };
  row(name.empty() ? "overall" : name, overall);
  for (const auto& [n, g] : per_splice_count) row("n=" + std::to_string(n), g);
  for (const auto& [c, g] : per_condition) row("condition=" + c, g);
  return out.str();
}

EvalReport evaluate(const Predictor& predict, const splicegen::Dataset& data, std::span<const std::size_t> bins) {
  if (bins.empty()) throw InputError("at least one bin factor is needed");
  if (data.features.size() != data.entries.size()) throw DataError("manifest and feature counts differ");
  EvalReport report;
  report.bins.assign(bins.begin(), bins.end());
  Accumulator all;
  std::map<std::size_t, Accumulator> by_n;
  std::map<std::string, Accumulator> by_condition;
  std::vector<double> js(bins.size()), rs(bins.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& entry = data.entries[i];
    if (data.features[i].n_frames != entry.n_frames)
      throw DataError("sample " + entry.id + ": manifest frame count disagrees with its features");
    const auto predicted = predict(i);
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const auto p = bin_indices(predicted, bins[b]), t = bin_indices(entry.labels, bins[b]);
      js[b] = jaccard(p, t);
      rs[b] = recall(p, t);
    }
    all.add(js, rs);
    by_n[entry.n_splices].add(js, rs);
    by_condition[entry.condition()].add(js, rs);
  }
  report.overall = all.finish(bins.size());
  for (const auto& [n, acc] : by_n) report.per_splice_count[n] = acc.finish(bins.size());
  for (const auto& [c, acc] : by_condition) report.per_condition[c] = acc.finish(bins.size());
  return report;
}

EvalReport evaluate(const model::AnyModel& model, const features::FeatureNormalizer& normalizer,
                    const splicegen::Dataset& data, std::span<const std::size_t> bins) {
  const std::size_t latent = model.config().latent;
  for (const auto& f : data.features)
    if (f.dim != latent)
      throw DataError("feature dimension " + std::to_string(f.dim) + " does not match the model's " +
                      std::to_string(latent));
  auto report = evaluate(
      [&](std::size_t i) {
        auto seq = data.features[i];
        if (normalizer.fitted()) normalizer.apply(seq);
        return model.predict(seq.to_tensor<float>());
      },
      data, bins);
  report.name = model::to_string(model.kind());
  return report;
}

std::vector<Condition> default_conditions(const splicegen::DatasetConfig& base, int max_runs) {
  using splicegen::Codec;
  using splicegen::NoiseType;
  std::vector<Condition> out;
  out.push_back({"in-distribution", base});
  for (Codec codec : {Codec::proxy_amr, Codec::proxy_mp3}) {
    for (int runs = 1; runs <= max_runs; ++runs) {
      auto c = base;
      c.codecs = {codec};
      c.codec_runs = runs;
      c.add_noise = false;
      out.push_back({splicegen::to_string(codec) + " x" + std::to_string(runs), c});
    }
  }
  for (NoiseType noise : {NoiseType::pink, NoiseType::brown, NoiseType::babble}) {
    auto c = base;
    c.codecs.clear();
    c.add_noise = true;
    c.noise_type = noise;
    out.push_back({splicegen::to_string(noise) + "-noise", c});
  }
  return out;
}

std::vector<SweepEntry> robustness_sweep(const model::AnyModel& model, const features::FeatureNormalizer& normalizer,
                                         std::span<const Condition> conditions, std::span<const std::size_t> bins) {
  std::vector<SweepEntry> out;
  for (const auto& c : conditions) {
    const auto data = splicegen::generate_dataset(c.config);
    auto report = evaluate(model, normalizer, data, bins);
    report.name = c.name;
    out.push_back({c.name, std::move(report)});
  }
  return out;
}

std::map<std::string, bool> degradation_trends(std::span<const SweepEntry> sweep) {
  std::map<std::string, std::vector<double>> families;
  for (const auto& e : sweep) {
    const auto pos = e.condition.rfind(" x");
    if (pos == std::string::npos) continue;
    families[e.condition.substr(0, pos)].push_back(e.report.overall.mean_j.front());
  }
  std::map<std::string, bool> out;
  for (const auto& [family, js] : families) {
    bool monotone = true;
    for (std::size_t i = 1; i < js.size(); ++i) monotone = monotone && js[i] <= js[i - 1] + 1e-12;
    out[family] = monotone;
  }
  return out;
}

nlohmann::ordered_json sweep_to_json(std::span<const SweepEntry> sweep) {
  nlohmann::ordered_json j;
  j["conditions"] = nlohmann::ordered_json::array();
  for (const auto& e : sweep) j["conditions"].push_back(e.report.to_json());
  auto& trends = j["non_increasing_with_codec_runs"] = nlohmann::ordered_json::object();
  for (const auto& [family, ok] : degradation_trends(sweep)) trends[family] = ok;
  return j;
}

std::string sweep_to_csv(std::span<const SweepEntry> sweep) {
  std::ostringstream out;
  bool header = false;
  for (const auto& e : sweep) {
    const auto& bins = e.report.bins;
    if (!header) {
      out << "condition,samples";
      for (auto f : bins) out << ",J@" << f << ",R@" << f;
      out << '\n';
      header = true;
    }
    out << e.condition << ',' << e.report.overall.samples;
    for (std::size_t i = 0; i < bins.size(); ++i)
      out << ',' << fixed(e.report.overall.mean_j[i]) << ',' << fixed(e.report.overall.mean_r[i]);
    out << '\n';
  }
  return out.str();
}

}  // namespace sigpointer::eval
