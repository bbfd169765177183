#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "sigpointer/cli/commands.hpp"
#include "sigpointer/errors.hpp"
#include "sigpointer/numcore/random.hpp"
#include "sigpointer/splicegen/synth.hpp"
#include "sigpointer/splicegen/wav.hpp"

using namespace sigpointer;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sigpointer_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "sigpointer");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Small enough to train in seconds; the latent still has to match the features.
cli::ExperimentConfig small(const fs::path& out) {
  cli::ExperimentConfig c;
  c.out_dir = out;
  for (auto& s : c.sizes) s = {6, 3, 3};
  c.data.max_seconds = 5.0;
  c.model.encoder_layers = 1;
  c.model.ff_width = 16;
  c.model.dropout = 0.0;
  c.train.epochs = 2;
  c.train.patience = 1;
  c.train.batch = 3;
  c.train.log_wall_time = false;
  return c;
}

fs::path write_config(const cli::ExperimentConfig& c, const fs::path& dir) {
  const auto path = dir / "config.ini";
  c.save(path);
  return path;
}

std::vector<nlohmann::json> manifest_lines(const fs::path& manifest) {
  std::vector<nlohmann::json> out;
  std::istringstream in(slurp(manifest));
  for (std::string line; std::getline(in, line);) out.push_back(nlohmann::json::parse(line));
  return out;
}

fs::path untrained_checkpoint(const fs::path& dir) {
  auto c = model::ModelConfig::sigpointer_star();
  c.encoder_layers = 1;
  c.ff_width = 16;
  model::AnyModel m(c, 3);
  model::save_checkpoint(dir, m, {});
  return dir;
}

features::Waveform speech(double seconds, std::uint64_t seed) {
  num::Rng rng(seed);
  const auto speaker = splicegen::SyntheticSpeaker::random(rng);
  return splicegen::synth_utterance(speaker, seed, seconds, 16000);
}

}  // namespace

TEST(Config, IniRoundTrip) {
  auto c = small("somewhere");
  c.stages = {2, 3};
  c.model.kind = model::ModelKind::encoder_baseline;
  c.data.codecs = {splicegen::Codec::proxy_mp3};
  const auto back = cli::ExperimentConfig::from_ini(c.to_ini());
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.to_ini(), c.to_ini());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  const auto ini = cli::ExperimentConfig{}.to_ini();
  EXPECT_THROW(cli::ExperimentConfig::from_ini(ini + "[train]\nmomentum=0.9\n"), InputError);
  EXPECT_THROW(cli::ExperimentConfig::from_ini("[model]\nheads=many\n"), InputError);
  EXPECT_THROW(cli::ExperimentConfig::from_ini("[experiment]\nstages=3,1\n").validate(), InputError);
  EXPECT_THROW(cli::ExperimentConfig::from_ini("[model]\nlatent=128\n").validate(), InputError);
}

TEST(Config, SplitSeedsDiffer) {
  const cli::ExperimentConfig c;
  EXPECT_NE(c.split_config(1, cli::Split::train).seed, c.split_config(1, cli::Split::val).seed);
  EXPECT_NE(c.split_config(1, cli::Split::test).seed, c.split_config(2, cli::Split::test).seed);
  EXPECT_EQ(c.split_config(2, cli::Split::val).stage, 2);
}

TEST(Segments, ShortInputIsOnePiece) {
  EXPECT_EQ(cli::segment_ranges(20, 90), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 20}}));
  EXPECT_EQ(cli::segment_ranges(90, 90).size(), 1u);
}

TEST(Segments, HundredSecondsIsThreePieces) {
  const auto s = cli::segment_ranges(200, 90);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.front().first, 0u);
  EXPECT_EQ(s.back().second, 200u);
}

TEST(Segments, CoverWithOverlapAndBalancedLengths) {
  for (std::size_t max_len : {2u, 3u, 7u, 20u, 90u})
    for (std::size_t n = 1; n <= 300; ++n) {
      const auto s = cli::segment_ranges(n, max_len);
      ASSERT_FALSE(s.empty());
      EXPECT_EQ(s.front().first, 0u);
      EXPECT_EQ(s.back().second, n);
      std::size_t lo = n, hi = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto len = s[i].second - s[i].first;
        EXPECT_LE(len, max_len);
        lo = std::min(lo, len);
        hi = std::max(hi, len);
        if (i > 0) EXPECT_LT(s[i].first, s[i - 1].second) << n << " " << max_len;
      }
      EXPECT_LE(hi - lo, 1u);
    }
}

TEST(Cli, NoArgumentsIsUsage) { EXPECT_EQ(run({}).code, cli::kUsage); }

TEST(Cli, ConfigPrintsLoadableDefaults) {
  const auto r = run({"config"});
  ASSERT_EQ(r.code, cli::kOk);
  EXPECT_EQ(cli::ExperimentConfig::from_ini(r.out), cli::ExperimentConfig{});
}

TEST(Cli, GenStageOneIsCleanAndRepeatable) {
  const auto dir = scratch("gen");
  auto c = small(dir / "run");
  c.sizes[0] = {100, 2, 2};
  const auto cfg = write_config(c, dir);
  ASSERT_EQ(run({"gen", "-c", cfg.string(), "-s", "1"}).code, cli::kOk);
  const auto manifest = c.data_dir(1, cli::Split::train) / "manifest.jsonl";
  const auto first = slurp(manifest);
  const auto lines = manifest_lines(manifest);
  ASSERT_EQ(lines.size(), 100u);
  for (const auto& j : lines) {
    EXPECT_EQ(j["codec"], "none");
    EXPECT_LE(j["n_splices"].get<int>(), 1);
  }
  ASSERT_EQ(run({"gen", "-c", cfg.string(), "-s", "1"}).code, cli::kOk);
  EXPECT_EQ(slurp(manifest), first);
  fs::remove_all(dir);
}

TEST(Cli, StageFourIsUsageError) {
  const auto dir = scratch("stage4");
  const auto cfg = write_config(small(dir / "run"), dir);
  const auto r = run({"gen", "-c", cfg.string(), "-s", "4"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_FALSE(r.err.empty());
  fs::remove_all(dir);
}

TEST(Cli, MissingConfigIsUsageError) {
  EXPECT_EQ(run({"gen", "-c", "/nonexistent/config.ini", "-s", "1"}).code, cli::kUsage);
}

TEST(Cli, TrainWithoutDataIsDataError) {
  const auto dir = scratch("nodata");
  const auto cfg = write_config(small(dir / "run"), dir);
  EXPECT_EQ(run({"train", "-c", cfg.string()}).code, cli::kData);
  fs::remove_all(dir);
}

TEST(Cli, TrainEvalAndResume) {
  const auto dir = scratch("train");
  const auto c = small(dir / "run");
  const auto cfg = write_config(c, dir);
  for (const char* s : {"1", "2", "3"}) ASSERT_EQ(run({"gen", "-c", cfg.string(), "-s", s}).code, cli::kOk);

  const auto trained = run({"train", "-c", cfg.string()});
  ASSERT_EQ(trained.code, cli::kOk) << trained.err;
  for (const char* s : {"stage1", "stage2", "stage3", "final"})
    EXPECT_TRUE(model::is_checkpoint(c.model_dir() / s)) << s;
  const auto log = slurp(c.model_dir() / "train_log.jsonl");
  EXPECT_FALSE(log.empty());

  const auto resumed = run({"train", "-c", cfg.string()});
  ASSERT_EQ(resumed.code, cli::kOk);
  EXPECT_NE(resumed.out.find("already complete"), std::string::npos) << resumed.out;
  EXPECT_EQ(slurp(c.model_dir() / "train_log.jsonl"), log);

  const auto model = (c.model_dir() / "final").string();
  const auto data = c.data_dir(2, cli::Split::test).string();
  const auto reports = (dir / "reports").string();
  ASSERT_EQ(run({"eval", "-m", model, "-d", data, "-o", reports}).code, cli::kOk);
  const auto json_path = dir / "reports" / "stage2-test.json";
  const auto report = slurp(json_path);
  const auto j = nlohmann::json::parse(report);
  const double mean_j = j["overall"]["J@1"];
  EXPECT_GE(mean_j, 0.0);
  EXPECT_LE(mean_j, 1.0);
  ASSERT_EQ(run({"eval", "-m", model, "-d", data, "-o", reports}).code, cli::kOk);
  EXPECT_EQ(slurp(json_path), report);
  fs::remove_all(dir);
}

TEST(Cli, FreshTrainAfterNanIsDivergence) {
  const auto dir = scratch("nan");
  auto c = small(dir / "run");
  c.stages = {1};
  c.train.lr = 1e30;
  const auto cfg = write_config(c, dir);
  ASSERT_EQ(run({"gen", "-c", cfg.string(), "-s", "1"}).code, cli::kOk);
  EXPECT_EQ(run({"train", "-c", cfg.string()}).code, cli::kDivergence);
  fs::remove_all(dir);
}

TEST(Cli, EvalOnMissingDataIsDataError) {
  const auto dir = scratch("evalmissing");
  const auto ck = untrained_checkpoint(dir / "model");
  EXPECT_EQ(run({"eval", "-m", ck.string(), "-d", (dir / "nothing").string()}).code, cli::kData);
  fs::remove_all(dir);
}

TEST(Infer, LongInputIsSegmented) {
  const auto dir = scratch("long");
  const auto ck = untrained_checkpoint(dir / "model");
  splicegen::write_wav(dir / "long.wav", speech(100.0, 4));
  const auto report = cli::cmd_infer(ck, dir / "long.wav");
  EXPECT_EQ(report.frames, 200u);
  EXPECT_EQ(report.segments.size(), 3u);
  for (auto f : report.splice_frames) EXPECT_LT(f, 200u);
  EXPECT_TRUE(std::is_sorted(report.splice_frames.begin(), report.splice_frames.end()));
  fs::remove_all(dir);
}

TEST(Infer, ShortFileProducesAReport) {
  const auto dir = scratch("short");
  const auto ck = untrained_checkpoint(dir / "model");
  splicegen::write_wav(dir / "short.wav", speech(1.2, 5));
  const auto r = run({"infer", "-m", ck.string(), (dir / "short.wav").string(), "--json"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["frames"], 2);
  EXPECT_TRUE(j.contains("splice_times_s"));
  fs::remove_all(dir);
}

TEST(Infer, StereoInputIsDataError) {
  const auto dir = scratch("stereo");
  const auto ck = untrained_checkpoint(dir / "model");
  // 44-byte header describing two channels followed by a few samples.
  std::ofstream f(dir / "stereo.wav", std::ios::binary);
  auto u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
  f.write("RIFF", 4); u32(36 + 8); f.write("WAVEfmt ", 8); u32(16); u16(1); u16(2);
  u32(16000); u32(16000 * 4); u16(4); u16(16); f.write("data", 4); u32(8); u32(0); u32(0);
  f.close();
  EXPECT_EQ(run({"infer", "-m", ck.string(), (dir / "stereo.wav").string()}).code, cli::kData);
  fs::remove_all(dir);
}

TEST(Infer, BadSegmentLengthIsUsageError) {
  const auto dir = scratch("seglen");
  const auto ck = untrained_checkpoint(dir / "model");
  splicegen::write_wav(dir / "a.wav", speech(4.0, 6));
  EXPECT_EQ(run({"infer", "-m", ck.string(), (dir / "a.wav").string(), "--segment-frames", "1"}).code, cli::kUsage);
  fs::remove_all(dir);
}

TEST(Selftest, Passes) {
  const auto r = run({"selftest"});
  EXPECT_EQ(r.code, cli::kOk) << r.out;
}
