#include "layerprobe/cli.hpp"
#include "layerprobe/report.hpp"
#include "fixture.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

using namespace layerprobe;
using namespace layerprobe::testing;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "layerprobe");
  std::vector<const char *> argv;
  for (const auto &a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Two models x three layers; IT and memorability both read a shared code.
Dataset small_dataset(const std::filesystem::path &dir, json config = json::object(),
                      int models = 1) {
  std::mt19937_64 rng(42);
  const Eigen::Index n = 60;
  const Eigen::MatrixXd H = gaussian(n, 4, rng);
  std::vector<LayerSpec> layers;
  const char *names[] = {"conv1", "conv2", "fc"};
  for (int m = 0; m < models; ++m)
    for (int l = 0; l < 3; ++l)
      layers.push_back({"model" + std::to_string(m), names[l], l,
                        H * gaussian(4, 30, rng) + gaussian(n, 30, rng, 0.5 + l)});
  Eigen::VectorXd mem = (H.col(0).array() * 0.1 + 0.5).cwiseMax(0.01).cwiseMin(1.0);
  std::vector<TargetSet> targets{make_neural(Region::IT, H * gaussian(4, 6, rng)),
                                 make_scalar("memorability", mem)};
  if (!config.contains("cv"))
    config["cv"] = {{"k", 5}, {"seed", 3}};
  return write_dataset(dir, layers, targets, config);
}

std::size_t count_lines(const std::string &s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

TEST(Cli, ScoreOneLayer) {
  TempDir dir("cli");
  const auto ds = small_dataset(dir.path());
  const auto r = cli({"score", "--config", ds.config.string(), "--activation",
                      (ds.dir / ds.activation_files[0]).string(), "--target",
                      (ds.dir / "target_IT.amx").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(r.out), 1u);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["target_id"], "IT");
  EXPECT_EQ(j["layer_id"], "conv1");
  EXPECT_FALSE(j["excluded"].get<bool>());
  EXPECT_GT(j["score"].get<double>(), 0.0);
}

TEST(Cli, ScoreMissingActivationIsDataError) {
  TempDir dir("cli");
  const auto ds = small_dataset(dir.path());
  const auto r = cli({"score", "--config", ds.config.string(), "--activation",
                      (ds.dir / "nope.amx").string(), "--target",
                      (ds.dir / "target_IT.amx").string()});
  EXPECT_EQ(r.code, kExitData);
}

TEST(Cli, FoldCountBelowTwoIsConfigError) {
  TempDir dir("cli");
  const auto ds = small_dataset(dir.path(), {{"cv", {{"k", 1}}}});
  const auto r = cli({"score", "--config", ds.config.string(), "--activation",
                      (ds.dir / ds.activation_files[0]).string(), "--target",
                      (ds.dir / "target_IT.amx").string()});
  EXPECT_EQ(r.code, kExitValidation);
}

TEST(Cli, UnknownConfigKeyIsConfigError) {
  TempDir dir("cli");
  const auto ds = small_dataset(dir.path(), {{"pls", {{"componets", 5}}}});
  EXPECT_EQ(cli({"sweep", "--config", ds.config.string()}).code, kExitValidation);
  EXPECT_EQ(cli({"validate", ds.config.string()}).code, kExitValidation);
}

TEST(Cli, BadArgumentsAreConfigErrors) {
  EXPECT_EQ(cli({"sweep"}).code, kExitValidation);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitValidation);
  EXPECT_EQ(cli({"sweep", "--config", "x.json", "--mode", "fast"}).code, kExitValidation);
}

TEST(Cli, SweepResumeIsByteIdentical) {
  TempDir dir("cli");
  const auto ds = small_dataset(dir.path());
  auto r = cli({"sweep", "--config", ds.config.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = ds.dir / "out";
  const auto records = read_file(out / std::string(kRecordsFile));
  const auto provenance = read_file(out / std::string(kProvenanceFile));
  EXPECT_EQ(count_lines(records), 6u);
  EXPECT_EQ(read_file(out / "run_config.json"), read_file(ds.config));

  r = cli({"sweep", "--config", ds.config.string(), "--resume"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("0 scored, 6 resumed"), std::string::npos) << r.err;
  EXPECT_EQ(read_file(out / std::string(kRecordsFile)), records);
  EXPECT_EQ(read_file(out / std::string(kProvenanceFile)), provenance);
}

TEST(Cli, SweepResumeRecomputesChangedLayer) {
  TempDir dir("cli");
  const auto ds = small_dataset(dir.path());
  ASSERT_EQ(cli({"sweep", "--config", ds.config.string()}).code, 0);

  // Rewrite one layer with new values and refresh the manifest entry.
  std::mt19937_64 rng(9);
  const auto file = ds.activation_files[1];
  auto a = read_activation(ds.dir / file);
  a.values = gaussian(a.values.rows(), a.values.cols(), rng).cast<float>();
  write_matrix(a, ds.dir / file);
  auto m = load_manifest(ds.manifest, false);
  for (auto &e : m.entries)
    if (e.path == file)
      e = make_entry(ds.dir, file, EntryKind::Activation);
  write_manifest(m, ds.manifest);

  const auto r = cli({"sweep", "--config", ds.config.string(), "--resume"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("2 scored, 4 resumed"), std::string::npos) << r.err;
}

TEST(Cli, CorruptActivationBecomesExcludedRecord) {
  TempDir dir("cli");
  const auto ds = small_dataset(dir.path());
  corrupt_byte(ds.dir / ds.activation_files[2]);
  const auto r = cli({"sweep", "--config", ds.config.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = load_report(ds.dir / "out");
  std::size_t excluded = 0;
  for (const auto &rec : rep.records)
    if (rec.excluded) {
      ++excluded;
      EXPECT_NE(rec.exclusion_reason.find("ChecksumMismatch"), std::string::npos)
          << rec.exclusion_reason;
    }
  // one excluded record per target for the broken file
  EXPECT_EQ(excluded, 2u);
  EXPECT_EQ(rep.records.size(), 6u);
}

TEST(Cli, CorruptTargetIsFatal) {
  TempDir dir("cli");
  const auto ds = small_dataset(dir.path());
  corrupt_byte(ds.dir / "target_IT.amx");
  EXPECT_EQ(cli({"sweep", "--config", ds.config.string()}).code, kExitData);
}

TEST(Cli, ParallelSweepMatchesReference) {
  TempDir dir("cli");
  const auto ds = small_dataset(dir.path(), json::object(), 2);
  ASSERT_EQ(cli({"sweep", "--config", ds.config.string(), "--out",
                 (ds.dir / "ref").string()})
                .code,
            0);
  ASSERT_EQ(cli({"sweep", "--config", ds.config.string(), "--out",
                 (ds.dir / "par").string(), "--mode", "parallel", "--workers", "3"})
                .code,
            0);
  const auto a = load_report(ds.dir / "ref");
  const auto b = load_report(ds.dir / "par");
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].layer_id, b.records[i].layer_id);
    EXPECT_NEAR(a.records[i].score, b.records[i].score, 1e-9);
  }
}

TEST(Cli, MetaAnalyses) {
  TempDir dir("cli");
  const auto ds = small_dataset(dir.path(), json::object(), 3);
  ASSERT_EQ(cli({"sweep", "--config", ds.config.string()}).code, 0);
  const json analysis = {
      {"analyses",
       {{{"type", "pair_scores"},
         {"name", "it_vs_mem"},
         {"x_target", "IT"},
         {"y_target", "memorability"}},
        {{"type", "penultimate"},
         {"name", "penult"},
         {"target", "IT"},
         {"model_values", {{"model0", 0.1}, {"model1", 0.5}, {"model2", 0.3}}}}}}};
  std::ofstream(ds.dir / "analysis.json") << analysis.dump();
  const auto r = cli({"meta", "--report", (ds.dir / "out").string(), "--analysis",
                      (ds.dir / "analysis.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["result"]["n"], 9);
  EXPECT_EQ(j[1]["details"]["selected_layers"]["model0"], "conv2");
  EXPECT_TRUE(std::filesystem::exists(ds.dir / "out" / "meta" / "it_vs_mem.json"));
  EXPECT_TRUE(std::filesystem::exists(ds.dir / "out" / "meta" / "it_vs_mem_scatter.csv"));
}

TEST(Cli, MetaOnEmptyReportIsDataError) {
  TempDir dir("cli");
  write_report(SweepReport{}, dir / "rep");
  std::ofstream(dir / "a.json") << R"({"type":"pair_scores","x_target":"IT","y_target":"V4"})";
  EXPECT_EQ(cli({"meta", "--report", (dir / "rep").string(), "--analysis",
                 (dir / "a.json").string()})
                .code,
            kExitData);
}

TEST(Cli, ValidateFiles) {
  TempDir dir("cli");
  const auto ds = small_dataset(dir.path());
  auto r = cli({"validate", ds.manifest.string(), (ds.dir / ds.activation_files[0]).string(),
                ds.config.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  corrupt_byte(ds.dir / ds.activation_files[0]);
  r = cli({"validate", (ds.dir / ds.activation_files[0]).string()});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_EQ(cli({"validate", ds.manifest.string()}).code, kExitData);
}

TEST(Cli, ExecutableExitCodes) {
  const std::string exe = LAYERPROBE_CLI_PATH;
  EXPECT_EQ(std::system((exe + " --help > /dev/null").c_str()), 0);
  const int status = std::system((exe + " validate /nonexistent.amx 2> /dev/null").c_str());
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), kExitData);
}
