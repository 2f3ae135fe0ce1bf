#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mol/harness/compare.hpp"
#include "mol/harness/config.hpp"
#include "mol/harness/experiment.hpp"
#include "mol/harness/report.hpp"

namespace mol::harness {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mol_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(field_of("seeds=\n"), "seeds");
  EXPECT_EQ(field_of("colour=blue\n"), "colour");
  EXPECT_EQ(field_of("alpha=1\nalpha=2\n"), "alpha");
  EXPECT_EQ(field_of("max_frames=10\neval_every=100\n"), "eval_every");
  EXPECT_EQ(field_of("gamma=abc\n"), "gamma");
  EXPECT_EQ(field_of("mode=turbo\n"), "mode");
  EXPECT_EQ(field_of("env=keydoor\ngoal=1,1\n"), "goal");
  EXPECT_EQ(field_of("seeds=1,2,1\n"), "seeds");
  EXPECT_EQ(field_of("gamma=1.5\n"), "agent");
  EXPECT_EQ(field_of("env=keydoor\nkey=0,0\n"), "env");
  EXPECT_EQ(field_of("just words\n"), "");
}

TEST(Config, DefaultsAndOverrides) {
  const auto c = parse_config("# comment\nenv=fig1\nmode=mol  # trailing\nseeds=4,5\nalpha=0.5\n\n");
  EXPECT_EQ(c.env.kind, EnvKind::Fig1);
  EXPECT_EQ(c.agent.mode, AgentMode::Mol);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_EQ(c.shaping.alpha, 0.5);
  EXPECT_EQ(c.shaping.r_max, 0.9);
  EXPECT_EQ(c.env.keydoor.grid.width, 3);
}

TEST(Config, PixelModeFloorsTheSampler) {
  const auto c = parse_config("env=keydoor\nobservation=pixels\ncell_size=3\n");
  EXPECT_TRUE(c.env.pixels);
  EXPECT_EQ(c.sampling.min_pixel_diff, default_min_pixel_diff(c.env.render));
  EXPECT_EQ(parse_config("observation=pixels\nmin_pixel_diff=7\n").sampling.min_pixel_diff, 7.0);
}

TEST(Config, TextRoundTrip) {
  for (const char* text : {"env=fig1\n", "env=keydoor\nmode=psc+mol\nslip_prob=0.25\nseeds=9\nbeta=0.125\n",
                           "env=gridworld\nwidth=4\nheight=2\ngoal=3,1\nwalls=1,0;2,0\nobservation=pixels\n"}) {
    const auto c = parse_config(text);
    const auto again = parse_config(to_text(c));
    EXPECT_EQ(to_text(again), to_text(c));
  }
}

TEST(Checkpoints, WindowMeansCarriedForward) {
  std::vector<EpisodeRecord> eps;
  for (auto [f, s] : std::vector<std::pair<std::uint64_t, double>>{{3, 1.0}, {8, 3.0}, {25, 4.0}}) {
    EpisodeRecord e;
    e.frames = f;
    e.score = s;
    eps.push_back(e);
  }
  EXPECT_EQ(checkpoint_scores(eps, 40, 10), (std::vector<double>{2.0, 2.0, 4.0, 4.0}));
  EXPECT_EQ(checkpoint_scores({}, 20, 10), (std::vector<double>{0.0, 0.0}));
}

TEST(Summary, MeanStdevMovingAverage) {
  const auto rows = summarize({{1.0, 2.0, 3.0}, {3.0, 2.0, 5.0}}, 100);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].mean, 2.0);
  EXPECT_NEAR(rows[0].stdev, std::sqrt(2.0), 1e-12);
  EXPECT_EQ(rows[1].stdev, 0.0);
  EXPECT_EQ(rows[2].frames, 300u);
  EXPECT_NEAR(rows[2].moving_avg, (2.0 + 2.0 + 4.0) / 3.0, 1e-12);
}

TEST(Property, SummaryMeanIsArithmeticMean) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-5.0, 20.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> per_seed(1 + rng() % 6, std::vector<double>(1 + rng() % 30));
    for (auto& s : per_seed)
      for (auto& v : s) v = u(rng);
    const auto rows = summarize(per_seed, 10);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      double sum = 0.0;
      for (const auto& s : per_seed) sum += s[k];
      ASSERT_NEAR(rows[k].mean, sum / per_seed.size(), 1e-9);
    }
  }
}

TEST(SustainedSuccess, FirstStreak) {
  std::vector<EpisodeRecord> eps;
  for (int i = 0; i < 12; ++i) {
    EpisodeRecord e;
    e.frames = 10 * (i + 1);
    e.score = (i == 3) ? 0.0 : 4.0;
    eps.push_back(e);
  }
  EXPECT_EQ(frames_to_sustained_success(eps, 4.0), 90u);
  EXPECT_EQ(frames_to_sustained_success(eps, 5.0), std::nullopt);
}

SummaryCurve curve(std::vector<double> mean) {
  SummaryCurve c;
  for (std::size_t i = 0; i < mean.size(); ++i) c.frames.push_back((i + 1) * 100);
  c.mean = std::move(mean);
  return c;
}

TEST(Compare, IdenticalAndDoubled) {
  const auto a = curve({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0});
  const auto same = compare(a, a);
  ASSERT_TRUE(same.final_ratio);
  EXPECT_NEAR(*same.final_ratio, 0.0, 1e-12);
  auto doubled = a;
  for (auto& v : doubled.mean) v *= 2.0;
  const auto c = compare(a, doubled);
  EXPECT_NEAR(*c.final_ratio, 100.0, 1e-9);
  for (const auto& r : c.rows) EXPECT_NEAR(*r.ratio, 100.0, 1e-9);
  EXPECT_EQ(c.window, 2u);  // ceil(12 / 10)
  EXPECT_NEAR(c.final_a, 11.5, 1e-12);
}

TEST(Compare, ZeroBaselineHasNoRatio) {
  const auto c = compare(curve({0.0, 0.0}), curve({1.0, 0.0}));
  EXPECT_FALSE(c.final_ratio);
  EXPECT_FALSE(c.rows[0].ratio);
}

TEST(Compare, MisalignedCheckpoints) {
  auto b = curve({1.0, 2.0});
  b.frames[1] = 250;
  EXPECT_THROW(compare(curve({1.0, 2.0}), b), RunError);
  EXPECT_THROW(compare(curve({1.0, 2.0}), curve({1.0})), RunError);
}

TEST(Compare, RatioArithmetic) {
  EXPECT_NEAR(ratio_percent(267.10, 315.84), 18.2478, 1e-4);
  EXPECT_NEAR(ratio_percent(51.40, 113.26), 120.3502, 1e-4);
  EXPECT_THROW(ratio_percent(0.0, 1.0), ContractViolation);
}

TEST(Bands, ThresholdsPartition) {
  const BandThresholds t;
  EXPECT_EQ(band_of(0.9, t), "top");
  EXPECT_EQ(band_of(0.4, t), "top");
  EXPECT_EQ(band_of(0.39, t), "medium");
  EXPECT_EQ(band_of(0.2, t), "medium");
  EXPECT_EQ(band_of(0.1, t), "small");
  EXPECT_EQ(band_of(0.0, t), "small");
  EXPECT_THROW((BandThresholds{0.5, 0.4}.validate()), ConfigError);
}

ExperimentConfig small_fig1(std::uint64_t frames) {
  auto c = parse_config("env=fig1\nmode=baseline\nseeds=1,2,3\neval_every=1000\n");
  c.max_frames = frames;
  return c;
}

TEST(RunExperiment, FileCountContract) {
  const auto dir = scratch("files");
  const auto out = run_experiment(small_fig1(50'000), dir, 2);
  std::size_t seed_csvs = 0, models = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto n = e.path().filename().string();
    seed_csvs += n.starts_with("seed_") && n.ends_with(".csv");
    models += n.starts_with("model_seed_");
  }
  EXPECT_EQ(seed_csvs, 3u);
  EXPECT_EQ(models, 3u);
  EXPECT_TRUE(fs::exists(dir / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir / "config.txt"));
  EXPECT_EQ(out.summary.size(), 50u);
  const auto csv = slurp(dir / "seed_1.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "seed,episode,frames,score,shaped_return,epsilon,wall_ms");
  // Frames never decrease within a seed.
  for (const auto& r : out.runs)
    for (std::size_t i = 1; i < r.episodes.size(); ++i) ASSERT_LE(r.episodes[i - 1].frames, r.episodes[i].frames);
  // A used directory is refused.
  EXPECT_THROW(run_experiment(small_fig1(1000), dir), RunError);
  fs::remove_all(dir);
}

TEST(RunExperiment, ByteIdenticalReruns) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  auto cfg = parse_config("env=keydoor\nmode=psc+mol\nseeds=7,8\nmax_frames=6000\neval_every=500\n");
  run_experiment(cfg, a, 2);
  run_experiment(cfg, b, 1);
  for (const char* f : {"seed_7.csv", "seed_8.csv", "summary.csv", "model_seed_7.json", "config.txt"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(RunExperiment, SummaryMatchesSeedCheckpoints) {
  const auto dir = scratch("mean");
  const auto cfg = small_fig1(8000);
  const auto out = run_experiment(cfg, dir);
  for (std::size_t k = 0; k < out.summary.size(); ++k) {
    double sum = 0.0;
    for (const auto& r : out.runs) sum += checkpoint_scores(r.episodes, cfg.max_frames, cfg.eval_every)[k];
    EXPECT_NEAR(out.summary[k].mean, sum / 3.0, 1e-9);
  }
  const auto read = read_summary(dir);
  EXPECT_EQ(read.frames.size(), out.summary.size());
  fs::remove_all(dir);
}

// The persisted model rebuilds a learner with the same greedy policy,
// counts and normaliser.
TEST(Persistence, ModelRoundTrip) {
  auto cfg = parse_config("env=fig1\nmode=mol\nseeds=3\nmax_frames=3000\neval_every=1000\n");
  const auto run = run_seed(cfg, 3);
  const auto j = nlohmann::json::parse(model_to_json(run).dump());
  const auto back = learner_from_json(cfg, j);
  EXPECT_EQ(back->tracker().current_max(), run.learner->tracker().current_max());
  for (std::uint64_t s = 0; s < 9; ++s) {
    const auto o = Observation::discrete(s);
    EXPECT_EQ(back->greedy_action(o), run.learner->greedy_action(o));
    EXPECT_EQ(back->importance_model().count(o, Degeneracy::Clamp),
              run.learner->importance_model().count(o, Degeneracy::Clamp));
  }
}

TEST(Report, UntrainedRunIsADiagnostic) {
  const auto cfg = parse_config("env=keydoor\nmode=mol\nseeds=1\nmax_frames=10\neval_every=10\nepsilon_end=0\n");
  auto learner = make_learner(cfg, 1);
  EXPECT_THROW(importance_report(cfg, *learner, 1, BandThresholds{}, 3), RunError);
}

TEST(Report, RowsSortedAndBanded) {
  const auto cfg = parse_config("env=fig1\nmode=mol\nseeds=2\nmax_frames=4000\neval_every=1000\n");
  auto run = run_seed(cfg, 2);
  const auto r = importance_report(cfg, *run.learner, 2, BandThresholds{});
  ASSERT_FALSE(r.rows.empty());
  for (std::size_t i = 1; i < r.rows.size(); ++i) ASSERT_GE(r.rows[i - 1].r_obj, r.rows[i].r_obj);
  for (const auto& row : r.rows) EXPECT_EQ(row.band, band_of(row.r_obj, BandThresholds{}));
  const auto text = format_report(r, 5);
  EXPECT_NE(text.find("band,rank,state,description,pseudo_count,r_obj"), std::string::npos);
}

int cli(const std::string& args) {
  const char* bin = std::getenv("MOL_CLI");
  if (!bin) return -1;
  const int rc = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(Cli, ExitCodes) {
  if (!std::getenv("MOL_CLI")) GTEST_SKIP() << "MOL_CLI not set";
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "empty_seeds.cfg") << "env=fig1\nseeds=\n";
  std::ofstream(dir / "ok.cfg") << "env=fig1\nseeds=1\nmax_frames=2000\neval_every=1000\n";
  std::ofstream(dir / "untrained.cfg") << "env=keydoor\nmode=mol\nseeds=1\nmax_frames=10\neval_every=10\n";
  EXPECT_EQ(cli("run " + (dir / "empty_seeds.cfg").string() + " --out " + (dir / "x").string()), 1);
  EXPECT_EQ(cli("run " + (dir / "missing.cfg").string() + " --out " + (dir / "x").string()), 1);
  EXPECT_EQ(cli("frobnicate"), 1);
  EXPECT_EQ(cli("run " + (dir / "ok.cfg").string() + " --out " + (dir / "ok").string()), 0);
  EXPECT_EQ(cli("run " + (dir / "ok.cfg").string() + " --out " + (dir / "ok").string()), 2);
  EXPECT_EQ(cli("compare " + (dir / "ok").string() + " " + (dir / "ok" / "summary.csv").string()), 0);
  EXPECT_EQ(cli("compare " + (dir / "ok").string() + " " + (dir / "nowhere").string()), 2);
  EXPECT_EQ(cli("run " + (dir / "untrained.cfg").string() + " --out " + (dir / "u").string()), 0);
  EXPECT_EQ(cli("report-importance " + (dir / "u").string() + " --attempts 2"), 2);
  EXPECT_EQ(cli("report-importance " + (dir / "ok").string() + " --thresholds 0.5,0.1"), 1);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace mol::harness
