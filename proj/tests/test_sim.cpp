#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "bicb/experiment.hpp"

using namespace bicb;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / name; }

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Campaign camp(double budget, int steps, double cu = kInf, double cl = 0) {
  Campaign c;
  c.id = "t";
  c.budget = budget;
  c.cpc_upper = cu;
  c.cpc_lower = cl;
  c.start_step = 0;
  c.end_step = steps - 1;
  return c;
}

}  // namespace

TEST_CASE("load_traffic parses periods and validates rows") {
  const fs::path path = temp_file("bicb_traffic_ok.csv");
  write_file(path,
             "period_id,step,pctr,wp,obj\n"
             "d1,0,0.5,1.25,0.3\n"
             "d1,1,1,0.75,0\n"
             "d1,0,0.25,2,0.9\n");
  const auto periods = load_traffic(path.string());
  REQUIRE(periods.size() == 1);
  CHECK(periods[0].first == "d1");
  REQUIRE(periods[0].second.size() == 3);
  // Stable sort by step: the two step-0 rows keep file order.
  CHECK(periods[0].second.impressions[0].pctr == 0.5);
  CHECK(periods[0].second.impressions[1].pctr == 0.25);
  CHECK(periods[0].second.impressions[2].step == 1);
  fs::remove(path);
}

TEST_CASE("load_traffic rejects malformed input with line numbers") {
  const fs::path path = temp_file("bicb_traffic_bad.csv");

  write_file(path, "wrong,header\n");
  CHECK_THROWS_AS(load_traffic(path.string()), ParseError);

  write_file(path, "period_id,step,pctr,wp,obj\nd1,0,1.2,1,0.5\n");
  CHECK_THROWS_MATCHES(load_traffic(path.string()), ParseError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring(":2")));

  write_file(path, "period_id,step,pctr,wp,obj\nd1,48,0.5,1,0.5\n");
  CHECK_THROWS_AS(load_traffic(path.string()), ParseError);  // step out of range

  write_file(path, "period_id,step,pctr,wp,obj\nd1,0,0.5,abc,0.5\n");
  CHECK_THROWS_AS(load_traffic(path.string()), ParseError);

  fs::remove(path);
}

TEST_CASE("traffic round-trips through the CSV schema") {
  SynthConfig cfg;
  cfg.n_impressions = 500;
  cfg.n_steps = 6;
  cfg.seed = 3;
  const TrafficSlice slice = synth_generate(cfg);
  const fs::path path = temp_file("bicb_traffic_rt.csv");
  save_traffic(path.string(), {{"p0", slice}});
  const auto loaded = load_traffic(path.string(), LoadOptions{6});
  REQUIRE(loaded.size() == 1);
  REQUIRE(loaded[0].second.size() == slice.size());
  double cost_a = 0, cost_b = 0;
  for (std::size_t i = 0; i < slice.size(); ++i) {
    cost_a += slice.impressions[i].expected_cost();
    cost_b += loaded[0].second.impressions[i].expected_cost();
  }
  CHECK(cost_b == Approx(cost_a).epsilon(1e-9));
  fs::remove(path);
}

TEST_CASE("synthetic generation is deterministic and correlated") {
  SynthConfig cfg;
  cfg.n_impressions = 4000;
  cfg.n_steps = 8;
  cfg.seed = 5;
  const TrafficSlice a = synth_generate(cfg);
  const TrafficSlice b = synth_generate(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.impressions[i].wp == b.impressions[i].wp);
    CHECK(a.impressions[i].obj == b.impressions[i].obj);
    CHECK(a.impressions[i].pctr == b.impressions[i].pctr);
    CHECK(a.impressions[i].step == b.impressions[i].step);
  }
  CHECK_NOTHROW(validate_slice(a));

  // Noise-free generation ranks price and value identically.
  SynthConfig clean = cfg;
  clean.price_noise = 0;
  clean.value_noise = 0;
  clean.obj_cap = 10;
  const TrafficSlice c = synth_generate(clean);
  for (std::size_t i = 1; i < c.size(); ++i) {
    const bool wp_up = c.impressions[i].wp >= c.impressions[i - 1].wp;
    const bool obj_up = c.impressions[i].obj >= c.impressions[i - 1].obj;
    if (c.impressions[i].step == c.impressions[i - 1].step) CHECK(wp_up == obj_up);
  }
}

TEST_CASE("volume profiles shape per-step counts deterministically") {
  SynthConfig cfg;
  cfg.n_impressions = 1000;
  cfg.n_steps = 4;
  cfg.seed = 9;
  cfg.volume_profile = {1, 3, 3, 1};
  const TrafficSlice s = synth_generate(cfg);
  std::array<std::size_t, 4> counts{};
  for (const auto& imp : s.impressions) counts[static_cast<std::size_t>(imp.step)]++;
  CHECK(counts[0] == 125);
  CHECK(counts[1] == 375);
  CHECK(counts[2] == 375);
  CHECK(counts[3] == 125);
}

TEST_CASE("assumption check on the default generator and constructed cases") {
  SynthConfig cfg;
  cfg.n_impressions = 10000;
  cfg.n_steps = 48;
  cfg.seed = 0;
  const TrafficSlice s = synth_generate(cfg);
  double total_cost = 0, total_clicks = 0;
  for (const auto& imp : s.impressions) {
    total_cost += imp.expected_cost();
    total_clicks += imp.expected_clicks();
  }
  Campaign c = camp(0.3 * total_cost, 48);
  c.cpc_lower = 0.6 * (total_cost / total_clicks);
  CHECK(assumption1_check(s, c));

  // Anti-correlated: the high-value prefix is the cheap traffic.
  TrafficSlice anti;
  anti.end_step = 0;
  for (int i = 0; i < 100; ++i) {
    const double u = i / 100.0;
    anti.impressions.push_back(Impression{0, 1.0, 0.2 + 2.0 * (1 - u), 0.1 + 0.8 * u});
  }
  Campaign tight = camp(30, 1);
  tight.cpc_lower = 1.5;
  CHECK_FALSE(assumption1_check(anti, tight));

  // All objs equal: the tie-broken prefix decides.
  TrafficSlice flat;
  flat.end_step = 0;
  flat.impressions = {{0, 1, 2.0, 0.5}, {0, 1, 1.0, 0.5}, {0, 1, 0.5, 0.5}};
  Campaign fc = camp(1.5, 1);
  fc.cpc_lower = 0.4;
  // Ties prefer the higher index: the prefix is {idx 2, idx 1} with CPC 0.75.
  CHECK(assumption1_check(flat, fc));
  fc.cpc_lower = 0.8;
  CHECK_FALSE(assumption1_check(flat, fc));
}

TEST_CASE("run_episode with a manual policy equals a fixed-threshold replay") {
  SynthConfig cfg;
  cfg.n_impressions = 2000;
  cfg.n_steps = 8;
  cfg.seed = 21;
  const TrafficSlice s = synth_generate(cfg);
  const Campaign c = camp(1e9, 8);
  auto ctrl = manual_controller(1.2);
  const EpisodeResult ep = run_episode(c, *ctrl, s);
  const AccumStats whole =
      replay_params(s.impressions, BidParams{0, 1.2}, c.budget, ReplayMode::HardBudgetStop);
  CHECK(ep.final_stats.cost == Approx(whole.cost).margin(1e-9));
  CHECK(ep.final_stats.wins == whole.wins);
  CHECK(ep.ticks.size() == 8);

  // Trajectory sums to the final stats.
  AccumStats sum;
  for (const auto& tick : ep.ticks) sum += tick.delta;
  CHECK(sum.cost == Approx(ep.final_stats.cost));
  CHECK(sum.wins == ep.final_stats.wins);
}

TEST_CASE("a zero-budget campaign delivers nothing") {
  SynthConfig cfg;
  cfg.n_impressions = 300;
  cfg.n_steps = 4;
  cfg.seed = 2;
  const TrafficSlice s = synth_generate(cfg);
  Campaign c = camp(1, 4);
  c.budget = 0;  // bypasses validation on purpose
  auto ctrl = manual_controller(5.0);
  const EpisodeResult ep = run_episode(c, *ctrl, s);
  CHECK(ep.final_stats.cost == 0.0);
  CHECK(ep.final_stats.wins == 0);
}

TEST_CASE("metric formulas") {
  Campaign c = camp(100, 1, 2.0, 1.0);
  LpSolution ref;
  ref.value = 10;

  SECTION("no violations: G equals capped R/R*") {
    EpisodeResult ep;
    ep.campaign = c;
    ep.final_stats.value = 9;
    ep.final_stats.cost = 50;
    ep.final_stats.clicks = 40;  // CPC 1.25 inside [1, 2]
    const MetricsReport m = compute_metrics({ep}, {ref});
    CHECK(m.r_over_rstar == Approx(0.9));
    CHECK(m.g == Approx(0.9));
    CHECK(m.ocr == 0.0);
    CHECK(m.br == Approx(0.5));
  }

  SECTION("upper violation at 1.1x pays the documented penalty") {
    EpisodeResult ep;
    ep.campaign = c;
    ep.final_stats.value = 10;
    ep.final_stats.cost = 2.2 * 30;
    ep.final_stats.clicks = 30;  // CPC 2.2 = 1.1 * C_u
    const MetricsReport m = compute_metrics({ep}, {ref});
    CHECK(m.ocr == 1.0);
    const double penalty = std::pow(100.0, 0.1) - 1.0;
    CHECK(m.g == Approx(1.0 - penalty).margin(1e-9));
    CHECK(penalty == Approx(0.5848931925).margin(1e-9));
  }

  SECTION("lower violation uses the mirrored excess ratio") {
    EpisodeResult ep;
    ep.campaign = c;
    ep.final_stats.value = 10;
    ep.final_stats.cost = 0.8 * 30;
    ep.final_stats.clicks = 30;  // CPC 0.8, C_l/CPC - 1 = 0.25
    const MetricsReport m = compute_metrics({ep}, {ref});
    const double penalty = std::pow(100.0, 0.25) - 1.0;
    CHECK(m.g == Approx(1.0 - penalty).margin(1e-9));
  }

  SECTION("zero-click campaigns satisfy both bounds") {
    EpisodeResult ep;
    ep.campaign = c;
    const MetricsReport m = compute_metrics({ep}, {LpSolution{}});
    CHECK(m.ocr == 0.0);
  }

  SECTION("mismatched reference sets are rejected") {
    CHECK_THROWS_AS(compute_metrics({EpisodeResult{}}, {}), ConfigError);
  }
}

TEST_CASE("experiment reports are deterministic and offline lp is the reference") {
  ExperimentConfig cfg;
  cfg.setting = Setting::BiCB;
  cfg.methods = {Method::OfflineLp, Method::BicbStar};
  cfg.seeds = {0};
  cfg.n_campaigns = 3;
  cfg.synth.n_impressions = 1500;
  cfg.synth.n_steps = 12;

  const ExperimentResult a = run_experiment(cfg);
  const ExperimentResult b = run_experiment(cfg);
  CHECK(a.report_csv == b.report_csv);

  REQUIRE(a.rows.size() == 2);
  const MetricsReport& lp = a.rows[0].metrics;
  CHECK(a.rows[0].method == Method::OfflineLp);
  CHECK(lp.r_over_rstar == Approx(1.0));
  CHECK(lp.ocr == 0.0);
  CHECK(lp.br <= 1.0 + 1e-12);
  for (const auto& pc : lp.per_campaign) CHECK(pc.cost <= pc.budget * (1 + 1e-9));
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg;
  cfg.methods.clear();
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
  cfg = ExperimentConfig{};
  cfg.seeds.clear();
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
  cfg = ExperimentConfig{};
  cfg.train_path = "only_train.csv";
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
  CHECK_THROWS_AS(parse_method("bogus"), ConfigError);
  CHECK_THROWS_AS(parse_setting("bogus"), ConfigError);
}

TEST_CASE("experiment artifacts land in the output directory") {
  ExperimentConfig cfg;
  cfg.setting = Setting::BCB;
  cfg.methods = {Method::Manual, Method::BicbStar};
  cfg.seeds = {1};
  cfg.n_campaigns = 2;
  cfg.synth.n_impressions = 800;
  cfg.synth.n_steps = 6;
  const fs::path out = temp_file("bicb_exp_out");
  fs::remove_all(out);
  cfg.out_dir = out.string();
  run_experiment(cfg);

  CHECK(fs::exists(out / "report.csv"));
  CHECK(fs::exists(out / "control_log.csv"));
  std::size_t episode_files = 0;
  for (const auto& e : fs::directory_iterator(out / "episodes")) {
    ++episode_files;
    auto in = csv::open_input(e.path().string());
    csv::expect_header(in, kEpisodeHeader, e.path().string());
  }
  CHECK(episode_files == 4);  // 2 methods x 2 campaigns

  const std::string report = read_file(out / "report.csv");
  CHECK(report.find(kReportHeader) == 0);
  CHECK(report.find("manual,bcb,") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("bcb campaigns never violate CPC by construction") {
  ExperimentConfig cfg;
  cfg.setting = Setting::BCB;
  cfg.methods = {Method::Pid, Method::Manual};
  cfg.seeds = {0, 1};
  cfg.n_campaigns = 2;
  cfg.synth.n_impressions = 1000;
  cfg.synth.n_steps = 8;
  const ExperimentResult r = run_experiment(cfg);
  for (const auto& row : r.rows) {
    CHECK(row.metrics.ocr == 0.0);
    for (const auto& pc : row.metrics.per_campaign) CHECK(pc.cost <= pc.budget * (1 + 1e-9));
  }
}
