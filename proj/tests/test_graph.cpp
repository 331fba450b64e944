#include "wcp/graph.hpp"
#include "wcp/simulator.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>

namespace wcp {
namespace {

using Bounds = std::vector<std::pair<std::size_t, std::size_t>>;

Simulation ten_epochs() {
  ScenarioConfig sc;
  sc.epochs = 10;
  sc.max_satellites = 8;
  sc.seed = 1;
  return generate(sc);
}

std::map<SatelliteId, std::vector<std::size_t>> window_sizes(const FactorGraph& g) {
  std::map<SatelliteId, std::vector<std::size_t>> out;
  for (const PhaseWindow& w : g.windows) out[w.sat].push_back(w.size());
  return out;
}

TEST(SplitTrackTest, DisjointWindows) {
  EXPECT_EQ(split_track(10, 6, false), (Bounds{{0, 6}, {6, 10}}));
  EXPECT_EQ(split_track(7, 6, false), (Bounds{{0, 6}}));
  EXPECT_EQ(split_track(12, 6, false), (Bounds{{0, 6}, {6, 12}}));
  EXPECT_EQ(split_track(3, 6, false), (Bounds{{0, 3}}));
}

TEST(SplitTrackTest, ChainedWindowsShareBoundary) {
  EXPECT_EQ(split_track(10, 6, true), (Bounds{{0, 6}, {5, 10}}));
  EXPECT_EQ(split_track(11, 6, true), (Bounds{{0, 6}, {5, 11}}));
  EXPECT_EQ(split_track(12, 6, true), (Bounds{{0, 6}, {5, 11}, {10, 12}}));
  EXPECT_EQ(split_track(5, 2, true), (Bounds{{0, 2}, {1, 3}, {2, 4}, {3, 5}}));
}

TEST(SplitTrackTest, DegenerateTracks) {
  EXPECT_TRUE(split_track(0, 6, true).empty());
  EXPECT_TRUE(split_track(1, 6, false).empty());
  EXPECT_EQ(split_track(2, 2, false), (Bounds{{0, 2}}));
  EXPECT_THROW(split_track(10, 1, true), std::invalid_argument);
}

TEST(SplitTrackTest, ChainedWindowsCoverEveryPair) {
  for (std::size_t len = 2; len < 40; ++len) {
    for (int cap : {2, 3, 6, 9}) {
      const Bounds b = split_track(len, cap, true);
      ASSERT_FALSE(b.empty());
      EXPECT_EQ(b.front().first, 0u);
      EXPECT_EQ(b.back().second, len);
      for (std::size_t i = 0; i < b.size(); ++i) {
        EXPECT_GE(b[i].second - b[i].first, 2u);
        EXPECT_LE(b[i].second - b[i].first, static_cast<std::size_t>(cap));
        if (i > 0) EXPECT_EQ(b[i].first + 1, b[i - 1].second);
      }
    }
  }
}

TEST(BuildGraphTest, SixteenWindowsOverTenEpochs) {
  const Simulation sim = ten_epochs();
  for (const Epoch& e : sim.dataset.epochs) ASSERT_EQ(e.observations.size(), 8u);
  SolverConfig cfg;
  cfg.chain_windows = false;
  const FactorGraph g = build_graph(sim.dataset, cfg);
  EXPECT_EQ(g.windows.size(), 16u);
  for (const auto& [sat, sizes] : window_sizes(g)) EXPECT_EQ(sizes, (std::vector<std::size_t>{6, 4}));

  cfg.chain_windows = true;
  const FactorGraph chained = build_graph(sim.dataset, cfg);
  EXPECT_EQ(chained.windows.size(), 16u);
  for (const auto& [sat, sizes] : window_sizes(chained)) EXPECT_EQ(sizes, (std::vector<std::size_t>{6, 5}));
}

TEST(BuildGraphTest, FlaggedSlipSplitsTrack) {
  Simulation sim = ten_epochs();
  const SatelliteId id = sim.dataset.epochs[0].observations[0].sat;
  inject_cycle_slip(sim.dataset, id, 3, 2, true);
  SolverConfig cfg;
  cfg.chain_windows = false;
  const FactorGraph g = build_graph(sim.dataset, cfg);
  const auto sizes = window_sizes(g);
  EXPECT_EQ(sizes.at(id), (std::vector<std::size_t>{3, 6}));
  EXPECT_EQ(g.windows.size(), 16u);
  for (const PhaseWindow& w : g.windows)
    if (w.sat == id && w.size() == 6) {
      EXPECT_EQ(w.first_epoch, 3u);
    }
}

TEST(BuildGraphTest, UnflaggedSlipDoesNotSplit) {
  Simulation sim = ten_epochs();
  const SatelliteId id = sim.dataset.epochs[0].observations[0].sat;
  inject_cycle_slip(sim.dataset, id, 3, 2, false);
  SolverConfig cfg;
  cfg.chain_windows = false;
  EXPECT_EQ(window_sizes(build_graph(sim.dataset, cfg)).at(id), (std::vector<std::size_t>{6, 4}));
}

TEST(BuildGraphTest, TdcpSkipsSlippedPair) {
  Simulation sim = ten_epochs();
  const SatelliteId id = sim.dataset.epochs[0].observations[0].sat;
  inject_cycle_slip(sim.dataset, id, 4, 1, true);
  SolverConfig cfg;
  cfg.mode = EstimatorMode::PSR_DOP_TDCP;
  const FactorGraph g = build_graph(sim.dataset, cfg);
  EXPECT_TRUE(g.windows.empty());
  EXPECT_EQ(g.tdcps.size(), 8u * 9u - 1u);
  std::vector<std::size_t> pairs;
  for (const TdcpFactor& f : g.tdcps)
    if (f.sat == id) pairs.push_back(f.epoch);
  EXPECT_EQ(pairs, (std::vector<std::size_t>{0, 1, 2, 4, 5, 6, 7, 8}));
}

TEST(BuildGraphTest, FactorCountsPerMode) {
  const Simulation sim = ten_epochs();
  SolverConfig cfg;
  cfg.mode = EstimatorMode::PSR_DOP;
  const FactorGraph psr = build_graph(sim.dataset, cfg);
  EXPECT_EQ(psr.pseudoranges.size(), 80u);
  EXPECT_EQ(psr.dopplers.size(), 9u);
  EXPECT_TRUE(psr.tdcps.empty());
  EXPECT_TRUE(psr.windows.empty());
  EXPECT_EQ(psr.layout.dimension, 40u);
  EXPECT_EQ(psr.layout.position_index(3), 12u);
  EXPECT_EQ(psr.layout.clock_index(3, Constellation::GPS), 15u);
  EXPECT_THROW(psr.layout.clock_index(3, Constellation::BeiDou), std::out_of_range);

  cfg.mode = EstimatorMode::WLS_SPP;
  const FactorGraph wls = build_graph(sim.dataset, cfg);
  EXPECT_EQ(wls.factor_count(), 0u);
  EXPECT_EQ(wls.initial.size(), 10u);
}

TEST(BuildGraphTest, WindowSeedsAreDeterministic) {
  const Simulation sim = ten_epochs();
  SolverConfig cfg;
  cfg.eliminator = EliminatorKind::RandomUnitaryImag;
  const FactorGraph a = build_graph(sim.dataset, cfg);
  const FactorGraph b = build_graph(sim.dataset, cfg);
  ASSERT_EQ(a.windows.size(), b.windows.size());
  for (std::size_t i = 0; i < a.windows.size(); ++i)
    EXPECT_EQ(a.windows[i].eliminator.entries, b.windows[i].eliminator.entries);
  cfg.eliminator_seed = 2;
  const FactorGraph c = build_graph(sim.dataset, cfg);
  EXPECT_NE(a.windows[0].eliminator.entries, c.windows[0].eliminator.entries);
}

TEST(BuildGraphTest, EmptyDatasetRejected) {
  EXPECT_THROW(build_graph(Dataset{}, SolverConfig{}), DataError);
}

TEST(SolverConfigTest, Validation) {
  SolverConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.step_tolerance = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.max_window = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.function_tolerance = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(WlsTest, EightNoiselessSatellites) {
  const Simulation sim = ten_epochs();
  SolverConfig cfg;
  for (std::size_t t = 0; t < sim.dataset.epochs.size(); ++t) {
    const WlsSolution s = solve_wls_epoch(sim.dataset.epochs[t], cfg);
    EXPECT_LT((s.state.position - sim.truth.states[t].position).norm(), 1e-6);
    EXPECT_NEAR(s.state.clock_bias.at(Constellation::GPS),
                sim.truth.states[t].clock_bias.at(Constellation::GPS), 1e-6);
    EXPECT_EQ(s.used, 8);
    EXPECT_EQ(s.covariance.rows(), 4);
  }
}

TEST(WlsTest, FourSatellitesDetermined) {
  Simulation sim = ten_epochs();
  Epoch e = sim.dataset.epochs[2];
  e.observations.resize(4);
  const WlsSolution s = solve_wls_epoch(e, SolverConfig{});
  EXPECT_LT((s.state.position - sim.truth.states[2].position).norm(), 1e-6);
  EXPECT_EQ(s.used, 4);
}

TEST(WlsTest, ThreeSatellitesInsufficient) {
  Simulation sim = ten_epochs();
  Epoch e = sim.dataset.epochs[2];
  e.observations.resize(3);
  try {
    solve_wls_epoch(e, SolverConfig{});
    FAIL() << "expected an error";
  } catch (const InsufficientSatellitesError& err) {
    EXPECT_NE(std::string(err.what()).find("insufficient satellites"), std::string::npos);
  }
}

TEST(ResolveAtmosphereTest, FillsMissingDelaysFromModels) {
  ScenarioConfig sc;
  sc.epochs = 2;
  sc.max_satellites = 8;
  const Simulation sim = generate(sc);
  Epoch e = sim.dataset.epochs[1];
  for (SatelliteState& s : e.satellites) {
    s.iono_delay.reset();
    s.tropo_delay.reset();
  }
  e.satellites[0].tropo_delay = 123.0;
  SolverConfig cfg;
  cfg.klobuchar = ScenarioConfig::default_klobuchar();
  cfg.time_of_week_offset = sc.time_of_week_offset;
  const std::vector<SatelliteState> out = resolve_atmosphere(e, sim.truth.states[1].position, cfg);
  ASSERT_EQ(out.size(), e.satellites.size());
  EXPECT_EQ(out[0].tropo_delay, 123.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const SatelliteState& ref = sim.dataset.epochs[1].satellites[i];
    EXPECT_NEAR(*out[i].iono_delay, *ref.iono_delay, 1e-8);
    if (i > 0) EXPECT_NEAR(*out[i].tropo_delay, *ref.tropo_delay, 1e-8);
  }
  const std::vector<SatelliteState> untouched = resolve_atmosphere(e, Vec3::Zero(), cfg);
  EXPECT_FALSE(untouched[1].iono_delay.has_value());
}

TEST(ModeNameTest, RoundTrip) {
  for (auto m : {EstimatorMode::WLS_SPP, EstimatorMode::PSR_DOP, EstimatorMode::PSR_DOP_TDCP,
                 EstimatorMode::PSR_DOP_WCP})
    EXPECT_EQ(parse_mode(mode_name(m)), m);
  EXPECT_FALSE(parse_mode("kalman").has_value());
}

}  // namespace
}  // namespace wcp
