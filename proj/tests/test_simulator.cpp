#include "wcp/factors.hpp"
#include "wcp/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace wcp {
namespace {

ScenarioConfig small(TrajectoryKind kind = TrajectoryKind::WaypointSpline) {
  ScenarioConfig sc;
  sc.epochs = 30;
  sc.trajectory = kind;
  return sc;
}

TEST(GenerateTest, EqualSeedsGiveIdenticalDatasets) {
  ScenarioConfig sc = scenario_preset("urban");
  sc.epochs = 40;
  sc.seed = 11;
  const Simulation a = generate(sc);
  const Simulation b = generate(sc);
  EXPECT_EQ(a.dataset, b.dataset);
  EXPECT_EQ(a.truth, b.truth);
  EXPECT_EQ(a.injections, b.injections);
  sc.seed = 12;
  EXPECT_NE(generate(sc).dataset, a.dataset);
}

TEST(GenerateTest, ValidDatasetWithEnoughSatellites) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ScenarioConfig sc = small();
    sc.seed = seed;
    const Simulation sim = generate(sc);
    ASSERT_EQ(sim.dataset.epochs.size(), 30u);
    ASSERT_EQ(sim.truth.states.size(), 30u);
    EXPECT_TRUE(validate_dataset(sim.dataset).accepted()) << validate_dataset(sim.dataset).first_fatal();
    for (const Epoch& e : sim.dataset.epochs) {
      EXPECT_GE(e.observations.size(), 6u) << "seed " << seed;
      for (const SatelliteState& s : e.satellites)
        EXPECT_GE(elevation_azimuth(sim.truth.states[static_cast<std::size_t>(e.time.index)].position,
                                    s.position).elevation,
                  sc.elevation_mask);
    }
  }
}

TEST(GenerateTest, CleanMeasurementsMatchModels) {
  for (TrajectoryKind kind : {TrajectoryKind::Static, TrajectoryKind::ConstantVelocity,
                              TrajectoryKind::WaypointSpline}) {
    const Simulation sim = generate(small(kind));
    const RangeModel model;
    for (std::size_t t = 0; t < sim.dataset.epochs.size(); ++t) {
      const Epoch& e = sim.dataset.epochs[t];
      const ReceiverState& truth = sim.truth.states[t];
      for (std::size_t i = 0; i < e.observations.size(); ++i) {
        const Observation& obs = e.observations[i];
        const SatelliteState& sat = e.satellites[i];
        PseudorangeFactor f;
        f.satellite_position = sat.position;
        f.corrected_pseudorange = correct_pseudorange(obs, sat);
        EXPECT_LT(std::abs(pseudorange_residual(truth, f, model).value), 1e-9);

        if (t == 0) continue;
        const Epoch& p = sim.dataset.epochs[t - 1];
        const Observation* prev = p.find_observation(obs.sat);
        if (prev == nullptr) continue;
        TdcpFactor d;
        d.sat = obs.sat;
        d.satellite_position_t = p.find_satellite(obs.sat)->position;
        d.satellite_position_t1 = sat.position;
        d.delta_phase = correct_phase(obs, sat) - correct_phase(*prev, *p.find_satellite(obs.sat));
        const ReceiverState& before = sim.truth.states[t - 1];
        const PairResidual r = tdcp_residual(before.position, before.clock_bias.at(obs.sat.constellation),
                                             truth.position, truth.clock_bias.at(obs.sat.constellation),
                                             d, model);
        EXPECT_LT(std::abs(r.value), 1e-9) << obs.sat.str() << " epoch " << t;
      }
    }
  }
}

TEST(GenerateTest, AmbiguityIsIntegerCycles) {
  const Simulation sim = generate(small());
  const Epoch& e = sim.dataset.epochs[7];
  const ReceiverState& truth = sim.truth.states[7];
  for (std::size_t i = 0; i < e.observations.size(); ++i) {
    const double range = link_geometry(truth.position, e.satellites[i].position, RangeModel{}).range;
    const double b = (correct_phase(e.observations[i], e.satellites[i]) - range -
                      truth.clock_bias.at(Constellation::GPS)) /
                     e.observations[i].wavelength;
    EXPECT_NEAR(b, std::round(b), 1e-6);
  }
}

TEST(GenerateTest, DopplerRecoversTrueVelocity) {
  ScenarioConfig sc = small(TrajectoryKind::ConstantVelocity);
  sc.velocity_enu = Vec3(3.0, -4.0, 0.0);
  const Simulation sim = generate(sc);
  for (std::size_t t = 0; t + 1 < sim.dataset.epochs.size(); t += 5) {
    const Epoch& e = sim.dataset.epochs[t];
    const auto v = doppler_wls_velocity(e.observations, e.satellites, sim.truth.states[t].position,
                                        WeightingConfig{}, RangeModel{});
    ASSERT_TRUE(v.has_value());
    EXPECT_LT((v->velocity - sim.truth.states[t].velocity).norm(), 1e-6);
    EXPECT_NEAR(v->velocity.norm(), 5.0, 1e-3);
    EXPECT_NEAR(v->clock_drift, sc.receiver_clock_drift, 1e-6);
  }
}

TEST(GenerateTest, InjectionCountsFollowConfiguredRates) {
  std::size_t observations = 0, continuations = 0, outliers = 0, slips = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    ScenarioConfig sc = scenario_preset("urban");
    sc.epochs = 20;
    sc.seed = seed;
    const Simulation sim = generate(sc);
    for (std::size_t t = 0; t < sim.dataset.epochs.size(); ++t) {
      for (const Observation& o : sim.dataset.epochs[t].observations) {
        ++observations;
        if (t > 0 && sim.dataset.epochs[t - 1].find_observation(o.sat)) ++continuations;
      }
    }
    for (const InjectionRecord& r : sim.injections) {
      if (r.type == InjectionType::NlosOutlier) {
        ++outliers;
        EXPECT_GE(r.magnitude, sc.outlier_min);
        EXPECT_LE(r.magnitude, sc.outlier_max);
      }
      if (r.type == InjectionType::CycleSlip) {
        ++slips;
        EXPECT_GE(std::abs(r.magnitude), sc.slip_min_cycles);
        EXPECT_LE(std::abs(r.magnitude), sc.slip_max_cycles);
      }
    }
  }
  auto within = [](std::size_t count, std::size_t trials, double p) {
    const double mean = p * static_cast<double>(trials);
    return std::abs(static_cast<double>(count) - mean) < 4.0 * std::sqrt(mean * (1.0 - p));
  };
  EXPECT_TRUE(within(outliers, observations, 0.10)) << outliers << " of " << observations;
  EXPECT_TRUE(within(slips, continuations, 0.02)) << slips << " of " << continuations;
}

TEST(GenerateTest, LoggedOutlierMatchesPseudorangeError) {
  ScenarioConfig sc = scenario_preset("urban");
  sc.sigma_pseudorange = 0.0;
  sc.sigma_phase = 0.0;
  sc.sigma_doppler = 0.0;
  sc.slip_probability = 0.0;
  sc.epochs = 20;
  const Simulation sim = generate(sc);
  ASSERT_FALSE(sim.injections.empty());
  std::set<std::pair<std::int64_t, SatelliteId>> hit;
  for (const InjectionRecord& r : sim.injections) hit.insert({r.epoch_index, r.sat});
  for (std::size_t t = 0; t < sim.dataset.epochs.size(); ++t) {
    const Epoch& e = sim.dataset.epochs[t];
    for (std::size_t i = 0; i < e.observations.size(); ++i) {
      PseudorangeFactor f;
      f.satellite_position = e.satellites[i].position;
      f.corrected_pseudorange = correct_pseudorange(e.observations[i], e.satellites[i]);
      const double error = pseudorange_residual(sim.truth.states[t], f, RangeModel{}).value;
      if (hit.count({static_cast<std::int64_t>(t), e.observations[i].sat})) {
        EXPECT_GE(error, sc.outlier_min - 1e-6);
      } else {
        EXPECT_LT(std::abs(error), 1e-9);
      }
    }
  }
}

TEST(InjectCycleSlipTest, ShiftsEveryLaterEpoch) {
  const Simulation sim = generate(small());
  Dataset d = sim.dataset;
  const SatelliteId id = d.epochs[0].observations[0].sat;
  const InjectionRecord rec = inject_cycle_slip(d, id, 10, -3);
  EXPECT_EQ(rec.type, InjectionType::CycleSlip);
  EXPECT_EQ(rec.magnitude, -3.0);
  for (std::size_t t = 0; t < d.epochs.size(); ++t) {
    const Observation* before = sim.dataset.epochs[t].find_observation(id);
    const Observation* after = d.epochs[t].find_observation(id);
    if (before == nullptr) continue;
    const double shift = phase_meters(*after->carrier_phase, after->wavelength) -
                         phase_meters(*before->carrier_phase, before->wavelength);
    EXPECT_NEAR(shift, t >= 10 ? -3.0 * after->wavelength : 0.0, 1e-6) << t;
    EXPECT_FALSE(after->loss_of_lock);
  }
}

TEST(InjectCycleSlipTest, FlaggedVariantRaisesLossOfLock) {
  Dataset d = generate(small()).dataset;
  const SatelliteId id = d.epochs[0].observations[2].sat;
  inject_cycle_slip(d, id, 4, 1, true);
  EXPECT_TRUE(d.epochs[4].find_observation(id)->loss_of_lock);
  EXPECT_FALSE(d.epochs[5].find_observation(id)->loss_of_lock);
}

TEST(InjectCycleSlipTest, Rejections) {
  Dataset d = generate(small()).dataset;
  const SatelliteId id = d.epochs[0].observations[0].sat;
  EXPECT_THROW(inject_cycle_slip(d, id, 3, 0), std::invalid_argument);
  EXPECT_THROW(inject_cycle_slip(d, id, 999, 1), std::invalid_argument);
  EXPECT_THROW(inject_cycle_slip(d, SatelliteId{Constellation::GPS, 99}, 3, 1), std::invalid_argument);
}

TEST(ScenarioConfigTest, PresetsAndValidation) {
  EXPECT_EQ(scenario_preset("urban").outlier_probability, 0.10);
  EXPECT_EQ(scenario_preset("heavy-slip").slip_probability, 0.10);
  EXPECT_THROW(scenario_preset("desert"), std::invalid_argument);
  ScenarioConfig sc;
  sc.slip_probability = 1.5;
  EXPECT_THROW(sc.validate(), std::invalid_argument);
  sc = {};
  sc.sigma_phase = -1.0;
  EXPECT_THROW(sc.validate(), std::invalid_argument);
  EXPECT_EQ(parse_trajectory(trajectory_name(TrajectoryKind::WaypointSpline)), TrajectoryKind::WaypointSpline);
  EXPECT_EQ(parse_injection(injection_name(InjectionType::CycleSlip)), InjectionType::CycleSlip);
}

TEST(QuantizeTest, GridAndExactPhase) {
  EXPECT_EQ(quantize(1.0), 1.0);
  EXPECT_EQ(quantize(0.1) * 268435456.0, std::round(0.1 * 268435456.0));
  const double lambda = kGpsL1Wavelength;
  for (double m : {2.1e7, 2.3456789012e7, 123.456, -8.5e4}) {
    const double back = exact_phase_cycles(m, lambda) * lambda;
    EXPECT_LE(std::abs(back - m), std::nextafter(std::abs(m), HUGE_VAL) - std::abs(m)) << m;
  }
}

}  // namespace
}  // namespace wcp
