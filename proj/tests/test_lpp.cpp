#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace recolat;
using namespace testing_support;

TEST(LppSampler, OneStepLawMatchesTransitionRow)
{
    Rng rng(41);
    const auto model = random_model(rng, 3, 2);
    const LabelledPartition start({{SiteSet{0, 1}, 0}, {SiteSet{2}, 1}});
    const auto sys = build_T(model, {start});
    const auto row = static_cast<Eigen::Index>(sys.index.find(start));
    const LppSampler sampler(model);
    CounterRng g(5, 0);
    const int N = 100000;
    std::map<LabelledPartition, int> counts;
    for (int i = 0; i < N; ++i) {
        ++counts[sampler.step(start, g)];
    }
    for (const auto& [state, c] : counts) {
        ASSERT_TRUE(sys.index.contains(state)) << to_string(state);
        EXPECT_GT(sys.T(row, static_cast<Eigen::Index>(sys.index.find(state))), 0.0);
    }
    for (std::size_t j = 0; j < sys.index.size(); ++j) {
        const double p = sys.T(row, static_cast<Eigen::Index>(j));
        const double f = static_cast<double>(counts[sys.index[j]]) / N;
        EXPECT_NEAR(f, p, 5.0 * std::sqrt(p * (1 - p) / N) + 1e-12) << to_string(sys.index[j]);
    }
}

TEST(LppSampler, BaseOnlyRefines)
{
    Rng rng(42);
    const auto model = random_model(rng, 4, 3);
    const auto start = LabelledPartition::coarsest(model.all_sites(), 2);
    const auto ens = simulate(start, model, 30, 50, 9);
    for (const auto& traj : ens) {
        ASSERT_EQ(traj.states.size(), 31u);
        for (std::size_t s = 1; s < traj.states.size(); ++s) {
            EXPECT_TRUE(is_refinement(traj.states[s].base(), traj.states[s - 1].base()));
        }
        if (traj.absorption_time) {
            EXPECT_TRUE(traj.states[*traj.absorption_time].base().is_finest());
            EXPECT_FALSE(traj.states[*traj.absorption_time - 1].base().is_finest());
        }
    }
}

TEST(Simulate, ReproducibleByReplicateStream)
{
    Rng rng(43);
    const auto model = random_model(rng, 3, 2);
    const auto start = LabelledPartition::coarsest(model.all_sites(), 0);
    const auto a = simulate(start, model, 10, 20, 77);
    const auto b = simulate(start, model, 10, 20, 77);
    const auto c = simulate(start, model, 10, 5, 77);
    for (std::size_t r = 0; r < 20; ++r) {
        EXPECT_EQ(a[r].states, b[r].states);
    }
    for (std::size_t r = 0; r < 5; ++r) {
        EXPECT_EQ(a[r].states, c[r].states);
    }
}

TEST(Simulate, ThinningKeepsSplitsAndEnd)
{
    Rng rng(44);
    const auto model = random_model(rng, 3, 2);
    const auto start = LabelledPartition::coarsest(model.all_sites(), 0);
    const auto full = simulate(start, model, 15, 10, 3, false);
    const auto thin = simulate(start, model, 15, 10, 3, true);
    for (std::size_t r = 0; r < 10; ++r) {
        EXPECT_EQ(thin[r].final_state(), full[r].final_state());
        EXPECT_EQ(thin[r].times.front(), 0u);
        EXPECT_EQ(thin[r].times.back(), 15u);
        for (std::size_t k = 0; k < thin[r].times.size(); ++k) {
            EXPECT_EQ(thin[r].states[k], full[r].states[thin[r].times[k]]);
        }
        EXPECT_EQ(thin[r].absorption_time, full[r].absorption_time);
    }
}

TEST(StateCounts, TalliesGeneration)
{
    Rng rng(45);
    const auto model = random_model(rng, 2, 2);
    const auto start = LabelledPartition::coarsest(model.all_sites(), 1);
    const auto ens = simulate(start, model, 4, 200, 1);
    std::size_t total = 0;
    for (const auto& [s, c] : state_counts(ens, 4)) {
        total += c;
    }
    EXPECT_EQ(total, 200u);
    EXPECT_EQ(state_counts(ens, 0).at(start), 200u);
}

TEST(DualityEstimate, ConsistentWithExactSolution)
{
    Rng rng(46);
    const auto model = random_model(rng, 3, 2);
    const auto mu0 = random_population(rng, model.types(), 2);
    const auto exact = iterate(mu0, model, 4).back();
    const auto est = duality_estimate(1, 4, mu0, model, 20000, 12);
    for (std::size_t x = 0; x < exact[1].size(); ++x) {
        EXPECT_NEAR(est.mean[x], exact[1][x], 5.0 * est.standard_error[x] + 1e-12);
    }
    const auto one = duality_estimate(0, 4, mu0, model, 1, 12);
    EXPECT_TRUE(std::isinf(one.standard_error[0]));
}

TEST(DualityEstimate, ZeroGenerationsIsExact)
{
    Rng rng(47);
    const auto model = random_model(rng, 2, 3);
    const auto mu0 = random_population(rng, model.types(), 3);
    const auto est = duality_estimate(2, 0, mu0, model, 10, 3);
    EXPECT_LT(max_abs_diff(est.mean, mu0[2]), 1e-16);
}

TEST(TwoSiteClosedForm, MatchesIteration)
{
    Rng rng(48);
    for (int rep = 0; rep < 5; ++rep) {
        const int L = uniform_int(rng, 1, 3);
        const auto model = random_model(rng, 2, L);
        const auto mu0 = random_population(rng, model.types(), L);
        const auto states = iterate(mu0, model, 8);
        for (int t = 0; t <= 8; ++t) {
            for (Location a = 0; a < L; ++a) {
                EXPECT_LT(max_abs_diff(two_site_closed_form(a, t, mu0, model),
                                       states[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)]),
                          1e-14);
            }
        }
    }
    const auto three = random_model(rng, 3, 1);
    EXPECT_THROW(two_site_closed_form(0, 1, random_population(rng, three.types(), 1), three), ModelError);
}
