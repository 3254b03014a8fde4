#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace recolat;
using namespace testing_support;

namespace {

// Direct evaluation of the ODE right-hand side sequence by sequence.
std::vector<std::vector<double>> brute_rhs(const Metapopulation& omega, const CtModel& ct)
{
    const auto& N = ct.generator();
    const std::size_t L = omega.size();
    const std::size_t A = omega[0].size();
    std::vector<std::vector<double>> d(L, std::vector<double>(A, 0.0));
    for (std::size_t a = 0; a < L; ++a) {
        for (std::size_t x = 0; x < A; ++x) {
            for (std::size_t b = 0; b < L; ++b) {
                d[a][x] += N(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * omega[b][x];
            }
            for (const auto& [delta, rate] : ct.rates()) {
                double prod = 1.0;
                for (SiteSet blk : delta.blocks()) {
                    prod *= brute_marginal(omega[a], blk)[sub_index(omega[a], x, blk)];
                }
                d[a][x] += rate * (prod - omega[a][x]);
            }
        }
    }
    return d;
}

}  // namespace

TEST(CtModel, Validation)
{
    const TypeSpace ts({2, 2});
    Eigen::MatrixXd N(2, 2);
    N << -1, 1, 2, -2;
    EXPECT_NO_THROW(CtModel(ts, {{Partition::finest(ts.all_sites()), 0.5}}, N));
    EXPECT_THROW(CtModel(ts, {{Partition::finest(ts.all_sites()), -0.5}}, N), ModelError);
    Eigen::MatrixXd bad(2, 2);
    bad << -1, 1, 2, -1;
    EXPECT_THROW(CtModel(ts, {{Partition::finest(ts.all_sites()), 0.5}}, bad), ModelError);
    bad << 1, -1, 2, -2;
    EXPECT_THROW(CtModel(ts, {{Partition::finest(ts.all_sites()), 0.5}}, bad), ModelError);
}

TEST(CtRhs, MatchesDirectEvaluation)
{
    Rng rng(61);
    for (int rep = 0; rep < 5; ++rep) {
        const int n = uniform_int(rng, 1, 3);
        const int L = uniform_int(rng, 1, 3);
        const auto ct = random_ct_model(rng, n, L);
        const auto omega = random_population(rng, ct.types(), L);
        const auto d = ct_rhs(omega, ct);
        const auto oracle = brute_rhs(omega, ct);
        for (std::size_t a = 0; a < d.size(); ++a) {
            double sum = 0.0;
            for (std::size_t x = 0; x < d[a].size(); ++x) {
                EXPECT_NEAR(d[a][x], oracle[a][x], 1e-14);
                sum += d[a][x];
            }
            EXPECT_NEAR(sum, 0.0, 1e-14);
        }
    }
}

TEST(CtRhs, VanishesAtStationaryProductState)
{
    Rng rng(62);
    const auto ct = random_ct_model(rng, 3, 2);
    const TypeSpace& ts = ct.types();
    std::vector<Distribution> marginals;
    for (int i = 0; i < 3; ++i) {
        marginals.emplace_back(ts, SiteSet{i}, simplex(rng, 2, 0.0));
    }
    const auto prod = tensor(marginals);
    const Metapopulation omega({prod, prod});
    for (const auto& row : ct_rhs(omega, ct)) {
        for (double v : row) {
            EXPECT_NEAR(v, 0.0, 1e-15);
        }
    }
    const CtModel still(ts, {}, Eigen::MatrixXd::Zero(2, 2));
    for (const auto& row : ct_rhs(random_population(rng, ts, 2), still)) {
        for (double v : row) {
            EXPECT_EQ(v, 0.0);
        }
    }
}

TEST(Generator, SingleSiteIsMigrationGenerator)
{
    Rng rng(63);
    const CtModel ct(TypeSpace({3}), {}, random_generator(rng, 3));
    const auto gen = build_Q(ct);
    ASSERT_EQ(gen.index.size(), 3u);
    EXPECT_LT((gen.Q - ct.generator()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Generator, RowsSumToZero)
{
    Rng rng(64);
    const auto ct = random_ct_model(rng, 4, 2);
    const auto gen = build_Q(ct);
    for (Eigen::Index i = 0; i < gen.Q.rows(); ++i) {
        EXPECT_NEAR(gen.Q.row(i).sum(), 0.0, 1e-13);
        for (Eigen::Index j = 0; j < gen.Q.cols(); ++j) {
            if (i != j) {
                EXPECT_GE(gen.Q(i, j), 0.0);
            }
        }
    }
}

TEST(Generator, JumpChainMatchesEventEnumeration)
{
    Rng rng(65);
    const auto ct = random_ct_model(rng, 3, 2);
    const auto gen = build_Q(ct);
    const auto& N = ct.generator();
    for (std::size_t i = 0; i < gen.index.size(); ++i) {
        const auto& s = gen.index[i];
        // Every event: pick a block and either a global partition restricted to
        // it (if that splits it) or a new label.
        std::map<LabelledPartition, double> events;
        for (std::size_t b = 0; b < s.size(); ++b) {
            for (const auto& [delta, rate] : ct.rates()) {
                const auto piece = induced(delta, s.block(b));
                if (piece.is_coarsest()) {
                    continue;
                }
                std::vector<std::pair<SiteSet, Location>> blocks;
                for (std::size_t c = 0; c < s.size(); ++c) {
                    if (c != b) blocks.emplace_back(s.block(c), s.label(c));
                }
                for (SiteSet e : piece.blocks()) blocks.emplace_back(e, s.label(b));
                events[LabelledPartition(blocks)] += rate;
            }
            for (Location beta = 0; beta < ct.locations(); ++beta) {
                if (beta == s.label(b)) continue;
                auto labels = s.labels();
                labels[b] = beta;
                events[LabelledPartition(s.base(), labels)] += N(s.label(b), beta);
            }
        }
        double total = 0.0;
        for (const auto& [t, r] : events) total += r;
        const auto row = static_cast<Eigen::Index>(i);
        EXPECT_NEAR(-gen.Q(row, row), total, 1e-13);
        for (const auto& [t, r] : events) {
            EXPECT_NEAR(gen.Q(row, static_cast<Eigen::Index>(gen.index.find(t))) / -gen.Q(row, row), r / total, 1e-13);
        }
    }
}

TEST(DualSolution, ZeroTimeAndConservation)
{
    Rng rng(66);
    const auto ct = random_ct_model(rng, 3, 3);
    const auto omega0 = random_population(rng, ct.types(), 3);
    EXPECT_LT(max_abs_diff(ct_solve_dual(omega0, ct, 0.0), omega0), 1e-15);
    for (const auto& nu : ct_solve_dual(omega0, ct, 1.7)) {
        EXPECT_NEAR(nu.total(), 1.0, 1e-10);
    }
}

TEST(DualSolution, AgreesWithRk4)
{
    Rng rng(67);
    for (int rep = 0; rep < 3; ++rep) {
        const auto ct = random_ct_model(rng, uniform_int(rng, 2, 3), uniform_int(rng, 1, 2));
        const auto omega0 = random_population(rng, ct.types(), ct.locations());
        const auto traj = integrate(omega0, ct, 1.0, 1e-3);
        EXPECT_LT(max_abs_diff(traj.states.back(), ct_solve_dual(omega0, ct, 1.0)), 1e-8);
        EXPECT_LT(traj.max_mass_drift, 1e-8);
    }
}

TEST(Integrate, ZeroHorizonAndRecording)
{
    Rng rng(68);
    const auto ct = random_ct_model(rng, 2, 2);
    const auto omega0 = random_population(rng, ct.types(), 2);
    const auto none = integrate(omega0, ct, 0.0, 0.01);
    ASSERT_EQ(none.states.size(), 1u);
    EXPECT_LT(max_abs_diff(none.states[0], omega0), 1e-16);
    const auto rec = integrate(omega0, ct, 1.0, 0.1, 5);
    ASSERT_EQ(rec.times.size(), 3u);
    EXPECT_NEAR(rec.times[1], 0.5, 1e-14);
    EXPECT_EQ(rec.times[2], 1.0);
    EXPECT_THROW(integrate(omega0, ct, 1.0, 0.0), ModelError);
}

TEST(Integrate, RejectsUnstableSteps)
{
    const TypeSpace ts({2, 2});
    Eigen::MatrixXd N(2, 2);
    N << -50, 50, 50, -50;
    const CtModel ct(ts, {{Partition::finest(ts.all_sites()), 50.0}}, N);
    const Metapopulation omega0({Distribution(ts, ts.all_sites(), {1, 0, 0, 0}), Distribution(ts, ts.all_sites(), {0, 0, 0, 1})});
    try {
        integrate(omega0, ct, 1.0, 0.5);
        FAIL() << "expected an error";
    } catch (const ModelError& e) {
        EXPECT_NE(std::string(e.what()).find("step size too large"), std::string::npos);
    }
}

TEST(Integrate, FourthOrderConvergence)
{
    Rng rng(69);
    const auto ct = random_ct_model(rng, 2, 2);
    const auto omega0 = random_population(rng, ct.types(), 2);
    const auto exact = ct_solve_dual(omega0, ct, 1.0);
    const double e1 = max_abs_diff(integrate(omega0, ct, 1.0, 0.1).states.back(), exact);
    const double e2 = max_abs_diff(integrate(omega0, ct, 1.0, 0.05).states.back(), exact);
    const double order = std::log2(e1 / e2);
    EXPECT_GT(order, 3.7);
    EXPECT_LT(order, 4.3);
}

TEST(TwoSite, ClassicalDecayWithoutMigration)
{
    const TypeSpace ts({2, 3});
    const double rho = 0.8;
    const CtModel ct(ts, {{Partition::finest(ts.all_sites()), rho}}, Eigen::MatrixXd::Zero(1, 1));
    Rng rng(70);
    const auto omega0 = random_population(rng, ts, 1);
    const auto le = recombinator(Partition::finest(ts.all_sites()), omega0[0]);
    for (double t : {0.0, 0.3, 1.0, 4.0}) {
        const auto w = ct_two_site(0, t, omega0, ct);
        for (std::size_t x = 0; x < w.size(); ++x) {
            const double expected = std::exp(-rho * t) * omega0[0][x] + (1 - std::exp(-rho * t)) * le[x];
            EXPECT_NEAR(w[x], expected, 1e-10);
        }
    }
}

TEST(TwoSite, NoRecombinationIsPureMigration)
{
    Rng rng(71);
    const TypeSpace ts({2, 2});
    const auto N = random_generator(rng, 2);
    const CtModel ct(ts, {}, N);
    const auto omega0 = random_population(rng, ts, 2);
    const Eigen::MatrixXd E = N.exp();
    const auto w = ct_two_site(1, 1.0, omega0, ct);
    for (std::size_t x = 0; x < 4; ++x) {
        EXPECT_NEAR(w[x], E(1, 0) * omega0[0][x] + E(1, 1) * omega0[1][x], 1e-14);
    }
}

TEST(TwoSite, AgreesWithDualSolution)
{
    Rng rng(72);
    for (int rep = 0; rep < 3; ++rep) {
        const int L = uniform_int(rng, 1, 3);
        const auto ct = random_ct_model(rng, 2, L);
        const auto omega0 = random_population(rng, ct.types(), L);
        const auto dual = ct_solve_dual(omega0, ct, 1.5);
        for (Location a = 0; a < L; ++a) {
            EXPECT_LT(max_abs_diff(ct_two_site(a, 1.5, omega0, ct), dual[static_cast<std::size_t>(a)]), 1e-9);
        }
    }
}

TEST(Gillespie, BaseRefinesMonotonically)
{
    Rng rng(73);
    const auto ct = random_ct_model(rng, 4, 3);
    for (std::uint64_t r = 0; r < 50; ++r) {
        CounterRng g(4, r);
        const auto path = simulate_ct(LabelledPartition::coarsest(ct.all_sites(), 0), ct, 5.0, g);
        for (std::size_t k = 1; k < path.states.size(); ++k) {
            EXPECT_TRUE(is_refinement(path.states[k].base(), path.states[k - 1].base()));
            EXPECT_GT(path.times[k], path.times[k - 1]);
            EXPECT_LE(path.times[k], 5.0);
        }
    }
}

TEST(Gillespie, TransitionLawMatchesExponential)
{
    Rng rng(74);
    const auto ct = random_ct_model(rng, 2, 2);
    const auto gen = build_Q(ct);
    const double t = 0.7;
    const Eigen::MatrixXd P = (t * gen.Q).exp();
    const auto start = LabelledPartition::coarsest(ct.all_sites(), 1);
    const auto row = static_cast<Eigen::Index>(gen.index.find(start));
    const int N = 40000;
    std::map<LabelledPartition, int> counts;
    for (int r = 0; r < N; ++r) {
        CounterRng g(8, static_cast<std::uint64_t>(r));
        ++counts[simulate_ct(start, ct, t, g).states.back()];
    }
    for (std::size_t j = 0; j < gen.index.size(); ++j) {
        const double p = P(row, static_cast<Eigen::Index>(j));
        EXPECT_NEAR(static_cast<double>(counts[gen.index[j]]) / N, p, 5 * std::sqrt(p * (1 - p) / N) + 1e-12);
    }
}
