#include <gtest/gtest.h>

#include <boost/rational.hpp>

#include "test_support.hpp"

using namespace recolat;
using namespace testing_support;

namespace {

// T_{bδ,bε} enumerated over every labelled partition of [n]:
// ∏_{(d,λ)∈bδ} r^d_{ε|d} ∏_{(e,γ)∈bε, e⊆d} M(λ,γ) when ε ≼ δ.
double oracle_entry(const RecombinationModel& model, const LabelledPartition& from, const LabelledPartition& to)
{
    if (!is_refinement(to.base(), from.base())) {
        return 0.0;
    }
    double p = 1.0;
    for (std::size_t i = 0; i < from.size(); ++i) {
        const SiteSet d = from.block(i);
        const auto target = induced(to.base(), d);
        double r = 0.0;
        for (const auto& [delta, q] : model.recombination()) {
            if (induced(delta, d) == target) {
                r += q;
            }
        }
        p *= r;
        for (std::size_t j = 0; j < to.size(); ++j) {
            if (to.block(j).subset_of(d)) {
                p *= model.backward()(from.label(i), to.label(j));
            }
        }
    }
    return p;
}

}  // namespace

TEST(TransitionMatrix, MatchesEntrywiseOracle)
{
    Rng rng(31);
    for (int rep = 0; rep < 6; ++rep) {
        const int n = uniform_int(rng, 1, 3);
        const int L = uniform_int(rng, 1, 3);
        const auto model = random_model(rng, n, L);
        const auto all = enumerate_labelled_partitions(model.all_sites(), L);
        const auto sys = build_T(model, all);
        ASSERT_EQ(sys.index.size(), all.size());
        for (std::size_t i = 0; i < all.size(); ++i) {
            for (std::size_t j = 0; j < all.size(); ++j) {
                EXPECT_NEAR(sys.T(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                            oracle_entry(model, all[i], all[j]), 1e-15);
            }
        }
    }
}

TEST(TransitionMatrix, StochasticAndBlockTriangular)
{
    Rng rng(32);
    for (int rep = 0; rep < 15; ++rep) {
        const auto model = random_model(rng, uniform_int(rng, 1, 4), uniform_int(rng, 1, 3));
        const auto sys = build_T(model);
        for (Eigen::Index i = 0; i < sys.T.rows(); ++i) {
            EXPECT_NEAR(sys.T.row(i).sum(), 1.0, 1e-12);
            // Below the diagonal only relabellings within one base survive.
            for (Eigen::Index j = 0; j < i; ++j) {
                if (sys.T(i, j) != 0.0) {
                    EXPECT_EQ(sys.index[static_cast<std::size_t>(j)].base(), sys.index[static_cast<std::size_t>(i)].base());
                }
            }
            for (Eigen::Index j = 0; j < sys.T.cols(); ++j) {
                if (sys.T(i, j) != 0.0) {
                    EXPECT_TRUE(is_refinement(sys.index[static_cast<std::size_t>(j)].base(),
                                              sys.index[static_cast<std::size_t>(i)].base()));
                }
            }
        }
    }
}

TEST(TransitionMatrix, LumpsToUnlabelledChain)
{
    Rng rng(33);
    const auto model = random_model(rng, 4, 2);
    const auto sys = build_T(model);
    const auto& ul = sys.unlabelled;
    for (std::size_t i = 0; i < sys.index.size(); ++i) {
        std::map<Partition, double> lumped;
        for (std::size_t j = 0; j < sys.index.size(); ++j) {
            lumped[sys.index[j].base()] += sys.T(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        const auto from = static_cast<Eigen::Index>(ul.index.find(sys.index[i].base()));
        for (const auto& [eps, p] : lumped) {
            EXPECT_NEAR(p, ul.Tul(from, static_cast<Eigen::Index>(ul.index.find(eps))), 1e-14);
        }
    }
}

TEST(TransitionMatrix, SingleLocationEqualsUnlabelled)
{
    Rng rng(34);
    const auto model = random_model(rng, 3, 1);
    const auto sys = build_T(model);
    ASSERT_EQ(sys.T.rows(), sys.unlabelled.Tul.rows());
    EXPECT_LT((sys.T - sys.unlabelled.Tul).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TransitionMatrix, NoRecombinationKeepsSingleBlock)
{
    Rng rng(35);
    const TypeSpace ts({2, 2, 2});
    const auto M = random_stochastic(rng, 3);
    const RecombinationModel model(ts, {{Partition::coarsest(ts.all_sites()), 1.0}}, M);
    const auto sys = build_T(model);
    ASSERT_EQ(sys.index.size(), 3u);
    EXPECT_LT((sys.T - M).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(UnlabelledChain, ExactSojournsInRationalArithmetic)
{
    using Q = boost::rational<long long>;
    const auto all = SiteSet::first(4);
    const Partition pair({SiteSet{0, 1}, SiteSet{2, 3}});
    const std::vector<std::pair<Partition, Q>> r{
        {Partition::finest(all), Q(1, 2)}, {pair, Q(1, 10)}, {Partition::coarsest(all), Q(2, 5)}};
    const auto sojourn = [&](const Partition& delta) {
        Q s(0);
        for (const auto& [eps, p] : unlabelled_transition_row<Q>(delta, r)) {
            if (eps == delta) {
                s += p;
            }
        }
        return s;
    };
    EXPECT_EQ(sojourn(Partition::coarsest(all)), Q(2, 5));
    EXPECT_EQ(sojourn(pair), Q(1, 4));
    EXPECT_EQ(sojourn(Partition({SiteSet{0, 1}, SiteSet{2}, SiteSet{3}})), Q(1, 2));
    Q row_sum(0);
    for (const auto& [eps, p] : unlabelled_transition_row<Q>(pair, r)) {
        row_sum += p;
    }
    EXPECT_EQ(row_sum, Q(1));
}

TEST(MatrixPower, AgreesWithRepeatedProduct)
{
    Rng rng(36);
    const auto A = random_stochastic(rng, 5);
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(5, 5);
    for (int t = 0; t <= 20; ++t) {
        EXPECT_LT((matrix_power(A, t) - P).cwiseAbs().maxCoeff(), 1e-14) << "t=" << t;
        P = P * A;
    }
}

TEST(Linearisation, MatchesForwardIteration)
{
    Rng rng(37);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = uniform_int(rng, 1, 4);
        const int L = uniform_int(rng, 1, 3);
        const auto model = random_model(rng, n, L);
        const auto mu0 = random_population(rng, model.types(), L);
        const auto sys = build_T(model);
        const auto states = iterate(mu0, model, 8);
        for (int t = 0; t <= 8; ++t) {
            EXPECT_LT(max_abs_diff(solve_linear(mu0, sys, t), states[static_cast<std::size_t>(t)]), 1e-13);
        }
    }
}

TEST(Linearisation, EveryRecombinatorFollowsDuality)
{
    Rng rng(38);
    const auto model = random_model(rng, 3, 2);
    const auto mu0 = random_population(rng, model.types(), 2);
    const auto sys = build_T(model);
    const auto R3 = propagate(sys, mu0, 3);
    const auto mu3 = iterate(mu0, model, 3).back();
    for (std::size_t i = 0; i < sys.index.size(); ++i) {
        EXPECT_LT(max_abs_diff(R3.entries[i], recombinator(sys.index[i], mu3)), 1e-14);
    }
}
