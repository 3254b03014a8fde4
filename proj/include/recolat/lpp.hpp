#pragma once

// Monte Carlo for the labelled partitioning process (LPP), the backward-time
// dual of the migration-recombination dynamics, plus the two-site closed form.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "recolat/forward.hpp"
#include "recolat/measure.hpp"
#include "recolat/partition.hpp"
#include "recolat/rng.hpp"

namespace recolat {

// Samples one LPP generation. Each labelled block (d,λ) independently draws a
// partition δ' from the full recombination distribution and splits into the
// blocks of δ'|_d (which realises r^d exactly); afterwards every resulting
// block picks its ancestor's location from M(λ,·).
class LppSampler {
public:
    explicit LppSampler(const RecombinationModel& model) : locations_(model.locations())
    {
        double acc = 0.0;
        for (const auto& [delta, p] : model.recombination()) {
            acc += p;
            partition_cdf_.push_back(acc);
            partitions_.push_back(delta.blocks());
        }
        const auto& M = model.backward();
        label_cdf_.resize(static_cast<std::size_t>(locations_));
        for (int a = 0; a < locations_; ++a) {
            double c = 0.0;
            for (int b = 0; b < locations_; ++b) {
                c += M(a, b);
                label_cdf_[static_cast<std::size_t>(a)].push_back(M(a, b) > 0.0 ? c : -1.0);
            }
        }
    }

    LabelledPartition step(const LabelledPartition& bdelta, CounterRng& rng) const
    {
        std::vector<std::pair<SiteSet, Location>> blocks;
        blocks.reserve(static_cast<std::size_t>(bdelta.base_set().size()));
        for (std::size_t i = 0; i < bdelta.size(); ++i) {
            const SiteSet d = bdelta.block(i);
            const Location lambda = bdelta.label(i);
            const auto& split = partitions_[sample_partition(rng)];
            for (SiteSet e : split) {
                if (const SiteSet piece = e & d; !piece.empty()) {
                    blocks.emplace_back(piece, sample_label(lambda, rng));
                }
            }
        }
        return LabelledPartition(std::move(blocks));
    }

    int locations() const { return locations_; }

private:
    std::size_t sample_partition(CounterRng& rng) const
    {
        const double u = rng.uniform() * partition_cdf_.back();
        const auto it = std::upper_bound(partition_cdf_.begin(), partition_cdf_.end(), u);
        return std::min(static_cast<std::size_t>(it - partition_cdf_.begin()), partition_cdf_.size() - 1);
    }

    Location sample_label(Location from, CounterRng& rng) const
    {
        const auto& cdf = label_cdf_[static_cast<std::size_t>(from)];
        const double u = rng.uniform() * *std::max_element(cdf.begin(), cdf.end());
        Location last_positive = 0;
        for (std::size_t b = 0; b < cdf.size(); ++b) {
            if (cdf[b] < 0.0) {
                continue;
            }
            last_positive = static_cast<Location>(b);
            if (u < cdf[b]) {
                return last_positive;
            }
        }
        return last_positive;
    }

    int locations_;
    std::vector<double> partition_cdf_;
    std::vector<std::vector<SiteSet>> partitions_;
    std::vector<std::vector<double>> label_cdf_;
};

inline LabelledPartition lpp_step(const LabelledPartition& bdelta, const RecombinationModel& model, CounterRng& rng)
{
    return LppSampler(model).step(bdelta, rng);
}

struct LppTrajectory {
    // Generation of each recorded state. Unthinned trajectories record every
    // generation; thinned ones record t = 0, every generation in which the
    // base partition split, and the final generation.
    std::vector<std::size_t> times;
    std::vector<LabelledPartition> states;
    std::optional<std::size_t> absorption_time;  // first t with all-singleton base

    const LabelledPartition& final_state() const { return states.back(); }
};

inline LppTrajectory simulate_one(const LabelledPartition& start, const LppSampler& sampler, std::size_t t,
                                  CounterRng& rng, bool thin = false)
{
    LppTrajectory traj;
    traj.times.push_back(0);
    traj.states.push_back(start);
    if (start.base().is_finest()) {
        traj.absorption_time = 0;
    }
    LabelledPartition current = start;
    for (std::size_t s = 1; s <= t; ++s) {
        LabelledPartition next = sampler.step(current, rng);
        const bool split = next.size() != current.size();
        if (!traj.absorption_time && next.base().is_finest()) {
            traj.absorption_time = s;
        }
        current = std::move(next);
        if (!thin || split || s == t) {
            traj.times.push_back(s);
            traj.states.push_back(current);
        }
    }
    return traj;
}

// Replicate r uses stream r of `seed`.
inline std::vector<LppTrajectory> simulate(const LabelledPartition& start, const RecombinationModel& model,
                                           std::size_t t, std::size_t replicates, std::uint64_t seed,
                                           bool thin = false)
{
    require(replicates >= 1, "at least one replicate required");
    require(start.base_set() == model.all_sites(), "start state must partition all sites");
    const LppSampler sampler(model);
    std::vector<LppTrajectory> out;
    out.reserve(replicates);
    for (std::size_t r = 0; r < replicates; ++r) {
        CounterRng rng(seed, r);
        out.push_back(simulate_one(start, sampler, t, rng, thin));
    }
    return out;
}

// Empirical law of Σ_t over an ensemble of unthinned trajectories.
inline std::map<LabelledPartition, std::size_t> state_counts(const std::vector<LppTrajectory>& ensemble,
                                                             std::size_t t)
{
    std::map<LabelledPartition, std::size_t> counts;
    for (const auto& traj : ensemble) {
        require(t < traj.states.size() && traj.times[t] == t, "trajectory does not record generation t");
        ++counts[traj.states[t]];
    }
    return counts;
}

struct DualityEstimate {
    Distribution mean;
    std::vector<double> standard_error;  // entrywise standard error of the mean
    std::map<LabelledPartition, std::size_t> final_counts;
    std::size_t replicates = 0;
};

// Monte Carlo estimate of μ_t(α) = E[R_{Σ_t}(μ_0) | Σ_0 = {([n],α)}].
// Replicates are reduced through the counts of their final states, so the
// result does not depend on the order in which replicates finish.
inline DualityEstimate duality_estimate(Location alpha, std::size_t t, const Metapopulation& mu0,
                                        const RecombinationModel& model, std::size_t replicates,
                                        std::uint64_t seed)
{
    check_population(mu0, model);
    require(alpha >= 0 && alpha < model.locations(), "unknown location");
    require(replicates >= 1, "at least one replicate required");
    const LppSampler sampler(model);
    const auto start = LabelledPartition::coarsest(model.all_sites(), alpha);

    DualityEstimate est;
    est.replicates = replicates;
    for (std::size_t r = 0; r < replicates; ++r) {
        CounterRng rng(seed, r);
        LabelledPartition state = start;
        for (std::size_t s = 0; s < t; ++s) {
            state = sampler.step(state, rng);
        }
        ++est.final_counts[state];
    }

    const auto N = static_cast<double>(replicates);
    std::vector<std::pair<double, Distribution>> terms;
    for (const auto& [state, count] : est.final_counts) {
        terms.emplace_back(static_cast<double>(count), recombinator(state, mu0));
    }
    const std::size_t A = mu0[0].size();
    std::vector<double> mean(A, 0.0);
    for (const auto& [c, R] : terms) {
        for (std::size_t x = 0; x < A; ++x) {
            mean[x] += c / N * R[x];
        }
    }
    est.standard_error.assign(A, std::numeric_limits<double>::infinity());
    if (replicates > 1) {
        for (std::size_t x = 0; x < A; ++x) {
            double ss = 0.0;
            for (const auto& [c, R] : terms) {
                ss += c * (R[x] - mean[x]) * (R[x] - mean[x]);
            }
            est.standard_error[x] = std::sqrt(ss / (N - 1.0) / N);
        }
    }
    est.mean = Distribution::unchecked(mu0.support(), mu0[0].sizes(), std::move(mean));
    return est;
}

// Two sites only. Either the sites stay together for t generations (a single
// ancestral line migrating t times), or they first separate at generation σ
// at some location γ, after which the two lines migrate independently for the
// remaining t - σ + 1 steps.
inline Distribution two_site_closed_form(Location alpha, int t, const Metapopulation& mu0,
                                         const RecombinationModel& model)
{
    require(model.sites() == 2, "two-site closed form requires exactly two sites");
    require(t >= 0, "number of generations must be non-negative");
    check_population(mu0, model);
    const SiteSet all = model.all_sites();
    const double r_max = model.probability(Partition::coarsest(all));
    const double r_min = model.probability(Partition::finest(all));
    const auto& M = model.backward();

    std::vector<Metapopulation> migrated{mu0};  // M^k μ_0
    for (int k = 1; k <= t; ++k) {
        migrated.push_back(migrate(migrated.back(), M));
    }
    std::vector<double> w = migrated[static_cast<std::size_t>(t)][static_cast<std::size_t>(alpha)].weights();
    for (auto& x : w) {
        x *= std::pow(r_max, t);
    }

    Eigen::RowVectorXd label_law = Eigen::RowVectorXd::Unit(M.rows(), alpha);  // row α of M^{σ-1}
    for (int sigma = 1; sigma <= t; ++sigma) {
        const double weight = std::pow(r_max, sigma - 1) * r_min;
        const auto& later = migrated[static_cast<std::size_t>(t - sigma + 1)];
        for (Eigen::Index g = 0; g < M.rows(); ++g) {
            const double c = weight * label_law(g);
            if (c == 0.0) {
                continue;
            }
            const auto& nu = later[static_cast<std::size_t>(g)];
            const auto prod = tensor({marginalise(nu, SiteSet{0}), marginalise(nu, SiteSet{1})});
            for (std::size_t x = 0; x < w.size(); ++x) {
                w[x] += c * prod[x];
            }
        }
        label_law = label_law * M;
    }
    return Distribution::unchecked(all, mu0[0].sizes(), std::move(w));
}

}  // namespace recolat
