#pragma once

// Haldane linearisation: the vector of labelled recombinators R(μ_t) evolves
// linearly, R(μ_{t+1}) = T R(μ_t), where T is the transition matrix of the
// labelled partitioning process. Matrices are dense over the labelled
// partitions reachable from the chosen start states, in canonical order.

#include <deque>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "recolat/forward.hpp"
#include "recolat/measure.hpp"
#include "recolat/partition.hpp"

namespace recolat {

template <class State>
class StateIndex {
public:
    StateIndex() = default;

    explicit StateIndex(std::vector<State> states) : states_(std::move(states))
    {
        for (std::size_t i = 0; i < states_.size(); ++i) {
            position_.emplace(states_[i], i);
        }
    }

    std::size_t size() const { return states_.size(); }
    const State& operator[](std::size_t i) const { return states_[i]; }
    const std::vector<State>& states() const { return states_; }
    auto begin() const { return states_.begin(); }
    auto end() const { return states_.end(); }

    bool contains(const State& s) const { return position_.count(s) != 0; }

    std::size_t find(const State& s) const
    {
        const auto it = position_.find(s);
        require(it != position_.end(), "state is not in the reachable index");
        return it->second;
    }

private:
    std::vector<State> states_;
    std::map<State, std::size_t> position_;
};

// Σ_t transition row δ -> ε with probability ∏_{d∈δ} r^d_{ε|d}.
template <class Scalar>
WeightedPartitions<Scalar> unlabelled_transition_row(const Partition& delta,
                                                     std::span<const std::pair<Partition, Scalar>> r)
{
    std::vector<std::pair<std::vector<SiteSet>, Scalar>> partial{{{}, Scalar(1)}};
    for (SiteSet d : delta.blocks()) {
        const auto options = marginal_recombination<Scalar>(r, d);
        std::vector<std::pair<std::vector<SiteSet>, Scalar>> next;
        for (const auto& [blocks, p] : partial) {
            for (const auto& [eps, q] : options) {
                auto b = blocks;
                b.insert(b.end(), eps.blocks().begin(), eps.blocks().end());
                next.emplace_back(std::move(b), p * q);
            }
        }
        partial = std::move(next);
    }
    WeightedPartitions<Scalar> row;
    for (auto& [blocks, p] : partial) {
        row.emplace_back(Partition(delta.base(), std::move(blocks)), p);
    }
    return row;
}

namespace detail {

// Breadth-first closure of `starts` under a successor function, sorted into
// canonical order.
template <class State, class Successors>
std::vector<State> reachable_closure(std::vector<State> starts, Successors successors)
{
    std::map<State, bool> seen;
    std::deque<State> queue;
    for (auto& s : starts) {
        if (seen.emplace(s, true).second) {
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        State s = std::move(queue.front());
        queue.pop_front();
        for (auto& [next, p] : successors(s)) {
            if (p > 0.0 && seen.emplace(next, true).second) {
                queue.push_back(next);
            }
        }
    }
    std::vector<State> out;
    out.reserve(seen.size());
    for (auto& [s, flag] : seen) {
        out.push_back(s);
    }
    return out;
}

}  // namespace detail

struct UnlabelledSystem {
    StateIndex<Partition> index;
    Eigen::MatrixXd Tul;

    double sojourn(const Partition& delta) const
    {
        const auto i = static_cast<Eigen::Index>(index.find(delta));
        return Tul(i, i);
    }
};

inline UnlabelledSystem build_Tul(const RecombinationModel& model, std::vector<Partition> starts = {})
{
    if (starts.empty()) {
        starts.push_back(Partition::coarsest(model.all_sites()));
    }
    const std::span<const std::pair<Partition, double>> r(model.recombination());
    auto successors = [&](const Partition& p) { return unlabelled_transition_row<double>(p, r); };
    UnlabelledSystem sys;
    sys.index = StateIndex<Partition>(detail::reachable_closure(std::move(starts), successors));
    const auto K = static_cast<Eigen::Index>(sys.index.size());
    sys.Tul = Eigen::MatrixXd::Zero(K, K);
    for (std::size_t i = 0; i < sys.index.size(); ++i) {
        for (const auto& [eps, p] : successors(sys.index[i])) {
            sys.Tul(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(sys.index.find(eps))) += p;
        }
    }
    return sys;
}

// Row bδ of T: each labelled block (d,λ) is replaced by a labelled partition
// bε_d of d with probability p^d_{bε_d}(λ) = r^d_{ε_d} ∏_{(e,γ)∈bε_d} M(λ,γ),
// independently across blocks.
class TransitionKernel {
public:
    explicit TransitionKernel(const RecombinationModel& model) : model_(&model) {}

    std::vector<std::pair<LabelledPartition, double>> row(const LabelledPartition& bdelta)
    {
        using Blocks = std::vector<std::pair<SiteSet, Location>>;
        std::vector<std::pair<Blocks, double>> partial{{{}, 1.0}};
        for (std::size_t i = 0; i < bdelta.size(); ++i) {
            const auto& options = block_options(bdelta.block(i), bdelta.label(i));
            std::vector<std::pair<Blocks, double>> next;
            next.reserve(partial.size() * options.size());
            for (const auto& [blocks, p] : partial) {
                for (const auto& [piece, q] : options) {
                    auto b = blocks;
                    b.insert(b.end(), piece.begin(), piece.end());
                    next.emplace_back(std::move(b), p * q);
                }
            }
            partial = std::move(next);
        }
        std::vector<std::pair<LabelledPartition, double>> out;
        out.reserve(partial.size());
        for (auto& [blocks, p] : partial) {
            out.emplace_back(LabelledPartition(std::move(blocks)), p);
        }
        return out;
    }

private:
    using Piece = std::vector<std::pair<SiteSet, Location>>;

    const std::vector<std::pair<Piece, double>>& block_options(SiteSet d, Location lambda)
    {
        const auto key = std::make_pair(d.mask(), lambda);
        if (auto it = cache_.find(key); it != cache_.end()) {
            return it->second;
        }
        const auto& M = model_->backward();
        const int L = model_->locations();
        std::vector<std::pair<Piece, double>> options;
        for (const auto& [eps, r] : model_->marginal(d)) {
            std::vector<Location> labels(eps.size(), 0);
            while (true) {
                double p = r;
                Piece piece;
                for (std::size_t j = 0; j < eps.size(); ++j) {
                    p *= M(lambda, labels[j]);
                    piece.emplace_back(eps[j], labels[j]);
                }
                if (p > 0.0) {
                    options.emplace_back(std::move(piece), p);
                }
                std::size_t j = labels.size();
                while (j > 0 && labels[j - 1] == L - 1) {
                    labels[--j] = 0;
                }
                if (j == 0) {
                    break;
                }
                ++labels[j - 1];
            }
        }
        return cache_.emplace(key, std::move(options)).first->second;
    }

    const RecombinationModel* model_;
    std::map<std::pair<std::uint32_t, Location>, std::vector<std::pair<Piece, double>>> cache_;
};

struct LinearSystem {
    StateIndex<LabelledPartition> index;
    Eigen::MatrixXd T;
    UnlabelledSystem unlabelled;

    // Position of the single-block state {([n], α)}.
    std::size_t coarsest(Location alpha) const
    {
        return index.find(LabelledPartition::coarsest(index[0].base_set(), alpha));
    }
};

inline LinearSystem build_T(const RecombinationModel& model, std::vector<LabelledPartition> starts = {})
{
    if (starts.empty()) {
        for (Location a = 0; a < model.locations(); ++a) {
            starts.push_back(LabelledPartition::coarsest(model.all_sites(), a));
        }
    }
    std::vector<Partition> bases;
    for (const auto& s : starts) {
        require(s.base_set() == model.all_sites(), "start state must partition all sites");
        for (Location l : s.labels()) {
            require(l < model.locations(), "start state label refers to an unknown location");
        }
        bases.push_back(s.base());
    }
    TransitionKernel kernel(model);
    LinearSystem sys;
    sys.index = StateIndex<LabelledPartition>(
        detail::reachable_closure(std::move(starts), [&](const LabelledPartition& s) { return kernel.row(s); }));
    const auto K = static_cast<Eigen::Index>(sys.index.size());
    sys.T = Eigen::MatrixXd::Zero(K, K);
    for (std::size_t i = 0; i < sys.index.size(); ++i) {
        for (const auto& [eps, p] : kernel.row(sys.index[i])) {
            sys.T(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(sys.index.find(eps))) += p;
        }
    }
    sys.unlabelled = build_Tul(model, std::move(bases));
    return sys;
}

// A^t; plain products for small t, binary powering otherwise.
inline Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& A, long long t)
{
    require(A.rows() == A.cols(), "matrix power needs a square matrix");
    require(t >= 0, "matrix power needs a non-negative exponent");
    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    if (t <= 8) {
        for (long long s = 0; s < t; ++s) {
            result = result * A;
        }
        return result;
    }
    Eigen::MatrixXd base = A;
    while (t > 0) {
        if (t & 1) {
            result = result * base;
        }
        t >>= 1;
        if (t > 0) {
            base = base * base;
        }
    }
    return result;
}

// R(μ) restricted to an index of labelled partitions.
struct RecombinatorVector {
    std::vector<LabelledPartition> index;
    std::vector<Distribution> entries;

    // One row per state; columns are sequences in mixed-radix order.
    Eigen::MatrixXd stacked() const
    {
        const auto K = static_cast<Eigen::Index>(entries.size());
        const auto A = static_cast<Eigen::Index>(entries.empty() ? 0 : entries[0].size());
        Eigen::MatrixXd S(K, A);
        for (Eigen::Index i = 0; i < K; ++i) {
            for (Eigen::Index x = 0; x < A; ++x) {
                S(i, x) = entries[static_cast<std::size_t>(i)][static_cast<std::size_t>(x)];
            }
        }
        return S;
    }
};

inline RecombinatorVector build_R(const Metapopulation& mu, std::span<const LabelledPartition> index)
{
    RecombinatorVector R;
    R.index.assign(index.begin(), index.end());
    R.entries.reserve(index.size());
    for (const auto& bdelta : index) {
        R.entries.push_back(recombinator(bdelta, mu));
    }
    return R;
}

inline RecombinatorVector build_R(const Metapopulation& mu, const LinearSystem& sys)
{
    return build_R(mu, sys.index.states());
}

// (T^t R(μ_0))_bδ for every indexed bδ; by duality this is R_bδ(μ_t).
inline RecombinatorVector propagate(const LinearSystem& sys, const Metapopulation& mu0, long long t)
{
    const auto R0 = build_R(mu0, sys);
    const Eigen::MatrixXd Rt = matrix_power(sys.T, t) * R0.stacked();
    RecombinatorVector out;
    out.index = R0.index;
    for (Eigen::Index i = 0; i < Rt.rows(); ++i) {
        std::vector<double> w(Rt.cols());
        for (Eigen::Index x = 0; x < Rt.cols(); ++x) {
            w[static_cast<std::size_t>(x)] = Rt(i, x);
        }
        out.entries.push_back(Distribution::unchecked(mu0.support(), mu0[0].sizes(), std::move(w)));
    }
    return out;
}

inline Metapopulation solve_linear(const Metapopulation& mu0, const LinearSystem& sys, long long t)
{
    require(t >= 0, "number of generations must be non-negative");
    const auto Rt = propagate(sys, mu0, t);
    std::vector<Distribution> out;
    for (Location a = 0; a < static_cast<Location>(mu0.size()); ++a) {
        out.push_back(Rt.entries[sys.coarsest(a)]);
    }
    return Metapopulation(std::move(out));
}

inline Metapopulation solve_linear(const Metapopulation& mu0, const RecombinationModel& model, long long t)
{
    check_population(mu0, model);
    return solve_linear(mu0, build_T(model), t);
}

}  // namespace recolat
