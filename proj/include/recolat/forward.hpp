#pragma once

// Forward-time migration-recombination dynamics.

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "recolat/measure.hpp"
#include "recolat/partition.hpp"

namespace recolat {

template <class Scalar>
using WeightedPartitions = std::vector<std::pair<Partition, Scalar>>;

// Marginal recombination distribution r^U_δ = Σ_{δ': δ'|_U = δ} r_δ',
// returned in canonical partition order with zero entries dropped.
template <class Scalar>
WeightedPartitions<Scalar> marginal_recombination(std::span<const std::pair<Partition, Scalar>> r, SiteSet U)
{
    std::map<Partition, Scalar> acc;
    for (const auto& [delta, p] : r) {
        auto [it, inserted] = acc.try_emplace(induced(delta, U), p);
        if (!inserted) {
            it->second = it->second + p;
        }
    }
    WeightedPartitions<Scalar> out;
    for (auto& [delta, p] : acc) {
        if (p != Scalar(0)) {
            out.emplace_back(delta, p);
        }
    }
    return out;
}

inline void check_row_stochastic(const Eigen::MatrixXd& M, const std::string& what)
{
    require(M.rows() == M.cols() && M.rows() > 0, what + " must be a non-empty square matrix");
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            require(std::isfinite(M(i, j)) && M(i, j) >= 0.0, what + " has a negative entry");
        }
        require(std::abs(M.row(i).sum() - 1.0) <= kNormTolerance,
                what + " row " + std::to_string(i) + " does not sum to 1");
    }
}

class RecombinationModel {
public:
    RecombinationModel() = default;

    // `recombination` lists the partitions of the full site set with positive
    // probability; anything absent has probability zero. `backward` is the
    // backward migration matrix M, M(α,β) = P(parent lived at β | child at α).
    RecombinationModel(TypeSpace types, WeightedPartitions<double> recombination, Eigen::MatrixXd backward)
        : types_(std::move(types)), backward_(std::move(backward))
    {
        const SiteSet all = types_.all_sites();
        double total = 0.0;
        std::map<Partition, double> seen;
        for (auto& [delta, p] : recombination) {
            require(delta.base() == all, "recombination partition " + to_string(delta) +
                                             " is not a partition of all sites");
            require(std::isfinite(p) && p >= 0.0, "recombination probabilities must be non-negative");
            require(seen.emplace(delta, p).second, "partition " + to_string(delta) + " listed twice");
            total += p;
        }
        require(std::abs(total - 1.0) <= kNormTolerance, "recombination probabilities must sum to 1");
        for (auto& [delta, p] : seen) {
            if (p > 0.0) {
                recombination_.emplace_back(delta, p);
            }
        }
        check_row_stochastic(backward_, "backward migration matrix");
    }

    const TypeSpace& types() const { return types_; }
    int sites() const { return types_.sites(); }
    SiteSet all_sites() const { return types_.all_sites(); }
    int locations() const { return static_cast<int>(backward_.rows()); }
    const WeightedPartitions<double>& recombination() const { return recombination_; }
    const Eigen::MatrixXd& backward() const { return backward_; }

    double probability(const Partition& delta) const
    {
        for (const auto& [d, p] : recombination_) {
            if (d == delta) {
                return p;
            }
        }
        return 0.0;
    }

    WeightedPartitions<double> marginal(SiteSet U) const
    {
        return marginal_recombination<double>(recombination_, U);
    }

    // Partitions into more than two blocks are allowed but have no
    // two-parent interpretation; callers may want to warn about them.
    bool has_multiparent_partitions() const
    {
        for (const auto& [d, p] : recombination_) {
            if (d.size() > 2) {
                return true;
            }
        }
        return false;
    }

private:
    TypeSpace types_;
    WeightedPartitions<double> recombination_;
    Eigen::MatrixXd backward_;
};

// M(α,β) = c(β)/c(α) M̃(β,α), valid when the sizes c are stationary under M̃.
inline Eigen::MatrixXd backward_from_forward(const Eigen::MatrixXd& forward, std::span<const double> sizes)
{
    check_row_stochastic(forward, "forward migration matrix");
    const auto L = forward.rows();
    require(static_cast<Eigen::Index>(sizes.size()) == L, "one population size per location required");
    for (double c : sizes) {
        require(std::isfinite(c) && c > 0.0, "population sizes must be positive");
    }
    for (Eigen::Index a = 0; a < L; ++a) {
        double inflow = 0.0;
        for (Eigen::Index b = 0; b < L; ++b) {
            inflow += sizes[static_cast<std::size_t>(b)] * forward(b, a);
        }
        require(std::abs(inflow - sizes[static_cast<std::size_t>(a)]) <= 1e-9 * std::max(1.0, inflow),
                "population sizes not stationary under forward migration");
    }
    Eigen::MatrixXd M(L, L);
    for (Eigen::Index a = 0; a < L; ++a) {
        for (Eigen::Index b = 0; b < L; ++b) {
            M(a, b) = sizes[static_cast<std::size_t>(b)] / sizes[static_cast<std::size_t>(a)] * forward(b, a);
        }
    }
    return M;
}

namespace detail {

inline void add_scaled(std::vector<double>& acc, double a, const Distribution& x)
{
    for (std::size_t i = 0; i < acc.size(); ++i) {
        acc[i] += a * x[i];
    }
}

}  // namespace detail

// μ_{t+1/2}(α) = Σ_β M(α,β) μ_t(β)
inline Metapopulation migrate(const Metapopulation& mu, const Eigen::MatrixXd& M)
{
    require(static_cast<Eigen::Index>(mu.size()) == M.rows() && M.rows() == M.cols(),
            "migration matrix does not match the number of locations");
    std::vector<Distribution> out;
    out.reserve(mu.size());
    for (std::size_t a = 0; a < mu.size(); ++a) {
        std::vector<double> w(mu[a].size(), 0.0);
        for (std::size_t b = 0; b < mu.size(); ++b) {
            if (const double m = M(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)); m != 0.0) {
                detail::add_scaled(w, m, mu[b]);
            }
        }
        out.push_back(Distribution::unchecked(mu.support(), mu[a].sizes(), std::move(w)));
    }
    return Metapopulation(std::move(out));
}

// Each location gets Σ_δ r_δ ⊗_{d∈δ} μ^d(α).
inline Metapopulation recombine(const Metapopulation& mu, std::span<const std::pair<Partition, double>> r)
{
    std::vector<Distribution> out;
    out.reserve(mu.size());
    for (const auto& nu : mu) {
        std::vector<double> w(nu.size(), 0.0);
        // Rescale so that a mass defect of ν is carried over, not multiplied by |δ|.
        const double total = nu.total();
        for (const auto& [delta, p] : r) {
            const double scale = total > 0.0 ? std::pow(total, 1 - static_cast<int>(delta.size())) : 1.0;
            detail::add_scaled(w, p * scale, recombinator(delta, nu));
        }
        out.push_back(Distribution::unchecked(nu.support(), nu.sizes(), std::move(w)));
    }
    return Metapopulation(std::move(out));
}

inline void check_population(const Metapopulation& mu, const RecombinationModel& model)
{
    require(static_cast<int>(mu.size()) == model.locations(),
            "metapopulation has " + std::to_string(mu.size()) + " locations, model has " +
                std::to_string(model.locations()));
    require(mu.support() == model.all_sites() && mu[0].sizes() == model.types().alphabet_sizes(),
            "metapopulation is not defined on the model's type space");
}

// One generation: migration, then recombination.
inline Metapopulation step(const Metapopulation& mu, const RecombinationModel& model)
{
    check_population(mu, model);
    return recombine(migrate(mu, model.backward()), model.recombination());
}

struct Trajectory {
    std::vector<Metapopulation> states;      // μ_0 .. μ_t
    std::vector<Metapopulation> half_steps;  // μ_{1/2} .. μ_{t-1/2}, if requested
};

inline Trajectory iterate_trajectory(const Metapopulation& mu0, const RecombinationModel& model, int t,
                                     bool keep_half_steps = false)
{
    require(t >= 0, "number of generations must be non-negative");
    check_population(mu0, model);
    Trajectory traj;
    traj.states.reserve(static_cast<std::size_t>(t) + 1);
    traj.states.push_back(mu0);
    for (int s = 0; s < t; ++s) {
        auto half = migrate(traj.states.back(), model.backward());
        traj.states.push_back(recombine(half, model.recombination()));
        if (keep_half_steps) {
            traj.half_steps.push_back(std::move(half));
        }
    }
    return traj;
}

inline std::vector<Metapopulation> iterate(const Metapopulation& mu0, const RecombinationModel& model, int t)
{
    return iterate_trajectory(mu0, model, t).states;
}

// Marginal migration-recombination probabilities p^U_bδ(α) = r^U_δ ∏ M(α,λ).
struct MigRecombProbs {
    SiteSet support;
    std::vector<LabelledPartition> states;
    Eigen::MatrixXd probs;  // locations × states

    double operator()(Location alpha, std::size_t state) const
    {
        return probs(alpha, static_cast<Eigen::Index>(state));
    }
};

inline MigRecombProbs migrecomb_probs(const RecombinationModel& model, SiteSet U)
{
    require(!U.empty(), "empty site set");
    require(U.subset_of(model.all_sites()), "site set exceeds the type space");
    const int L = model.locations();
    const auto& M = model.backward();
    MigRecombProbs out;
    out.support = U;
    std::vector<std::vector<double>> columns;
    for (const auto& [delta, r] : model.marginal(U)) {
        std::vector<Location> labels(delta.size(), 0);
        while (true) {
            std::vector<double> col(static_cast<std::size_t>(L));
            for (int a = 0; a < L; ++a) {
                double p = r;
                for (Location l : labels) {
                    p *= M(a, l);
                }
                col[static_cast<std::size_t>(a)] = p;
            }
            out.states.emplace_back(delta, labels);
            columns.push_back(std::move(col));
            std::size_t i = labels.size();
            while (i > 0 && labels[i - 1] == L - 1) {
                labels[--i] = 0;
            }
            if (i == 0) {
                break;
            }
            ++labels[i - 1];
        }
    }
    out.probs.resize(L, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        for (int a = 0; a < L; ++a) {
            out.probs(a, static_cast<Eigen::Index>(j)) = columns[j][static_cast<std::size_t>(a)];
        }
    }
    return out;
}

// μ^U_{t+1} = Σ_{bδ ∈ LS(U)} p^U_bδ R^U_bδ(μ^U_t). With U = all sites this is
// the labelled-partition form of a full generation.
inline Metapopulation marginal_step(const Metapopulation& muU, const RecombinationModel& model, SiteSet U)
{
    require(muU.support() == U, "marginal metapopulation support does not match U");
    require(static_cast<int>(muU.size()) == model.locations(), "wrong number of locations");
    const auto probs = migrecomb_probs(model, U);
    std::vector<std::vector<double>> acc(muU.size(), std::vector<double>(muU[0].size(), 0.0));
    for (std::size_t j = 0; j < probs.states.size(); ++j) {
        const auto col = probs.probs.col(static_cast<Eigen::Index>(j));
        if (col.maxCoeff() == 0.0) {
            continue;
        }
        const auto R = recombinator(probs.states[j], muU);
        for (std::size_t a = 0; a < muU.size(); ++a) {
            detail::add_scaled(acc[a], col(static_cast<Eigen::Index>(a)), R);
        }
    }
    std::vector<Distribution> out;
    for (std::size_t a = 0; a < muU.size(); ++a) {
        out.push_back(Distribution::unchecked(U, muU[a].sizes(), std::move(acc[a])));
    }
    return Metapopulation(std::move(out));
}

inline Metapopulation step_labelled(const Metapopulation& mu, const RecombinationModel& model)
{
    check_population(mu, model);
    return marginal_step(mu, model, model.all_sites());
}

}  // namespace recolat
