#pragma once

// Continuous-time migration-recombination: the nonlinear ODE, its RK4
// integration, the generator of the continuous-time labelled partitioning
// process, and the dual solution through a matrix exponential.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "recolat/forward.hpp"
#include "recolat/linear.hpp"
#include "recolat/measure.hpp"
#include "recolat/partition.hpp"
#include "recolat/rng.hpp"

namespace recolat {

inline void check_generator(const Eigen::MatrixXd& N, const std::string& what)
{
    require(N.rows() == N.cols() && N.rows() > 0, what + " must be a non-empty square matrix");
    for (Eigen::Index i = 0; i < N.rows(); ++i) {
        for (Eigen::Index j = 0; j < N.cols(); ++j) {
            require(std::isfinite(N(i, j)), what + " has a non-finite entry");
            require(i == j || N(i, j) >= 0.0, what + " has a negative off-diagonal entry");
        }
        require(std::abs(N.row(i).sum()) <= kNormTolerance,
                what + " row " + std::to_string(i) + " does not sum to 0");
    }
}

class CtModel {
public:
    CtModel() = default;

    // `rates` lists recombination rates ϱ_δ for partitions of all sites;
    // `generator` is the backward migration generator N.
    CtModel(TypeSpace types, WeightedPartitions<double> rates, Eigen::MatrixXd generator)
        : types_(std::move(types)), generator_(std::move(generator))
    {
        const SiteSet all = types_.all_sites();
        std::map<Partition, double> seen;
        for (auto& [delta, rate] : rates) {
            require(delta.base() == all, "recombination partition " + to_string(delta) +
                                             " is not a partition of all sites");
            require(std::isfinite(rate) && rate >= 0.0, "recombination rates must be finite and non-negative");
            require(seen.emplace(delta, rate).second, "partition " + to_string(delta) + " listed twice");
        }
        for (auto& [delta, rate] : seen) {
            if (rate > 0.0) {
                rates_.emplace_back(delta, rate);
            }
        }
        check_generator(generator_, "migration generator");
    }

    const TypeSpace& types() const { return types_; }
    int sites() const { return types_.sites(); }
    SiteSet all_sites() const { return types_.all_sites(); }
    int locations() const { return static_cast<int>(generator_.rows()); }
    const WeightedPartitions<double>& rates() const { return rates_; }
    const Eigen::MatrixXd& generator() const { return generator_; }

    double rate(const Partition& delta) const
    {
        for (const auto& [d, r] : rates_) {
            if (d == delta) {
                return r;
            }
        }
        return 0.0;
    }

    WeightedPartitions<double> marginal(SiteSet U) const { return marginal_recombination<double>(rates_, U); }

private:
    TypeSpace types_;
    WeightedPartitions<double> rates_;
    Eigen::MatrixXd generator_;
};

inline void check_population(const Metapopulation& omega, const CtModel& ct)
{
    require(static_cast<int>(omega.size()) == ct.locations(),
            "metapopulation has " + std::to_string(omega.size()) + " locations, model has " +
                std::to_string(ct.locations()));
    require(omega.support() == ct.all_sites() && omega[0].sizes() == ct.types().alphabet_sizes(),
            "metapopulation is not defined on the model's type space");
}

// Signed measures, one per location.
using Derivative = std::vector<std::vector<double>>;

// ω̇(α) = Σ_β N(α,β) ω(β) + Σ_δ ϱ_δ (R_δ(ω(α)) − ω(α))
inline Derivative ct_rhs(const Metapopulation& omega, const CtModel& ct)
{
    check_population(omega, ct);
    const auto& N = ct.generator();
    const std::size_t L = omega.size();
    const std::size_t A = omega[0].size();
    Derivative d(L, std::vector<double>(A, 0.0));
    for (std::size_t a = 0; a < L; ++a) {
        for (std::size_t b = 0; b < L; ++b) {
            if (const double n = N(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)); n != 0.0) {
                detail::add_scaled(d[a], n, omega[b]);
            }
        }
        for (const auto& [delta, rate] : ct.rates()) {
            if (delta.is_coarsest()) {
                continue;
            }
            detail::add_scaled(d[a], rate, recombinator(delta, omega[a]));
            detail::add_scaled(d[a], -rate, omega[a]);
        }
    }
    return d;
}

struct CtTrajectory {
    std::vector<double> times;
    std::vector<Metapopulation> states;
    double max_mass_drift = 0.0;  // max over steps and locations of |Σ weights − 1|
};

// Classic RK4 with n = ceil(t_end/dt) equal steps. States are recorded every
// `record_stride` steps and at t_end.
inline CtTrajectory integrate(const Metapopulation& omega0, const CtModel& ct, double t_end, double dt,
                              std::size_t record_stride = 0)
{
    check_population(omega0, ct);
    require(dt > 0.0 && std::isfinite(dt), "step size must be positive");
    require(t_end >= 0.0 && std::isfinite(t_end), "end time must be non-negative");
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));
    const double h = steps == 0 ? 0.0 : t_end / static_cast<double>(steps);
    const std::size_t L = omega0.size();
    const std::size_t A = omega0[0].size();
    const auto support = omega0.support();
    const auto sizes = omega0[0].sizes();

    const auto wrap = [&](const std::vector<double>& flat) {
        std::vector<Distribution> demes;
        for (std::size_t a = 0; a < L; ++a) {
            demes.push_back(Distribution::unchecked(
                support, sizes,
                std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(a * A),
                                    flat.begin() + static_cast<std::ptrdiff_t>((a + 1) * A))));
        }
        return Metapopulation(std::move(demes));
    };
    const auto rhs = [&](const std::vector<double>& flat) {
        std::vector<double> out(L * A);
        const auto d = ct_rhs(wrap(flat), ct);
        for (std::size_t a = 0; a < L; ++a) {
            std::copy(d[a].begin(), d[a].end(), out.begin() + static_cast<std::ptrdiff_t>(a * A));
        }
        return out;
    };

    std::vector<double> y;
    y.reserve(L * A);
    for (const auto& nu : omega0) {
        y.insert(y.end(), nu.weights().begin(), nu.weights().end());
    }
    CtTrajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(omega0);
    std::vector<double> tmp(y.size());
    for (std::size_t s = 1; s <= steps; ++s) {
        const auto k1 = rhs(y);
        for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        const auto k2 = rhs(tmp);
        for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        const auto k3 = rhs(tmp);
        for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + h * k3[i];
        const auto k4 = rhs(tmp);
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            require(y[i] >= -1e-9, "step size too large");
        }
        for (std::size_t a = 0; a < L; ++a) {
            double mass = 0.0;
            for (std::size_t x = 0; x < A; ++x) mass += y[a * A + x];
            traj.max_mass_drift = std::max(traj.max_mass_drift, std::abs(mass - 1.0));
        }
        if (s == steps || (record_stride > 0 && s % record_stride == 0)) {
            traj.times.push_back(static_cast<double>(s) * h);
            traj.states.push_back(wrap(y));
        }
    }
    if (steps > 0) {
        traj.times.back() = t_end;
    }
    return traj;
}

// Jumps out of bδ: a block (d,λ) splits into the blocks of ε (a non-trivial
// partition of d), all labelled λ, at rate ϱ^d_ε; or one block moves from
// label λ to β at rate N(λ,β).
inline std::vector<std::pair<LabelledPartition, double>> ct_transitions(const LabelledPartition& bdelta,
                                                                        const CtModel& ct)
{
    std::vector<std::pair<LabelledPartition, double>> out;
    const auto& N = ct.generator();
    for (std::size_t i = 0; i < bdelta.size(); ++i) {
        const SiteSet d = bdelta.block(i);
        const Location lambda = bdelta.label(i);
        const auto others = [&] {
            std::vector<std::pair<SiteSet, Location>> blocks;
            for (std::size_t j = 0; j < bdelta.size(); ++j) {
                if (j != i) {
                    blocks.emplace_back(bdelta.block(j), bdelta.label(j));
                }
            }
            return blocks;
        };
        for (const auto& [eps, rate] : ct.marginal(d)) {
            if (eps.is_coarsest()) {
                continue;
            }
            auto blocks = others();
            for (SiteSet e : eps.blocks()) {
                blocks.emplace_back(e, lambda);
            }
            out.emplace_back(LabelledPartition(std::move(blocks)), rate);
        }
        for (Location beta = 0; beta < ct.locations(); ++beta) {
            if (beta != lambda && N(lambda, beta) > 0.0) {
                auto blocks = others();
                blocks.emplace_back(d, beta);
                out.emplace_back(LabelledPartition(std::move(blocks)), N(lambda, beta));
            }
        }
    }
    return out;
}

struct LppGenerator {
    StateIndex<LabelledPartition> index;
    Eigen::MatrixXd Q;

    std::size_t coarsest(Location alpha) const
    {
        return index.find(LabelledPartition::coarsest(index[0].base_set(), alpha));
    }
};

inline LppGenerator build_Q(const CtModel& ct, std::vector<LabelledPartition> starts = {})
{
    if (starts.empty()) {
        for (Location a = 0; a < ct.locations(); ++a) {
            starts.push_back(LabelledPartition::coarsest(ct.all_sites(), a));
        }
    }
    for (const auto& s : starts) {
        require(s.base_set() == ct.all_sites(), "start state must partition all sites");
    }
    auto successors = [&](const LabelledPartition& s) { return ct_transitions(s, ct); };
    LppGenerator gen;
    gen.index = StateIndex<LabelledPartition>(detail::reachable_closure(std::move(starts), successors));
    const auto K = static_cast<Eigen::Index>(gen.index.size());
    gen.Q = Eigen::MatrixXd::Zero(K, K);
    for (std::size_t i = 0; i < gen.index.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (const auto& [next, rate] : successors(gen.index[i])) {
            gen.Q(row, static_cast<Eigen::Index>(gen.index.find(next))) += rate;
        }
        gen.Q(row, row) = 0.0;
        gen.Q(row, row) = -gen.Q.row(row).sum();
    }
    return gen;
}

// ω_t(α) = Σ_bδ (e^{tQ})_{1^α,bδ} R_bδ(ω_0)
inline Metapopulation ct_solve_dual(const Metapopulation& omega0, const LppGenerator& gen, double t)
{
    require(t >= 0.0 && std::isfinite(t), "time must be non-negative");
    const Eigen::MatrixXd E = (t * gen.Q).exp();
    const Eigen::MatrixXd R = build_R(omega0, gen.index.states()).stacked();
    std::vector<Distribution> out;
    for (Location a = 0; a < static_cast<Location>(omega0.size()); ++a) {
        const Eigen::RowVectorXd w = E.row(static_cast<Eigen::Index>(gen.coarsest(a))) * R;
        out.push_back(Distribution::unchecked(omega0.support(), omega0[0].sizes(),
                                              std::vector<double>(w.data(), w.data() + w.size())));
    }
    return Metapopulation(std::move(out));
}

inline Metapopulation ct_solve_dual(const Metapopulation& omega0, const CtModel& ct, double t)
{
    check_population(omega0, ct);
    return ct_solve_dual(omega0, build_Q(ct), t);
}

namespace detail {

using VectorFn = std::function<Eigen::VectorXd(double)>;

inline Eigen::VectorXd simpson(double a, double b, const Eigen::VectorXd& fa, const Eigen::VectorXd& fm,
                               const Eigen::VectorXd& fb)
{
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline Eigen::VectorXd adaptive_simpson(const VectorFn& f, double a, double b, const Eigen::VectorXd& fa,
                                        const Eigen::VectorXd& fm, const Eigen::VectorXd& fb,
                                        const Eigen::VectorXd& whole, double tol, int depth)
{
    const double m = 0.5 * (a + b);
    const Eigen::VectorXd flm = f(0.5 * (a + m));
    const Eigen::VectorXd frm = f(0.5 * (m + b));
    const Eigen::VectorXd left = simpson(a, m, fa, flm, fm);
    const Eigen::VectorXd right = simpson(m, b, fm, frm, fb);
    const Eigen::VectorXd diff = left + right - whole;
    if (depth <= 0 || diff.lpNorm<Eigen::Infinity>() <= 15.0 * tol) {
        return left + right + diff / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// ∫_a^b f, entrywise, to absolute tolerance `tol` in the max norm.
inline Eigen::VectorXd integrate_simpson(const detail::VectorFn& f, double a, double b, double tol = 1e-10)
{
    const Eigen::VectorXd fa = f(a);
    const Eigen::VectorXd fb = f(b);
    const Eigen::VectorXd fm = f(0.5 * (a + b));
    return detail::adaptive_simpson(f, a, b, fa, fm, fb, detail::simpson(a, b, fa, fm, fb), tol, 50);
}

// Two sites only. Either no split has happened by time t, or the first split
// occurs at σ while the ancestral line sits at γ; afterwards the two lines
// migrate independently for the remaining time t − σ.
inline Distribution ct_two_site(Location alpha, double t, const Metapopulation& omega0, const CtModel& ct)
{
    require(ct.sites() == 2, "two-site integral formula requires exactly two sites");
    require(t >= 0.0 && std::isfinite(t), "time must be non-negative");
    check_population(omega0, ct);
    require(alpha >= 0 && alpha < ct.locations(), "unknown location");
    const SiteSet all = ct.all_sites();
    const double rho = ct.rate(Partition::finest(all));
    const auto& N = ct.generator();
    const auto L = N.rows();
    const auto A = static_cast<Eigen::Index>(omega0[0].size());

    const auto migrated = [&](double s) {
        const Eigen::MatrixXd E = (s * N).exp();
        return E;
    };
    const auto apply = [&](const Eigen::MatrixXd& E, Eigen::Index row) {
        std::vector<double> w(static_cast<std::size_t>(A), 0.0);
        for (Eigen::Index b = 0; b < L; ++b) {
            if (E(row, b) != 0.0) {
                detail::add_scaled(w, E(row, b), omega0[static_cast<std::size_t>(b)]);
            }
        }
        return Distribution::unchecked(all, omega0[0].sizes(), std::move(w));
    };

    const Eigen::MatrixXd Et = migrated(t);
    const auto direct = apply(Et, alpha);
    Eigen::VectorXd result(A);
    for (Eigen::Index x = 0; x < A; ++x) {
        result(x) = std::exp(-rho * t) * direct[static_cast<std::size_t>(x)];
    }
    if (rho == 0.0 || t == 0.0) {
        return Distribution::unchecked(all, omega0[0].sizes(), std::vector<double>(result.data(), result.data() + A));
    }
    const detail::VectorFn integrand = [&](double sigma) {
        const Eigen::MatrixXd before = migrated(sigma);
        const Eigen::MatrixXd after = migrated(t - sigma);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(A);
        for (Eigen::Index g = 0; g < L; ++g) {
            const double c = rho * std::exp(-rho * sigma) * before(alpha, g);
            if (c == 0.0) {
                continue;
            }
            const auto nu = apply(after, g);
            const auto prod = tensor({marginalise(nu, SiteSet{0}), marginalise(nu, SiteSet{1})});
            for (Eigen::Index x = 0; x < A; ++x) {
                v(x) += c * prod[static_cast<std::size_t>(x)];
            }
        }
        return v;
    };
    result += integrate_simpson(integrand, 0.0, t, 1e-10);
    return Distribution::unchecked(all, omega0[0].sizes(), std::vector<double>(result.data(), result.data() + A));
}

// Gillespie simulation of the continuous-time LPP up to time t, recording
// every jump.
struct CtLppPath {
    std::vector<double> times;
    std::vector<LabelledPartition> states;
};

inline CtLppPath simulate_ct(const LabelledPartition& start, const CtModel& ct, double t, CounterRng& rng)
{
    require(t >= 0.0, "time must be non-negative");
    CtLppPath path{{0.0}, {start}};
    double now = 0.0;
    while (true) {
        const auto out = ct_transitions(path.states.back(), ct);
        double total = 0.0;
        for (const auto& [s, rate] : out) {
            total += rate;
        }
        if (total <= 0.0) {
            break;
        }
        now += -std::log1p(-rng.uniform()) / total;
        if (now > t) {
            break;
        }
        double u = rng.uniform() * total;
        std::size_t k = 0;
        while (k + 1 < out.size() && u >= out[k].second) {
            u -= out[k].second;
            ++k;
        }
        path.times.push_back(now);
        path.states.push_back(out[k].first);
    }
    return path;
}

}  // namespace recolat
