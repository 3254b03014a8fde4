#pragma once

// Limiting and quasi-limiting behaviour of the (labelled) partitioning
// process and, through duality, of the migration-recombination dynamics.

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "recolat/forward.hpp"
#include "recolat/linear.hpp"
#include "recolat/measure.hpp"
#include "recolat/partition.hpp"

namespace recolat {

// Sojourn probabilities within this distance of the maximum count as ties.
inline constexpr double kSojournTieTolerance = 1e-12;

struct StationaryProfile {
    Eigen::VectorXd q;
    int primitivity_exponent = 0;  // smallest k with M^k > 0 entrywise
};

// Smallest k ≤ (L-1)^2 + 1 with M^k strictly positive, or a ModelError
// saying whether M is reducible or periodic.
inline int primitivity_exponent(const Eigen::MatrixXd& M)
{
    const auto L = M.rows();
    using Pattern = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
    const Pattern B = (M.array() > 0.0).cast<int>().matrix();
    Pattern P = B;
    const auto bound = (L - 1) * (L - 1) + 1;
    for (Eigen::Index k = 1; k <= bound; ++k) {
        if ((P.array() > 0).all()) {
            return static_cast<int>(k);
        }
        P = ((P * B).array() > 0).cast<int>().matrix();
    }
    Pattern reach = ((Pattern::Identity(L, L) + B).array() > 0).cast<int>().matrix();
    for (Eigen::Index k = 0; k < L; ++k) {
        reach = ((reach * reach).array() > 0).cast<int>().matrix();
    }
    if ((reach.array() > 0).all()) {
        throw ModelError("migration matrix is not primitive: it is irreducible but periodic");
    }
    throw ModelError("migration matrix is not primitive: it is reducible");
}

// q^T = q^T M with Σq = 1, from the singular system with one equation
// replaced by the normalisation.
inline StationaryProfile stationary_q(const Eigen::MatrixXd& M)
{
    check_row_stochastic(M, "backward migration matrix");
    StationaryProfile out;
    out.primitivity_exponent = primitivity_exponent(M);
    const auto L = M.rows();
    Eigen::MatrixXd A = M.transpose() - Eigen::MatrixXd::Identity(L, L);
    A.row(L - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(L);
    b(L - 1) = 1.0;
    out.q = A.fullPivLu().solve(b);
    return out;
}

// The coarsest common refinement of all partitions with positive probability
// is the all-singleton partition.
inline bool separates_all_sites(const RecombinationModel& model)
{
    Partition m = Partition::coarsest(model.all_sites());
    for (const auto& [delta, p] : model.recombination()) {
        m = meet(m, delta);
    }
    return m.is_finest();
}

// The common limit ⊗_i Σ_β q(β) μ_0^{i}(β), identical at every location.
inline Metapopulation mu_infinity(const Metapopulation& mu0, const RecombinationModel& model)
{
    check_population(mu0, model);
    require(separates_all_sites(model),
            "recombination never separates some sites; merge such sites into a single site first");
    const auto q = stationary_q(model.backward()).q;
    std::vector<Distribution> one_site;
    for (int i = 0; i < model.sites(); ++i) {
        const SiteSet site{i};
        std::vector<double> w(static_cast<std::size_t>(model.types().alphabet(i)), 0.0);
        for (std::size_t b = 0; b < mu0.size(); ++b) {
            const auto m = marginalise(mu0[b], site);
            for (std::size_t x = 0; x < w.size(); ++x) {
                w[x] += q(static_cast<Eigen::Index>(b)) * m[x];
            }
        }
        one_site.push_back(Distribution::unchecked(site, {model.types().alphabet(i)}, std::move(w)));
    }
    const auto product = tensor(one_site);
    return Metapopulation(std::vector<Distribution>(mu0.size(), product));
}

// η: largest sojourn probability over reachable states other than the
// all-singleton partition (0 if there are none).
inline double max_sojourn(const UnlabelledSystem& sys)
{
    double eta = 0.0;
    for (std::size_t i = 0; i < sys.index.size(); ++i) {
        if (!sys.index[i].is_finest()) {
            eta = std::max(eta, sys.Tul(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
        }
    }
    return eta;
}

// P(τ > t) for t = 0..t_max, τ the absorption time of the unlabelled process.
inline std::vector<double> absorption_tail(const RecombinationModel& model, int t_max,
                                           std::optional<Partition> start = std::nullopt)
{
    require(t_max >= 0, "horizon must be non-negative");
    const Partition s = start.value_or(Partition::coarsest(model.all_sites()));
    const auto sys = build_Tul(model, {s});
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Unit(static_cast<Eigen::Index>(sys.index.size()),
                                                    static_cast<Eigen::Index>(sys.index.find(s)));
    std::vector<double> tail;
    tail.reserve(static_cast<std::size_t>(t_max) + 1);
    for (int t = 0; t <= t_max; ++t) {
        double alive = 0.0;
        for (std::size_t i = 0; i < sys.index.size(); ++i) {
            if (!sys.index[i].is_finest()) {
                alive += v(static_cast<Eigen::Index>(i));
            }
        }
        tail.push_back(alive);
        v = v * sys.Tul;
    }
    return tail;
}

struct QldReport {
    double eta = 0.0;
    std::map<Partition, double> sojourn;      // Tul_δδ for reachable non-absorbed δ
    std::vector<Partition> F;                 // reachable states with sojourn η
    std::map<Partition, double> g;            // E[η^{-τ_δ}; τ_δ < ∞] for δ ∈ F
    std::map<Partition, double> P_qlim;
    std::map<LabelledPartition, double> labelled_qlim;
    Eigen::VectorXd q;
    Partition start;
    bool start_is_coarsest = true;
};

// Quasi-limiting distributions of the unlabelled and labelled processes.
// g is obtained by back-substitution from the finest states upwards:
// g(δ) = 1 and, for σ ≠ δ, (1 - Tul_σσ/η) g(σ) = η^{-1} Σ_{ε≺σ} Tul_σε g(ε).
inline QldReport qld(const RecombinationModel& model, std::optional<Partition> start = std::nullopt)
{
    const SiteSet all = model.all_sites();
    require(model.probability(Partition::finest(all)) < 1.0,
            "quasi-limit undefined: recombination separates all sites in one step with probability 1");
    QldReport rep;
    rep.start = start.value_or(Partition::coarsest(all));
    rep.start_is_coarsest = rep.start.is_coarsest();
    require(!rep.start.is_finest(), "quasi-limit undefined: start state is already absorbed");
    rep.q = stationary_q(model.backward()).q;

    const auto sys = build_Tul(model, {rep.start});
    const auto K = sys.index.size();
    rep.eta = max_sojourn(sys);
    require(rep.eta > 0.0, "quasi-limit undefined: absorption is certain after one step");
    const auto diag = [&](std::size_t i) {
        return sys.Tul(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    };
    const auto in_F = [&](std::size_t i) {
        return !sys.index[i].is_finest() && std::abs(diag(i) - rep.eta) <= kSojournTieTolerance;
    };
    for (std::size_t i = 0; i < K; ++i) {
        if (!sys.index[i].is_finest()) {
            rep.sojourn[sys.index[i]] = diag(i);
        }
        if (in_F(i)) {
            rep.F.push_back(sys.index[i]);
        }
    }

    const std::size_t s0 = sys.index.find(rep.start);
    double denominator = 0.0;
    for (const auto& delta : rep.F) {
        const std::size_t target = sys.index.find(delta);
        std::vector<double> g(K, 0.0);
        // Finer states come later in canonical order, so walk backwards.
        for (std::size_t i = K; i-- > 0;) {
            if (i == target) {
                g[i] = 1.0;
                continue;
            }
            double rhs = 0.0;
            for (std::size_t j = i + 1; j < K; ++j) {
                rhs += sys.Tul(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * g[j];
            }
            rhs /= rep.eta;
            if (in_F(i)) {
                require(rhs == 0.0, "divergent expectation in quasi-limit computation");
                g[i] = 0.0;
            } else {
                g[i] = rhs / (1.0 - diag(i) / rep.eta);
            }
        }
        rep.g[delta] = g[s0];
        denominator += g[s0];
    }
    require(denominator > 0.0, "quasi-limit undefined: no maximal-sojourn state is reachable");

    const int L = model.locations();
    for (const auto& delta : rep.F) {
        const double p = rep.g[delta] / denominator;
        rep.P_qlim[delta] = p;
        if (p == 0.0) {
            continue;
        }
        std::vector<Location> labels(delta.size(), 0);
        while (true) {
            double w = p;
            for (Location l : labels) {
                w *= rep.q(l);
            }
            rep.labelled_qlim[LabelledPartition(delta, labels)] = w;
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
    return rep;
}

// Exact law of Σ_t given τ > t, started from {([n], α)}. Propagated one
// generation at a time with renormalisation so long horizons do not underflow.
struct ConditionedLaw {
    std::map<LabelledPartition, double> labelled;
    std::map<Partition, double> unlabelled;
    double log_survival = 0.0;  // log P(τ > t)
};

inline ConditionedLaw conditioned_distribution(const RecombinationModel& model, int t, Location alpha = 0)
{
    require(t >= 0, "horizon must be non-negative");
    require(alpha >= 0 && alpha < model.locations(), "unknown location");
    const auto start = LabelledPartition::coarsest(model.all_sites(), alpha);
    const auto sys = build_T(model, {start});
    std::vector<Eigen::Index> alive;
    for (std::size_t i = 0; i < sys.index.size(); ++i) {
        if (!sys.index[i].base().is_finest()) {
            alive.push_back(static_cast<Eigen::Index>(i));
        }
    }
    const auto A = static_cast<Eigen::Index>(alive.size());
    require(A > 0, "conditioning event has probability zero");
    Eigen::MatrixXd sub(A, A);
    for (Eigen::Index i = 0; i < A; ++i) {
        for (Eigen::Index j = 0; j < A; ++j) {
            sub(i, j) = sys.T(alive[static_cast<std::size_t>(i)], alive[static_cast<std::size_t>(j)]);
        }
    }
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(A);
    for (Eigen::Index i = 0; i < A; ++i) {
        if (static_cast<std::size_t>(alive[static_cast<std::size_t>(i)]) == sys.index.find(start)) {
            v(i) = 1.0;
        }
    }
    ConditionedLaw law;
    for (int s = 0; s < t; ++s) {
        v = v * sub;
        const double mass = v.sum();
        require(mass > 0.0, "conditioning event has probability zero");
        law.log_survival += std::log(mass);
        v /= mass;
    }
    require(v.sum() > 0.0, "conditioning event has probability zero");
    for (Eigen::Index i = 0; i < A; ++i) {
        if (v(i) != 0.0) {
            const auto& state = sys.index[static_cast<std::size_t>(alive[static_cast<std::size_t>(i)])];
            law.labelled[state] = v(i);
            law.unlabelled[state.base()] += v(i);
        }
    }
    return law;
}

// Least-squares slope of log(err_t) over t ∈ [from, to], returned as a rate
// γ with err_t ≈ C γ^t. Non-positive entries are skipped.
inline double fit_decay_rate(std::span<const double> errors, std::size_t from, std::size_t to)
{
    require(from < to && to < errors.size(), "invalid fitting window");
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t t = from; t <= to; ++t) {
        if (errors[t] <= 0.0) {
            continue;
        }
        const double x = static_cast<double>(t);
        const double y = std::log(errors[t]);
        n += 1;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    require(n >= 2, "not enough positive errors to fit a rate");
    return std::exp((n * sxy - sx * sy) / (n * sxx - sx * sx));
}

// A reachable pair coarser ≻ finer (finer reachable from coarser, finer not
// absorbing) whose sojourn probability decreases under refinement.
struct SojournInversion {
    Partition coarser;
    Partition finer;
    double coarser_sojourn;
    double finer_sojourn;
};

inline std::optional<SojournInversion> find_sojourn_inversion(const UnlabelledSystem& sys)
{
    const auto K = static_cast<Eigen::Index>(sys.index.size());
    using Pattern = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
    Pattern reach = ((Pattern::Identity(K, K) + (sys.Tul.array() > 0.0).cast<int>().matrix()).array() > 0)
                        .cast<int>()
                        .matrix();
    for (Eigen::Index k = 0; (Eigen::Index{1} << k) < K; ++k) {
        reach = ((reach * reach).array() > 0).cast<int>().matrix();
    }
    for (Eigen::Index i = 0; i < K; ++i) {
        for (Eigen::Index j = 0; j < K; ++j) {
            const auto& fine = sys.index[static_cast<std::size_t>(j)];
            if (i == j || !reach(i, j) || fine.is_finest()) {
                continue;
            }
            if (sys.Tul(j, j) < sys.Tul(i, i)) {
                return SojournInversion{sys.index[static_cast<std::size_t>(i)], fine, sys.Tul(i, i), sys.Tul(j, j)};
            }
        }
    }
    return std::nullopt;
}

}  // namespace recolat
