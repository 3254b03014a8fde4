#pragma once

// Probability vectors over marginal type spaces A_U, marginalisation, product
// measures and the labelled recombinator.
//
// Layout: a distribution with support U = {s_1 < ... < s_k} stores its weights
// densely in mixed-radix order with s_1 the slowest digit. Products always
// produce this layout for the union support, so factors interleave by site.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "recolat/error.hpp"
#include "recolat/partition.hpp"

namespace recolat {

inline constexpr double kNormTolerance = 1e-12;

class TypeSpace {
public:
    TypeSpace() = default;

    explicit TypeSpace(std::vector<int> alphabet_sizes) : sizes_(std::move(alphabet_sizes))
    {
        require(!sizes_.empty(), "type space needs at least one site");
        require(sizes_.size() <= static_cast<std::size_t>(kMaxSites), "too many sites");
        for (int a : sizes_) {
            require(a >= 1, "alphabet sizes must be at least 1");
        }
    }

    int sites() const { return static_cast<int>(sizes_.size()); }
    SiteSet all_sites() const { return SiteSet::first(sites()); }
    int alphabet(int site) const { return sizes_[static_cast<std::size_t>(site)]; }
    const std::vector<int>& alphabet_sizes() const { return sizes_; }

    std::vector<int> sizes_of(SiteSet U) const
    {
        require(U.subset_of(all_sites()), "site set exceeds the type space");
        std::vector<int> out;
        for (int s : U.sites()) {
            out.push_back(alphabet(s));
        }
        return out;
    }

    std::size_t cardinality(SiteSet U) const
    {
        std::size_t c = 1;
        for (int a : sizes_of(U)) {
            c *= static_cast<std::size_t>(a);
        }
        return c;
    }

    friend bool operator==(const TypeSpace&, const TypeSpace&) = default;

private:
    std::vector<int> sizes_;
};

class Distribution {
public:
    // The point mass on the empty sequence (the scalar 1).
    Distribution() : weights_{1.0} {}

    // Validated: correct length, non-negative, normalised to within 1e-12.
    Distribution(const TypeSpace& types, SiteSet support, std::vector<double> weights)
        : support_(support), sizes_(types.sizes_of(support)), weights_(std::move(weights))
    {
        require(weights_.size() == types.cardinality(support),
                "distribution has " + std::to_string(weights_.size()) + " weights, expected " +
                    std::to_string(types.cardinality(support)));
        double total = 0.0;
        for (double w : weights_) {
            require(std::isfinite(w) && w >= 0.0, "distribution weights must be non-negative");
            total += w;
        }
        require(std::abs(total - 1.0) <= kNormTolerance,
                "distribution weights must sum to 1 (got " + std::to_string(total) + ")");
    }

    // For results of exact algebra on valid inputs; skips validation.
    static Distribution unchecked(SiteSet support, std::vector<int> sizes, std::vector<double> weights)
    {
        Distribution d;
        d.support_ = support;
        d.sizes_ = std::move(sizes);
        d.weights_ = std::move(weights);
        return d;
    }

    static Distribution uniform(const TypeSpace& types, SiteSet support)
    {
        const auto n = types.cardinality(support);
        return unchecked(support, types.sizes_of(support),
                         std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    static Distribution point_mass(const TypeSpace& types, SiteSet support, std::span<const int> letters)
    {
        auto d = unchecked(support, types.sizes_of(support),
                           std::vector<double>(types.cardinality(support), 0.0));
        d.weights_[d.index_of(letters)] = 1.0;
        return d;
    }

    SiteSet support() const { return support_; }
    const std::vector<int>& sizes() const { return sizes_; }
    const std::vector<double>& weights() const { return weights_; }
    std::vector<double>& mutable_weights() { return weights_; }
    std::size_t size() const { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_[i]; }

    double total() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

    std::size_t index_of(std::span<const int> letters) const
    {
        require(letters.size() == sizes_.size(), "sequence length does not match the support");
        std::size_t idx = 0;
        for (std::size_t k = 0; k < sizes_.size(); ++k) {
            require(letters[k] >= 0 && letters[k] < sizes_[k], "letter out of range");
            idx = idx * static_cast<std::size_t>(sizes_[k]) + static_cast<std::size_t>(letters[k]);
        }
        return idx;
    }

    std::vector<int> letters_of(std::size_t index) const
    {
        std::vector<int> letters(sizes_.size());
        for (std::size_t k = sizes_.size(); k-- > 0;) {
            const auto a = static_cast<std::size_t>(sizes_[k]);
            letters[k] = static_cast<int>(index % a);
            index /= a;
        }
        return letters;
    }

private:
    SiteSet support_;
    std::vector<int> sizes_;
    std::vector<double> weights_;
};

// One distribution over the same support per location.
class Metapopulation {
public:
    Metapopulation() = default;

    explicit Metapopulation(std::vector<Distribution> demes) : demes_(std::move(demes))
    {
        require(!demes_.empty(), "metapopulation needs at least one location");
        for (const auto& d : demes_) {
            require(d.support() == demes_.front().support() && d.sizes() == demes_.front().sizes(),
                    "all locations must share the same support");
        }
    }

    std::size_t size() const { return demes_.size(); }
    const Distribution& operator[](std::size_t alpha) const { return demes_[alpha]; }
    Distribution& operator[](std::size_t alpha) { return demes_[alpha]; }
    SiteSet support() const { return demes_.front().support(); }
    auto begin() const { return demes_.begin(); }
    auto end() const { return demes_.end(); }

private:
    std::vector<Distribution> demes_;
};

inline Distribution marginalise(const Distribution& nu, SiteSet V)
{
    require(V.subset_of(nu.support()), "marginal site set is not contained in the support");
    if (V == nu.support()) {
        return nu;
    }
    const auto sites = nu.support().sites();
    const auto& sizes = nu.sizes();
    const std::size_t k = sites.size();

    // Stride of each source digit inside the target index (0 if summed out).
    std::vector<std::size_t> target_stride(k, 0);
    std::vector<int> target_sizes;
    std::size_t stride = 1;
    for (std::size_t j = k; j-- > 0;) {
        if (V.contains(sites[j])) {
            target_stride[j] = stride;
            stride *= static_cast<std::size_t>(sizes[j]);
        }
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (V.contains(sites[j])) {
            target_sizes.push_back(sizes[j]);
        }
    }

    std::vector<double> out(stride, 0.0);
    for (std::size_t i = 0; i < nu.size(); ++i) {
        std::size_t rest = i;
        std::size_t target = 0;
        for (std::size_t j = k; j-- > 0;) {
            const auto a = static_cast<std::size_t>(sizes[j]);
            target += (rest % a) * target_stride[j];
            rest /= a;
        }
        out[target] += nu[i];
    }
    return Distribution::unchecked(V, std::move(target_sizes), std::move(out));
}

inline Metapopulation marginalise(const Metapopulation& mu, SiteSet V)
{
    std::vector<Distribution> out;
    out.reserve(mu.size());
    for (const auto& d : mu) {
        out.push_back(marginalise(d, V));
    }
    return Metapopulation(std::move(out));
}

// Product measure of factors with pairwise disjoint supports. Empty-support
// factors act as the scalar 1.
inline Distribution tensor(std::span<const Distribution> factors)
{
    SiteSet U;
    for (const auto& f : factors) {
        require(U.disjoint(f.support()), "tensor factors have overlapping supports");
        U = U | f.support();
    }
    const auto sites = U.sites();
    const std::size_t k = sites.size();
    std::vector<int> sizes(k);
    std::vector<std::size_t> owner(k);
    std::vector<std::size_t> stride(k);  // stride of digit j inside its own factor
    for (std::size_t f = 0; f < factors.size(); ++f) {
        const auto fsites = factors[f].support().sites();
        std::size_t s = 1;
        for (std::size_t q = fsites.size(); q-- > 0;) {
            const auto j = static_cast<std::size_t>(U.rank(fsites[q]));
            owner[j] = f;
            sizes[j] = factors[f].sizes()[q];
            stride[j] = s;
            s *= static_cast<std::size_t>(sizes[j]);
        }
    }
    std::size_t total = 1;
    for (int a : sizes) {
        total *= static_cast<std::size_t>(a);
    }

    std::vector<double> out(total);
    std::vector<std::size_t> fidx(factors.size());
    for (std::size_t i = 0; i < total; ++i) {
        std::fill(fidx.begin(), fidx.end(), 0);
        std::size_t rest = i;
        for (std::size_t j = k; j-- > 0;) {
            const auto a = static_cast<std::size_t>(sizes[j]);
            fidx[owner[j]] += (rest % a) * stride[j];
            rest /= a;
        }
        double w = 1.0;
        for (std::size_t f = 0; f < factors.size(); ++f) {
            w *= factors[f][fidx[f]];
        }
        out[i] = w;
    }
    return Distribution::unchecked(U, std::move(sizes), std::move(out));
}

inline Distribution tensor(std::initializer_list<Distribution> factors)
{
    return tensor(std::span<const Distribution>(factors.begin(), factors.size()));
}

// R_bδ(ν) = ⊗_{(d,λ)} ν(λ)^d over the blocks of a labelled partition.
inline Distribution recombinator(const LabelledPartition& bdelta, const Metapopulation& nu)
{
    require(bdelta.base_set() == nu.support(),
            "labelled partition base does not match the support of the metapopulation");
    std::vector<Distribution> factors;
    factors.reserve(bdelta.size());
    for (std::size_t i = 0; i < bdelta.size(); ++i) {
        const auto l = static_cast<std::size_t>(bdelta.label(i));
        require(l < nu.size(), "label refers to an unknown location");
        factors.push_back(marginalise(nu[l], bdelta.block(i)));
    }
    return tensor(factors);
}

// Unlabelled recombinator: ⊗_{d∈δ} ν^d.
inline Distribution recombinator(const Partition& delta, const Distribution& nu)
{
    require(delta.base() == nu.support(), "partition base does not match the support");
    std::vector<Distribution> factors;
    factors.reserve(delta.size());
    for (SiteSet d : delta.blocks()) {
        factors.push_back(marginalise(nu, d));
    }
    return tensor(factors);
}

inline double max_abs_diff(const Distribution& a, const Distribution& b)
{
    require(a.support() == b.support() && a.size() == b.size(), "distributions are not comparable");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

inline double max_abs_diff(const Metapopulation& a, const Metapopulation& b)
{
    require(a.size() == b.size(), "metapopulations have different numbers of locations");
    double m = 0.0;
    for (std::size_t alpha = 0; alpha < a.size(); ++alpha) {
        m = std::max(m, max_abs_diff(a[alpha], b[alpha]));
    }
    return m;
}

}  // namespace recolat
