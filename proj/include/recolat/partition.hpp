#pragma once

// Finite site sets, set partitions and labelled set partitions.
//
// Sites are 0-based here; the 1-based numbering used in documents and on the
// command line is translated in io.hpp. Partitions are kept in canonical form
// (blocks sorted by their smallest site), so structural equality is equality
// of the represented partition, and the total order below is the enumeration
// order used to index every matrix in the library:
//
//   * partitions of the same base compare by their restricted growth string
//     (RGS), lexicographically. The coarsest partition {U} comes first and the
//     all-singleton partition last; a strictly finer partition always compares
//     greater than a coarser one.
//   * labelled partitions compare by base partition, then by label vector
//     (first block most significant).

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "recolat/error.hpp"

namespace recolat {

inline constexpr int kMaxSites = 32;

class SiteSet {
public:
    constexpr SiteSet() = default;

    SiteSet(std::initializer_list<int> sites)
    {
        for (int s : sites) {
            insert(s);
        }
    }

    static constexpr SiteSet from_mask(std::uint32_t mask)
    {
        SiteSet s;
        s.mask_ = mask;
        return s;
    }

    // {0, ..., n-1}
    static SiteSet first(int n)
    {
        require(n >= 0 && n <= kMaxSites, "site count out of range");
        return from_mask(n == kMaxSites ? ~std::uint32_t{0} : ((std::uint32_t{1} << n) - 1));
    }

    static SiteSet from_sites(std::span<const int> sites)
    {
        SiteSet s;
        for (int i : sites) {
            require(!s.contains(i), "duplicate site " + std::to_string(i));
            s.insert(i);
        }
        return s;
    }

    void insert(int site)
    {
        require(site >= 0 && site < kMaxSites, "site index out of range");
        mask_ |= std::uint32_t{1} << site;
    }

    constexpr std::uint32_t mask() const { return mask_; }
    constexpr bool empty() const { return mask_ == 0; }
    int size() const { return std::popcount(mask_); }
    constexpr bool contains(int site) const { return (mask_ >> site) & 1u; }
    int min() const { return std::countr_zero(mask_); }
    bool subset_of(SiteSet other) const { return (mask_ & ~other.mask_) == 0; }
    bool disjoint(SiteSet other) const { return (mask_ & other.mask_) == 0; }

    std::vector<int> sites() const
    {
        std::vector<int> out;
        out.reserve(size());
        for (std::uint32_t m = mask_; m != 0; m &= m - 1) {
            out.push_back(std::countr_zero(m));
        }
        return out;
    }

    // Position of `site` within the increasing site list.
    int rank(int site) const { return std::popcount(mask_ & ((std::uint32_t{1} << site) - 1)); }

    friend constexpr SiteSet operator&(SiteSet a, SiteSet b) { return from_mask(a.mask_ & b.mask_); }
    friend constexpr SiteSet operator|(SiteSet a, SiteSet b) { return from_mask(a.mask_ | b.mask_); }
    friend constexpr SiteSet operator-(SiteSet a, SiteSet b) { return from_mask(a.mask_ & ~b.mask_); }
    friend constexpr bool operator==(SiteSet a, SiteSet b) = default;
    friend constexpr auto operator<=>(SiteSet a, SiteSet b) = default;

private:
    std::uint32_t mask_ = 0;
};

class Partition {
public:
    Partition() = default;

    Partition(SiteSet base, std::vector<SiteSet> blocks) : base_(base), blocks_(std::move(blocks))
    {
        SiteSet seen;
        for (SiteSet b : blocks_) {
            require(!b.empty(), "partition block is empty");
            require(seen.disjoint(b), "partition blocks overlap");
            seen = seen | b;
        }
        require(seen == base_, "partition blocks do not cover the base set");
        std::sort(blocks_.begin(), blocks_.end(),
                  [](SiteSet a, SiteSet b) { return a.min() < b.min(); });
        compute_rgs();
    }

    explicit Partition(std::vector<SiteSet> blocks)
        : Partition(union_of(blocks), blocks) {}

    static Partition coarsest(SiteSet base)
    {
        require(!base.empty(), "empty site set");
        return Partition(base, {base});
    }

    static Partition finest(SiteSet base)
    {
        require(!base.empty(), "empty site set");
        std::vector<SiteSet> blocks;
        for (int s : base.sites()) {
            blocks.push_back(SiteSet::from_mask(std::uint32_t{1} << s));
        }
        return Partition(base, std::move(blocks));
    }

    // `rgs[k]` is the block number of the k-th site of `base`.
    static Partition from_rgs(SiteSet base, std::span<const int> rgs)
    {
        const auto sites = base.sites();
        require(rgs.size() == sites.size(), "restricted growth string has wrong length");
        std::vector<SiteSet> blocks;
        for (std::size_t k = 0; k < sites.size(); ++k) {
            const auto b = static_cast<std::size_t>(rgs[k]);
            require(rgs[k] >= 0 && b <= blocks.size(), "not a restricted growth string");
            if (b == blocks.size()) {
                blocks.emplace_back();
            }
            blocks[b].insert(sites[k]);
        }
        return Partition(base, std::move(blocks));
    }

    SiteSet base() const { return base_; }
    const std::vector<SiteSet>& blocks() const { return blocks_; }
    std::size_t size() const { return blocks_.size(); }
    const SiteSet& operator[](std::size_t i) const { return blocks_[i]; }
    const std::vector<std::uint8_t>& rgs() const { return rgs_; }

    bool is_coarsest() const { return blocks_.size() == 1; }
    bool is_finest() const { return static_cast<int>(blocks_.size()) == base_.size(); }

    std::size_t block_of(int site) const { return rgs_[static_cast<std::size_t>(base_.rank(site))]; }

    friend bool operator==(const Partition& a, const Partition& b)
    {
        return a.base_ == b.base_ && a.rgs_ == b.rgs_;
    }

    friend std::strong_ordering operator<=>(const Partition& a, const Partition& b)
    {
        if (auto c = a.base_ <=> b.base_; c != 0) {
            return c;
        }
        return a.rgs_ <=> b.rgs_;
    }

private:
    static SiteSet union_of(const std::vector<SiteSet>& blocks)
    {
        SiteSet u;
        for (SiteSet b : blocks) {
            u = u | b;
        }
        return u;
    }

    void compute_rgs()
    {
        rgs_.assign(static_cast<std::size_t>(base_.size()), 0);
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            for (int s : blocks_[b].sites()) {
                rgs_[static_cast<std::size_t>(base_.rank(s))] = static_cast<std::uint8_t>(b);
            }
        }
    }

    SiteSet base_;
    std::vector<SiteSet> blocks_;
    std::vector<std::uint8_t> rgs_;
};

using Location = int;

class LabelledPartition {
public:
    LabelledPartition() = default;

    LabelledPartition(Partition base, std::vector<Location> labels)
        : base_(std::move(base)), labels_(std::move(labels))
    {
        require(labels_.size() == base_.size(), "one label per block required");
        for (Location l : labels_) {
            require(l >= 0, "negative location label");
        }
    }

    // Blocks in any order; canonicalised on construction.
    explicit LabelledPartition(std::vector<std::pair<SiteSet, Location>> blocks)
    {
        std::sort(blocks.begin(), blocks.end(),
                  [](const auto& a, const auto& b) { return a.first.min() < b.first.min(); });
        std::vector<SiteSet> sets;
        sets.reserve(blocks.size());
        labels_.reserve(blocks.size());
        for (const auto& [d, l] : blocks) {
            require(l >= 0, "negative location label");
            sets.push_back(d);
            labels_.push_back(l);
        }
        base_ = Partition(std::move(sets));
    }

    static LabelledPartition coarsest(SiteSet base, Location label)
    {
        return LabelledPartition(Partition::coarsest(base), {label});
    }

    const Partition& base() const { return base_; }
    SiteSet base_set() const { return base_.base(); }
    const std::vector<Location>& labels() const { return labels_; }
    std::size_t size() const { return labels_.size(); }
    SiteSet block(std::size_t i) const { return base_[i]; }
    Location label(std::size_t i) const { return labels_[i]; }

    friend bool operator==(const LabelledPartition& a, const LabelledPartition& b) = default;

    friend std::strong_ordering operator<=>(const LabelledPartition& a, const LabelledPartition& b)
    {
        if (auto c = a.base_ <=> b.base_; c != 0) {
            return c;
        }
        return a.labels_ <=> b.labels_;
    }

private:
    Partition base_;
    std::vector<Location> labels_;
};

// All partitions of `U` in restricted-growth-string lexicographic order.
inline std::vector<Partition> enumerate_partitions(SiteSet U)
{
    require(!U.empty(), "empty site set");
    const auto k = static_cast<std::size_t>(U.size());
    std::vector<Partition> out;
    std::vector<int> rgs(k, 0);
    std::vector<int> prefix_max(k, 0);  // max of rgs[0..i]
    while (true) {
        out.push_back(Partition::from_rgs(U, rgs));
        // Advance to the lexicographic successor.
        std::size_t i = k;
        while (i-- > 1) {
            if (rgs[i] <= prefix_max[i - 1]) {
                break;
            }
        }
        if (i == 0 || i >= k) {
            break;
        }
        ++rgs[i];
        prefix_max[i] = std::max(prefix_max[i - 1], rgs[i]);
        for (std::size_t j = i + 1; j < k; ++j) {
            rgs[j] = 0;
            prefix_max[j] = prefix_max[i];
        }
    }
    return out;
}

inline std::vector<LabelledPartition> enumerate_labelled_partitions(SiteSet U, int num_locations)
{
    require(num_locations >= 1, "at least one location required");
    std::vector<LabelledPartition> out;
    for (const auto& p : enumerate_partitions(U)) {
        std::vector<Location> labels(p.size(), 0);
        while (true) {
            out.emplace_back(p, labels);
            std::size_t i = labels.size();
            while (i > 0 && labels[i - 1] == num_locations - 1) {
                labels[--i] = 0;
            }
            if (i == 0) {
                break;
            }
            ++labels[i - 1];
        }
    }
    return out;
}

// eps ≼ delta: every block of eps lies inside a block of delta.
inline bool is_refinement(const Partition& eps, const Partition& delta)
{
    require(eps.base() == delta.base(), "partitions have different base sets");
    for (SiteSet e : eps.blocks()) {
        if (!e.subset_of(delta[delta.block_of(e.min())])) {
            return false;
        }
    }
    return true;
}

// Coarsest common refinement.
inline Partition meet(const Partition& delta, const Partition& eps)
{
    require(delta.base() == eps.base(), "partitions have different base sets");
    std::vector<SiteSet> blocks;
    for (SiteSet d : delta.blocks()) {
        for (SiteSet e : eps.blocks()) {
            if (!(d & e).empty()) {
                blocks.push_back(d & e);
            }
        }
    }
    return Partition(delta.base(), std::move(blocks));
}

inline Partition induced(const Partition& delta, SiteSet V)
{
    require(!V.empty(), "empty site set");
    require(V.subset_of(delta.base()), "site set is not contained in the partition's base");
    std::vector<SiteSet> blocks;
    for (SiteSet d : delta.blocks()) {
        if (!(d & V).empty()) {
            blocks.push_back(d & V);
        }
    }
    return Partition(V, std::move(blocks));
}

inline LabelledPartition induced(const LabelledPartition& bdelta, SiteSet V)
{
    require(!V.empty(), "empty site set");
    require(V.subset_of(bdelta.base_set()), "site set is not contained in the partition's base");
    std::vector<std::pair<SiteSet, Location>> blocks;
    for (std::size_t i = 0; i < bdelta.size(); ++i) {
        if (const SiteSet part = bdelta.block(i) & V; !part.empty()) {
            blocks.emplace_back(part, bdelta.label(i));
        }
    }
    return LabelledPartition(std::move(blocks));
}

// Joins labelled partitions of the blocks of `delta`; parts[i] partitions delta[i].
inline LabelledPartition union_over_blocks(const Partition& delta,
                                           std::span<const LabelledPartition> parts)
{
    require(parts.size() == delta.size(), "one labelled partition per block required");
    std::vector<std::pair<SiteSet, Location>> blocks;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        require(parts[i].base_set() == delta[i], "labelled partition does not match its block");
        for (std::size_t j = 0; j < parts[i].size(); ++j) {
            blocks.emplace_back(parts[i].block(j), parts[i].label(j));
        }
    }
    return LabelledPartition(std::move(blocks));
}

// Compact 1-based text form, e.g. "{1 2}{3}" and "{1 2}@A {3}@B".
inline std::string to_string(SiteSet s)
{
    std::string out = "{";
    bool first = true;
    for (int i : s.sites()) {
        if (!first) {
            out += ' ';
        }
        out += std::to_string(i + 1);
        first = false;
    }
    return out + "}";
}

inline std::string to_string(const Partition& p)
{
    std::string out;
    for (SiteSet b : p.blocks()) {
        out += to_string(b);
    }
    return out;
}

inline std::string to_string(const LabelledPartition& p, std::span<const std::string> names = {})
{
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i > 0) {
            out += ' ';
        }
        const auto l = static_cast<std::size_t>(p.label(i));
        out += to_string(p.block(i)) + "@" + (l < names.size() ? names[l] : std::to_string(l));
    }
    return out;
}

}  // namespace recolat
