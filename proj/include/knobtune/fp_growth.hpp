#pragma once

// FP-Growth frequent-itemset mining with target-itemset pruning.
//
// The miner answers: which itemsets have support >= min_coverage AND contain
// at least one target item. Branch exploration drops conditional-pattern-base
// paths that can no longer contribute a target item, which prunes whole
// conditional trees while leaving the output set and its supports untouched
// (supports of target-hitting itemsets only draw on paths that carry a target
// item, and those are always retained).
//
// Item order is fixed once from global supports: ascending (support, item id);
// trees store paths in the reverse of that order. Everything is deterministic.

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <vector>

#include "knobtune/types.hpp"

namespace knobtune::fp {

struct Itemset {
    std::vector<int> items;  // ascending item ids
    std::int64_t support_count = 0;
    double support = 0.0;
};

struct Stats {
    std::int64_t conditional_trees = 0;
    std::int64_t emitted = 0;
};

namespace detail {

struct WeightedPath {
    std::vector<int> items;  // sorted by descending rank (root first)
    std::int64_t count = 1;
};

struct TreeNode {
    int item = -1;
    std::int64_t count = 0;
    int parent = -1;
    std::map<int, int> children;  // item -> node index
};

class Tree {
public:
    explicit Tree(const std::vector<WeightedPath>& paths) {
        nodes_.push_back(TreeNode{});  // root
        for (const auto& p : paths) insert(p);
    }

    bool single_path() const {
        int n = 0;
        while (true) {
            const auto& node = nodes_[n];
            if (node.children.empty()) return true;
            if (node.children.size() > 1) return false;
            n = node.children.begin()->second;
        }
    }

    /// Root-to-leaf node list; valid only when single_path().
    std::vector<std::pair<int, std::int64_t>> path_items() const {
        std::vector<std::pair<int, std::int64_t>> out;
        int n = 0;
        while (!nodes_[n].children.empty()) {
            n = nodes_[n].children.begin()->second;
            out.emplace_back(nodes_[n].item, nodes_[n].count);
        }
        return out;
    }

    const std::map<int, std::vector<int>>& header() const { return header_; }

    std::int64_t item_count(int item) const {
        std::int64_t total = 0;
        auto it = header_.find(item);
        if (it == header_.end()) return 0;
        for (int n : it->second) total += nodes_[n].count;
        return total;
    }

    /// Prefix paths above each occurrence of `item`, with that node's count.
    std::vector<WeightedPath> conditional_pattern_base(int item) const {
        std::vector<WeightedPath> base;
        auto it = header_.find(item);
        if (it == header_.end()) return base;
        for (int n : it->second) {
            WeightedPath p;
            p.count = nodes_[n].count;
            std::vector<int> rev;
            for (int up = nodes_[n].parent; up > 0; up = nodes_[up].parent)
                rev.push_back(nodes_[up].item);
            p.items.assign(rev.rbegin(), rev.rend());
            base.push_back(std::move(p));
        }
        return base;
    }

private:
    void insert(const WeightedPath& p) {
        int cur = 0;
        for (int item : p.items) {
            auto it = nodes_[cur].children.find(item);
            if (it == nodes_[cur].children.end()) {
                int idx = static_cast<int>(nodes_.size());
                nodes_.push_back(TreeNode{item, 0, cur, {}});
                nodes_[cur].children.emplace(item, idx);
                header_[item].push_back(idx);
                cur = idx;
            } else {
                cur = it->second;
            }
            nodes_[cur].count += p.count;
        }
    }

    std::vector<TreeNode> nodes_;
    std::map<int, std::vector<int>> header_;
};

struct MineContext {
    const std::set<int>* target = nullptr;
    std::int64_t min_count = 0;
    std::int64_t total = 0;
    bool prune = true;
    std::size_t max_items = 0;  // 0 = unbounded
    std::vector<int> rank;  // item id -> mining position (ascending support)
    Stats* stats = nullptr;
    std::vector<Itemset>* out = nullptr;
};

inline void emit(MineContext& ctx, std::vector<int> items, std::int64_t count) {
    std::sort(items.begin(), items.end());
    ctx.out->push_back(
        {std::move(items), count, static_cast<double>(count) / static_cast<double>(ctx.total)});
    if (ctx.stats) ++ctx.stats->emitted;
}

/// Builds a conditional tree from a (possibly pruned) pattern base, filtering
/// items below min_count within that base. Returns nullptr when nothing
/// frequent remains.
inline std::unique_ptr<Tree> build_conditional_tree(const std::vector<WeightedPath>& base,
                                                    const MineContext& ctx) {
    std::map<int, std::int64_t> counts;
    for (const auto& p : base)
        for (int item : p.items) counts[item] += p.count;
    std::set<int> keep;
    for (const auto& [item, c] : counts)
        if (c >= ctx.min_count) keep.insert(item);
    if (keep.empty()) return nullptr;

    std::vector<WeightedPath> filtered;
    for (const auto& p : base) {
        WeightedPath f;
        f.count = p.count;
        for (int item : p.items)
            if (keep.count(item)) f.items.push_back(item);
        if (!f.items.empty()) filtered.push_back(std::move(f));
    }
    if (filtered.empty()) return nullptr;
    return std::make_unique<Tree>(filtered);
}

inline void mine(const Tree& tree, const std::vector<int>& prefix, bool prefix_hits,
                 MineContext& ctx) {
    if (tree.single_path()) {
        auto path = tree.path_items();
        const std::size_t n = path.size();
        const std::size_t budget =
            ctx.max_items == 0 ? n : (ctx.max_items > prefix.size() ? ctx.max_items - prefix.size() : 0);
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
            if (budget < n &&
                static_cast<std::size_t>(__builtin_popcountll(mask)) > budget)
                continue;
            std::int64_t count = 0;
            bool hits = prefix_hits;
            std::vector<int> items = prefix;
            for (std::size_t b = 0; b < n; ++b) {
                if (!(mask >> b & 1)) continue;
                // counts are non-increasing down the path; the deepest chosen
                // node carries the combination's support
                count = path[b].second;
                hits = hits || ctx.target->count(path[b].first) > 0;
                items.push_back(path[b].first);
            }
            if (hits) emit(ctx, std::move(items), count);
        }
        return;
    }
    if (ctx.max_items != 0 && prefix.size() >= ctx.max_items) return;

    // Header items in ascending mining order.
    std::vector<int> order;
    for (const auto& [item, _] : tree.header()) order.push_back(item);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return ctx.rank[a] < ctx.rank[b]; });

    for (int item : order) {
        std::int64_t support = tree.item_count(item);
        if (support < ctx.min_count) continue;
        std::vector<int> nprefix = prefix;
        nprefix.push_back(item);
        bool hits = prefix_hits || ctx.target->count(item) > 0;
        if (hits) emit(ctx, nprefix, support);

        auto base = tree.conditional_pattern_base(item);
        if (ctx.prune && !hits) {
            // keep only pattern-base paths that can still carry a target item
            std::vector<WeightedPath> kept;
            for (auto& p : base) {
                bool path_hits = false;
                for (int i : p.items)
                    if (ctx.target->count(i)) {
                        path_hits = true;
                        break;
                    }
                if (path_hits) kept.push_back(std::move(p));
            }
            base = std::move(kept);
        }
        if (base.empty()) continue;
        if (ctx.max_items != 0 && nprefix.size() >= ctx.max_items) continue;
        auto sub = build_conditional_tree(base, ctx);
        if (!sub) continue;
        if (ctx.stats) ++ctx.stats->conditional_trees;
        mine(*sub, nprefix, hits, ctx);
    }
}

}  // namespace detail

/// Exact set { I : support(I) >= min_coverage and I intersects target },
/// supports reported as counts and as fractions of the transaction count.
/// Transactions have set semantics; duplicate items within one are ignored.
/// A non-zero max_items restricts the output to itemsets of at most that
/// size (the mining pipeline caps rule size with it; leave 0 for the exact
/// unbounded contract).
inline std::vector<Itemset> fp_growth_targeted(const std::vector<std::vector<int>>& transactions,
                                               const std::set<int>& target, double min_coverage,
                                               bool prune = true, Stats* stats = nullptr,
                                               std::size_t max_items = 0) {
    if (transactions.empty()) throw DomainError("fp_growth_targeted: empty transaction list");
    if (target.empty()) throw DomainError("fp_growth_targeted: empty target item set");
    if (!(min_coverage > 0.0 && min_coverage <= 1.0))
        throw DomainError("fp_growth_targeted: min_coverage must lie in (0, 1]");

    const auto total = static_cast<std::int64_t>(transactions.size());
    std::int64_t min_count =
        static_cast<std::int64_t>(std::ceil(min_coverage * static_cast<double>(total) - 1e-9));
    if (min_count < 1) min_count = 1;

    std::map<int, std::int64_t> supports;
    int max_item = -1;
    for (const auto& t : transactions) {
        std::set<int> uniq(t.begin(), t.end());
        for (int item : uniq) {
            if (item < 0) throw DomainError("fp_growth_targeted: negative item id");
            supports[item]++;
            max_item = std::max(max_item, item);
        }
    }

    std::vector<int> frequent;
    for (const auto& [item, c] : supports)
        if (c >= min_count) frequent.push_back(item);
    std::sort(frequent.begin(), frequent.end(), [&](int a, int b) {
        if (supports[a] != supports[b]) return supports[a] < supports[b];
        return a < b;
    });

    detail::MineContext ctx;
    std::vector<Itemset> out;
    ctx.target = &target;
    ctx.min_count = min_count;
    ctx.total = total;
    ctx.prune = prune;
    ctx.max_items = max_items;
    ctx.stats = stats;
    ctx.out = &out;
    ctx.rank.assign(max_item + 1, -1);
    for (std::size_t i = 0; i < frequent.size(); ++i) ctx.rank[frequent[i]] = static_cast<int>(i);

    if (!frequent.empty()) {
        std::vector<detail::WeightedPath> paths;
        for (const auto& t : transactions) {
            std::set<int> uniq(t.begin(), t.end());
            detail::WeightedPath p;
            for (int item : uniq)
                if (ctx.rank[item] >= 0) p.items.push_back(item);
            if (p.items.empty()) continue;
            std::sort(p.items.begin(), p.items.end(),
                      [&](int a, int b) { return ctx.rank[a] > ctx.rank[b]; });
            paths.push_back(std::move(p));
        }
        detail::Tree root(paths);
        detail::mine(root, {}, false, ctx);
    }

    std::sort(out.begin(), out.end(), [](const Itemset& a, const Itemset& b) {
        if (a.items.size() != b.items.size()) return a.items.size() < b.items.size();
        return a.items < b.items;
    });
    return out;
}

}  // namespace knobtune::fp
