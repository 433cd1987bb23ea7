#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <queue>
#include <unordered_set>
#include <vector>

namespace cequel {

/// Min-heap of occupied column indices for one row of the pair grid, with a
/// membership mirror for O(1) contains(). Whenever an insert closes the gap
/// above the current minimum, the now-contiguous prefix is discarded except
/// for its last element, so the heap stays small: its minimum is always the
/// endpoint of the contiguous occupied run starting at the row's base.
/// Callers only ever insert indices at or above the base; indices inside the
/// run [base, min] are already occupied, so adding them again is a no-op.
class CompressedIndexHeap {
public:
    CompressedIndexHeap() = default;

    explicit CompressedIndexHeap(int base) { insert(base); }

    int min() const { return heap_.top(); }
    int max() const { return max_; }
    std::size_t size() const { return heap_.size(); }
    bool contains(int v) const { return covered_by_run(v) || members_.count(v) != 0; }

    /// Inserts new indices, then compresses: while the element above the
    /// minimum is present, the minimum is redundant and is dropped. The last
    /// element never leaves, so min() stays defined.
    void add(std::initializer_list<int> values) { add(values.begin(), values.end()); }

    template <typename It>
    void add(It first, It last) {
        const int before = heap_.empty() ? -1 : min();
        bool closes_gap = false;
        for (It it = first; it != last; ++it) {
            if (insert(*it) && *it == before + 1) closes_gap = true;
        }
        if (!closes_gap) return;
        while (heap_.size() > 1) {
            const int beta = heap_.top();
            heap_.pop();
            if (heap_.top() != beta + 1) {
                heap_.push(beta);
                break;
            }
            members_.erase(beta);
        }
    }

private:
    bool covered_by_run(int v) const {
        return !heap_.empty() && v >= base_ && v <= heap_.top();
    }

    bool insert(int v) {
        if (covered_by_run(v)) return false;
        if (!members_.insert(v).second) return false;
        if (heap_.empty()) base_ = v;
        heap_.push(v);
        max_ = std::max(max_, v);
        return true;
    }

    std::priority_queue<int, std::vector<int>, std::greater<int>> heap_;
    std::unordered_set<int> members_;
    int base_ = 0;
    int max_ = 0;
};

/// Smallest admissible third index for a fresh pair: starts just above the
/// partner row's minimum and walks upward past indices already occupied in
/// either row, up to limit inclusive. Returns nothing when every index up to
/// the limit is taken.
inline std::optional<int> greedy_scan(const CompressedIndexHeap& hx,
                                      const CompressedIndexHeap& hy, int limit) {
    int gamma = hy.min() + 1;
    if (!hx.contains(gamma)) return gamma <= limit ? std::optional<int>(gamma) : std::nullopt;
    for (gamma = hy.min() + 2; gamma <= limit; ++gamma)
        if (!hx.contains(gamma) && !hy.contains(gamma)) return gamma;
    return std::nullopt;
}

}  // namespace cequel
