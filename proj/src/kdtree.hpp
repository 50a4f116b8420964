#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "error.hpp"

namespace semloc {

/// Static 3D KD-tree. Queries are exact: results match a linear scan,
/// including the deterministic (distance, x, y, z) tie-break for k-NN.
class KdTree3 {
public:
    KdTree3() = default;
    explicit KdTree3(std::span<const Eigen::Vector3d> points) { build(points); }

    void build(std::span<const Eigen::Vector3d> points) {
        pts_.assign(points.begin(), points.end());
        nodes_.clear();
        nodes_.reserve(pts_.size());
        std::vector<int> order(pts_.size());
        std::iota(order.begin(), order.end(), 0);
        root_ = build_range(order, 0, static_cast<int>(order.size()), 0);
    }

    std::size_t size() const { return pts_.size(); }
    const Eigen::Vector3d& point(int i) const { return pts_[i]; }

    /// Indices of points within `radius` (inclusive), ascending by index.
    std::vector<int> radius(const Eigen::Vector3d& center, double radius) const {
        std::vector<int> out;
        if (root_ >= 0) radius_walk(root_, center, radius * radius, out);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// The k nearest points, ascending by (distance, x, y, z).
    std::vector<int> knn(const Eigen::Vector3d& center, int k) const {
        if (k < 1) throw Error(Errc::invalid_argument, "knn requires k >= 1");
        if (static_cast<std::size_t>(k) > pts_.size()) {
            throw Error(Errc::insufficient, "knn: map holds fewer points than k");
        }
        std::vector<Cand> heap;
        heap.reserve(k + 1);
        knn_walk(root_, center, k, heap);
        std::sort(heap.begin(), heap.end(),
                  [this](const Cand& a, const Cand& b) { return closer(a, b); });
        std::vector<int> out;
        out.reserve(heap.size());
        for (const auto& c : heap) out.push_back(c.idx);
        return out;
    }

    /// Nearest point index and squared distance, or {-1, inf} when empty.
    std::pair<int, double> nearest(const Eigen::Vector3d& center) const {
        if (pts_.empty()) return {-1, std::numeric_limits<double>::infinity()};
        const auto ids = knn(center, 1);
        return {ids[0], (pts_[ids[0]] - center).squaredNorm()};
    }

private:
    struct Node {
        int index;
        int axis;
        int left = -1;
        int right = -1;
    };
    struct Cand {
        double d2;
        int idx;
    };

    bool closer(const Cand& a, const Cand& b) const {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        const auto& pa = pts_[a.idx];
        const auto& pb = pts_[b.idx];
        if (pa.x() != pb.x()) return pa.x() < pb.x();
        if (pa.y() != pb.y()) return pa.y() < pb.y();
        if (pa.z() != pb.z()) return pa.z() < pb.z();
        return a.idx < b.idx;
    }

    int build_range(std::vector<int>& order, int lo, int hi, int depth) {
        if (lo >= hi) return -1;
        const int axis = depth % 3;
        const int mid = (lo + hi) / 2;
        std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                         [this, axis](int a, int b) {
                             if (pts_[a][axis] != pts_[b][axis]) return pts_[a][axis] < pts_[b][axis];
                             return a < b;
                         });
        Node node;
        node.index = order[mid];
        node.axis = axis;
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int left = build_range(order, lo, mid, depth + 1);
        const int right = build_range(order, mid + 1, hi, depth + 1);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void radius_walk(int ni, const Eigen::Vector3d& c, double r2, std::vector<int>& out) const {
        const Node& n = nodes_[ni];
        if ((pts_[n.index] - c).squaredNorm() <= r2) out.push_back(n.index);
        const double gap = c[n.axis] - pts_[n.index][n.axis];
        const int near = gap <= 0 ? n.left : n.right;
        const int far = gap <= 0 ? n.right : n.left;
        if (near >= 0) radius_walk(near, c, r2, out);
        if (far >= 0 && gap * gap <= r2) radius_walk(far, c, r2, out);
    }

    void knn_walk(int ni, const Eigen::Vector3d& c, int k, std::vector<Cand>& heap) const {
        if (ni < 0) return;
        const Node& n = nodes_[ni];
        const Cand cand{(pts_[n.index] - c).squaredNorm(), n.index};
        auto worse_first = [this](const Cand& a, const Cand& b) { return closer(a, b); };
        if (static_cast<int>(heap.size()) < k) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end(), worse_first);
        } else if (closer(cand, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), worse_first);
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end(), worse_first);
        }
        const double gap = c[n.axis] - pts_[n.index][n.axis];
        const int near = gap <= 0 ? n.left : n.right;
        const int far = gap <= 0 ? n.right : n.left;
        knn_walk(near, c, k, heap);
        // Equal squared gap can still win on the lexicographic tie-break.
        if (static_cast<int>(heap.size()) < k || gap * gap <= heap.front().d2) {
            knn_walk(far, c, k, heap);
        }
    }

    std::vector<Eigen::Vector3d> pts_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace semloc
