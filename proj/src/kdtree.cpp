#include "ksyn/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace ksyn {

KdTree3::KdTree3(const std::vector<Vec3>& points) : points_(points) {
    std::vector<int> indices(points_.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);
    nodes_.reserve(points_.size());
    root_ = build(indices, 0, static_cast<int>(indices.size()), 0);
}

int KdTree3::build(std::vector<int>& indices, int begin, int end, int depth) {
    if (begin >= end) return -1;
    const int axis = depth % 3;
    const int mid = begin + (end - begin) / 2;
    std::nth_element(indices.begin() + begin, indices.begin() + mid, indices.begin() + end,
                     [&](int a, int b) {
                         const double va = points_[static_cast<std::size_t>(a)][axis];
                         const double vb = points_[static_cast<std::size_t>(b)][axis];
                         return va != vb ? va < vb : a < b;
                     });
    Node node;
    node.index = indices[static_cast<std::size_t>(mid)];
    node.axis = axis;
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    nodes_[static_cast<std::size_t>(self)].left = build(indices, begin, mid, depth + 1);
    nodes_[static_cast<std::size_t>(self)].right = build(indices, mid + 1, end, depth + 1);
    return self;
}

void KdTree3::radius_visit(int node, const Vec3& query, double radius2, std::vector<int>& out) const {
    if (node < 0) return;
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    const Vec3& p = points_[static_cast<std::size_t>(n.index)];
    if ((p - query).squaredNorm() <= radius2) out.push_back(n.index);
    const double delta = query[n.axis] - p[n.axis];
    if (delta <= 0.0 || delta * delta <= radius2) radius_visit(n.left, query, radius2, out);
    if (delta >= 0.0 || delta * delta <= radius2) radius_visit(n.right, query, radius2, out);
}

std::vector<int> KdTree3::radius_search(const Vec3& query, double radius) const {
    std::vector<int> out;
    radius_visit(root_, query, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> KdTree3::knn(const Vec3& query, int k) const {
    k = std::min<int>(k, static_cast<int>(points_.size()));
    if (k <= 0) return {};
    using Entry = std::pair<double, int>; // (distance^2, index)
    std::priority_queue<Entry> heap;      // max-heap keeps the k best

    // Iterative traversal with pruning.
    std::vector<int> stack;
    stack.push_back(root_);
    while (!stack.empty()) {
        const int node = stack.back();
        stack.pop_back();
        if (node < 0) continue;
        const Node& n = nodes_[static_cast<std::size_t>(node)];
        const Vec3& p = points_[static_cast<std::size_t>(n.index)];
        const double d2 = (p - query).squaredNorm();
        if (static_cast<int>(heap.size()) < k) {
            heap.emplace(d2, n.index);
        } else if (d2 < heap.top().first ||
                   (d2 == heap.top().first && n.index < heap.top().second)) {
            heap.pop();
            heap.emplace(d2, n.index);
        }
        const double delta = query[n.axis] - p[n.axis];
        const double worst = static_cast<int>(heap.size()) < k
                                 ? std::numeric_limits<double>::infinity()
                                 : heap.top().first;
        const int near = delta <= 0.0 ? n.left : n.right;
        const int far = delta <= 0.0 ? n.right : n.left;
        if (delta * delta <= worst) stack.push_back(far);
        stack.push_back(near);
    }
    std::vector<Entry> entries;
    entries.reserve(heap.size());
    while (!heap.empty()) {
        entries.push_back(heap.top());
        heap.pop();
    }
    std::sort(entries.begin(), entries.end());
    std::vector<int> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.second);
    return out;
}

} // namespace ksyn
