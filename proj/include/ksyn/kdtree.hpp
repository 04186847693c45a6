#pragma once

#include <vector>

#include "ksyn/types.hpp"

namespace ksyn {

// Static 3-D k-d tree over a point array; supports radius and k-NN queries.
class KdTree3 {
public:
    explicit KdTree3(const std::vector<Vec3>& points);

    // Indices of points within `radius` of `query` (inclusive), ascending.
    std::vector<int> radius_search(const Vec3& query, double radius) const;

    // Indices of the k nearest points (the query point itself included when
    // it belongs to the tree), ordered by distance then index.
    std::vector<int> knn(const Vec3& query, int k) const;

    std::size_t size() const { return points_.size(); }

private:
    struct Node {
        int index = -1;
        int axis = 0;
        int left = -1;
        int right = -1;
    };

    int build(std::vector<int>& indices, int begin, int end, int depth);
    void radius_visit(int node, const Vec3& query, double radius2, std::vector<int>& out) const;

    std::vector<Vec3> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

} // namespace ksyn
