#include "ksyn/perception.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ksyn/errors.hpp"
#include "ksyn/io.hpp"
#include "ksyn/kdtree.hpp"
#include "ksyn/rng.hpp"

namespace ksyn {

float pack_rgb(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const std::uint32_t packed = (static_cast<std::uint32_t>(r) << 16) |
                                 (static_cast<std::uint32_t>(g) << 8) | static_cast<std::uint32_t>(b);
    float f = 0.0f;
    std::memcpy(&f, &packed, sizeof(f));
    return f;
}

void unpack_rgb(float packed, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &packed, sizeof(bits));
    r = static_cast<std::uint8_t>((bits >> 16) & 0xff);
    g = static_cast<std::uint8_t>((bits >> 8) & 0xff);
    b = static_cast<std::uint8_t>(bits & 0xff);
}

namespace {

std::string format_float(float value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(value));
    return buf;
}

} // namespace

void save_pcd(const std::filesystem::path& path, const PointCloud& cloud) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write PCD file: " + path.string());
    const std::size_t n = cloud.size();
    out << "VERSION .7\n"
        << "FIELDS x y z rgb\n"
        << "SIZE 4 4 4 4\n"
        << "TYPE F F F F\n"
        << "COUNT 1 1 1 1\n"
        << "WIDTH " << n << "\n"
        << "HEIGHT 1\n"
        << "POINTS " << n << "\n"
        << "DATA ascii\n";
    for (const auto& p : cloud.points) {
        out << format_float(static_cast<float>(p.x)) << " " << format_float(static_cast<float>(p.y))
            << " " << format_float(static_cast<float>(p.z)) << " "
            << format_float(pack_rgb(p.r, p.g, p.b)) << "\n";
    }
}

PointCloud load_pcd(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open PCD file: " + path.string());

    auto fail = [&](int line_no, const std::string& msg) -> void {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
    };

    std::string line;
    int line_no = 0;
    long long points_expected = -1;
    bool fields_ok = false, data_ascii = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "VERSION" || key == "SIZE" || key == "TYPE" || key == "COUNT" ||
            key == "WIDTH" || key == "HEIGHT" || key == "VIEWPOINT") {
            continue;
        } else if (key == "FIELDS") {
            std::vector<std::string> fields;
            std::string f;
            while (ss >> f) fields.push_back(f);
            if (fields != std::vector<std::string>{"x", "y", "z", "rgb"})
                fail(line_no, "unsupported FIELDS (expected: x y z rgb)");
            fields_ok = true;
        } else if (key == "POINTS") {
            if (!(ss >> points_expected) || points_expected < 0)
                fail(line_no, "malformed POINTS");
        } else if (key == "DATA") {
            std::string mode;
            ss >> mode;
            if (mode != "ascii") fail(line_no, "only DATA ascii is supported");
            data_ascii = true;
            break;
        } else {
            fail(line_no, "unknown header entry '" + key + "'");
        }
    }
    if (!fields_ok) fail(line_no, "missing FIELDS header");
    if (points_expected < 0) fail(line_no, "missing POINTS header");
    if (!data_ascii) fail(line_no, "missing DATA header");

    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(points_expected));
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        float x, y, z, rgb;
        if (!(ss >> x >> y >> z >> rgb)) fail(line_no, "non-numeric point row");
        std::string extra;
        if (ss >> extra) fail(line_no, "trailing data in point row");
        PointXYZRGB p;
        p.x = x;
        p.y = y;
        p.z = z;
        unpack_rgb(rgb, p.r, p.g, p.b);
        cloud.points.push_back(p);
    }
    if (static_cast<long long>(cloud.size()) != points_expected)
        throw DataError(path.string() + ": POINTS says " + std::to_string(points_expected) +
                        " but " + std::to_string(cloud.size()) + " rows found");
    return cloud;
}

PointCloud voxel_downsample(const PointCloud& cloud, double leaf) {
    if (!(leaf > 0.0)) throw InvalidInput("voxel leaf size must be positive");
    struct Accum {
        double x = 0, y = 0, z = 0, r = 0, g = 0, b = 0;
        int n = 0;
    };
    std::map<std::array<long long, 3>, Accum> voxels;
    for (const auto& p : cloud.points) {
        const std::array<long long, 3> key = {static_cast<long long>(std::floor(p.x / leaf)),
                                              static_cast<long long>(std::floor(p.y / leaf)),
                                              static_cast<long long>(std::floor(p.z / leaf))};
        Accum& a = voxels[key];
        a.x += p.x;
        a.y += p.y;
        a.z += p.z;
        a.r += p.r;
        a.g += p.g;
        a.b += p.b;
        ++a.n;
    }
    PointCloud out;
    out.points.reserve(voxels.size());
    for (const auto& [key, a] : voxels) {
        (void)key;
        PointXYZRGB p;
        p.x = a.x / a.n;
        p.y = a.y / a.n;
        p.z = a.z / a.n;
        p.r = static_cast<std::uint8_t>(std::llround(a.r / a.n));
        p.g = static_cast<std::uint8_t>(std::llround(a.g / a.n));
        p.b = static_cast<std::uint8_t>(std::llround(a.b / a.n));
        out.points.push_back(p);
    }
    return out;
}

RansacResult ransac_plane(const PointCloud& cloud, int max_iters, double dist_thresh,
                          std::uint64_t seed) {
    if (!(dist_thresh > 0.0)) throw InvalidInput("distance threshold must be positive");
    if (max_iters < 1) throw InvalidInput("iteration count must be >= 1");
    const int n = static_cast<int>(cloud.size());
    if (n < 3) throw DataError("plane fitting needs at least 3 points");

    int best_count = -1;
    Vec3 best_normal = Vec3::UnitZ();
    double best_offset = 0.0;
    bool any_valid = false;

    for (int iter = 0; iter < max_iters; ++iter) {
        Rng rng(seed, static_cast<std::uint64_t>(iter)); // schedule-independent per-iteration stream
        const int ia = rng.uniform_int(n);
        int ib = rng.uniform_int(n);
        while (ib == ia) ib = rng.uniform_int(n);
        int ic = rng.uniform_int(n);
        while (ic == ia || ic == ib) ic = rng.uniform_int(n);
        const Vec3 a = cloud.points[static_cast<std::size_t>(ia)].xyz();
        const Vec3 b = cloud.points[static_cast<std::size_t>(ib)].xyz();
        const Vec3 c = cloud.points[static_cast<std::size_t>(ic)].xyz();
        const Vec3 ab = b - a, ac = c - a;
        Vec3 normal = ab.cross(ac);
        if (normal.norm() < 1e-9 * ab.norm() * ac.norm() || normal.norm() == 0.0) continue;
        normal.normalize();
        const double offset = normal.dot(a);
        int count = 0;
        for (const auto& p : cloud.points)
            if (std::abs(normal.dot(p.xyz()) - offset) <= dist_thresh) ++count;
        any_valid = true;
        if (count > best_count) {
            best_count = count;
            best_normal = normal;
            best_offset = offset;
        }
    }
    if (!any_valid) throw DataError("all RANSAC samples were collinear");

    // Total-least-squares refinement over the consensus inliers.
    auto collect_inliers = [&](const Vec3& normal, double offset) {
        std::vector<int> idx;
        for (int i = 0; i < n; ++i)
            if (std::abs(normal.dot(cloud.points[static_cast<std::size_t>(i)].xyz()) - offset) <=
                dist_thresh)
                idx.push_back(i);
        return idx;
    };
    std::vector<int> inliers = collect_inliers(best_normal, best_offset);
    if (inliers.size() >= 3) {
        Vec3 centroid = Vec3::Zero();
        for (int i : inliers) centroid += cloud.points[static_cast<std::size_t>(i)].xyz();
        centroid /= static_cast<double>(inliers.size());
        Mat3 scatter = Mat3::Zero();
        for (int i : inliers) {
            const Vec3 d = cloud.points[static_cast<std::size_t>(i)].xyz() - centroid;
            scatter += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
        const Vec3 refined = eig.eigenvectors().col(0); // smallest eigenvalue
        best_normal = refined;
        best_offset = refined.dot(centroid);
        inliers = collect_inliers(best_normal, best_offset);
    }

    // Deterministic sign: largest-magnitude component positive.
    int imax = 0;
    best_normal.cwiseAbs().maxCoeff(&imax);
    if (best_normal[imax] < 0.0) {
        best_normal = -best_normal;
        best_offset = -best_offset;
    }

    RansacResult result;
    result.plane.normal = best_normal;
    result.plane.offset = best_offset;
    result.plane.inlier_indices = inliers;
    std::vector<bool> is_inlier(static_cast<std::size_t>(n), false);
    for (int i : inliers) is_inlier[static_cast<std::size_t>(i)] = true;
    for (int i = 0; i < n; ++i)
        if (!is_inlier[static_cast<std::size_t>(i)])
            result.outliers.points.push_back(cloud.points[static_cast<std::size_t>(i)]);
    return result;
}

namespace {

// Principal frame of a point set: eigenvalue-ordered, sign-normalized,
// right-handed. Identity for degenerate scatter.
Mat3 principal_frame(const std::vector<Vec3>& points, const Vec3& centroid) {
    Mat3 scatter = Mat3::Zero();
    for (const auto& p : points) {
        const Vec3 d = p - centroid;
        scatter += d * d.transpose();
    }
    if (scatter.cwiseAbs().maxCoeff() < 1e-30) return Mat3::Identity();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
    Mat3 axes;
    for (int i = 0; i < 3; ++i) axes.col(i) = eig.eigenvectors().col(2 - i);
    for (int c = 0; c < 3; ++c) {
        int imax = 0;
        axes.col(c).cwiseAbs().maxCoeff(&imax);
        if (axes(imax, c) < 0.0) axes.col(c) = -axes.col(c);
    }
    if (axes.determinant() < 0.0) axes.col(2) = -axes.col(2);
    return axes;
}

Cluster finalize_cluster(const PointCloud& cloud, std::vector<int> indices) {
    Cluster cl;
    std::sort(indices.begin(), indices.end());
    cl.point_indices = std::move(indices);
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    std::vector<Vec3> pts;
    pts.reserve(cl.point_indices.size());
    for (int i : cl.point_indices) {
        const Vec3 p = cloud.points[static_cast<std::size_t>(i)].xyz();
        pts.push_back(p);
        cl.centroid += p;
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    cl.centroid /= static_cast<double>(cl.point_indices.size());
    cl.extents = hi - lo;
    cl.principal_axes = principal_frame(pts, cl.centroid);
    return cl;
}

} // namespace

std::vector<Cluster> euclidean_cluster(const PointCloud& cloud, double epsilon, int min_pts) {
    if (!(epsilon > 0.0)) throw InvalidInput("cluster radius must be positive");
    if (min_pts < 1) throw InvalidInput("min_pts must be >= 1");
    const int n = static_cast<int>(cloud.size());
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (const auto& p : cloud.points) pts.push_back(p.xyz());
    KdTree3 tree(pts);

    std::vector<bool> visited(static_cast<std::size_t>(n), false);
    std::vector<Cluster> clusters;
    for (int i = 0; i < n; ++i) {
        if (visited[static_cast<std::size_t>(i)]) continue;
        std::vector<int> component;
        std::vector<int> frontier = {i};
        visited[static_cast<std::size_t>(i)] = true;
        while (!frontier.empty()) {
            const int cur = frontier.back();
            frontier.pop_back();
            component.push_back(cur);
            for (int nb : tree.radius_search(pts[static_cast<std::size_t>(cur)], epsilon)) {
                if (!visited[static_cast<std::size_t>(nb)]) {
                    visited[static_cast<std::size_t>(nb)] = true;
                    frontier.push_back(nb);
                }
            }
        }
        if (static_cast<int>(component.size()) >= min_pts)
            clusters.push_back(finalize_cluster(cloud, std::move(component)));
    }
    std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
        if (a.point_indices.size() != b.point_indices.size())
            return a.point_indices.size() > b.point_indices.size();
        return a.point_indices.front() < b.point_indices.front();
    });
    return clusters;
}

namespace {

void soft_bin(Eigen::Ref<Eigen::Matrix<double, FeatureVector::kDim, 1>> values, int first_bin,
              int bins, double v, double weight) {
    v = std::clamp(v, 0.0, 1.0);
    const double pos = v * (bins - 1);
    const int i0 = std::min(static_cast<int>(std::floor(pos)), bins - 2);
    const double frac = pos - i0;
    values[first_bin + i0] += weight * (1.0 - frac);
    values[first_bin + i0 + 1] += weight * frac;
}

void rgb_to_hue_sat(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8, double& hue, double& sat) {
    const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    if (delta < 1e-12) {
        hue = 0.0;
    } else if (mx == r) {
        hue = 60.0 * std::fmod((g - b) / delta + 6.0, 6.0);
    } else if (mx == g) {
        hue = 60.0 * ((b - r) / delta + 2.0);
    } else {
        hue = 60.0 * ((r - g) / delta + 4.0);
    }
    sat = mx < 1e-12 ? 0.0 : delta / mx;
}

} // namespace

FeatureVector compute_features(const PointCloud& cloud, const Cluster& cluster) {
    if (cluster.point_indices.empty()) throw InvalidInput("cannot compute features of an empty cluster");
    const int n = static_cast<int>(cluster.point_indices.size());
    FeatureVector f;

    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i : cluster.point_indices) pts.push_back(cloud.points[static_cast<std::size_t>(i)].xyz());

    // Oriented extents in the principal frame (rotation/translation invariant).
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= n;
    const Mat3 axes = principal_frame(pts, centroid);
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& p : pts) {
        const Vec3 q = axes.transpose() * (p - centroid);
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
    }
    Vec3 oriented = hi - lo;
    std::sort(oriented.data(), oriented.data() + 3, std::greater<double>());
    const double o1 = std::max(oriented[0], 1e-9);
    const double ratio_mid = oriented[1] / o1;
    const double ratio_min = oriented[2] / o1;
    const double scale = o1 / 0.16; // reference length 16 cm

    f.extent_only = n < 10;
    const double extent_weight = f.extent_only ? 1.0 : 0.5;
    const int eb = FeatureVector::kNormalBins;
    soft_bin(f.values, eb + 0, 2, ratio_mid, extent_weight * 0.25);
    soft_bin(f.values, eb + 2, 2, ratio_min, extent_weight * 0.25);
    soft_bin(f.values, eb + 4, 4, scale, extent_weight * 0.5);

    if (!f.extent_only) {
        // Per-point normals from a 10-NN plane fit, binned by angle to the
        // first principal axis.
        KdTree3 tree(pts);
        const Vec3 axis1 = axes.col(0);
        for (const auto& p : pts) {
            const auto nb = tree.knn(p, 10);
            Vec3 local_centroid = Vec3::Zero();
            for (int j : nb) local_centroid += pts[static_cast<std::size_t>(j)];
            local_centroid /= static_cast<double>(nb.size());
            Mat3 scatter = Mat3::Zero();
            for (int j : nb) {
                const Vec3 d = pts[static_cast<std::size_t>(j)] - local_centroid;
                scatter += d * d.transpose();
            }
            Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
            const Vec3 normal = eig.eigenvectors().col(0);
            const double angle = std::acos(std::clamp(std::abs(normal.dot(axis1)), 0.0, 1.0));
            int bin = static_cast<int>(angle / (M_PI / 2.0) * FeatureVector::kNormalBins);
            bin = std::clamp(bin, 0, FeatureVector::kNormalBins - 1);
            f.values[bin] += 0.5 / n;
        }
    }

    // Hue/saturation histogram: 12 hue x 2 saturation cells.
    const int cb = FeatureVector::kNormalBins + FeatureVector::kExtentBins;
    for (int i : cluster.point_indices) {
        const auto& p = cloud.points[static_cast<std::size_t>(i)];
        double hue = 0.0, sat = 0.0;
        rgb_to_hue_sat(p.r, p.g, p.b, hue, sat);
        int hbin = static_cast<int>(hue / 30.0);
        hbin = std::clamp(hbin, 0, 11);
        const int sbin = sat < 0.5 ? 0 : 1;
        f.values[cb + hbin * 2 + sbin] += 1.0 / n;
    }
    return f;
}

Pose centroid_pose(const PointCloud& cloud, const Cluster& cluster) {
    if (cluster.point_indices.empty()) throw InvalidInput("cannot compute the pose of an empty cluster");
    Vec3 centroid = Vec3::Zero();
    std::vector<Vec3> pts;
    pts.reserve(cluster.point_indices.size());
    for (int i : cluster.point_indices) {
        pts.push_back(cloud.points[static_cast<std::size_t>(i)].xyz());
        centroid += pts.back();
    }
    centroid /= static_cast<double>(pts.size());
    Pose pose;
    pose.translation = centroid;
    pose.rotation = principal_frame(pts, centroid);
    return pose;
}

Pose centroid_pose(const Cluster& cluster) {
    if (cluster.point_indices.empty()) throw InvalidInput("cannot compute the pose of an empty cluster");
    Pose pose;
    pose.translation = cluster.centroid;
    pose.rotation = cluster.principal_axes;
    return pose;
}

} // namespace ksyn
