#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ksyn/frames_mapping.hpp"
#include "ksyn/primitives.hpp"
#include "ksyn/types.hpp"

namespace ksyn {

struct PointXYZRGB {
    double x = 0.0, y = 0.0, z = 0.0;
    std::uint8_t r = 0, g = 0, b = 0;

    Vec3 xyz() const { return Vec3(x, y, z); }
};

struct PointCloud {
    std::vector<PointXYZRGB> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

// ASCII PCD subset: FIELDS x y z rgb, rgb packed as a float-encoded 24-bit
// integer.
PointCloud load_pcd(const std::filesystem::path& path);
void save_pcd(const std::filesystem::path& path, const PointCloud& cloud);

float pack_rgb(std::uint8_t r, std::uint8_t g, std::uint8_t b);
void unpack_rgb(float packed, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b);

// One centroid point per occupied voxel, colors averaged; output ordered by
// voxel index.
PointCloud voxel_downsample(const PointCloud& cloud, double leaf);

struct Plane {
    Vec3 normal = Vec3::UnitZ(); // unit; n . p = offset
    double offset = 0.0;
    std::vector<int> inlier_indices;
};

struct RansacResult {
    Plane plane;
    PointCloud outliers; // points beyond the distance threshold, input order
};

RansacResult ransac_plane(const PointCloud& cloud, int max_iters, double dist_thresh,
                          std::uint64_t seed);

struct Cluster {
    std::vector<int> point_indices; // ascending
    Vec3 centroid = Vec3::Zero();
    Vec3 extents = Vec3::Zero();    // axis-aligned bounding-box extents
    Mat3 principal_axes = Mat3::Identity(); // right-handed, eigenvalue order
};

// Connected components of the epsilon-neighbor graph; components smaller
// than min_pts are discarded. Sorted by size descending, ties by smallest
// member index.
std::vector<Cluster> euclidean_cluster(const PointCloud& cloud, double epsilon, int min_pts);

struct FeatureVector {
    static constexpr int kNormalBins = 32;
    static constexpr int kExtentBins = 8;
    static constexpr int kColorBins = 24;
    static constexpr int kDim = kNormalBins + kExtentBins + kColorBins;

    Eigen::Matrix<double, kDim, 1> values = Eigen::Matrix<double, kDim, 1>::Zero();
    bool extent_only = false; // < 10 points: no normal estimation

    // shape histogram = normal-angle block + extent block, sums to 1.
    auto shape() const { return values.head(kNormalBins + kExtentBins); }
    auto color() const { return values.tail(kColorBins); }
};

FeatureVector compute_features(const PointCloud& cloud, const Cluster& cluster);

// Position = centroid, orientation = right-handed principal axes.
Pose centroid_pose(const PointCloud& cloud, const Cluster& cluster);
Pose centroid_pose(const Cluster& cluster);

// ---------------------------------------------------------------------------
// One-vs-one RBF SVM trained by sequential minimal optimization.

struct SvmPair {
    int class_a = 0; // vote when decision > 0
    int class_b = 0;
    Mat support_vectors;  // rows
    Vec dual_coefficients; // alpha_i * y_i
    double bias = 0.0;
};

struct SvmModel {
    std::vector<std::string> classes;
    std::vector<SvmPair> pairs;
    double c = 10.0;
    double gamma = 2.0;
    double kkt_tolerance = 1e-3;

    static SvmModel load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

struct SvmSample {
    FeatureVector feature;
    std::string label;
};

SvmModel svm_train(const std::vector<SvmSample>& dataset, double c, double gamma,
                   std::uint64_t seed);

struct Classification {
    std::optional<std::string> label; // empty = not found (reject branch)
    double confidence = 0.0;          // winning votes / total pairs
    int votes = 0;
};

Classification svm_classify(const SvmModel& model, const FeatureVector& f,
                            double reject_threshold = 0.35);

// Argmax vote without the reject branch; used for confusion matrices.
std::string svm_predict(const SvmModel& model, const FeatureVector& f);

struct ConfusionResult {
    std::vector<std::string> classes;
    Eigen::MatrixXi counts;  // rows = truth, cols = prediction
    Mat normalized;          // row-normalized
    double accuracy = 0.0;
};

ConfusionResult evaluate_confusion(const SvmModel& model, const std::vector<SvmSample>& testset);

void save_confusion_csv(const std::filesystem::path& path, const ConfusionResult& result);

// ---------------------------------------------------------------------------
// Synthetic scenes and recognition corpora.

struct SceneObjectSpec {
    std::string label;
    ObjectPrimitive primitive;
    std::array<std::uint8_t, 3> color{200, 200, 200};
    int point_count = 600;
};

struct SceneSpec {
    double table_z = 0.0;
    double table_half_x = 0.25;
    double table_half_y = 0.25;
    std::array<std::uint8_t, 3> table_color{120, 90, 60};
    int table_points = 2500;
    std::vector<SceneObjectSpec> objects;
    double noise_sigma = 0.001;    // [m]
    double outlier_fraction = 0.0; // of the total point count

    static SceneSpec load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

struct SceneGroundTruth {
    Plane table;
    std::vector<int> point_source; // -1 table, -2 outlier, else object index
    std::vector<std::string> labels;
    std::vector<Pose> poses;
    bool overlap_warning = false;
};

struct GeneratedScene {
    PointCloud cloud;
    SceneGroundTruth truth;
};

GeneratedScene generate_scene(const SceneSpec& spec, std::uint64_t seed);

// Isolated object instances rendered to feature vectors; `orientations`
// random attitudes per class.
struct CorpusClassSpec {
    std::string label;
    ObjectPrimitive::Kind kind = ObjectPrimitive::Kind::Sphere;
    double scale = 1.0;
    std::array<std::uint8_t, 3> color{200, 60, 60};
    std::optional<Vec3> dims; // explicit dimensions override the scaled defaults
};

std::vector<CorpusClassSpec> default_corpus_classes(); // 4 families x 6 variants
std::vector<SvmSample> generate_corpus(const std::vector<CorpusClassSpec>& classes,
                                       int orientations, std::uint64_t seed);

} // namespace ksyn
