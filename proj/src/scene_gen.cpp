#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "ksyn/errors.hpp"
#include "ksyn/io.hpp"
#include "ksyn/perception.hpp"
#include "ksyn/rng.hpp"

namespace ksyn {

namespace {

nlohmann::json pose_json(const Pose& p) {
    const Eigen::Quaterniond q(p.rotation);
    return {{"qw", q.w()}, {"qx", q.x()}, {"qy", q.y()}, {"qz", q.z()},
            {"x", p.translation.x()}, {"y", p.translation.y()}, {"z", p.translation.z()}};
}

Pose pose_from(const nlohmann::json& j) {
    Eigen::Quaterniond q(j.at("qw").get<double>(), j.at("qx").get<double>(),
                         j.at("qy").get<double>(), j.at("qz").get<double>());
    q.normalize();
    Pose p;
    p.rotation = q.toRotationMatrix();
    p.translation = Vec3(j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>());
    return p;
}

Mat3 random_rotation(Rng& rng) {
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    while (q.norm() < 1e-9) q = Eigen::Quaterniond(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    return q.toRotationMatrix();
}

} // namespace

void SceneSpec::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["table"] = {{"z", table_z},
                  {"half_x", table_half_x},
                  {"half_y", table_half_y},
                  {"color", {table_color[0], table_color[1], table_color[2]}},
                  {"points", table_points}};
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& o : objects) {
        objs.push_back({{"label", o.label},
                        {"kind", ObjectPrimitive::kind_name(o.primitive.kind)},
                        {"dims", {o.primitive.dims[0], o.primitive.dims[1], o.primitive.dims[2]}},
                        {"pose", pose_json(o.primitive.pose)},
                        {"color", {o.color[0], o.color[1], o.color[2]}},
                        {"points", o.point_count}});
    }
    j["objects"] = std::move(objs);
    j["noise_sigma"] = noise_sigma;
    j["outlier_fraction"] = outlier_fraction;
    save_model_file(path, "scene.v1", std::move(j));
}

SceneSpec SceneSpec::load(const std::filesystem::path& path) {
    const nlohmann::json j = load_model_file(path, "scene.v1");
    SceneSpec spec;
    try {
        const auto& t = j.at("table");
        spec.table_z = t.at("z").get<double>();
        spec.table_half_x = t.at("half_x").get<double>();
        spec.table_half_y = t.at("half_y").get<double>();
        for (int i = 0; i < 3; ++i) spec.table_color[static_cast<std::size_t>(i)] = t.at("color")[static_cast<std::size_t>(i)].get<std::uint8_t>();
        spec.table_points = t.at("points").get<int>();
        for (const auto& oj : j.at("objects")) {
            SceneObjectSpec o;
            o.label = oj.at("label").get<std::string>();
            o.primitive.kind = ObjectPrimitive::kind_from_name(oj.at("kind").get<std::string>());
            o.primitive.dims = Vec3(oj.at("dims")[0].get<double>(), oj.at("dims")[1].get<double>(),
                                    oj.at("dims")[2].get<double>());
            o.primitive.pose = pose_from(oj.at("pose"));
            for (int i = 0; i < 3; ++i) o.color[static_cast<std::size_t>(i)] = oj.at("color")[static_cast<std::size_t>(i)].get<std::uint8_t>();
            o.point_count = oj.at("points").get<int>();
            spec.objects.push_back(std::move(o));
        }
        spec.noise_sigma = j.at("noise_sigma").get<double>();
        spec.outlier_fraction = j.at("outlier_fraction").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return spec;
}

GeneratedScene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    if (spec.table_points < 0 || !(spec.table_half_x > 0.0) || !(spec.table_half_y > 0.0))
        throw InvalidInput("malformed table spec");
    if (spec.noise_sigma < 0.0 || spec.outlier_fraction < 0.0 || spec.outlier_fraction >= 1.0)
        throw InvalidInput("noise sigma must be >= 0 and outlier fraction in [0, 1)");
    for (const auto& o : spec.objects) o.primitive.validate();

    GeneratedScene out;
    out.truth.table.normal = Vec3::UnitZ();
    out.truth.table.offset = spec.table_z;

    // Overlap report: pairwise bounding spheres.
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        for (std::size_t j = i + 1; j < spec.objects.size(); ++j) {
            const double d = (spec.objects[i].primitive.pose.translation -
                              spec.objects[j].primitive.pose.translation).norm();
            if (d < bounding_radius(spec.objects[i].primitive) +
                        bounding_radius(spec.objects[j].primitive))
                out.truth.overlap_warning = true;
        }
    }

    auto push_point = [&](const Vec3& p, std::array<std::uint8_t, 3> color, int source, Rng& rng) {
        PointXYZRGB q;
        q.x = p.x() + spec.noise_sigma * rng.normal();
        q.y = p.y() + spec.noise_sigma * rng.normal();
        q.z = p.z() + spec.noise_sigma * rng.normal();
        q.r = color[0];
        q.g = color[1];
        q.b = color[2];
        out.cloud.points.push_back(q);
        out.truth.point_source.push_back(source);
    };

    {
        Rng rng(seed, 1);
        for (int i = 0; i < spec.table_points; ++i) {
            const Vec3 p(rng.uniform(-spec.table_half_x, spec.table_half_x),
                         rng.uniform(-spec.table_half_y, spec.table_half_y), spec.table_z);
            push_point(p, spec.table_color, -1, rng);
        }
        out.truth.table.inlier_indices.resize(static_cast<std::size_t>(spec.table_points));
        for (int i = 0; i < spec.table_points; ++i)
            out.truth.table.inlier_indices[static_cast<std::size_t>(i)] = i;
    }

    for (std::size_t k = 0; k < spec.objects.size(); ++k) {
        const auto& o = spec.objects[k];
        Rng rng(seed, 100 + static_cast<std::uint64_t>(k));
        for (int i = 0; i < o.point_count; ++i)
            push_point(sample_surface_point(o.primitive, rng), o.color, static_cast<int>(k), rng);
        out.truth.labels.push_back(o.label);
        out.truth.poses.push_back(o.primitive.pose);
    }

    if (spec.outlier_fraction > 0.0) {
        Rng rng(seed, 2);
        const int base = static_cast<int>(out.cloud.size());
        const int n_outliers = static_cast<int>(
            std::llround(spec.outlier_fraction / (1.0 - spec.outlier_fraction) * base));
        const double margin = 0.15;
        for (int i = 0; i < n_outliers; ++i) {
            const Vec3 p(rng.uniform(-spec.table_half_x - margin, spec.table_half_x + margin),
                         rng.uniform(-spec.table_half_y - margin, spec.table_half_y + margin),
                         rng.uniform(spec.table_z - margin, spec.table_z + 2.0 * margin));
            std::array<std::uint8_t, 3> color = {static_cast<std::uint8_t>(rng.uniform_int(256)),
                                                 static_cast<std::uint8_t>(rng.uniform_int(256)),
                                                 static_cast<std::uint8_t>(rng.uniform_int(256))};
            PointXYZRGB q;
            q.x = p.x();
            q.y = p.y();
            q.z = p.z();
            q.r = color[0];
            q.g = color[1];
            q.b = color[2];
            out.cloud.points.push_back(q);
            out.truth.point_source.push_back(-2);
        }
    }
    return out;
}

std::vector<CorpusClassSpec> default_corpus_classes() {
    std::vector<CorpusClassSpec> classes;
    const std::array<ObjectPrimitive::Kind, 4> kinds = {
        ObjectPrimitive::Kind::Sphere, ObjectPrimitive::Kind::Box, ObjectPrimitive::Kind::Cylinder,
        ObjectPrimitive::Kind::Cone};
    const std::array<std::pair<const char*, double>, 3> sizes = {
        std::pair<const char*, double>{"s", 0.7}, {"m", 1.0}, {"l", 1.4}};
    const std::array<std::pair<const char*, std::array<std::uint8_t, 3>>, 2> colors = {
        std::pair<const char*, std::array<std::uint8_t, 3>>{"red", {220, 40, 40}},
        {"blue", {40, 80, 220}}};
    for (auto kind : kinds) {
        for (const auto& [size_tag, scale] : sizes) {
            for (const auto& [color_tag, rgb] : colors) {
                CorpusClassSpec c;
                c.label = ObjectPrimitive::kind_name(kind) + std::string("_") + size_tag + "_" + color_tag;
                c.kind = kind;
                c.scale = scale;
                c.color = rgb;
                classes.push_back(std::move(c));
            }
        }
    }
    return classes;
}

namespace {

ObjectPrimitive corpus_primitive(const CorpusClassSpec& spec) {
    ObjectPrimitive p;
    p.kind = spec.kind;
    if (spec.dims) {
        p.dims = *spec.dims;
        return p;
    }
    switch (spec.kind) {
        case ObjectPrimitive::Kind::Sphere: p.dims = spec.scale * Vec3(0.030, 0.030, 0.030); break;
        case ObjectPrimitive::Kind::Box: p.dims = spec.scale * Vec3(0.034, 0.022, 0.014); break;
        case ObjectPrimitive::Kind::Cylinder: p.dims = spec.scale * Vec3(0.020, 0.038, 0.0); break;
        case ObjectPrimitive::Kind::Cone: p.dims = spec.scale * Vec3(0.028, 0.062, 0.0); break;
    }
    return p;
}

} // namespace

std::vector<SvmSample> generate_corpus(const std::vector<CorpusClassSpec>& classes,
                                       int orientations, std::uint64_t seed) {
    if (classes.empty() || orientations < 1) throw InvalidInput("corpus needs classes and orientations");
    std::vector<SvmSample> samples;
    samples.reserve(classes.size() * static_cast<std::size_t>(orientations));
    for (std::size_t k = 0; k < classes.size(); ++k) {
        for (int o = 0; o < orientations; ++o) {
            Rng rng(seed, 1000 * (k + 1) + static_cast<std::uint64_t>(o));
            ObjectPrimitive prim = corpus_primitive(classes[k]);
            prim.pose.rotation = random_rotation(rng);
            prim.pose.translation =
                Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.0, 0.1));
            PointCloud cloud;
            const int n_points = 500;
            cloud.points.reserve(n_points);
            for (int i = 0; i < n_points; ++i) {
                const Vec3 p = sample_surface_point(prim, rng);
                PointXYZRGB q;
                q.x = p.x() + 0.0008 * rng.normal();
                q.y = p.y() + 0.0008 * rng.normal();
                q.z = p.z() + 0.0008 * rng.normal();
                q.r = classes[k].color[0];
                q.g = classes[k].color[1];
                q.b = classes[k].color[2];
                cloud.points.push_back(q);
            }
            const auto clusters = euclidean_cluster(cloud, 0.02, 1);
            if (clusters.empty()) throw NumericError("corpus instance produced no cluster");
            SvmSample sample;
            sample.feature = compute_features(cloud, clusters.front());
            sample.label = classes[k].label;
            samples.push_back(std::move(sample));
        }
    }
    return samples;
}

} // namespace ksyn
