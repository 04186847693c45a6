#pragma once

#include <string>

#include "ksyn/frames_mapping.hpp"
#include "ksyn/types.hpp"

namespace ksyn {

class Rng;

// Parametric solid used for virtual objects and synthetic scenes.
// Dimensions: sphere {radius}; box {half_x, half_y, half_z};
// cylinder {radius, half_height} (axis = local z); cone {radius, height}.
struct ObjectPrimitive {
    enum class Kind { Sphere, Box, Cylinder, Cone };

    Kind kind = Kind::Sphere;
    Vec3 dims = Vec3(0.03, 0.03, 0.03);
    Pose pose;

    void validate() const;
    static std::string kind_name(Kind k);
    static Kind kind_from_name(const std::string& name);
};

struct SurfacePoint {
    Vec3 point;        // closest point on the surface, world frame
    Vec3 normal;       // outward unit normal at that point
    double signed_dist; // negative inside
};

SurfacePoint closest_surface_point(const ObjectPrimitive& obj, const Vec3& query);

// Uniform-ish surface sample (area-weighted over faces where applicable).
Vec3 sample_surface_point(const ObjectPrimitive& obj, Rng& rng);

// Conservative world-frame bounding radius around the pose origin.
double bounding_radius(const ObjectPrimitive& obj);

} // namespace ksyn
