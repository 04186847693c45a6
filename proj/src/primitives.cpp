#include "ksyn/primitives.hpp"

#include <cmath>

#include "ksyn/errors.hpp"
#include "ksyn/rng.hpp"

namespace ksyn {

void ObjectPrimitive::validate() const {
    pose.validate();
    switch (kind) {
        case Kind::Sphere:
            if (!(dims[0] > 0.0)) throw InvalidInput("sphere radius must be positive");
            break;
        case Kind::Box:
            if (!(dims[0] > 0.0 && dims[1] > 0.0 && dims[2] > 0.0))
                throw InvalidInput("box half-extents must be positive");
            break;
        case Kind::Cylinder:
        case Kind::Cone:
            if (!(dims[0] > 0.0 && dims[1] > 0.0))
                throw InvalidInput("radius and height must be positive");
            break;
    }
}

std::string ObjectPrimitive::kind_name(Kind k) {
    switch (k) {
        case Kind::Sphere: return "sphere";
        case Kind::Box: return "box";
        case Kind::Cylinder: return "cylinder";
        case Kind::Cone: return "cone";
    }
    return "sphere";
}

ObjectPrimitive::Kind ObjectPrimitive::kind_from_name(const std::string& name) {
    if (name == "sphere") return Kind::Sphere;
    if (name == "box") return Kind::Box;
    if (name == "cylinder") return Kind::Cylinder;
    if (name == "cone") return Kind::Cone;
    throw InvalidInput("unknown primitive kind: " + name);
}

namespace {

SurfacePoint sphere_closest(double radius, const Vec3& p) {
    const double r = p.norm();
    SurfacePoint sp;
    if (r < 1e-12) {
        sp.normal = Vec3::UnitZ();
        sp.point = radius * sp.normal;
        sp.signed_dist = -radius;
        return sp;
    }
    sp.normal = p / r;
    sp.point = radius * sp.normal;
    sp.signed_dist = r - radius;
    return sp;
}

SurfacePoint box_closest(const Vec3& half, const Vec3& p) {
    SurfacePoint sp;
    const bool inside = std::abs(p.x()) <= half.x() && std::abs(p.y()) <= half.y() &&
                        std::abs(p.z()) <= half.z();
    if (!inside) {
        Vec3 clamped(std::clamp(p.x(), -half.x(), half.x()), std::clamp(p.y(), -half.y(), half.y()),
                     std::clamp(p.z(), -half.z(), half.z()));
        sp.point = clamped;
        const Vec3 diff = p - clamped;
        sp.signed_dist = diff.norm();
        sp.normal = sp.signed_dist > 1e-12 ? Vec3(diff / sp.signed_dist) : Vec3::UnitZ();
        return sp;
    }
    // Inside: walk to the nearest face.
    Vec3 gaps(half.x() - std::abs(p.x()), half.y() - std::abs(p.y()), half.z() - std::abs(p.z()));
    int axis = 0;
    gaps.minCoeff(&axis);
    Vec3 n = Vec3::Zero();
    n[axis] = p[axis] >= 0.0 ? 1.0 : -1.0;
    sp.normal = n;
    sp.point = p;
    sp.point[axis] = n[axis] * half[axis];
    sp.signed_dist = -gaps[axis];
    return sp;
}

SurfacePoint cylinder_closest(double radius, double half_height, const Vec3& p) {
    const double rho = std::hypot(p.x(), p.y());
    const Vec3 radial = rho > 1e-12 ? Vec3(p.x() / rho, p.y() / rho, 0.0) : Vec3::UnitX();
    const double d_side = rho - radius;
    const double d_cap = std::abs(p.z()) - half_height;
    SurfacePoint sp;
    if (d_side <= 0.0 && d_cap <= 0.0) {
        // Inside: closer wall wins.
        if (-d_side < -d_cap) {
            sp.normal = radial;
            sp.point = radius * radial + Vec3(0, 0, p.z());
            sp.signed_dist = d_side;
        } else {
            sp.normal = Vec3(0, 0, p.z() >= 0.0 ? 1.0 : -1.0);
            sp.point = Vec3(p.x(), p.y(), sp.normal.z() * half_height);
            sp.signed_dist = d_cap;
        }
        return sp;
    }
    if (d_side > 0.0 && d_cap <= 0.0) {
        sp.normal = radial;
        sp.point = radius * radial + Vec3(0, 0, p.z());
        sp.signed_dist = d_side;
        return sp;
    }
    if (d_side <= 0.0 && d_cap > 0.0) {
        sp.normal = Vec3(0, 0, p.z() >= 0.0 ? 1.0 : -1.0);
        sp.point = Vec3(p.x(), p.y(), sp.normal.z() * half_height);
        sp.signed_dist = d_cap;
        return sp;
    }
    // Outside the rim: closest point is on the cap edge circle.
    const double cap_z = p.z() >= 0.0 ? half_height : -half_height;
    sp.point = radius * radial + Vec3(0, 0, cap_z);
    const Vec3 diff = p - sp.point;
    sp.signed_dist = diff.norm();
    sp.normal = sp.signed_dist > 1e-12 ? Vec3(diff / sp.signed_dist) : radial;
    return sp;
}

// Cone with base disc at z=0 (radius r) and apex at z=h. Approximate the
// closest point by sampling the slant/base parameterization; exact enough
// for contact checks at millimeter tolerances.
SurfacePoint cone_closest(double radius, double height, const Vec3& p) {
    const double rho = std::hypot(p.x(), p.y());
    const Vec3 radial = rho > 1e-12 ? Vec3(p.x() / rho, p.y() / rho, 0.0) : Vec3::UnitX();

    // Closest point on the slant segment from (r, 0) to (0, h) in (rho, z).
    const Eigen::Vector2d a(radius, 0.0), b(0.0, height), q(rho, p.z());
    const Eigen::Vector2d ab = b - a;
    const double t = std::clamp((q - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const Eigen::Vector2d slant = a + t * ab;
    const Vec3 slant_point = slant[0] * radial + Vec3(0, 0, slant[1]);
    const double slant_dist = (p - slant_point).norm();

    // Closest point on the base disc z=0, rho<=r.
    const Vec3 base_point = std::min(rho, radius) * radial;
    const double base_dist = (p - base_point).norm();

    SurfacePoint sp;
    if (slant_dist <= base_dist) {
        sp.point = slant_point;
        // Outward slant normal: rotate the slant direction (-r, h) by -90 deg
        // in the (rho, z) half-plane.
        const double slant_len = std::hypot(radius, height);
        sp.normal = (height / slant_len) * radial + Vec3(0, 0, radius / slant_len);
        sp.signed_dist = (p - sp.point).dot(sp.normal) >= 0.0 ? slant_dist : -slant_dist;
    } else {
        sp.point = base_point;
        sp.normal = -Vec3::UnitZ();
        sp.signed_dist = (p - sp.point).dot(sp.normal) >= 0.0 ? base_dist : -base_dist;
    }
    return sp;
}

} // namespace

SurfacePoint closest_surface_point(const ObjectPrimitive& obj, const Vec3& query) {
    const Vec3 local = obj.pose.rotation.transpose() * (query - obj.pose.translation);
    SurfacePoint sp;
    switch (obj.kind) {
        case ObjectPrimitive::Kind::Sphere: sp = sphere_closest(obj.dims[0], local); break;
        case ObjectPrimitive::Kind::Box: sp = box_closest(obj.dims, local); break;
        case ObjectPrimitive::Kind::Cylinder: sp = cylinder_closest(obj.dims[0], obj.dims[1], local); break;
        case ObjectPrimitive::Kind::Cone: sp = cone_closest(obj.dims[0], obj.dims[1], local); break;
    }
    sp.point = obj.pose.apply(sp.point);
    sp.normal = obj.pose.rotation * sp.normal;
    return sp;
}

Vec3 sample_surface_point(const ObjectPrimitive& obj, Rng& rng) {
    Vec3 local = Vec3::Zero();
    switch (obj.kind) {
        case ObjectPrimitive::Kind::Sphere: {
            Vec3 n(rng.normal(), rng.normal(), rng.normal());
            while (n.norm() < 1e-9) n = Vec3(rng.normal(), rng.normal(), rng.normal());
            local = obj.dims[0] * n.normalized();
            break;
        }
        case ObjectPrimitive::Kind::Box: {
            const Vec3 h = obj.dims;
            const double ax = h.y() * h.z(), ay = h.x() * h.z(), az = h.x() * h.y();
            const double total = 2.0 * (ax + ay + az);
            double pick = rng.uniform() * total;
            int axis = 0;
            double sign = 1.0;
            const double areas[3] = {ax, ay, az};
            for (int i = 0; i < 3; ++i) {
                for (double s : {1.0, -1.0}) {
                    pick -= areas[i];
                    if (pick <= 0.0) {
                        axis = i;
                        sign = s;
                        goto chosen;
                    }
                }
            }
        chosen:
            local = Vec3(rng.uniform(-h.x(), h.x()), rng.uniform(-h.y(), h.y()),
                         rng.uniform(-h.z(), h.z()));
            local[axis] = sign * h[axis];
            break;
        }
        case ObjectPrimitive::Kind::Cylinder: {
            const double r = obj.dims[0], hh = obj.dims[1];
            const double side = 2.0 * M_PI * r * 2.0 * hh;
            const double caps = 2.0 * M_PI * r * r;
            const double angle = rng.uniform(0.0, 2.0 * M_PI);
            if (rng.uniform() * (side + caps) < side) {
                local = Vec3(r * std::cos(angle), r * std::sin(angle), rng.uniform(-hh, hh));
            } else {
                const double rr = r * std::sqrt(rng.uniform());
                const double z = rng.uniform() < 0.5 ? hh : -hh;
                local = Vec3(rr * std::cos(angle), rr * std::sin(angle), z);
            }
            break;
        }
        case ObjectPrimitive::Kind::Cone: {
            const double r = obj.dims[0], h = obj.dims[1];
            const double slant = std::sqrt(r * r + h * h);
            const double side = M_PI * r * slant;
            const double base = M_PI * r * r;
            const double angle = rng.uniform(0.0, 2.0 * M_PI);
            if (rng.uniform() * (side + base) < side) {
                const double u = std::sqrt(rng.uniform()); // area-uniform along slant
                local = Vec3(u * r * std::cos(angle), u * r * std::sin(angle), h * (1.0 - u));
            } else {
                const double rr = r * std::sqrt(rng.uniform());
                local = Vec3(rr * std::cos(angle), rr * std::sin(angle), 0.0);
            }
            break;
        }
    }
    return obj.pose.apply(local);
}

double bounding_radius(const ObjectPrimitive& obj) {
    switch (obj.kind) {
        case ObjectPrimitive::Kind::Sphere: return obj.dims[0];
        case ObjectPrimitive::Kind::Box: return obj.dims.norm();
        case ObjectPrimitive::Kind::Cylinder: return std::hypot(obj.dims[0], obj.dims[1]);
        case ObjectPrimitive::Kind::Cone: return std::max(obj.dims[0], obj.dims[1]);
    }
    return obj.dims.norm();
}

} // namespace ksyn
