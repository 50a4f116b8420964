#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <span>
#include <vector>

namespace semloc {

/// Rigid 3D transform. Rotation kept as a unit quaternion so long chains of
/// compositions stay well conditioned.
struct Pose {
    Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
    Eigen::Vector3d translation{0.0, 0.0, 0.0};

    static Pose identity() { return {}; }

    /// Apply the transform to a point.
    Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
        return rotation * p + translation;
    }

    Eigen::Matrix4d matrix() const;
};

/// Composition: (a * b) applies b first, then a.
Pose operator*(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// Geodesic rotation angle between two poses, radians.
double rotation_angle(const Pose& a, const Pose& b);

/// Right-multiplied retraction: p * Exp(delta) with delta = (omega, rho),
/// the se(3) twist (rotation first, translation second).
Pose retract(const Pose& p, const Eigen::Matrix<double, 6, 1>& delta);
Pose exp_se3(const Eigen::Matrix<double, 6, 1>& twist);

/// Infinite 3D line through `point` along unit `direction`.
struct Line3D {
    Eigen::Vector3d point{0.0, 0.0, 0.0};
    Eigen::Vector3d direction{0.0, 0.0, 1.0};
};

/// Image line a*u + b*v + c = 0 normalized so a^2 + b^2 = 1.
struct ImageLine {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
};

struct PixelPoint {
    double u = 0.0;
    double v = 0.0;
};

/// Perpendicular distance, meters.
double point_line_distance(const Eigen::Vector3d& p, const Line3D& line);
/// Signed-magnitude pixel distance |a*u + b*v + c|.
double point_line_distance(const PixelPoint& p, const ImageLine& line);

/// Total-least-squares fits (perpendicular residuals). Throw
/// Error(degenerate_input) when all points coincide or fewer than 2 given.
ImageLine fit_image_line(std::span<const PixelPoint> points);
Line3D fit_line_3d(std::span<const Eigen::Vector3d> points);

struct RansacLine {
    Line3D line;
    std::vector<int> inliers;  // ascending indices into the input
};

/// 2-point hypotheses, best inlier count, one LSQ refinement pass on the
/// winning inlier set. Deterministic for a fixed seed.
RansacLine ransac_line_3d(std::span<const Eigen::Vector3d> points, int iterations,
                          double inlier_threshold, std::uint64_t seed);

}  // namespace semloc
