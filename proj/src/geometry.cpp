#include "geometry.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "error.hpp"

namespace semloc {

Eigen::Matrix4d Pose::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation.toRotationMatrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
}

Pose operator*(const Pose& a, const Pose& b) {
    Pose out;
    out.rotation = a.rotation * b.rotation;
    out.rotation.normalize();
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

Pose inverse(const Pose& p) {
    Pose out;
    out.rotation = p.rotation.conjugate();
    out.translation = -(out.rotation * p.translation);
    return out;
}

double rotation_angle(const Pose& a, const Pose& b) {
    return a.rotation.angularDistance(b.rotation);
}

Pose exp_se3(const Eigen::Matrix<double, 6, 1>& twist) {
    const Eigen::Vector3d omega = twist.head<3>();
    const Eigen::Vector3d rho = twist.tail<3>();
    const double theta = omega.norm();

    Pose out;
    if (theta < 1e-12) {
        out.rotation = Eigen::Quaterniond::Identity();
        out.translation = rho;
        return out;
    }
    const Eigen::Vector3d axis = omega / theta;
    out.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(theta, axis));

    // V(omega) * rho, closed form.
    Eigen::Matrix3d hat;
    hat << 0, -omega.z(), omega.y(), omega.z(), 0, -omega.x(), -omega.y(), omega.x(), 0;
    const double t2 = theta * theta;
    const Eigen::Matrix3d V = Eigen::Matrix3d::Identity() +
                              ((1.0 - std::cos(theta)) / t2) * hat +
                              ((theta - std::sin(theta)) / (t2 * theta)) * hat * hat;
    out.translation = V * rho;
    return out;
}

Pose retract(const Pose& p, const Eigen::Matrix<double, 6, 1>& delta) {
    return p * exp_se3(delta);
}

double point_line_distance(const Eigen::Vector3d& p, const Line3D& line) {
    const Eigen::Vector3d d = p - line.point;
    return (d - d.dot(line.direction) * line.direction).norm();
}

double point_line_distance(const PixelPoint& p, const ImageLine& line) {
    return std::abs(line.a * p.u + line.b * p.v + line.c);
}

namespace {

bool all_coincident_2d(std::span<const PixelPoint> pts) {
    for (const auto& p : pts) {
        if (p.u != pts[0].u || p.v != pts[0].v) return false;
    }
    return true;
}

}  // namespace

ImageLine fit_image_line(std::span<const PixelPoint> points) {
    if (points.size() < 2 || all_coincident_2d(points)) {
        throw Error(Errc::degenerate_input, "image line fit needs >= 2 distinct points");
    }
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : points) mean += Eigen::Vector2d(p.u, p.v);
    mean /= static_cast<double>(points.size());

    Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
    for (const auto& p : points) {
        const Eigen::Vector2d d = Eigen::Vector2d(p.u, p.v) - mean;
        scatter += d * d.transpose();
    }
    // Normal of the TLS line = eigenvector of the smallest eigenvalue.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
    const Eigen::Vector2d n = eig.eigenvectors().col(0).normalized();

    ImageLine line;
    line.a = n.x();
    line.b = n.y();
    line.c = -n.dot(mean);
    return line;
}

Line3D fit_line_3d(std::span<const Eigen::Vector3d> points) {
    if (points.size() < 2) {
        throw Error(Errc::degenerate_input, "3d line fit needs >= 2 points");
    }
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : points) mean += p;
    mean /= static_cast<double>(points.size());

    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    bool distinct = false;
    for (const auto& p : points) {
        const Eigen::Vector3d d = p - mean;
        if (d.squaredNorm() > 0.0) distinct = true;
        scatter += d * d.transpose();
    }
    if (!distinct) {
        throw Error(Errc::degenerate_input, "3d line fit: all points coincide");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
    Line3D line;
    line.point = mean;
    line.direction = eig.eigenvectors().col(2).normalized();  // largest spread
    return line;
}

RansacLine ransac_line_3d(std::span<const Eigen::Vector3d> points, int iterations,
                          double inlier_threshold, std::uint64_t seed) {
    const int n = static_cast<int>(points.size());
    if (n < 2) throw Error(Errc::degenerate_input, "ransac needs >= 2 points");
    if (inlier_threshold <= 0.0) throw Error(Errc::invalid_argument, "ransac threshold must be > 0");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, n - 1);

    int best_count = -1;
    Line3D best_line;
    for (int it = 0; it < iterations; ++it) {
        const int i = pick(rng);
        int j = pick(rng);
        if (i == j || (points[i] - points[j]).squaredNorm() == 0.0) continue;

        Line3D hyp;
        hyp.point = points[i];
        hyp.direction = (points[j] - points[i]).normalized();
        int count = 0;
        for (const auto& p : points) {
            if (point_line_distance(p, hyp) <= inlier_threshold) ++count;
        }
        if (count > best_count) {
            best_count = count;
            best_line = hyp;
        }
    }
    if (best_count < 2) {
        throw Error(Errc::degenerate_input, "ransac found no valid 2-point hypothesis");
    }

    RansacLine out;
    out.inliers.reserve(best_count);
    std::vector<Eigen::Vector3d> inlier_pts;
    inlier_pts.reserve(best_count);
    for (int k = 0; k < n; ++k) {
        if (point_line_distance(points[k], best_line) <= inlier_threshold) {
            out.inliers.push_back(k);
            inlier_pts.push_back(points[k]);
        }
    }
    out.line = fit_line_3d(inlier_pts);
    return out;
}

}  // namespace semloc
