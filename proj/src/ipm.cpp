#include "ipm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace semloc {

Eigen::Quaterniond attitude_rotation(double roll, double pitch, double yaw) {
    // Camera frame: x right, y down, z forward. Positive pitch raises the
    // optical axis (rotation about +x), positive yaw turns it left (rotation
    // about -y), positive roll turns the image clockwise (rotation about -z).
    const Eigen::Quaterniond r_yaw(Eigen::AngleAxisd(-yaw, Eigen::Vector3d::UnitY()));
    const Eigen::Quaterniond r_pitch(Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()));
    const Eigen::Quaterniond r_roll(Eigen::AngleAxisd(-roll, Eigen::Vector3d::UnitZ()));
    return (r_yaw * r_pitch * r_roll).normalized();
}

std::optional<PixelPoint> project_pinhole(const Eigen::Vector3d& p_cam,
                                          const CameraIntrinsics& K) {
    if (!(p_cam.z() > 0.0)) return std::nullopt;
    PixelPoint px;
    px.u = (K.fx * p_cam.x() + K.skew * p_cam.y()) / p_cam.z() + K.cx;
    px.v = K.fy * p_cam.y() / p_cam.z() + K.cy;
    return px;
}

std::optional<PixelPoint> project_through_rotation(const Eigen::Vector3d& p_level,
                                                   const CameraIntrinsics& K,
                                                   const Eigen::Quaterniond& rotation) {
    return project_pinhole(rotation.conjugate() * p_level, K);
}

IpmResult ipm_vanilla(const PixelPoint& px, const CameraIntrinsics& K, double height,
                      const IpmOptions& opts) {
    IpmResult res;
    const double dv = px.v - K.cy;
    if (dv <= opts.horizon_eps) {
        res.status = IpmStatus::above_horizon;
        return res;
    }
    const double z = height * K.fy / dv;
    const double tan_u = (K.fy * (px.u - K.cx) - K.skew * dv) / (K.fx * K.fy);
    res.point = {z * tan_u, height, z};
    return res;
}

PixelPoint compensate_roll(const PixelPoint& px, double roll_total, const PixelPoint& center) {
    const double c = std::cos(roll_total);
    const double s = std::sin(roll_total);
    const double du = px.u - center.u;
    const double dv = px.v - center.v;
    return {c * du + s * dv + center.u, -s * du + c * dv + center.v};
}

IpmResult ipm_enhanced(const PixelPoint& px, const CameraIntrinsics& K,
                       const MountCalibration& calib, const AttitudeAngles& attitude,
                       const IpmOptions& opts) {
    IpmResult res;
    const double roll_total = calib.roll0 + attitude.roll;
    const double pitch_total = calib.pitch0 + attitude.pitch;
    const double yaw_total = calib.yaw0 + attitude.yaw;

    // Roll: rotate the pixel about the optical center so the remaining
    // chain sees a roll-free image.
    const PixelPoint center = opts.roll_about_origin ? PixelPoint{0.0, 0.0}
                                                     : PixelPoint{K.cx, K.cy};
    const PixelPoint p = compensate_roll(px, roll_total, center);

    // Ray of the roll-compensated pixel.
    const double tan_u = (K.fy * (p.u - K.cx) - K.skew * (p.v - K.cy)) / (K.fx * K.fy);
    const double tan_v = (p.v - K.cy) / K.fy;

    // Pitch: rotate the ray about the camera x axis and drop it onto the
    // ground. The depression of the compensated ray must stay at least
    // horizon_eps pixels below the effective horizon.
    const double cp = std::cos(pitch_total);
    const double sp = std::sin(pitch_total);
    const double ey = tan_v * cp - sp;
    const double ez = tan_v * sp + cp;
    if (!(ez > 0.0) || !(ey * K.fy > opts.horizon_eps * ez)) {
        res.status = IpmStatus::above_horizon;
        return res;
    }
    const double x_pitch = calib.height * tan_u / ey;
    const double z_pitch = calib.height * ez / ey;

    // Yaw: azimuth shift of the ground point about the vertical through the
    // camera; ranges are preserved.
    const double cyaw = std::cos(yaw_total);
    const double syaw = std::sin(yaw_total);
    const double x = x_pitch * cyaw - z_pitch * syaw;
    const double z = x_pitch * syaw + z_pitch * cyaw;
    if (!(z > 0.0)) {
        res.status = IpmStatus::above_horizon;
        return res;
    }
    if (z > opts.max_range) {
        res.status = IpmStatus::range_exceeded;
        return res;
    }
    res.point = {x, calib.height, z};
    return res;
}

IpmResult ipm_exact(const PixelPoint& px, const CameraIntrinsics& K, double height,
                    const Eigen::Quaterniond& rotation) {
    IpmResult res;
    const Eigen::Vector3d d((K.fy * (px.u - K.cx) - K.skew * (px.v - K.cy)) / (K.fx * K.fy),
                            (px.v - K.cy) / K.fy, 1.0);
    const Eigen::Vector3d D = rotation * d;
    if (!(D.y() > 1e-12)) {
        res.status = IpmStatus::no_intersection;
        return res;
    }
    const double t = height / D.y();
    const double z = t * D.z();
    if (!(z > 0.0)) {
        res.status = IpmStatus::no_intersection;
        return res;
    }
    res.point = {t * D.x(), height, z};
    return res;
}

BevImage render_bev(std::span<const GroundPoint> points, double resolution, double extent) {
    if (resolution <= 0.0) throw Error(Errc::invalid_argument, "bev resolution must be > 0");
    const int half = static_cast<int>(std::llround(extent / resolution));
    const int n = 2 * half + 1;

    BevImage img;
    img.width = n;
    img.height = n;
    img.pixels.assign(static_cast<std::size_t>(n) * n, 0);
    for (const auto& p : points) {
        const long long col = half + std::llround(p.x / resolution);
        const long long row = half - std::llround(p.z / resolution);
        if (col < 0 || col >= n || row < 0 || row >= n) continue;
        img.pixels[static_cast<std::size_t>(row) * n + col] = 255;
    }
    return img;
}

std::string encode_pgm(const BevImage& img) {
    std::ostringstream os;
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    return os.str();
}

void write_pgm(const BevImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot open " + path + " for writing");
    const std::string data = encode_pgm(img);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(Errc::io_error, "failed writing " + path);
}

Pose default_camera_to_vehicle(double height) {
    Eigen::Matrix3d r;
    // columns: images of camera x, y, z axes in the vehicle frame
    r << 0, 0, 1, -1, 0, 0, 0, -1, 0;
    Pose p;
    p.rotation = Eigen::Quaterniond(r).normalized();
    p.translation = Eigen::Vector3d(0.0, 0.0, height);
    return p;
}

}  // namespace semloc
