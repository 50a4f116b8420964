#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace semloc {

struct CameraIntrinsics {
    double fx = 1000.0;
    double fy = 1000.0;
    double skew = 0.0;
    double cx = 640.0;
    double cy = 360.0;
    int width = 1280;
    int height = 720;
};

/// Fixed camera mounting: optical center height above ground, factory
/// deviation angles, and the camera-to-vehicle extrinsic.
struct MountCalibration {
    double height = 1.5;  // meters, > 0
    double roll0 = 0.0;   // radians
    double pitch0 = 0.0;
    double yaw0 = 0.0;
    Pose camera_to_vehicle;
};

/// Per-frame deflection of the moving vehicle, radians.
/// Conventions: pitch > 0 tilts the optical axis up, yaw > 0 turns it left,
/// roll > 0 rotates the image content clockwise seen from behind the camera.
struct AttitudeAngles {
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
};

/// Point on the ground expressed in the camera-aligned ground frame
/// (x right, y down, z forward); y equals the mount height for every
/// successful reconstruction.
struct GroundPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Eigen::Vector3d vec() const { return {x, y, z}; }
};

enum class IpmStatus {
    ok,
    behind_camera,
    above_horizon,
    range_exceeded,
    no_intersection,
};

struct IpmResult {
    IpmStatus status = IpmStatus::ok;
    GroundPoint point;

    bool ok() const { return status == IpmStatus::ok; }
};

struct IpmOptions {
    double horizon_eps = 1.0;   // px below the effective horizon required
    double max_range = 30.0;    // meters; beyond this pixels are discarded
    bool roll_about_origin = false;  // pixel-roll pivot: principal point (default) or (0,0)
};

/// Camera deflection rotation (camera frame -> level mount frame) for the
/// angle conventions above. Used by the exact model, the simulator, and the
/// enhanced-IPM tests; the compensation chain inverts exactly this.
Eigen::Quaterniond attitude_rotation(double roll, double pitch, double yaw);
inline Eigen::Quaterniond attitude_rotation(const AttitudeAngles& a) {
    return attitude_rotation(a.roll, a.pitch, a.yaw);
}

/// Pinhole projection of a camera-frame point; empty when depth <= 0.
std::optional<PixelPoint> project_pinhole(const Eigen::Vector3d& p_cam,
                                          const CameraIntrinsics& K);

/// Forward projection through a deflected camera: the inverse of ipm_exact.
/// `p_level` is expressed in the level mount frame.
std::optional<PixelPoint> project_through_rotation(const Eigen::Vector3d& p_level,
                                                   const CameraIntrinsics& K,
                                                   const Eigen::Quaterniond& rotation);

/// Flat-ground, level-camera reconstruction.
IpmResult ipm_vanilla(const PixelPoint& px, const CameraIntrinsics& K, double height,
                      const IpmOptions& opts = {});

/// 2D pixel rotation used for roll compensation.
PixelPoint compensate_roll(const PixelPoint& px, double roll_total, const PixelPoint& center);

/// Rotation-compensated reconstruction: roll rotation of the pixel, pitch
/// compensation of the depression angle, yaw compensation of the azimuth.
/// Total angles are mount deviations plus per-frame attitude.
IpmResult ipm_enhanced(const PixelPoint& px, const CameraIntrinsics& K,
                       const MountCalibration& calib, const AttitudeAngles& attitude,
                       const IpmOptions& opts = {});

/// Geometric ground truth: back-project the pixel to a ray, rotate by the
/// exact camera rotation, intersect the ground plane. Used as the oracle the
/// compensation chain is measured against.
IpmResult ipm_exact(const PixelPoint& px, const CameraIntrinsics& K, double height,
                    const Eigen::Quaterniond& rotation);

/// Top-down binary raster; deterministic. Covers x,z in [-extent, extent]
/// at `resolution` meters per pixel, top row farthest.
struct BevImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

BevImage render_bev(std::span<const GroundPoint> points, double resolution, double extent);
void write_pgm(const BevImage& img, const std::string& path);
std::string encode_pgm(const BevImage& img);

/// Nominal forward-looking mount at the given height: camera z -> vehicle x,
/// camera x -> vehicle -y, camera y -> vehicle -z, origin h above the ground.
Pose default_camera_to_vehicle(double height);

}  // namespace semloc
