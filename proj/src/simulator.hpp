#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dataset_io.hpp"
#include "ipm.hpp"
#include "map_builder.hpp"
#include "semantic_map.hpp"

namespace semloc {

/// Centerline piece: a straight run or a circular arc (positive angle turns
/// left). The road starts at the origin heading +x.
struct WorldSegment {
    bool is_arc = false;
    double length = 0.0;     // straight only
    double radius = 0.0;     // arc only, > 0
    double arc_angle = 0.0;  // arc only, radians, sign = turn direction
};

struct WorldSpec {
    std::uint64_t seed = 1;
    std::vector<WorldSegment> segments;
    double lane_width = 3.5;
    double dash_period = 0.0;  // right line alternates on/off half-periods; 0 = solid
    double point_spacing = 0.5;
    double pole_spacing = 20.0;       // 0 disables poles
    double pole_lateral_offset = 1.0; // beyond the lane edge, alternating sides
    double pole_height_min = 3.0;
    double pole_height_max = 5.0;
    double extent = 1000.0;  // content clipped to |x|,|y| <= extent; <= 0 empties the world

    // Spacing of the contour points the camera observes. 0 projects the map
    // lane points themselves; a value incommensurate with point_spacing
    // mimics real contours, whose pixels never sit on map vertices.
    double obs_point_spacing = 0.0;

    // Labeled-cloud synthesis.
    double asphalt_spacing = 0.35;
    double marking_margin = 0.2;  // asphalt clearance around marking lines
    double shoulder = 1.0;        // asphalt extends this far beyond the lane edges
    double marking_intensity = 230.0;
    double asphalt_intensity = 40.0;
    double intensity_sigma = 8.0;
    double pole_point_spacing = 0.15;
    double pole_radial_sigma = 0.015;
    double pole_intensity = 120.0;
};

struct NoiseSpec {
    double pixel_sigma = 0.0;            // px, on synthesized contour pixels
    double dropout = 0.0;                // contour pixel dropout probability
    double odom_trans_sigma_per_m = 0.0; // translation drift per meter traveled
    double odom_rot_sigma = 0.0;         // radians per frame
    double attitude_sigma = 0.0;         // true per-frame deflection, radians
    double attitude_report_sigma = 0.0;  // extra noise on angles handed to the localizer
};

struct SimConfig {
    CameraIntrinsics camera;
    MountCalibration mount;
    double speed = 10.0;       // m/s along the centerline
    double frame_rate = 10.0;  // Hz
    double max_range = 30.0;   // lane-pixel synthesis range
    double pole_max_range = 40.0;
    NoiseSpec noise;
};

struct GroundTruthFrame {
    double timestamp = 0.0;
    Pose pose;  // vehicle in world, on the ground plane
    AttitudeAngles attitude;  // true camera deflection
};

/// Everything a closed-loop experiment needs, mutually consistent under
/// exact projection.
struct GroundTruthBundle {
    SemanticMap map;
    LabeledCloud cloud;
    std::vector<GroundTruthFrame> ground_truth;
    Dataset dataset;  // synthesized observations + drifting odometry
};

/// Deterministic per seed. Lane points sampled along the marking geometry,
/// poles along the road, plus the matching labeled cloud.
void generate_world(const WorldSpec& spec, SemanticMap* map, LabeledCloud* cloud);

std::vector<GroundTruthFrame> generate_trajectory(const WorldSpec& spec, double speed,
                                                  double frame_rate, const NoiseSpec& noise,
                                                  std::uint64_t seed);

/// Exact rotated-camera projection of visible map content, then pixel noise
/// and dropout. The forward direction of the reconstruction oracle; it never
/// shares the compensation chain under test. When `contour_sources` is set
/// those world points are observed instead of the map lane points;
/// `emitted_sources` receives the world point behind each output pixel.
SegmentationObservation synthesize_observation(
    const SemanticMap& map, const Pose& vehicle_pose, const AttitudeAngles& attitude,
    const SimConfig& cfg, std::uint64_t seed,
    const std::vector<Eigen::Vector3d>* contour_sources = nullptr,
    std::vector<Eigen::Vector3d>* emitted_sources = nullptr);

/// World points along the painted marking lines at the given spacing
/// (dashed stretches skipped), deterministic.
std::vector<Eigen::Vector3d> sample_marking_points(const WorldSpec& spec, double spacing);

/// Relative ground-truth motions perturbed per NoiseSpec and re-composed,
/// anchored at the first ground-truth pose.
std::vector<OdometryFrame> synthesize_odometry(const std::vector<GroundTruthFrame>& gt,
                                               const NoiseSpec& noise, std::uint64_t seed);

GroundTruthBundle simulate(const WorldSpec& spec, const SimConfig& cfg);

/// Writes map.semmap, cloud.cloud, dataset.txt and gt.traj into `dir`.
void export_dataset(const GroundTruthBundle& bundle, const std::string& dir);

/// Camera pose in the world for a vehicle pose and per-frame deflection.
Pose camera_in_world(const Pose& vehicle_pose, const MountCalibration& mount,
                     const AttitudeAngles& attitude);

}  // namespace semloc
