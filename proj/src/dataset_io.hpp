#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "ipm.hpp"

namespace semloc {

struct TrajectoryEntry {
    double timestamp = 0.0;
    Pose pose;
};

/// Time-ordered pose sequence; timestamps strictly increasing.
using Trajectory = std::vector<TrajectoryEntry>;

/// One line per pose: `timestamp tx ty tz qx qy qz qw`.
void trajectory_save(const Trajectory& traj, std::ostream& out);
void trajectory_save(const Trajectory& traj, const std::string& path);
Trajectory trajectory_load(std::istream& in);
Trajectory trajectory_load(const std::string& path);

/// Fitted pole line in the image with the v extent of its segment.
struct PoleLineObs {
    ImageLine line;
    double v_min = 0.0;
    double v_max = 0.0;
};

/// Per-frame segmentation output: ground-marker contour pixels plus fitted
/// pole lines.
struct SegmentationObservation {
    long frame_id = 0;
    double timestamp = 0.0;
    std::vector<PixelPoint> lane_pixels;
    std::vector<PoleLineObs> pole_lines;
};

struct OdometryFrame {
    double timestamp = 0.0;
    Pose pose;  // odometry frame, drifts
    AttitudeAngles attitude;
};

struct DatasetFrame {
    SegmentationObservation observation;
    OdometryFrame odometry;
};

using Dataset = std::vector<DatasetFrame>;

/// Localizer input format, per frame:
///   FRAME <id> <timestamp>
///   ODO <tx> <ty> <tz> <qx> <qy> <qz> <qw>
///   ATT <roll> <pitch> <yaw>
///   C <u> <v>                      (one per contour pixel)
///   PL <a> <b> <c> <v_min> <v_max> (one per pole line)
void dataset_save(const Dataset& ds, std::ostream& out);
void dataset_save(const Dataset& ds, const std::string& path);
Dataset dataset_load(std::istream& in);
Dataset dataset_load(const std::string& path);

}  // namespace semloc
