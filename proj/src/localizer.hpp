#pragma once

#include <Eigen/Core>

#include <deque>
#include <vector>

#include "dataset_io.hpp"
#include "geometry.hpp"
#include "ipm.hpp"
#include "semantic_map.hpp"

namespace semloc {

struct SolverConfig {
    int max_iterations = 20;        // accepted LM steps, all rounds combined
    int association_rounds = 4;     // re-association passes
    double initial_lambda = 1e-4;
    double tol_cost = 1e-12;        // relative cost decrease
    double tol_step = 1e-10;        // twist norm
    double gate = 1.0;              // meters, lane nearest-neighbor gate
    double pole_gate = 30.0;        // pixels, endpoint-to-line gate
    int line_fit_k = 5;             // map points per fitted lane line
    double pole_weight = 0.01;      // pixel residual scale, makes units comparable
    bool use_point_point = true;    // first term of the lane loss
    bool use_point_line = true;     // second term of the lane loss
    bool use_poles = true;
    double huber_scale = 0.0;       // 0 = plain least squares
    int window_frames = 10;         // sliding window length c
    double window_span = 50.0;      // meters of accumulated motion kept
    double fd_step = 1e-6;          // central-difference step
    double degenerate_ratio = 1e-8; // sv_min/sv_max below this flags degeneracy
    double cost_floor = 1e-18;      // per-residual; below this the pose is converged
};

/// Eq.-style prior: previous result chained with the relative odometry.
Pose prior_pose(const Pose& prev_result, const Pose& odo_prev, const Pose& odo_cur);

struct LiftResult {
    std::vector<Eigen::Vector3d> points;  // vehicle frame
    int rejected_above_horizon = 0;
    int rejected_range = 0;
};

/// Reconstruct contour pixels to vehicle-frame ground points; rejected
/// pixels are counted, not errors.
LiftResult lift_lane_pixels(const SegmentationObservation& obs, const MountCalibration& calib,
                            const CameraIntrinsics& K, const AttitudeAngles& attitude,
                            const IpmOptions& opts = {});

/// Sliding-window accumulation of vehicle-frame lane points, capped by frame
/// count and by accumulated path length.
class LocalLaneMap {
public:
    LocalLaneMap(int max_frames = 10, double max_span = 50.0)
        : max_frames_(max_frames), max_span_(max_span) {}

    /// `motion` maps previous-newest-frame coordinates into the new frame
    /// (ignored on the first push).
    void push(std::vector<Eigen::Vector3d> points, const Pose& motion);

    /// All window points expressed in the newest frame.
    std::vector<Eigen::Vector3d> points_in_newest() const;

    int frames() const { return static_cast<int>(entries_.size()); }
    double span() const { return entries_.empty() ? 0.0 : entries_.front().path_dist; }

private:
    struct Entry {
        std::vector<Eigen::Vector3d> points;  // own vehicle frame
        Pose to_newest;
        double path_dist = 0.0;  // accumulated motion to the newest frame
    };
    std::deque<Entry> entries_;  // front = oldest
    int max_frames_;
    double max_span_;
};

enum class CorrKind { lane_point_point, lane_point_line, pole_endpoint_line };

struct Correspondence {
    CorrKind kind = CorrKind::lane_point_point;
    Eigen::Vector3d local_point{0, 0, 0};     // lane source, newest vehicle frame
    Eigen::Vector3d target_point{0, 0, 0};    // lane point-point target (world)
    Line3D target_line;                       // lane point-line target (world)
    Eigen::Vector3d world_endpoint{0, 0, 0};  // pole source (world)
    ImageLine image_line;                     // pole target (image)
    double gate_distance = 0.0;               // distance when associated
};

/// Gated nearest-neighbor lane association at the given pose, emitting a
/// point-point and a point-line correspondence per gated local point.
std::vector<Correspondence> associate_lanes(const std::vector<Eigen::Vector3d>& local_points,
                                            const Pose& pose, const SemanticMap& map,
                                            const SolverConfig& cfg);

struct ProjectedPole {
    int pole_index = 0;
    PixelPoint low;
    PixelPoint high;
};

/// Map poles projected through the nominal camera at the given vehicle pose;
/// only poles with both endpoints on the image survive.
std::vector<ProjectedPole> project_poles(const SemanticMap& map, const Pose& vehicle_pose,
                                         const MountCalibration& calib,
                                         const CameraIntrinsics& K);

/// Pair each projected endpoint with its closest observed line; both
/// endpoints of a pole must agree on the line or the pole is dropped.
std::vector<Correspondence> associate_poles(const std::vector<ProjectedPole>& projected,
                                            const SemanticMap& map,
                                            const std::vector<PoleLineObs>& observed,
                                            double gate_px);

struct CostEval {
    double cost = 0.0;
    std::vector<double> residuals;
    bool finite = true;
};

/// L_lane + L_pole residuals re-evaluated at `pose`; deterministic ordering
/// (correspondence order, point-point contributing 3 components).
CostEval total_cost(const std::vector<Correspondence>& corrs, const Pose& pose,
                    const MountCalibration& calib, const CameraIntrinsics& K,
                    const SolverConfig& cfg);

struct SolveStats {
    int iterations = 0;        // accepted LM steps
    int rounds = 0;            // association rounds executed
    int lane_point_point = 0;  // correspondence counts of the final round
    int lane_point_line = 0;
    int pole_endpoints = 0;
    double initial_cost = 0.0;  // at the prior, first association set
    double final_cost = 0.0;    // at the result, final association set
    bool no_constraints = false;
    bool non_finite = false;
    bool degenerate = false;            // near-null Hessian direction present
    double sv_min = 0.0, sv_max = 0.0;  // singular values of the final Jacobian
    Eigen::Matrix<double, 6, 1> weak_direction = Eigen::Matrix<double, 6, 1>::Zero();
    std::vector<double> cost_trace;
};

/// Levenberg-Marquardt over a right-multiplied twist of the prior with
/// central finite-difference Jacobians and re-association each round.
Pose optimize_pose(const Pose& prior, const std::vector<Eigen::Vector3d>& local_points,
                   const std::vector<PoleLineObs>& observed_lines, const SemanticMap& map,
                   const MountCalibration& calib, const CameraIntrinsics& K,
                   const SolverConfig& cfg, SolveStats* stats = nullptr);

struct FrameDiagnostics {
    long frame_id = 0;
    double timestamp = 0.0;
    int lifted_points = 0;
    int rejected_pixels = 0;
    int lane_point_point = 0;
    int lane_point_line = 0;
    int pole_endpoints = 0;
    int iterations = 0;
    double final_cost = 0.0;
    bool degraded = false;  // optimizer fell back to the prior
};

struct SequenceResult {
    Trajectory trajectory;
    std::vector<FrameDiagnostics> diagnostics;
};

/// The full per-frame loop: prior, lift, window push, association,
/// optimization. Degraded frames propagate the prior and are marked; the
/// sequence never aborts.
SequenceResult localize_sequence(const Dataset& dataset, const SemanticMap& map,
                                 const MountCalibration& calib, const CameraIntrinsics& K,
                                 const SolverConfig& cfg, const IpmOptions& ipm_opts = {});

}  // namespace semloc
