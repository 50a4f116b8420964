#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "dataset_io.hpp"

namespace semloc {

/// Default recall thresholds: (0.25 m, 2 deg), (0.5 m, 5 deg), (5 m, 10 deg).
inline constexpr std::array<std::pair<double, double>, 3> kRecallThresholds{
    {{0.25, 2.0}, {0.5, 5.0}, {5.0, 10.0}}};

struct AteResult {
    double trans_rmse = 0.0;    // meters
    double rot_rmse_deg = 0.0;  // geodesic angle
    double yaw_rmse_deg = 0.0;  // heading-only variant
};

/// Frame-wise absolute error on timestamp-matched poses (1 ms tolerance); no
/// alignment transform is applied since localization runs in the map frame.
AteResult ate(const Trajectory& est, const Trajectory& gt);

/// RMSE of the translation error of relative motions over a `delta`-frame gap.
double rpe(const Trajectory& est, const Trajectory& gt, int delta = 1);

/// Percentage of frames within both thresholds, per (meters, degrees) pair.
std::vector<double> recall_at(const Trajectory& est, const Trajectory& gt,
                              const std::vector<std::pair<double, double>>& thresholds);

struct ErrorDecomposition {
    std::vector<double> lateral;      // cross-track, meters, GT vehicle frame
    std::vector<double> longitudinal; // along-track, meters
    std::vector<double> heading_deg;  // signed yaw difference
    double lateral_rmse = 0.0;
    double longitudinal_rmse = 0.0;
    double heading_rmse_deg = 0.0;
};

/// Translation error rotated into the ground-truth vehicle frame.
ErrorDecomposition error_decomposition(const Trajectory& est, const Trajectory& gt);

struct MetricsReport {
    AteResult ate;
    double rpe_trans_rmse = 0.0;
    std::array<double, 3> recalls{0.0, 0.0, 0.0};
    ErrorDecomposition decomposition;
    int matched_frames = 0;
};

MetricsReport evaluate(const Trajectory& est, const Trajectory& gt);

/// Machine-readable `name<TAB>value` lines.
void report_save(const MetricsReport& report, std::ostream& out);
void report_save(const MetricsReport& report, const std::string& path);
/// Human-readable table.
std::string report_table(const MetricsReport& report);

}  // namespace semloc
