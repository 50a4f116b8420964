#include "metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace semloc {

namespace {

constexpr double kMatchTolerance = 1e-3;  // seconds
constexpr double kRadToDeg = 180.0 / M_PI;

std::vector<std::pair<int, int>> match_frames(const Trajectory& est, const Trajectory& gt) {
    std::vector<std::pair<int, int>> pairs;
    std::size_t j = 0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        while (j + 1 < gt.size() && gt[j + 1].timestamp <= est[i].timestamp + kMatchTolerance &&
               std::abs(gt[j + 1].timestamp - est[i].timestamp) <=
                   std::abs(gt[j].timestamp - est[i].timestamp)) {
            ++j;
        }
        if (j < gt.size() && std::abs(gt[j].timestamp - est[i].timestamp) <= kMatchTolerance) {
            pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    if (pairs.empty()) throw Error(Errc::no_overlap, "no timestamp-matched frames");
    return pairs;
}

double yaw_of(const Pose& p) {
    const Eigen::Matrix3d r = p.rotation.toRotationMatrix();
    return std::atan2(r(1, 0), r(0, 0));
}

double wrap_angle(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a < -M_PI) a += 2.0 * M_PI;
    return a;
}

double rmse(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

AteResult ate(const Trajectory& est, const Trajectory& gt) {
    const auto pairs = match_frames(est, gt);
    std::vector<double> trans, rot, yaw;
    trans.reserve(pairs.size());
    for (const auto& [i, j] : pairs) {
        trans.push_back((est[i].pose.translation - gt[j].pose.translation).norm());
        rot.push_back(rotation_angle(est[i].pose, gt[j].pose) * kRadToDeg);
        yaw.push_back(wrap_angle(yaw_of(est[i].pose) - yaw_of(gt[j].pose)) * kRadToDeg);
    }
    return {rmse(trans), rmse(rot), rmse(yaw)};
}

double rpe(const Trajectory& est, const Trajectory& gt, int delta) {
    if (delta < 1) throw Error(Errc::invalid_argument, "rpe delta must be >= 1");
    const auto pairs = match_frames(est, gt);
    if (static_cast<int>(pairs.size()) <= delta) {
        throw Error(Errc::too_short, "trajectory shorter than the rpe gap");
    }
    std::vector<double> errs;
    for (std::size_t k = 0; k + delta < pairs.size(); ++k) {
        const auto& [i0, j0] = pairs[k];
        const auto& [i1, j1] = pairs[k + delta];
        const Pose rel_est = inverse(est[i0].pose) * est[i1].pose;
        const Pose rel_gt = inverse(gt[j0].pose) * gt[j1].pose;
        errs.push_back((inverse(rel_gt) * rel_est).translation.norm());
    }
    return rmse(errs);
}

std::vector<double> recall_at(const Trajectory& est, const Trajectory& gt,
                              const std::vector<std::pair<double, double>>& thresholds) {
    const auto pairs = match_frames(est, gt);
    std::vector<double> out;
    out.reserve(thresholds.size());
    for (const auto& [max_m, max_deg] : thresholds) {
        int hits = 0;
        for (const auto& [i, j] : pairs) {
            const double t = (est[i].pose.translation - gt[j].pose.translation).norm();
            const double r = rotation_angle(est[i].pose, gt[j].pose) * kRadToDeg;
            hits += (t <= max_m && r <= max_deg);
        }
        out.push_back(100.0 * hits / static_cast<double>(pairs.size()));
    }
    return out;
}

ErrorDecomposition error_decomposition(const Trajectory& est, const Trajectory& gt) {
    const auto pairs = match_frames(est, gt);
    ErrorDecomposition out;
    out.lateral.reserve(pairs.size());
    for (const auto& [i, j] : pairs) {
        const Eigen::Vector3d err_world = est[i].pose.translation - gt[j].pose.translation;
        const Eigen::Vector3d err_vehicle = gt[j].pose.rotation.conjugate() * err_world;
        out.longitudinal.push_back(err_vehicle.x());  // along-track (x forward)
        out.lateral.push_back(err_vehicle.y());       // cross-track (y left)
        out.heading_deg.push_back(wrap_angle(yaw_of(est[i].pose) - yaw_of(gt[j].pose)) * kRadToDeg);
    }
    out.lateral_rmse = rmse(out.lateral);
    out.longitudinal_rmse = rmse(out.longitudinal);
    out.heading_rmse_deg = rmse(out.heading_deg);
    return out;
}

MetricsReport evaluate(const Trajectory& est, const Trajectory& gt) {
    MetricsReport report;
    report.ate = ate(est, gt);
    report.matched_frames = static_cast<int>(match_frames(est, gt).size());
    try {
        report.rpe_trans_rmse = rpe(est, gt, 1);
    } catch (const Error& e) {
        if (e.code() != Errc::too_short) throw;
        report.rpe_trans_rmse = 0.0;  // single-frame overlap
    }
    const std::vector<std::pair<double, double>> thresholds(kRecallThresholds.begin(),
                                                            kRecallThresholds.end());
    const auto recalls = recall_at(est, gt, thresholds);
    for (std::size_t i = 0; i < 3; ++i) report.recalls[i] = recalls[i];
    report.decomposition = error_decomposition(est, gt);
    return report;
}

void report_save(const MetricsReport& report, std::ostream& out) {
    char buf[96];
    auto line = [&](const char* name, double value) {
        std::snprintf(buf, sizeof buf, "%s\t%.9f\n", name, value);
        out << buf;
    };
    line("ate_trans_rmse_m", report.ate.trans_rmse);
    line("ate_rot_rmse_deg", report.ate.rot_rmse_deg);
    line("ate_rot_yaw_rmse_deg", report.ate.yaw_rmse_deg);
    line("rpe_trans_rmse_m", report.rpe_trans_rmse);
    line("recall_0.25m_2deg_pct", report.recalls[0]);
    line("recall_0.50m_5deg_pct", report.recalls[1]);
    line("recall_5.00m_10deg_pct", report.recalls[2]);
    line("lateral_rmse_m", report.decomposition.lateral_rmse);
    line("longitudinal_rmse_m", report.decomposition.longitudinal_rmse);
    line("heading_rmse_deg", report.decomposition.heading_rmse_deg);
    out << "matched_frames\t" << report.matched_frames << "\n";
}

void report_save(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot open " + path + " for writing");
    report_save(report, out);
    if (!out) throw Error(Errc::io_error, "failed writing " + path);
}

std::string report_table(const MetricsReport& report) {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-28s %12.4f\n", "ATE trans RMSE [m]", report.ate.trans_rmse);
    os << buf;
    std::snprintf(buf, sizeof buf, "%-28s %12.4f\n", "ATE rot RMSE [deg]", report.ate.rot_rmse_deg);
    os << buf;
    std::snprintf(buf, sizeof buf, "%-28s %12.4f\n", "ATE yaw RMSE [deg]", report.ate.yaw_rmse_deg);
    os << buf;
    std::snprintf(buf, sizeof buf, "%-28s %12.4f\n", "RPE trans RMSE [m]", report.rpe_trans_rmse);
    os << buf;
    for (std::size_t i = 0; i < 3; ++i) {
        std::snprintf(buf, sizeof buf, "recall (%.2f m, %2.0f deg) %%    %12.2f\n",
                      kRecallThresholds[i].first, kRecallThresholds[i].second, report.recalls[i]);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "%-28s %12.4f\n", "lateral RMSE [m]",
                  report.decomposition.lateral_rmse);
    os << buf;
    std::snprintf(buf, sizeof buf, "%-28s %12.4f\n", "longitudinal RMSE [m]",
                  report.decomposition.longitudinal_rmse);
    os << buf;
    std::snprintf(buf, sizeof buf, "%-28s %12.4f\n", "heading RMSE [deg]",
                  report.decomposition.heading_rmse_deg);
    os << buf;
    std::snprintf(buf, sizeof buf, "%-28s %12d\n", "matched frames", report.matched_frames);
    os << buf;
    return os.str();
}

}  // namespace semloc
