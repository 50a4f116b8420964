#include "localizer.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "error.hpp"

namespace semloc {

Pose prior_pose(const Pose& prev_result, const Pose& odo_prev, const Pose& odo_cur) {
    return prev_result * inverse(odo_prev) * odo_cur;
}

LiftResult lift_lane_pixels(const SegmentationObservation& obs, const MountCalibration& calib,
                            const CameraIntrinsics& K, const AttitudeAngles& attitude,
                            const IpmOptions& opts) {
    LiftResult out;
    out.points.reserve(obs.lane_pixels.size());
    for (const auto& px : obs.lane_pixels) {
        const IpmResult r = ipm_enhanced(px, K, calib, attitude, opts);
        if (r.status == IpmStatus::above_horizon) {
            ++out.rejected_above_horizon;
            continue;
        }
        if (r.status == IpmStatus::range_exceeded) {
            ++out.rejected_range;
            continue;
        }
        out.points.push_back(calib.camera_to_vehicle * r.point.vec());
    }
    return out;
}

void LocalLaneMap::push(std::vector<Eigen::Vector3d> points, const Pose& motion) {
    for (auto& e : entries_) {
        e.to_newest = motion * e.to_newest;
        e.path_dist += motion.translation.norm();
    }
    Entry fresh;
    fresh.points = std::move(points);
    fresh.to_newest = Pose::identity();
    entries_.push_back(std::move(fresh));

    while (static_cast<int>(entries_.size()) > max_frames_ ||
           (!entries_.empty() && entries_.front().path_dist > max_span_)) {
        entries_.pop_front();
    }
}

std::vector<Eigen::Vector3d> LocalLaneMap::points_in_newest() const {
    std::vector<Eigen::Vector3d> out;
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.points.size();
    out.reserve(n);
    for (const auto& e : entries_) {
        for (const auto& p : e.points) out.push_back(e.to_newest * p);
    }
    return out;
}

std::vector<Correspondence> associate_lanes(const std::vector<Eigen::Vector3d>& local_points,
                                            const Pose& pose, const SemanticMap& map,
                                            const SolverConfig& cfg) {
    std::vector<Correspondence> out;
    if (map.lane_points().empty()) return out;
    const bool lines_possible =
        cfg.use_point_line && static_cast<int>(map.lane_points().size()) >= cfg.line_fit_k;

    for (const auto& p : local_points) {
        const Eigen::Vector3d w = pose * p;
        const auto [idx, d2] = map.index().nearest(w);
        if (idx < 0) continue;
        const double d = std::sqrt(d2);
        if (d > cfg.gate) continue;

        if (cfg.use_point_point) {
            Correspondence c;
            c.kind = CorrKind::lane_point_point;
            c.local_point = p;
            c.target_point = map.lane_points()[idx].position;
            c.gate_distance = d;
            out.push_back(c);
        }
        if (lines_possible) {
            const auto knn = map.query_k_nearest(w, cfg.line_fit_k);
            std::vector<Eigen::Vector3d> nbrs;
            nbrs.reserve(knn.size());
            for (int k : knn) nbrs.push_back(map.lane_points()[k].position);
            try {
                Correspondence c;
                c.kind = CorrKind::lane_point_line;
                c.local_point = p;
                c.target_line = fit_line_3d(nbrs);
                c.gate_distance = d;
                out.push_back(c);
            } catch (const Error&) {
                // coincident neighbors, no usable line
            }
        }
    }
    return out;
}

std::vector<ProjectedPole> project_poles(const SemanticMap& map, const Pose& vehicle_pose,
                                         const MountCalibration& calib,
                                         const CameraIntrinsics& K) {
    std::vector<ProjectedPole> out;
    const Pose world_to_cam = inverse(vehicle_pose * calib.camera_to_vehicle);
    for (std::size_t i = 0; i < map.poles().size(); ++i) {
        const Eigen::Vector3d low = world_to_cam * map.poles()[i].low();
        const Eigen::Vector3d high = world_to_cam * map.poles()[i].high();
        const auto low_px = project_pinhole(low, K);
        const auto high_px = project_pinhole(high, K);
        if (!low_px || !high_px) continue;
        auto inside = [&K](const PixelPoint& px) {
            return px.u >= 0.0 && px.u <= K.width && px.v >= 0.0 && px.v <= K.height;
        };
        if (!inside(*low_px) || !inside(*high_px)) continue;
        out.push_back({static_cast<int>(i), *low_px, *high_px});
    }
    return out;
}

std::vector<Correspondence> associate_poles(const std::vector<ProjectedPole>& projected,
                                            const SemanticMap& map,
                                            const std::vector<PoleLineObs>& observed,
                                            double gate_px) {
    std::vector<Correspondence> out;
    if (observed.empty()) return out;

    auto closest_line = [&observed](const PixelPoint& px) {
        int best = -1;
        double best_d = std::numeric_limits<double>::max();
        for (std::size_t i = 0; i < observed.size(); ++i) {
            const double d = point_line_distance(px, observed[i].line);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(i);
            }
        }
        return std::pair<int, double>(best, best_d);
    };

    for (const auto& pp : projected) {
        const auto [low_line, low_d] = closest_line(pp.low);
        const auto [high_line, high_d] = closest_line(pp.high);
        if (low_line != high_line) continue;  // endpoints must agree
        if (low_d > gate_px || high_d > gate_px) continue;
        const Pole& pole = map.poles()[pp.pole_index];
        for (const Eigen::Vector3d& endpoint : {pole.low(), pole.high()}) {
            Correspondence c;
            c.kind = CorrKind::pole_endpoint_line;
            c.world_endpoint = endpoint;
            c.image_line = observed[low_line].line;
            c.gate_distance = std::max(low_d, high_d);
            out.push_back(c);
        }
    }
    return out;
}

namespace {

double huber_weight(double r, double scale) {
    if (scale <= 0.0) return 1.0;
    const double a = std::abs(r);
    return a <= scale ? 1.0 : std::sqrt(scale / a);
}

}  // namespace

CostEval total_cost(const std::vector<Correspondence>& corrs, const Pose& pose,
                    const MountCalibration& calib, const CameraIntrinsics& K,
                    const SolverConfig& cfg) {
    CostEval eval;
    eval.residuals.reserve(corrs.size() * 2);
    const Pose world_to_cam = inverse(pose * calib.camera_to_vehicle);

    // Residual blocks use smooth forms whose squared norms equal the squared
    // distances: the perpendicular error vector for 3D lines and the signed
    // offset for image lines. Absolute values would kink at zero and break
    // the finite-difference Jacobian right at convergence.
    auto push_block = [&eval, &cfg](const double* r, int n) {
        double norm2 = 0.0;
        for (int i = 0; i < n; ++i) norm2 += r[i] * r[i];
        const double w = huber_weight(std::sqrt(norm2), cfg.huber_scale);
        for (int i = 0; i < n; ++i) eval.residuals.push_back(w * r[i]);
    };

    for (const auto& c : corrs) {
        switch (c.kind) {
            case CorrKind::lane_point_point: {
                const Eigen::Vector3d r = pose * c.local_point - c.target_point;
                push_block(r.data(), 3);
                break;
            }
            case CorrKind::lane_point_line: {
                const Eigen::Vector3d d = pose * c.local_point - c.target_line.point;
                const Eigen::Vector3d perp =
                    d - d.dot(c.target_line.direction) * c.target_line.direction;
                push_block(perp.data(), 3);
                break;
            }
            case CorrKind::pole_endpoint_line: {
                const Eigen::Vector3d p_cam = world_to_cam * c.world_endpoint;
                if (!(p_cam.z() > 1e-6)) {
                    eval.finite = false;
                    eval.cost = std::numeric_limits<double>::infinity();
                    return eval;
                }
                const auto px = project_pinhole(p_cam, K);
                const double signed_d =
                    c.image_line.a * px->u + c.image_line.b * px->v + c.image_line.c;
                const double r = cfg.pole_weight * signed_d;
                push_block(&r, 1);
                break;
            }
        }
    }
    double cost = 0.0;
    for (double r : eval.residuals) cost += r * r;
    if (!std::isfinite(cost)) {
        eval.finite = false;
        eval.cost = std::numeric_limits<double>::infinity();
        return eval;
    }
    eval.cost = cost;
    return eval;
}

Pose optimize_pose(const Pose& prior, const std::vector<Eigen::Vector3d>& local_points,
                   const std::vector<PoleLineObs>& observed_lines, const SemanticMap& map,
                   const MountCalibration& calib, const CameraIntrinsics& K,
                   const SolverConfig& cfg, SolveStats* stats_out) {
    SolveStats stats;
    Pose estimate = prior;
    int budget = cfg.max_iterations;
    double lambda = cfg.initial_lambda;
    std::vector<Correspondence> corrs;
    Eigen::MatrixXd jacobian;

    for (int round = 0; round < cfg.association_rounds && budget > 0; ++round) {
        corrs = associate_lanes(local_points, estimate, map, cfg);
        int n_pp = 0, n_pl = 0, n_pole = 0;
        for (const auto& c : corrs) {
            n_pp += c.kind == CorrKind::lane_point_point;
            n_pl += c.kind == CorrKind::lane_point_line;
        }
        if (cfg.use_poles && !map.poles().empty()) {
            const auto projected = project_poles(map, estimate, calib, K);
            const auto pole_corrs = associate_poles(projected, map, observed_lines, cfg.pole_gate);
            n_pole = static_cast<int>(pole_corrs.size());
            corrs.insert(corrs.end(), pole_corrs.begin(), pole_corrs.end());
        }
        stats.rounds = round + 1;
        stats.lane_point_point = n_pp;
        stats.lane_point_line = n_pl;
        stats.pole_endpoints = n_pole;

        if (corrs.empty()) {
            if (round == 0) {
                stats.no_constraints = true;
                if (stats_out) *stats_out = stats;
                return prior;
            }
            break;
        }

        CostEval cur = total_cost(corrs, estimate, calib, K, cfg);
        if (!cur.finite) {
            if (round == 0) {
                stats.non_finite = true;
                if (stats_out) *stats_out = stats;
                throw Error(Errc::numeric_error, "non-finite residuals at the prior pose");
            }
            break;
        }
        if (round == 0) {
            stats.initial_cost = cur.cost;
            stats.cost_trace.push_back(cur.cost);
        }

        auto fd_jacobian = [&](const Pose& at, int m) {
            jacobian.resize(m, 6);
            for (int col = 0; col < 6; ++col) {
                Eigen::Matrix<double, 6, 1> delta = Eigen::Matrix<double, 6, 1>::Zero();
                delta[col] = cfg.fd_step;
                const CostEval plus = total_cost(corrs, retract(at, delta), calib, K, cfg);
                delta[col] = -cfg.fd_step;
                const CostEval minus = total_cost(corrs, retract(at, delta), calib, K, cfg);
                if (!plus.finite || !minus.finite) return false;
                for (int r = 0; r < m; ++r) {
                    jacobian(r, col) = (plus.residuals[r] - minus.residuals[r]) / (2.0 * cfg.fd_step);
                }
            }
            return true;
        };

        bool moved = false;
        bool converged = false;
        bool have_jacobian = false;
        while (budget > 0 && !converged) {
            const int m = static_cast<int>(cur.residuals.size());
            if (cur.cost <= cfg.cost_floor * m) break;  // residuals at noise level
            if (!fd_jacobian(estimate, m)) {
                stats.non_finite = true;
                break;
            }
            have_jacobian = true;

            Eigen::VectorXd res(m);
            for (int r = 0; r < m; ++r) res[r] = cur.residuals[r];
            const Eigen::Matrix<double, 6, 6> hessian = jacobian.transpose() * jacobian;
            const Eigen::Matrix<double, 6, 1> gradient = jacobian.transpose() * res;

            bool accepted = false;
            // The damping floor is tied to the largest diagonal entry so
            // near-null directions stay pinned instead of drifting freely.
            const double diag_floor = std::max(1e-8 * hessian.diagonal().maxCoeff(), 1e-12);
            while (budget > 0) {
                Eigen::Matrix<double, 6, 6> damped = hessian;
                for (int d = 0; d < 6; ++d) {
                    damped(d, d) += lambda * std::max(hessian(d, d), diag_floor);
                }
                const Eigen::Matrix<double, 6, 1> step = damped.ldlt().solve(-gradient);
                if (!step.allFinite()) {
                    lambda *= 10.0;
                    if (lambda > 1e10) break;
                    continue;
                }
                const Pose candidate = retract(estimate, step);
                const CostEval next = total_cost(corrs, candidate, calib, K, cfg);
                if (next.finite && next.cost < cur.cost) {
                    const double prev_cost = cur.cost;
                    estimate = candidate;
                    cur = next;
                    ++stats.iterations;
                    --budget;
                    stats.cost_trace.push_back(cur.cost);
                    lambda = std::max(lambda / 3.0, 1e-12);
                    accepted = true;
                    moved = true;
                    if (step.norm() < cfg.tol_step ||
                        prev_cost - cur.cost <= cfg.tol_cost * std::max(prev_cost, 1e-300)) {
                        converged = true;
                    }
                    break;
                }
                lambda *= 10.0;
                if (lambda > 1e10) break;
            }
            if (!accepted) break;  // damping exhausted at this association set
        }

        stats.final_cost = cur.cost;

        // Rank analysis of the Gauss-Newton system of this round; compute
        // the Jacobian here when convergence struck before the first step.
        if (!have_jacobian) {
            have_jacobian = fd_jacobian(estimate, static_cast<int>(cur.residuals.size()));
        }
        if (have_jacobian && jacobian.size() > 0) {
            const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jacobian, Eigen::ComputeThinV);
            stats.sv_min = svd.singularValues().minCoeff();
            stats.sv_max = svd.singularValues().maxCoeff();
            stats.degenerate = stats.sv_min < cfg.degenerate_ratio * stats.sv_max;
            stats.weak_direction = svd.matrixV().col(5);
        }
        if (!moved) break;  // this round could not improve; associations are stable
    }

    if (stats_out) *stats_out = stats;
    return estimate;
}

SequenceResult localize_sequence(const Dataset& dataset, const SemanticMap& map,
                                 const MountCalibration& calib, const CameraIntrinsics& K,
                                 const SolverConfig& cfg, const IpmOptions& ipm_opts) {
    SequenceResult out;
    out.trajectory.reserve(dataset.size());
    out.diagnostics.reserve(dataset.size());

    LocalLaneMap window(cfg.window_frames, cfg.window_span);
    Pose prev_result;
    Pose prev_odo;
    bool first = true;

    for (const auto& frame : dataset) {
        const Pose prior = first
                               ? frame.odometry.pose
                               : prior_pose(prev_result, prev_odo, frame.odometry.pose);

        const LiftResult lifted =
            lift_lane_pixels(frame.observation, calib, K, frame.odometry.attitude, ipm_opts);
        const Pose motion = first ? Pose::identity()
                                  : inverse(frame.odometry.pose) * prev_odo;
        window.push(lifted.points, motion);

        FrameDiagnostics diag;
        diag.frame_id = frame.observation.frame_id;
        diag.timestamp = frame.observation.timestamp;
        diag.lifted_points = static_cast<int>(lifted.points.size());
        diag.rejected_pixels = lifted.rejected_above_horizon + lifted.rejected_range;

        Pose result = prior;
        SolveStats stats;
        try {
            result = optimize_pose(prior, window.points_in_newest(),
                                   frame.observation.pole_lines, map, calib, K, cfg, &stats);
        } catch (const Error&) {
            stats.non_finite = true;  // keep the prior, mark the frame
            result = prior;
        }
        diag.lane_point_point = stats.lane_point_point;
        diag.lane_point_line = stats.lane_point_line;
        diag.pole_endpoints = stats.pole_endpoints;
        diag.iterations = stats.iterations;
        diag.final_cost = stats.final_cost;
        diag.degraded = stats.no_constraints || stats.non_finite;

        out.trajectory.push_back({frame.observation.timestamp, result});
        out.diagnostics.push_back(diag);

        prev_result = result;
        prev_odo = frame.odometry.pose;
        first = false;
    }
    return out;
}

}  // namespace semloc
