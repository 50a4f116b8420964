#include "pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "error.hpp"

namespace semloc {

CameraIntrinsics camera_from_config(const Config& cfg) {
    CameraIntrinsics cam;
    cam.fx = cfg.get_double("camera.fx", cam.fx);
    cam.fy = cfg.get_double("camera.fy", cam.fy);
    cam.skew = cfg.get_double("camera.skew", cam.skew);
    cam.cx = cfg.get_double("camera.cx", cam.cx);
    cam.cy = cfg.get_double("camera.cy", cam.cy);
    cam.width = cfg.get_int("camera.width", cam.width);
    cam.height = cfg.get_int("camera.height", cam.height);
    if (cam.fx <= 0.0 || cam.fy <= 0.0) {
        throw Error(Errc::invalid_argument, "focal lengths must be positive");
    }
    return cam;
}

MountCalibration mount_from_config(const Config& cfg) {
    MountCalibration mount;
    mount.height = cfg.get_double("mount.height", 1.5);
    if (mount.height <= 0.0) throw Error(Errc::invalid_argument, "mount.height must be > 0");
    mount.roll0 = cfg.get_double("mount.roll0", 0.0);
    mount.pitch0 = cfg.get_double("mount.pitch0", 0.0);
    mount.yaw0 = cfg.get_double("mount.yaw0", 0.0);
    mount.camera_to_vehicle = default_camera_to_vehicle(mount.height);
    return mount;
}

IpmOptions ipm_options_from_config(const Config& cfg) {
    IpmOptions opts;
    opts.horizon_eps = cfg.get_double("ipm.horizon_eps", opts.horizon_eps);
    opts.max_range = cfg.get_double("ipm.max_range", opts.max_range);
    opts.roll_about_origin = cfg.get_bool("ipm.roll_about_origin", opts.roll_about_origin);
    return opts;
}

SolverConfig solver_from_config(const Config& cfg) {
    SolverConfig s;
    s.max_iterations = cfg.get_int("solver.max_iterations", s.max_iterations);
    s.association_rounds = cfg.get_int("solver.association_rounds", s.association_rounds);
    s.initial_lambda = cfg.get_double("solver.initial_lambda", s.initial_lambda);
    s.tol_cost = cfg.get_double("solver.tol_cost", s.tol_cost);
    s.tol_step = cfg.get_double("solver.tol_step", s.tol_step);
    s.gate = cfg.get_double("solver.gate", s.gate);
    s.pole_gate = cfg.get_double("solver.pole_gate", s.pole_gate);
    s.line_fit_k = cfg.get_int("solver.line_fit_k", s.line_fit_k);
    s.pole_weight = cfg.get_double("solver.pole_weight", s.pole_weight);
    s.use_point_point = cfg.get_bool("solver.use_point_point", s.use_point_point);
    s.use_point_line = cfg.get_bool("solver.use_point_line", s.use_point_line);
    s.use_poles = cfg.get_bool("solver.use_poles", s.use_poles);
    s.huber_scale = cfg.get_double("solver.huber_scale", s.huber_scale);
    s.window_frames = cfg.get_int("solver.window_frames", s.window_frames);
    s.window_span = cfg.get_double("solver.window_span", s.window_span);
    return s;
}

MapBuilderParams builder_from_config(const Config& cfg) {
    MapBuilderParams p;
    p.bev_resolution = cfg.get_double("builder.resolution", p.bev_resolution);
    p.link_distance = cfg.get_double("builder.link_distance", p.link_distance);
    p.min_pole_points = cfg.get_int("builder.min_pole_points", p.min_pole_points);
    p.min_pole_height = cfg.get_double("builder.min_pole_height", p.min_pole_height);
    p.max_pole_tilt_deg = cfg.get_double("builder.max_pole_tilt_deg", p.max_pole_tilt_deg);
    p.ransac_iterations = cfg.get_int("builder.ransac_iterations", p.ransac_iterations);
    p.ransac_threshold = cfg.get_double("builder.ransac_threshold", p.ransac_threshold);
    p.seed = cfg.get_u64("builder.seed", p.seed);
    p.tile_size = cfg.get_double("map.tile_size", p.tile_size);
    return p;
}

std::vector<WorldSegment> parse_segments(const std::string& text) {
    std::vector<WorldSegment> out;
    std::istringstream pieces(text);
    std::string piece;
    while (std::getline(pieces, piece, ';')) {
        std::istringstream is(piece);
        std::string tag;
        if (!(is >> tag)) continue;  // empty piece
        WorldSegment seg;
        if (tag == "S") {
            if (!(is >> seg.length) || seg.length <= 0.0) {
                throw Error(Errc::format_error, "straight segment needs a positive length");
            }
        } else if (tag == "A") {
            seg.is_arc = true;
            double angle_deg = 0.0;
            if (!(is >> seg.radius >> angle_deg) || seg.radius <= 0.0 || angle_deg == 0.0) {
                throw Error(Errc::format_error,
                            "arc segment needs a positive radius and nonzero angle");
            }
            seg.arc_angle = angle_deg * M_PI / 180.0;
        } else {
            throw Error(Errc::format_error, "unknown segment tag '" + tag + "'");
        }
        out.push_back(seg);
    }
    return out;
}

WorldSpec world_from_config(const Config& cfg) {
    WorldSpec w;
    w.seed = cfg.get_u64("world.seed", w.seed);
    w.segments = parse_segments(cfg.get_string("world.segments", "S 100"));
    w.lane_width = cfg.get_double("world.lane_width", w.lane_width);
    w.dash_period = cfg.get_double("world.dash_period", w.dash_period);
    w.point_spacing = cfg.get_double("world.point_spacing", w.point_spacing);
    w.pole_spacing = cfg.get_double("world.pole_spacing", w.pole_spacing);
    w.pole_lateral_offset = cfg.get_double("world.pole_lateral_offset", w.pole_lateral_offset);
    w.pole_height_min = cfg.get_double("world.pole_height_min", w.pole_height_min);
    w.pole_height_max = cfg.get_double("world.pole_height_max", w.pole_height_max);
    w.extent = cfg.get_double("world.extent", w.extent);
    w.obs_point_spacing = cfg.get_double("world.obs_point_spacing", w.obs_point_spacing);
    w.asphalt_spacing = cfg.get_double("world.asphalt_spacing", w.asphalt_spacing);
    w.marking_margin = cfg.get_double("world.marking_margin", w.marking_margin);
    w.shoulder = cfg.get_double("world.shoulder", w.shoulder);
    w.marking_intensity = cfg.get_double("world.marking_intensity", w.marking_intensity);
    w.asphalt_intensity = cfg.get_double("world.asphalt_intensity", w.asphalt_intensity);
    w.intensity_sigma = cfg.get_double("world.intensity_sigma", w.intensity_sigma);
    w.pole_point_spacing = cfg.get_double("world.pole_point_spacing", w.pole_point_spacing);
    w.pole_radial_sigma = cfg.get_double("world.pole_radial_sigma", w.pole_radial_sigma);
    w.pole_intensity = cfg.get_double("world.pole_intensity", w.pole_intensity);
    if (w.point_spacing <= 0.0) throw Error(Errc::invalid_argument, "point spacing must be > 0");
    return w;
}

SimConfig sim_from_config(const Config& cfg) {
    SimConfig sim;
    sim.camera = camera_from_config(cfg);
    sim.mount = mount_from_config(cfg);
    sim.speed = cfg.get_double("sim.speed", sim.speed);
    sim.frame_rate = cfg.get_double("sim.frame_rate", sim.frame_rate);
    sim.max_range = cfg.get_double("ipm.max_range", sim.max_range);
    sim.pole_max_range = cfg.get_double("sim.pole_max_range", sim.pole_max_range);
    sim.noise.pixel_sigma = cfg.get_double("noise.pixel_sigma", 0.0);
    sim.noise.dropout = cfg.get_double("noise.dropout", 0.0);
    sim.noise.odom_trans_sigma_per_m = cfg.get_double("noise.odom_trans_sigma_per_m", 0.0);
    sim.noise.odom_rot_sigma = cfg.get_double("noise.odom_rot_sigma", 0.0);
    sim.noise.attitude_sigma = cfg.get_double("noise.attitude_sigma", 0.0);
    sim.noise.attitude_report_sigma = cfg.get_double("noise.attitude_report_sigma", 0.0);
    return sim;
}

void run_simulate(const Config& cfg, const std::string& out_dir) {
    const WorldSpec world = world_from_config(cfg);
    const SimConfig sim = sim_from_config(cfg);
    const GroundTruthBundle bundle = simulate(world, sim);
    export_dataset(bundle, out_dir);
}

SemanticMap run_build_map(const std::string& cloud_path, const Config& cfg,
                          MapBuildStats* stats) {
    const LabeledCloud cloud = cloud_load(cloud_path);
    return build_semantic_map(cloud, builder_from_config(cfg), stats);
}

SequenceResult run_localize(const SemanticMap& map, const std::string& dataset_path,
                            const Config& cfg) {
    const Dataset dataset = dataset_load(dataset_path);
    return localize_sequence(dataset, map, mount_from_config(cfg), camera_from_config(cfg),
                             solver_from_config(cfg), ipm_options_from_config(cfg));
}

void write_diagnostics(const std::vector<FrameDiagnostics>& diags, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot open " + path + " for writing");
    out << "# frame timestamp lifted rejected pp pl pole iterations cost degraded\n";
    char buf[200];
    for (const auto& d : diags) {
        std::snprintf(buf, sizeof buf, "%ld %.6f %d %d %d %d %d %d %.9e %d\n", d.frame_id,
                      d.timestamp, d.lifted_points, d.rejected_pixels, d.lane_point_point,
                      d.lane_point_line, d.pole_endpoints, d.iterations, d.final_cost,
                      d.degraded ? 1 : 0);
        out << buf;
    }
    if (!out) throw Error(Errc::io_error, "failed writing " + path);
}

IpmCheckResult run_ipm_check(const Config& cfg) {
    const CameraIntrinsics cam = camera_from_config(cfg);
    MountCalibration mount = mount_from_config(cfg);
    mount.roll0 = mount.pitch0 = mount.yaw0 = 0.0;  // sweeps drive the angles
    IpmOptions opts = ipm_options_from_config(cfg);
    opts.max_range = 1e9;  // compare the models, not the range gate
    const double deg = M_PI / 180.0;

    IpmCheckResult result;

    // Zero angles: the compensated model must reduce to the flat one.
    double zero_max = 0.0;
    {
        const double v0 = cam.cy + 2.0;
        for (int i = 0; i < 100; ++i) {
            for (int j = 0; j < 100; ++j) {
                const PixelPoint px{cam.width * (i + 0.5) / 100.0,
                                    v0 + (cam.height - v0) * (j + 0.5) / 100.0};
                const IpmResult enh = ipm_enhanced(px, cam, mount, {}, opts);
                const IpmResult van = ipm_vanilla(px, cam, mount.height, opts);
                if (!enh.ok() || !van.ok()) continue;
                zero_max = std::max(zero_max, (enh.point.vec() - van.point.vec()).norm());
            }
        }
    }
    result.values.emplace_back("zero_angle_max_m", zero_max);

    // Single axes, swept +-5 deg in 0.5 deg steps, against the exact model.
    double single_max_rel = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        for (double d = -5.0; d <= 5.0 + 1e-9; d += 0.5) {
            AttitudeAngles att;
            if (axis == 0) att.roll = d * deg;
            if (axis == 1) att.pitch = d * deg;
            if (axis == 2) att.yaw = d * deg;
            const Eigen::Quaterniond rot = attitude_rotation(att);
            for (double u = 20.0; u <= cam.width - 20.0; u += 60.0) {
                for (double v = cam.cy + 60.0; v <= cam.height - 10.0; v += 30.0) {
                    const IpmResult enh = ipm_enhanced({u, v}, cam, mount, att, opts);
                    const IpmResult ex = ipm_exact({u, v}, cam, mount.height, rot);
                    if (!enh.ok() || !ex.ok()) continue;
                    const double rel = (enh.point.vec() - ex.point.vec()).norm() /
                                       std::max(1.0, ex.point.vec().norm());
                    single_max_rel = std::max(single_max_rel, rel);
                }
            }
        }
    }
    result.values.emplace_back("single_axis_max_rel", single_max_rel);

    // Combined angles up to 2 deg each, deviation at ranges up to 20 m.
    double combined_max = 0.0;
    {
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> ang(-2.0 * deg, 2.0 * deg);
        for (int trial = 0; trial < 250; ++trial) {
            const AttitudeAngles att{ang(rng), ang(rng), ang(rng)};
            const Eigen::Quaterniond rot = attitude_rotation(att);
            for (double u = 40.0; u <= cam.width - 40.0; u += 120.0) {
                for (double v = cam.cy + 60.0; v <= cam.height - 10.0; v += 40.0) {
                    const IpmResult enh = ipm_enhanced({u, v}, cam, mount, att, opts);
                    const IpmResult ex = ipm_exact({u, v}, cam, mount.height, rot);
                    if (!enh.ok() || !ex.ok() || ex.point.z > 20.0) continue;
                    combined_max =
                        std::max(combined_max, (enh.point.vec() - ex.point.vec()).norm());
                }
            }
        }
    }
    result.values.emplace_back("combined_2deg_max_m_at_20m", combined_max);

    // Projection round trip over random ground points.
    double round_trip_max = 0.0;
    {
        std::mt19937_64 rng(4048);
        std::uniform_real_distribution<double> uz(2.0, 50.0);
        std::uniform_real_distribution<double> ux(-0.4, 0.4);
        for (int i = 0; i < 10000; ++i) {
            const double z = uz(rng);
            const Eigen::Vector3d p(ux(rng) * z, mount.height, z);
            const auto px = project_pinhole(p, cam);
            if (!px) continue;
            const IpmResult back = ipm_vanilla(*px, cam, mount.height, opts);
            if (!back.ok()) continue;
            round_trip_max = std::max(round_trip_max, (back.point.vec() - p).norm());
        }
    }
    result.values.emplace_back("round_trip_max_m", round_trip_max);

    result.pass = zero_max < 1e-9 && single_max_rel < 1e-6 && combined_max < 0.01 * 20.0 &&
                  round_trip_max < 1e-6;
    result.values.emplace_back("pass", result.pass ? 1.0 : 0.0);
    return result;
}

}  // namespace semloc
