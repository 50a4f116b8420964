#include "simulator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "error.hpp"

namespace semloc {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct PathState {
    Eigen::Vector2d pos{0.0, 0.0};
    double heading = 0.0;
};

/// Piecewise straight/arc centerline starting at the origin heading +x.
class Centerline {
public:
    explicit Centerline(const std::vector<WorldSegment>& segments) {
        PathState state;
        for (const auto& seg : segments) {
            const double len = seg.is_arc ? std::abs(seg.arc_angle) * seg.radius : seg.length;
            if (!(len > 0.0)) continue;
            starts_.push_back(state);
            segs_.push_back(seg);
            lengths_.push_back(len);
            state = advance(state, seg, len);
            total_ += len;
        }
    }

    double total_length() const { return total_; }

    PathState eval(double s) const {
        s = std::clamp(s, 0.0, total_);
        double acc = 0.0;
        for (std::size_t i = 0; i < segs_.size(); ++i) {
            if (s <= acc + lengths_[i] || i + 1 == segs_.size()) {
                return advance(starts_[i], segs_[i], s - acc);
            }
            acc += lengths_[i];
        }
        return {};
    }

    /// Offset to the left of the heading (negative = right).
    static Eigen::Vector2d lateral(const PathState& st, double offset) {
        return st.pos + offset * Eigen::Vector2d(-std::sin(st.heading), std::cos(st.heading));
    }

private:
    static PathState advance(const PathState& start, const WorldSegment& seg, double ds) {
        PathState out = start;
        if (!seg.is_arc) {
            out.pos += ds * Eigen::Vector2d(std::cos(start.heading), std::sin(start.heading));
            return out;
        }
        const double sign = seg.arc_angle >= 0.0 ? 1.0 : -1.0;
        const double phi = sign * ds / seg.radius;
        const Eigen::Vector2d center =
            start.pos + sign * seg.radius *
                            Eigen::Vector2d(-std::sin(start.heading), std::cos(start.heading));
        const Eigen::Vector2d v0 = start.pos - center;
        const double c = std::cos(phi), s = std::sin(phi);
        out.pos = center + Eigen::Vector2d(c * v0.x() - s * v0.y(), s * v0.x() + c * v0.y());
        out.heading = start.heading + phi;
        return out;
    }

    std::vector<PathState> starts_;
    std::vector<WorldSegment> segs_;
    std::vector<double> lengths_;
    double total_ = 0.0;
};

bool inside_extent(const Eigen::Vector2d& p, double extent) {
    return std::abs(p.x()) <= extent && std::abs(p.y()) <= extent;
}

bool within_image(const PixelPoint& px, const CameraIntrinsics& K) {
    return px.u >= 0.0 && px.u <= K.width && px.v >= 0.0 && px.v <= K.height;
}

/// Painted marking points at `spacing` along both lines; left solid, right
/// dashed when a period is set.
template <typename Fn>
void for_each_marking_point(const Centerline& path, const WorldSpec& spec, double spacing,
                            Fn&& fn) {
    const double half_w = spec.lane_width / 2.0;
    const long long n = static_cast<long long>(std::floor(path.total_length() / spacing + 1e-9));
    for (long long k = 0; k <= n; ++k) {
        const double s = k * spacing;
        const PathState st = path.eval(s);
        for (const double lat : {half_w, -half_w}) {
            const bool dashed = lat < 0.0 && spec.dash_period > 0.0;
            if (dashed && std::fmod(s, spec.dash_period) >= spec.dash_period / 2.0) continue;
            const Eigen::Vector2d p = Centerline::lateral(st, lat);
            if (!inside_extent(p, spec.extent)) continue;
            fn(Eigen::Vector3d(p.x(), p.y(), 0.0));
        }
    }
}

}  // namespace

std::vector<Eigen::Vector3d> sample_marking_points(const WorldSpec& spec, double spacing) {
    std::vector<Eigen::Vector3d> out;
    if (spec.extent <= 0.0 || spacing <= 0.0) return out;
    const Centerline path(spec.segments);
    if (path.total_length() <= 0.0) return out;
    for_each_marking_point(path, spec, spacing, [&out](const Eigen::Vector3d& p) {
        out.push_back(p);
    });
    return out;
}

Pose camera_in_world(const Pose& vehicle_pose, const MountCalibration& mount,
                     const AttitudeAngles& attitude) {
    const Eigen::Quaterniond deflection =
        attitude_rotation(mount.roll0 + attitude.roll, mount.pitch0 + attitude.pitch,
                          mount.yaw0 + attitude.yaw);
    Pose cam;
    cam.rotation =
        (vehicle_pose.rotation * mount.camera_to_vehicle.rotation * deflection).normalized();
    cam.translation = vehicle_pose * mount.camera_to_vehicle.translation;
    return cam;
}

void generate_world(const WorldSpec& spec, SemanticMap* map, LabeledCloud* cloud) {
    std::vector<LanePoint> lanes;
    std::vector<Pole> poles;
    LabeledCloud out_cloud;

    const Centerline path(spec.segments);
    const double total = path.total_length();
    if (spec.extent <= 0.0 || total <= 0.0) {
        if (map) *map = SemanticMap({}, {});
        if (cloud) *cloud = LabeledCloud{};
        return;
    }

    std::mt19937_64 rng(mix_seed(spec.seed, 0xa11ce));
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto noisy_intensity = [&](double base) {
        return std::clamp(base + spec.intensity_sigma * gauss(rng), 0.0, 255.0);
    };

    // Marking lines: left solid, right dashed when a period is set.
    const double half_w = spec.lane_width / 2.0;
    for_each_marking_point(path, spec, spec.point_spacing, [&](const Eigen::Vector3d& p) {
        lanes.push_back({p});
        out_cloud.points.push_back({p, noisy_intensity(spec.marking_intensity),
                                    PointLabel::ground});
    });

    // Poles along the road, alternating sides.
    if (spec.pole_spacing > 0.0) {
        std::uniform_real_distribution<double> height(spec.pole_height_min, spec.pole_height_max);
        int side = 1;
        for (double s = spec.pole_spacing; s <= total + 1e-9; s += spec.pole_spacing) {
            const PathState st = path.eval(s);
            const double lat = side * (half_w + spec.pole_lateral_offset);
            side = -side;
            const Eigen::Vector2d p = Centerline::lateral(st, lat);
            const double h = height(rng);
            if (!inside_extent(p, spec.extent)) continue;
            poles.push_back({p.x(), p.y(), 0.0, h});

            // Cloud samples along the axis; both endpoints are hit exactly.
            const int steps = std::max(1, static_cast<int>(std::ceil(h / spec.pole_point_spacing)));
            for (int k = 0; k <= steps; ++k) {
                const double z = std::min(k * spec.pole_point_spacing, h);
                out_cloud.points.push_back(
                    {Eigen::Vector3d(p.x() + spec.pole_radial_sigma * gauss(rng),
                                     p.y() + spec.pole_radial_sigma * gauss(rng), z),
                     noisy_intensity(spec.pole_intensity), PointLabel::pole});
            }
            // One stray return above the tip, labeled other.
            out_cloud.points.push_back({Eigen::Vector3d(p.x(), p.y(), h + 0.5),
                                        noisy_intensity(spec.pole_intensity), PointLabel::other});
        }
    }

    // Asphalt fill keeps a margin around the marking lines so BEV cells stay
    // pure; 10 cm cells cannot straddle the margin.
    const long long n_rows = static_cast<long long>(std::floor(total / spec.asphalt_spacing));
    for (long long k = 0; k <= n_rows; ++k) {
        const double s = k * spec.asphalt_spacing + spec.asphalt_spacing / 2.0;
        if (s > total) break;
        const PathState st = path.eval(s);
        for (double lat = -(half_w + spec.shoulder); lat <= half_w + spec.shoulder + 1e-9;
             lat += spec.asphalt_spacing) {
            if (std::abs(lat - half_w) < spec.marking_margin ||
                std::abs(lat + half_w) < spec.marking_margin) {
                continue;
            }
            const Eigen::Vector2d p = Centerline::lateral(st, lat);
            if (!inside_extent(p, spec.extent)) continue;
            out_cloud.points.push_back({Eigen::Vector3d(p.x(), p.y(), 0.0),
                                        noisy_intensity(spec.asphalt_intensity),
                                        PointLabel::ground});
        }
    }

    if (map) *map = SemanticMap(std::move(lanes), std::move(poles));
    if (cloud) *cloud = std::move(out_cloud);
}

std::vector<GroundTruthFrame> generate_trajectory(const WorldSpec& spec, double speed,
                                                  double frame_rate, const NoiseSpec& noise,
                                                  std::uint64_t seed) {
    if (speed <= 0.0 || frame_rate <= 0.0) {
        throw Error(Errc::invalid_argument, "speed and frame rate must be > 0");
    }
    const Centerline path(spec.segments);
    const double step = speed / frame_rate;
    const long long n = static_cast<long long>(std::floor(path.total_length() / step + 1e-9));

    std::mt19937_64 rng(mix_seed(seed, 0x7261));
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<GroundTruthFrame> out;
    out.reserve(n + 1);
    for (long long k = 0; k <= n; ++k) {
        const PathState st = path.eval(k * step);
        GroundTruthFrame f;
        f.timestamp = static_cast<double>(k) / frame_rate;
        f.pose.translation = Eigen::Vector3d(st.pos.x(), st.pos.y(), 0.0);
        f.pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(st.heading, Eigen::Vector3d::UnitZ()));
        if (noise.attitude_sigma > 0.0) {
            f.attitude.roll = noise.attitude_sigma * gauss(rng);
            f.attitude.pitch = noise.attitude_sigma * gauss(rng);
            f.attitude.yaw = noise.attitude_sigma * gauss(rng);
        }
        out.push_back(f);
    }
    return out;
}

SegmentationObservation synthesize_observation(
    const SemanticMap& map, const Pose& vehicle_pose, const AttitudeAngles& attitude,
    const SimConfig& cfg, std::uint64_t seed,
    const std::vector<Eigen::Vector3d>* contour_sources,
    std::vector<Eigen::Vector3d>* emitted_sources) {
    SegmentationObservation obs;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    const Pose cam = camera_in_world(vehicle_pose, cfg.mount, attitude);
    const Pose world_to_cam = inverse(cam);
    if (emitted_sources) emitted_sources->clear();

    auto observe_lane_point = [&](const Eigen::Vector3d& world_point) {
        const Eigen::Vector3d p_cam = world_to_cam * world_point;
        if (!(p_cam.z() > 0.0) || p_cam.z() > cfg.max_range) return;
        const auto px = project_pinhole(p_cam, cfg.camera);
        if (!px || !within_image(*px, cfg.camera)) return;
        if (cfg.noise.dropout > 0.0 && uni(rng) < cfg.noise.dropout) return;
        PixelPoint noisy = *px;
        if (cfg.noise.pixel_sigma > 0.0) {
            noisy.u += cfg.noise.pixel_sigma * gauss(rng);
            noisy.v += cfg.noise.pixel_sigma * gauss(rng);
        }
        if (!within_image(noisy, cfg.camera)) return;
        obs.lane_pixels.push_back(noisy);
        if (emitted_sources) emitted_sources->push_back(world_point);
    };

    if (contour_sources) {
        for (const auto& p : *contour_sources) observe_lane_point(p);
    } else {
        for (const auto& lp : map.lane_points()) observe_lane_point(lp.position);
    }

    for (const auto& pole : map.poles()) {
        const Eigen::Vector3d low_cam = world_to_cam * pole.low();
        const Eigen::Vector3d high_cam = world_to_cam * pole.high();
        if (!(low_cam.z() > 0.0) || low_cam.z() > cfg.pole_max_range) continue;
        if (!(high_cam.z() > 0.0) || high_cam.z() > cfg.pole_max_range) continue;
        const auto low_px = project_pinhole(low_cam, cfg.camera);
        const auto high_px = project_pinhole(high_cam, cfg.camera);
        if (!low_px || !high_px) continue;
        if (!within_image(*low_px, cfg.camera) || !within_image(*high_px, cfg.camera)) continue;

        PixelPoint a = *low_px, b = *high_px;
        if (cfg.noise.pixel_sigma > 0.0) {
            a.u += cfg.noise.pixel_sigma * gauss(rng);
            a.v += cfg.noise.pixel_sigma * gauss(rng);
            b.u += cfg.noise.pixel_sigma * gauss(rng);
            b.v += cfg.noise.pixel_sigma * gauss(rng);
        }
        const double du = b.u - a.u, dv = b.v - a.v;
        const double len = std::hypot(du, dv);
        if (len < 1.0) continue;  // degenerate segment, under a pixel long
        PoleLineObs pl;
        pl.line.a = dv / len;
        pl.line.b = -du / len;
        pl.line.c = -(pl.line.a * a.u + pl.line.b * a.v);
        pl.v_min = std::min(a.v, b.v);
        pl.v_max = std::max(a.v, b.v);
        obs.pole_lines.push_back(pl);
    }
    return obs;
}

std::vector<OdometryFrame> synthesize_odometry(const std::vector<GroundTruthFrame>& gt,
                                               const NoiseSpec& noise, std::uint64_t seed) {
    if (gt.empty()) throw Error(Errc::invalid_argument, "odometry needs at least one frame");
    std::mt19937_64 rng(mix_seed(seed, 0x0d0));
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<OdometryFrame> out;
    out.reserve(gt.size());
    OdometryFrame first;
    first.timestamp = gt.front().timestamp;
    first.pose = gt.front().pose;  // anchored at ground truth
    out.push_back(first);

    for (std::size_t k = 1; k < gt.size(); ++k) {
        Pose rel = inverse(gt[k - 1].pose) * gt[k].pose;
        const double step_len = rel.translation.norm();
        if (noise.odom_trans_sigma_per_m > 0.0) {
            const double sigma = noise.odom_trans_sigma_per_m * step_len;
            rel.translation += sigma * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
        }
        if (noise.odom_rot_sigma > 0.0) {
            const Eigen::Vector3d w =
                noise.odom_rot_sigma * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
            Eigen::Matrix<double, 6, 1> twist = Eigen::Matrix<double, 6, 1>::Zero();
            twist.head<3>() = w;
            rel = rel * exp_se3(twist);
        }
        OdometryFrame f;
        f.timestamp = gt[k].timestamp;
        f.pose = out.back().pose * rel;
        out.push_back(f);
    }
    return out;
}

GroundTruthBundle simulate(const WorldSpec& spec, const SimConfig& cfg) {
    GroundTruthBundle bundle;
    generate_world(spec, &bundle.map, &bundle.cloud);
    bundle.ground_truth =
        generate_trajectory(spec, cfg.speed, cfg.frame_rate, cfg.noise, spec.seed);
    const auto odometry = synthesize_odometry(bundle.ground_truth, cfg.noise, spec.seed);

    std::mt19937_64 report_rng(mix_seed(spec.seed, 0x4e9));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Contour pixels come from an independent sampling of the marking
    // geometry when requested; otherwise the map points themselves.
    std::vector<Eigen::Vector3d> contour_sources;
    const bool resampled = spec.obs_point_spacing > 0.0;
    if (resampled) contour_sources = sample_marking_points(spec, spec.obs_point_spacing);

    bundle.dataset.reserve(bundle.ground_truth.size());
    for (std::size_t k = 0; k < bundle.ground_truth.size(); ++k) {
        const auto& gt = bundle.ground_truth[k];
        DatasetFrame frame;
        frame.observation =
            synthesize_observation(bundle.map, gt.pose, gt.attitude, cfg, mix_seed(spec.seed, k),
                                   resampled ? &contour_sources : nullptr);
        frame.observation.frame_id = static_cast<long>(k);
        frame.observation.timestamp = gt.timestamp;
        frame.odometry = odometry[k];
        frame.odometry.attitude = gt.attitude;
        if (cfg.noise.attitude_report_sigma > 0.0) {
            frame.odometry.attitude.roll += cfg.noise.attitude_report_sigma * gauss(report_rng);
            frame.odometry.attitude.pitch += cfg.noise.attitude_report_sigma * gauss(report_rng);
            frame.odometry.attitude.yaw += cfg.noise.attitude_report_sigma * gauss(report_rng);
        }
        bundle.dataset.push_back(std::move(frame));
    }
    return bundle;
}

void export_dataset(const GroundTruthBundle& bundle, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(Errc::io_error, "cannot create directory " + dir + ": " + ec.message());

    map_save(bundle.map, dir + "/map.semmap");
    cloud_save(bundle.cloud, dir + "/cloud.cloud");
    dataset_save(bundle.dataset, dir + "/dataset.txt");

    Trajectory gt;
    gt.reserve(bundle.ground_truth.size());
    for (const auto& f : bundle.ground_truth) gt.push_back({f.timestamp, f.pose});
    trajectory_save(gt, dir + "/gt.traj");
}

}  // namespace semloc
