#include "dataset_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace semloc {

namespace {

std::string pose_fields(const Pose& p) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %.6f %.6f %.6f %.6f", p.translation.x(),
                  p.translation.y(), p.translation.z(), p.rotation.x(), p.rotation.y(),
                  p.rotation.z(), p.rotation.w());
    return buf;
}

Pose parse_pose_fields(std::istringstream& is, int line_no) {
    double t[3], q[4];
    for (double& v : t) {
        if (!(is >> v)) throw Error(Errc::format_error, "bad pose translation", line_no);
    }
    for (double& v : q) {
        if (!(is >> v)) throw Error(Errc::format_error, "bad pose quaternion", line_no);
    }
    Pose p;
    p.translation = Eigen::Vector3d(t[0], t[1], t[2]);
    p.rotation = Eigen::Quaterniond(q[3], q[0], q[1], q[2]);  // file order x y z w
    const double n = p.rotation.norm();
    if (std::abs(n - 1.0) > 1e-3) {
        throw Error(Errc::format_error, "quaternion is not unit norm", line_no);
    }
    p.rotation.normalize();
    return p;
}

}  // namespace

void trajectory_save(const Trajectory& traj, std::ostream& out) {
    char buf[64];
    for (const auto& e : traj) {
        std::snprintf(buf, sizeof buf, "%.6f ", e.timestamp);
        out << buf << pose_fields(e.pose) << '\n';
    }
}

void trajectory_save(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot open " + path + " for writing");
    trajectory_save(traj, out);
    if (!out) throw Error(Errc::io_error, "failed writing " + path);
}

Trajectory trajectory_load(std::istream& in) {
    Trajectory traj;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        TrajectoryEntry e;
        if (!(is >> e.timestamp)) throw Error(Errc::format_error, "bad timestamp", line_no);
        e.pose = parse_pose_fields(is, line_no);
        std::string trailing;
        if (is >> trailing) throw Error(Errc::format_error, "trailing fields", line_no);
        if (!traj.empty() && e.timestamp <= traj.back().timestamp) {
            throw Error(Errc::format_error, "timestamps must be strictly increasing", line_no);
        }
        traj.push_back(e);
    }
    return traj;
}

Trajectory trajectory_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open trajectory file " + path);
    return trajectory_load(in);
}

void dataset_save(const Dataset& ds, std::ostream& out) {
    char buf[200];
    for (const auto& frame : ds) {
        std::snprintf(buf, sizeof buf, "FRAME %ld %.6f\n", frame.observation.frame_id,
                      frame.observation.timestamp);
        out << buf;
        out << "ODO " << pose_fields(frame.odometry.pose) << '\n';
        std::snprintf(buf, sizeof buf, "ATT %.6f %.6f %.6f\n", frame.odometry.attitude.roll,
                      frame.odometry.attitude.pitch, frame.odometry.attitude.yaw);
        out << buf;
        for (const auto& px : frame.observation.lane_pixels) {
            std::snprintf(buf, sizeof buf, "C %.6f %.6f\n", px.u, px.v);
            out << buf;
        }
        for (const auto& pl : frame.observation.pole_lines) {
            std::snprintf(buf, sizeof buf, "PL %.6f %.6f %.6f %.6f %.6f\n", pl.line.a, pl.line.b,
                          pl.line.c, pl.v_min, pl.v_max);
            out << buf;
        }
    }
}

void dataset_save(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot open " + path + " for writing");
    dataset_save(ds, out);
    if (!out) throw Error(Errc::io_error, "failed writing " + path);
}

Dataset dataset_load(std::istream& in) {
    Dataset ds;
    std::string line;
    int line_no = 0;
    bool have_odo = true, have_att = true;

    auto finish_frame = [&](int at_line) {
        if (ds.empty()) return;
        if (!have_odo) throw Error(Errc::format_error, "frame lacks an ODO record", at_line);
        if (!have_att) throw Error(Errc::format_error, "frame lacks an ATT record", at_line);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        std::string tag;
        is >> tag;
        if (tag == "FRAME") {
            finish_frame(line_no);
            DatasetFrame frame;
            if (!(is >> frame.observation.frame_id >> frame.observation.timestamp)) {
                throw Error(Errc::format_error, "malformed FRAME record", line_no);
            }
            if (!ds.empty() && frame.observation.timestamp <= ds.back().observation.timestamp) {
                throw Error(Errc::format_error, "frame timestamps must increase", line_no);
            }
            frame.odometry.timestamp = frame.observation.timestamp;
            ds.push_back(frame);
            have_odo = have_att = false;
        } else if (ds.empty()) {
            throw Error(Errc::format_error, "record before the first FRAME", line_no);
        } else if (tag == "ODO") {
            ds.back().odometry.pose = parse_pose_fields(is, line_no);
            have_odo = true;
        } else if (tag == "ATT") {
            auto& att = ds.back().odometry.attitude;
            if (!(is >> att.roll >> att.pitch >> att.yaw)) {
                throw Error(Errc::format_error, "malformed ATT record", line_no);
            }
            have_att = true;
        } else if (tag == "C") {
            PixelPoint px;
            if (!(is >> px.u >> px.v)) {
                throw Error(Errc::format_error, "malformed contour record", line_no);
            }
            ds.back().observation.lane_pixels.push_back(px);
        } else if (tag == "PL") {
            PoleLineObs pl;
            if (!(is >> pl.line.a >> pl.line.b >> pl.line.c >> pl.v_min >> pl.v_max)) {
                throw Error(Errc::format_error, "malformed pole-line record", line_no);
            }
            const double n2 = pl.line.a * pl.line.a + pl.line.b * pl.line.b;
            if (std::abs(n2 - 1.0) > 1e-3) {
                throw Error(Errc::format_error, "pole line is not normalized", line_no);
            }
            const double n = std::sqrt(n2);
            pl.line.a /= n;
            pl.line.b /= n;
            pl.line.c /= n;
            ds.back().observation.pole_lines.push_back(pl);
        } else {
            throw Error(Errc::format_error, "unknown record tag '" + tag + "'", line_no);
        }
    }
    finish_frame(line_no + 1);
    return ds;
}

Dataset dataset_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open dataset file " + path);
    return dataset_load(in);
}

}  // namespace semloc
