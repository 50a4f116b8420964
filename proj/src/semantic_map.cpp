#include "semantic_map.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "error.hpp"

namespace semloc {

SemanticMap::SemanticMap(std::vector<LanePoint> lane_points, std::vector<Pole> poles,
                         double tile_size)
    : lane_points_(std::move(lane_points)), poles_(std::move(poles)), tile_size_(tile_size) {
    if (tile_size_ <= 0.0) throw Error(Errc::invalid_argument, "tile_size must be > 0");
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(lane_points_.size());
    for (const auto& lp : lane_points_) pts.push_back(lp.position);
    index_.build(pts);
}

TileId SemanticMap::tile_of(double x, double y) const {
    return {static_cast<long long>(std::floor(x / tile_size_)),
            static_cast<long long>(std::floor(y / tile_size_))};
}

std::vector<int> SemanticMap::query_radius(const Eigen::Vector3d& center, double radius) const {
    if (radius <= 0.0) throw Error(Errc::invalid_argument, "query radius must be > 0");
    return index_.radius(center, radius);
}

std::vector<int> SemanticMap::query_k_nearest(const Eigen::Vector3d& center, int k) const {
    return index_.knn(center, k);
}

std::vector<TileId> SemanticMap::tiles_in_range(const Pose& pose, double radius) const {
    if (radius <= 0.0) throw Error(Errc::invalid_argument, "tile radius must be > 0");
    const double cx = pose.translation.x();
    const double cy = pose.translation.y();
    const long long ix0 = static_cast<long long>(std::floor((cx - radius) / tile_size_));
    const long long ix1 = static_cast<long long>(std::floor((cx + radius) / tile_size_));
    const long long iy0 = static_cast<long long>(std::floor((cy - radius) / tile_size_));
    const long long iy1 = static_cast<long long>(std::floor((cy + radius) / tile_size_));

    std::vector<TileId> out;
    for (long long ix = ix0; ix <= ix1; ++ix) {
        for (long long iy = iy0; iy <= iy1; ++iy) {
            // Distance from the disc center to the tile rectangle.
            const double x0 = ix * tile_size_, x1 = (ix + 1) * tile_size_;
            const double y0 = iy * tile_size_, y1 = (iy + 1) * tile_size_;
            const double dx = std::max({x0 - cx, 0.0, cx - x1});
            const double dy = std::max({y0 - cy, 0.0, cy - y1});
            if (dx * dx + dy * dy <= radius * radius) out.push_back({ix, iy});
        }
    }
    return out;
}

SemanticMap SemanticMap::load_tiles(std::span<const TileId> ids) const {
    std::vector<TileId> sorted(ids.begin(), ids.end());
    std::sort(sorted.begin(), sorted.end());
    auto member = [&sorted](TileId id) {
        return std::binary_search(sorted.begin(), sorted.end(), id);
    };

    std::vector<LanePoint> lanes;
    for (const auto& lp : lane_points_) {
        if (member(tile_of(lp.position.x(), lp.position.y()))) lanes.push_back(lp);
    }
    std::vector<Pole> poles;
    for (const auto& p : poles_) {
        if (member(tile_of(p.x, p.y))) poles.push_back(p);
    }
    return SemanticMap(std::move(lanes), std::move(poles), tile_size_);
}

std::vector<int> SemanticMap::poles_in_view(const Pose& camera_pose, const CameraIntrinsics& K,
                                            double max_range) const {
    const Pose world_to_camera = inverse(camera_pose);
    std::vector<int> out;
    for (std::size_t i = 0; i < poles_.size(); ++i) {
        const Eigen::Vector3d p_cam = world_to_camera * poles_[i].mid();
        if (!(p_cam.z() > 0.0) || p_cam.z() > max_range) continue;
        const auto px = project_pinhole(p_cam, K);
        if (!px) continue;
        if (px->u < 0.0 || px->u > K.width || px->v < 0.0 || px->v > K.height) continue;
        out.push_back(static_cast<int>(i));
    }
    return out;
}

namespace {

void append_number(std::string& line, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " %.6f", v);
    line += buf;
}

bool parse_doubles(std::istringstream& is, double* out, int count) {
    for (int i = 0; i < count; ++i) {
        if (!(is >> out[i]) || !std::isfinite(out[i])) return false;
    }
    std::string trailing;
    return !(is >> trailing);
}

}  // namespace

void map_save(const SemanticMap& map, std::ostream& out) {
    out << "SEMMAP 1\n";
    std::string line;
    for (const auto& lp : map.lane_points()) {
        line = "L";
        append_number(line, lp.position.x());
        append_number(line, lp.position.y());
        append_number(line, lp.position.z());
        line += '\n';
        out << line;
    }
    for (const auto& p : map.poles()) {
        line = "P";
        append_number(line, p.x);
        append_number(line, p.y);
        append_number(line, p.z_low);
        append_number(line, p.z_high);
        line += '\n';
        out << line;
    }
}

void map_save(const SemanticMap& map, const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: keep LF endings everywhere
    if (!out) throw Error(Errc::io_error, "cannot open " + path + " for writing");
    map_save(map, out);
    if (!out) throw Error(Errc::io_error, "failed writing " + path);
}

SemanticMap map_load(std::istream& in, double tile_size) {
    std::string line;
    int line_no = 0;

    if (!std::getline(in, line)) throw Error(Errc::format_error, "empty map stream", 1);
    ++line_no;
    {
        std::istringstream hs(line);
        std::string magic;
        int version = -1;
        if (!(hs >> magic) || magic != "SEMMAP") {
            throw Error(Errc::format_error, "missing SEMMAP header", line_no);
        }
        if (!(hs >> version)) throw Error(Errc::format_error, "missing map version", line_no);
        if (version != 1) {
            throw Error(Errc::version_error,
                        "unsupported SEMMAP version " + std::to_string(version), line_no);
        }
    }

    std::vector<LanePoint> lanes;
    std::vector<Pole> poles;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        std::string tag;
        is >> tag;
        if (tag == "L") {
            double v[3];
            if (!parse_doubles(is, v, 3)) {
                throw Error(Errc::format_error, "malformed lane record", line_no);
            }
            lanes.push_back({Eigen::Vector3d(v[0], v[1], v[2])});
        } else if (tag == "P") {
            double v[4];
            if (!parse_doubles(is, v, 4)) {
                throw Error(Errc::format_error, "malformed pole record", line_no);
            }
            if (!(v[3] > v[2])) {
                throw Error(Errc::format_error, "pole requires z_high > z_low", line_no);
            }
            poles.push_back({v[0], v[1], v[2], v[3]});
        } else {
            throw Error(Errc::format_error, "unknown record tag '" + tag + "'", line_no);
        }
    }
    return SemanticMap(std::move(lanes), std::move(poles), tile_size);
}

SemanticMap map_load(const std::string& path, double tile_size) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open map file " + path);
    return map_load(in, tile_size);
}

}  // namespace semloc
