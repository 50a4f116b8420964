#include "map_builder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "error.hpp"

namespace semloc {

BevGrid project_to_bev(const LabeledCloud& cloud, double resolution) {
    if (resolution <= 0.0) throw Error(Errc::invalid_argument, "bev resolution must be > 0");

    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
    bool any = false;
    for (const auto& p : cloud.points) {
        if (p.label != PointLabel::ground) continue;
        if (!any) {
            min_x = max_x = p.position.x();
            min_y = max_y = p.position.y();
            any = true;
        } else {
            min_x = std::min(min_x, p.position.x());
            max_x = std::max(max_x, p.position.x());
            min_y = std::min(min_y, p.position.y());
            max_y = std::max(max_y, p.position.y());
        }
    }
    if (!any) throw Error(Errc::empty_ground, "cloud has no ground-labeled points");

    BevGrid grid;
    grid.resolution = resolution;
    grid.origin = Eigen::Vector2d(std::floor(min_x / resolution) * resolution,
                                  std::floor(min_y / resolution) * resolution);
    grid.cols = static_cast<int>(std::floor((max_x - grid.origin.x()) / resolution)) + 1;
    grid.rows = static_cast<int>(std::floor((max_y - grid.origin.y()) / resolution)) + 1;

    std::map<std::pair<int, int>, BevGrid::Cell> cells;  // (row, col) ordered
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const auto& p = cloud.points[i];
        if (p.label != PointLabel::ground) continue;
        const int col = static_cast<int>(std::floor((p.position.x() - grid.origin.x()) / resolution));
        const int row = static_cast<int>(std::floor((p.position.y() - grid.origin.y()) / resolution));
        auto& cell = cells[{row, col}];
        cell.col = col;
        cell.row = row;
        cell.intensity += p.intensity;  // sum; divided below
        cell.sources.push_back(static_cast<int>(i));
    }
    grid.cells.reserve(cells.size());
    for (auto& [key, cell] : cells) {
        cell.intensity /= static_cast<double>(cell.sources.size());
        grid.cells.push_back(std::move(cell));
    }
    return grid;
}

Histogram256 intensity_histogram(const BevGrid& grid) {
    Histogram256 hist{};
    for (const auto& cell : grid.cells) {
        const double clamped = std::clamp(cell.intensity, 0.0, 255.0);
        ++hist[static_cast<int>(std::floor(clamped))];
    }
    return hist;
}

int otsu_threshold(const Histogram256& hist) {
    std::uint64_t total = 0;
    std::uint64_t total_sum = 0;
    int nonzero = 0;
    for (int b = 0; b < 256; ++b) {
        total += hist[b];
        total_sum += static_cast<std::uint64_t>(b) * hist[b];
        nonzero += hist[b] > 0;
    }
    if (nonzero < 2) throw Error(Errc::degenerate_input, "otsu needs mass in at least 2 bins");

    // Exact integer score: w0*w1*(mu0-mu1)^2 == (s0*w1 - s1*w0)^2 / (w0*w1).
    // Keeping the numerator in integers makes plateau ties bit-stable.
    long double best = -1.0L;
    int best_t = 0;
    std::uint64_t w0 = 0, s0 = 0;
    for (int t = 0; t < 255; ++t) {
        w0 += hist[t];
        s0 += static_cast<std::uint64_t>(t) * hist[t];
        const std::uint64_t w1 = total - w0;
        if (w0 == 0) continue;
        if (w1 == 0) break;
        const std::uint64_t s1 = total_sum - s0;
        const __int128 a = static_cast<__int128>(s0) * w1 - static_cast<__int128>(s1) * w0;
        const long double score =
            static_cast<long double>(a) * static_cast<long double>(a) /
            (static_cast<long double>(w0) * static_cast<long double>(w1));
        if (score > best) {
            best = score;
            best_t = t;
        }
    }
    return best_t;
}

std::vector<LanePoint> extract_lane_points(const LabeledCloud& cloud, const BevGrid& grid,
                                           double threshold) {
    std::vector<LanePoint> out;
    for (const auto& cell : grid.cells) {
        if (!(cell.intensity > threshold)) continue;
        for (int idx : cell.sources) out.push_back({cloud.points[idx].position});
    }
    return out;
}

std::vector<std::vector<int>> cluster_euclidean(std::span<const Eigen::Vector3d> points,
                                                double link_distance) {
    if (link_distance <= 0.0) throw Error(Errc::invalid_argument, "link_distance must be > 0");
    const int n = static_cast<int>(points.size());

    // Hash grid with cell size = link_distance; neighbors live in the 27 cells.
    struct KeyHash {
        std::size_t operator()(const std::array<long long, 3>& k) const {
            std::size_t h = 1469598103934665603ull;
            for (long long v : k) {
                h ^= static_cast<std::size_t>(v);
                h *= 1099511628211ull;
            }
            return h;
        }
    };
    std::unordered_map<std::array<long long, 3>, std::vector<int>, KeyHash> buckets;
    auto key_of = [&](const Eigen::Vector3d& p) {
        return std::array<long long, 3>{
            static_cast<long long>(std::floor(p.x() / link_distance)),
            static_cast<long long>(std::floor(p.y() / link_distance)),
            static_cast<long long>(std::floor(p.z() / link_distance))};
    };
    for (int i = 0; i < n; ++i) buckets[key_of(points[i])].push_back(i);

    std::vector<std::vector<int>> clusters;
    std::vector<bool> visited(n, false);
    const double link2 = link_distance * link_distance;
    for (int start = 0; start < n; ++start) {
        if (visited[start]) continue;
        std::vector<int> member;
        std::deque<int> frontier{start};
        visited[start] = true;
        while (!frontier.empty()) {
            const int cur = frontier.front();
            frontier.pop_front();
            member.push_back(cur);
            const auto k = key_of(points[cur]);
            for (long long dx = -1; dx <= 1; ++dx) {
                for (long long dy = -1; dy <= 1; ++dy) {
                    for (long long dz = -1; dz <= 1; ++dz) {
                        const auto it = buckets.find({k[0] + dx, k[1] + dy, k[2] + dz});
                        if (it == buckets.end()) continue;
                        for (int cand : it->second) {
                            if (visited[cand]) continue;
                            if ((points[cand] - points[cur]).squaredNorm() <= link2) {
                                visited[cand] = true;
                                frontier.push_back(cand);
                            }
                        }
                    }
                }
            }
        }
        std::sort(member.begin(), member.end());
        clusters.push_back(std::move(member));
    }
    return clusters;
}

PoleExtraction extract_pole(std::span<const Eigen::Vector3d> cluster,
                            const MapBuilderParams& params) {
    PoleExtraction out;
    if (static_cast<int>(cluster.size()) < params.min_pole_points) {
        out.rejection = PoleRejection::too_few_points;
        return out;
    }
    RansacLine fit;
    try {
        fit = ransac_line_3d(cluster, params.ransac_iterations, params.ransac_threshold,
                             params.seed);
    } catch (const Error&) {
        out.rejection = PoleRejection::too_short;  // coincident cluster: zero extent
        return out;
    }

    const double cos_tilt = std::min(1.0, std::abs(fit.line.direction.z()));
    if (std::acos(cos_tilt) > params.max_pole_tilt_deg * M_PI / 180.0) {
        out.rejection = PoleRejection::tilted;
        return out;
    }

    double sx = 0.0, sy = 0.0;
    double z_low = cluster[fit.inliers.front()].z();
    double z_high = z_low;
    for (int idx : fit.inliers) {
        sx += cluster[idx].x();
        sy += cluster[idx].y();
        z_low = std::min(z_low, cluster[idx].z());
        z_high = std::max(z_high, cluster[idx].z());
    }
    if (z_high - z_low < params.min_pole_height) {
        out.rejection = PoleRejection::too_short;
        return out;
    }
    const double inv = 1.0 / static_cast<double>(fit.inliers.size());
    out.pole = Pole{sx * inv, sy * inv, z_low, z_high};
    return out;
}

SemanticMap build_semantic_map(const LabeledCloud& cloud, const MapBuilderParams& params,
                               MapBuildStats* stats) {
    MapBuildStats local;
    std::vector<LanePoint> lanes;

    bool has_ground = false;
    for (const auto& p : cloud.points) {
        if (p.label == PointLabel::ground) {
            has_ground = true;
            ++local.ground_points;
        }
    }
    if (has_ground) {
        const BevGrid grid = project_to_bev(cloud, params.bev_resolution);
        const Histogram256 hist = intensity_histogram(grid);
        int nonzero = 0;
        for (auto c : hist) nonzero += c > 0;
        if (nonzero >= 2) {
            // A single-intensity surface has no separable markings; only a
            // bimodal histogram produces lane points.
            local.otsu_threshold = otsu_threshold(hist);
            lanes = extract_lane_points(cloud, grid, local.otsu_threshold);
        }
    }
    local.lane_points = static_cast<int>(lanes.size());

    std::vector<Eigen::Vector3d> pole_pts;
    for (const auto& p : cloud.points) {
        if (p.label == PointLabel::pole) pole_pts.push_back(p.position);
    }
    std::vector<Pole> poles;
    const auto clusters = cluster_euclidean(pole_pts, params.link_distance);
    local.pole_clusters = static_cast<int>(clusters.size());
    for (const auto& cluster : clusters) {
        std::vector<Eigen::Vector3d> member;
        member.reserve(cluster.size());
        for (int idx : cluster) member.push_back(pole_pts[idx]);
        const PoleExtraction ext = extract_pole(member, params);
        if (ext.pole) {
            poles.push_back(*ext.pole);
            ++local.poles_accepted;
        } else {
            ++local.poles_rejected;
        }
    }

    if (stats) *stats = local;
    return SemanticMap(std::move(lanes), std::move(poles), params.tile_size);
}

namespace {

char label_code(PointLabel l) {
    switch (l) {
        case PointLabel::ground: return 'G';
        case PointLabel::pole: return 'P';
        case PointLabel::other: return 'O';
    }
    return 'O';
}

}  // namespace

void cloud_save(const LabeledCloud& cloud, std::ostream& out) {
    out << "CLOUD 1\n";
    char buf[160];
    for (const auto& p : cloud.points) {
        std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %.6f %c\n", p.position.x(),
                      p.position.y(), p.position.z(), p.intensity, label_code(p.label));
        out << buf;
    }
}

void cloud_save(const LabeledCloud& cloud, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot open " + path + " for writing");
    cloud_save(cloud, out);
    if (!out) throw Error(Errc::io_error, "failed writing " + path);
}

LabeledCloud cloud_load(std::istream& in) {
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw Error(Errc::format_error, "empty cloud stream", 1);
    ++line_no;
    {
        std::istringstream hs(line);
        std::string magic;
        int version = -1;
        if (!(hs >> magic) || magic != "CLOUD") {
            throw Error(Errc::format_error, "missing CLOUD header", line_no);
        }
        if (!(hs >> version)) throw Error(Errc::format_error, "missing cloud version", line_no);
        if (version != 1) {
            throw Error(Errc::version_error,
                        "unsupported CLOUD version " + std::to_string(version), line_no);
        }
    }

    LabeledCloud cloud;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        LabeledPoint p;
        std::string label;
        if (!(is >> p.position.x() >> p.position.y() >> p.position.z() >> p.intensity >> label)) {
            throw Error(Errc::format_error, "malformed cloud record", line_no);
        }
        std::string trailing;
        if (is >> trailing) throw Error(Errc::format_error, "trailing fields", line_no);
        if (!(p.intensity >= 0.0 && p.intensity <= 255.0)) {
            throw Error(Errc::format_error, "intensity outside [0, 255]", line_no);
        }
        if (label == "G") {
            p.label = PointLabel::ground;
        } else if (label == "P") {
            p.label = PointLabel::pole;
        } else if (label == "O") {
            p.label = PointLabel::other;
        } else {
            throw Error(Errc::format_error, "unknown label '" + label + "'", line_no);
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

LabeledCloud cloud_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open cloud file " + path);
    return cloud_load(in);
}

}  // namespace semloc
