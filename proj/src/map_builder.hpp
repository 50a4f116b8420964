#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semantic_map.hpp"

namespace semloc {

enum class PointLabel : std::uint8_t { ground, pole, other };

struct LabeledPoint {
    Eigen::Vector3d position{0.0, 0.0, 0.0};
    double intensity = 0.0;  // [0, 255]
    PointLabel label = PointLabel::other;
};

/// Registered, semantically labeled point cloud (map-builder input).
struct LabeledCloud {
    std::vector<LabeledPoint> points;
};

/// Top-down reflectivity grid over the ground points. Only occupied cells
/// are stored (clouds can span kilometers); each keeps the mean intensity of
/// its members and the source indices for back-projection.
struct BevGrid {
    Eigen::Vector2d origin{0.0, 0.0};  // world (x, y) of cell (0, 0) corner
    double resolution = 0.1;
    int cols = 0;
    int rows = 0;

    struct Cell {
        int col = 0;
        int row = 0;
        double intensity = 0.0;
        std::vector<int> sources;  // indices into the input cloud
    };
    std::vector<Cell> cells;  // occupied cells, ascending (row, col)
};

using Histogram256 = std::array<std::uint64_t, 256>;

struct MapBuilderParams {
    double bev_resolution = 0.1;      // meters per BEV pixel
    double link_distance = 0.5;       // Euclidean clustering radius
    int min_pole_points = 10;
    double min_pole_height = 1.0;     // shorter poles are discarded
    double max_pole_tilt_deg = 10.0;  // fitted axis deviation from vertical
    int ransac_iterations = 100;
    double ransac_threshold = 0.1;
    std::uint64_t seed = 1;
    double tile_size = 50.0;
};

/// Bin ground-labeled points into a BEV grid; cell intensity is the mean of
/// its members. Throws Error(empty_ground) when no ground point exists.
BevGrid project_to_bev(const LabeledCloud& cloud, double resolution);

Histogram256 intensity_histogram(const BevGrid& grid);

/// Threshold t maximizing the between-class variance w0*w1*(mu0-mu1)^2 of the
/// classes [0..t] and [t+1..255]; ties resolved toward the smallest t.
/// Throws Error(degenerate_input) when fewer than 2 bins hold mass.
int otsu_threshold(const Histogram256& hist);

/// 3D positions of the source points in cells brighter than the threshold.
std::vector<LanePoint> extract_lane_points(const LabeledCloud& cloud, const BevGrid& grid,
                                           double threshold);

/// Connected components of the "within link_distance" relation, ordered by
/// smallest member index; members ascending.
std::vector<std::vector<int>> cluster_euclidean(std::span<const Eigen::Vector3d> points,
                                                double link_distance);

enum class PoleRejection { too_few_points, tilted, too_short };

struct PoleExtraction {
    std::optional<Pole> pole;
    PoleRejection rejection = PoleRejection::too_few_points;  // valid when !pole
};

/// RANSAC line fit, verticality and height checks, endpoints from the inlier
/// extremes. The fitted axis is replaced by the exact vertical through the
/// inlier centroid since poles share (x, y) by construction.
PoleExtraction extract_pole(std::span<const Eigen::Vector3d> cluster,
                            const MapBuilderParams& params);

struct MapBuildStats {
    int ground_points = 0;
    int lane_points = 0;
    int pole_clusters = 0;
    int poles_accepted = 0;
    int poles_rejected = 0;
    int otsu_threshold = -1;  // -1 when the lane stage was skipped
};

/// Full pipeline: BEV + OTSU + back-projection for lanes, clustering + pole
/// extraction for poles. Deterministic for a fixed seed.
SemanticMap build_semantic_map(const LabeledCloud& cloud, const MapBuilderParams& params,
                               MapBuildStats* stats = nullptr);

/// `CLOUD 1` text format: `x y z intensity label` records, label in {G, P, O}.
void cloud_save(const LabeledCloud& cloud, std::ostream& out);
void cloud_save(const LabeledCloud& cloud, const std::string& path);
LabeledCloud cloud_load(std::istream& in);
LabeledCloud cloud_load(const std::string& path);

}  // namespace semloc
