#pragma once

#include <Eigen/Core>

#include <compare>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "ipm.hpp"
#include "kdtree.hpp"

namespace semloc {

struct LanePoint {
    Eigen::Vector3d position{0.0, 0.0, 0.0};
};

/// Vertical pole stored as an endpoint pair sharing (x, y).
struct Pole {
    double x = 0.0;
    double y = 0.0;
    double z_low = 0.0;
    double z_high = 0.0;

    Eigen::Vector3d low() const { return {x, y, z_low}; }
    Eigen::Vector3d high() const { return {x, y, z_high}; }
    Eigen::Vector3d mid() const { return {x, y, 0.5 * (z_low + z_high)}; }
};

struct TileId {
    long long ix = 0;
    long long iy = 0;
    auto operator<=>(const TileId&) const = default;
};

/// Global semantic map: lane points with a KD-tree index plus poles,
/// partitioned into square tiles for ranged loading. Immutable after
/// construction; concurrent readers need no synchronization.
class SemanticMap {
public:
    SemanticMap() = default;
    SemanticMap(std::vector<LanePoint> lane_points, std::vector<Pole> poles,
                double tile_size = 50.0);

    const std::vector<LanePoint>& lane_points() const { return lane_points_; }
    const std::vector<Pole>& poles() const { return poles_; }
    double tile_size() const { return tile_size_; }
    bool empty() const { return lane_points_.empty() && poles_.empty(); }

    TileId tile_of(double x, double y) const;

    /// Lane-point indices within `radius` of `center`, ascending by index.
    std::vector<int> query_radius(const Eigen::Vector3d& center, double radius) const;

    /// The k nearest lane-point indices, ascending by (distance, x, y, z).
    /// Throws Error(insufficient) when the map holds fewer than k points.
    std::vector<int> query_k_nearest(const Eigen::Vector3d& center, int k) const;

    /// Tiles intersecting the disc of `radius` around the pose translation.
    std::vector<TileId> tiles_in_range(const Pose& pose, double radius) const;

    /// Submap holding exactly the lane points and poles of the given tiles.
    SemanticMap load_tiles(std::span<const TileId> ids) const;

    /// Pole indices whose midpoint projects inside the image with camera
    /// depth in (0, max_range]. `camera_pose` is camera-to-world.
    std::vector<int> poles_in_view(const Pose& camera_pose, const CameraIntrinsics& K,
                                   double max_range) const;

    const KdTree3& index() const { return index_; }

private:
    std::vector<LanePoint> lane_points_;
    std::vector<Pole> poles_;
    double tile_size_ = 50.0;
    KdTree3 index_;
};

/// `SEMMAP 1` text format: one record per line, `L x y z` for lane points,
/// `P x y z_low z_high` for poles, 6 decimal places, `#` comments.
void map_save(const SemanticMap& map, std::ostream& out);
void map_save(const SemanticMap& map, const std::string& path);
SemanticMap map_load(std::istream& in, double tile_size = 50.0);
SemanticMap map_load(const std::string& path, double tile_size = 50.0);

}  // namespace semloc
