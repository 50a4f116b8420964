#pragma once

#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "localizer.hpp"
#include "map_builder.hpp"
#include "metrics.hpp"
#include "simulator.hpp"

namespace semloc {

/// Config-to-struct converters. Every key has a default so an empty config
/// yields the standard fixture (see README for the key list).
CameraIntrinsics camera_from_config(const Config& cfg);
MountCalibration mount_from_config(const Config& cfg);
IpmOptions ipm_options_from_config(const Config& cfg);
SolverConfig solver_from_config(const Config& cfg);
MapBuilderParams builder_from_config(const Config& cfg);
WorldSpec world_from_config(const Config& cfg);
SimConfig sim_from_config(const Config& cfg);

/// `S <length>` and `A <radius> <angle_deg>` pieces separated by ';'.
std::vector<WorldSegment> parse_segments(const std::string& text);

/// Simulate per config and write map.semmap, cloud.cloud, dataset.txt,
/// gt.traj into `out_dir`.
void run_simulate(const Config& cfg, const std::string& out_dir);

SemanticMap run_build_map(const std::string& cloud_path, const Config& cfg,
                          MapBuildStats* stats = nullptr);

SequenceResult run_localize(const SemanticMap& map, const std::string& dataset_path,
                            const Config& cfg);

void write_diagnostics(const std::vector<FrameDiagnostics>& diags, const std::string& path);

/// Reconstruction-model self-check: zero-angle equivalence with the flat
/// model, single-axis sweeps and a combined-angle sweep against the exact
/// ray-plane model, and the projection round trip. Returns named deviation
/// measurements; `pass` reflects the pinned bounds.
struct IpmCheckResult {
    std::vector<std::pair<std::string, double>> values;
    bool pass = true;
};
IpmCheckResult run_ipm_check(const Config& cfg);

}  // namespace semloc
