// Command-line front end. Links the public C API only.

#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "semloc/semloc.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int exit_code_for(semloc_status status) {
    switch (status) {
        case SEMLOC_OK:
            return kExitOk;
        case SEMLOC_ERR_INVALID_ARGUMENT:
        case SEMLOC_ERR_DATA:
        case SEMLOC_ERR_IO:
            return kExitData;
        case SEMLOC_ERR_NUMERIC:
        case SEMLOC_ERR_INTERNAL:
            return kExitNumeric;
    }
    return kExitNumeric;
}

int check(semloc_status status) {
    if (status != SEMLOC_OK) {
        std::fprintf(stderr, "error: %s\n", semloc_last_error());
        return exit_code_for(status);
    }
    return kExitOk;
}

struct ConfigHandle {
    semloc_config* cfg = nullptr;
    ~ConfigHandle() { semloc_config_free(cfg); }
};

int load_config(const std::string& path, ConfigHandle& handle) {
    if (path.empty()) return kExitOk;
    return check(semloc_config_load(path.c_str(), &handle.cfg));
}

void print_report(const semloc_report* report) {
    const size_t n = semloc_report_size(report);
    for (size_t i = 0; i < n; ++i) {
        std::printf("%-28s %.12g\n", semloc_report_key(report, i),
                    semloc_report_value(report, i));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"monocular semantic localization toolkit"};
    app.require_subcommand(1);

    std::string spec_path, out_path, cloud_path, config_path, map_path, dataset_path;
    std::string est_path, gt_path, report_path, diag_path;

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
    simulate->add_option("--spec", spec_path, "world/noise config file")->required();
    simulate->add_option("--out", out_path, "output directory")->required();

    auto* build = app.add_subcommand("build-map", "build a semantic map from a labeled cloud");
    build->add_option("--cloud", cloud_path, "CLOUD 1 input file")->required();
    build->add_option("--out", out_path, "SEMMAP 1 output file")->required();
    build->add_option("--config", config_path, "builder config file");

    auto* localize = app.add_subcommand("localize", "run the localization loop over a dataset");
    localize->add_option("--map", map_path, "SEMMAP 1 map file")->required();
    localize->add_option("--dataset", dataset_path, "dataset file")->required();
    localize->add_option("--config", config_path, "solver/camera config file");
    localize->add_option("--out", out_path, "trajectory output file")->required();
    localize->add_option("--diag", diag_path, "per-frame diagnostics output file");

    auto* evaluate = app.add_subcommand("evaluate", "compare a trajectory against ground truth");
    evaluate->add_option("--est", est_path, "estimated trajectory")->required();
    evaluate->add_option("--gt", gt_path, "ground-truth trajectory")->required();
    evaluate->add_option("--report", report_path, "machine-readable report output");

    auto* ipm_check = app.add_subcommand("ipm-check", "reconstruction-model deviation sweeps");
    ipm_check->add_option("--config", config_path, "camera config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (simulate->parsed()) {
        ConfigHandle cfg;
        if (const int rc = load_config(spec_path, cfg)) return rc;
        if (const int rc = check(semloc_simulate(cfg.cfg, out_path.c_str()))) return rc;
        std::printf("dataset written to %s\n", out_path.c_str());
        return kExitOk;
    }

    if (build->parsed()) {
        ConfigHandle cfg;
        if (const int rc = load_config(config_path, cfg)) return rc;
        semloc_map* map = nullptr;
        if (const int rc = check(semloc_build_map(cloud_path.c_str(), cfg.cfg, &map))) return rc;
        const int rc = check(semloc_map_save(map, out_path.c_str()));
        if (rc == kExitOk) {
            std::printf("map with %zu lane points and %zu poles written to %s\n",
                        semloc_map_lane_point_count(map), semloc_map_pole_count(map),
                        out_path.c_str());
        }
        semloc_map_free(map);
        return rc;
    }

    if (localize->parsed()) {
        ConfigHandle cfg;
        if (const int rc = load_config(config_path, cfg)) return rc;
        semloc_map* map = nullptr;
        if (const int rc = check(semloc_map_load(map_path.c_str(), &map))) return rc;
        semloc_trajectory* traj = nullptr;
        const semloc_status status =
            semloc_localize(map, dataset_path.c_str(), cfg.cfg,
                            diag_path.empty() ? nullptr : diag_path.c_str(), &traj);
        semloc_map_free(map);
        if (const int rc = check(status)) return rc;
        const int rc = check(semloc_trajectory_save(traj, out_path.c_str()));
        if (rc == kExitOk) {
            std::printf("%zu poses written to %s\n", semloc_trajectory_size(traj),
                        out_path.c_str());
        }
        semloc_trajectory_free(traj);
        return rc;
    }

    if (evaluate->parsed()) {
        semloc_trajectory* est = nullptr;
        semloc_trajectory* gt = nullptr;
        if (const int rc = check(semloc_trajectory_load(est_path.c_str(), &est))) return rc;
        if (const int rc = check(semloc_trajectory_load(gt_path.c_str(), &gt))) {
            semloc_trajectory_free(est);
            return rc;
        }
        semloc_report* report = nullptr;
        const semloc_status status = semloc_evaluate(est, gt, &report);
        semloc_trajectory_free(est);
        semloc_trajectory_free(gt);
        if (const int rc = check(status)) return rc;
        print_report(report);
        int rc = kExitOk;
        if (!report_path.empty()) rc = check(semloc_report_save(report, report_path.c_str()));
        semloc_report_free(report);
        return rc;
    }

    if (ipm_check->parsed()) {
        ConfigHandle cfg;
        if (const int rc = load_config(config_path, cfg)) return rc;
        semloc_report* report = nullptr;
        if (const int rc = check(semloc_ipm_check(cfg.cfg, &report))) return rc;
        print_report(report);
        double pass = 0.0;
        semloc_report_get(report, "pass", &pass);
        semloc_report_free(report);
        if (pass != 1.0) {
            std::fprintf(stderr, "error: reconstruction deviations exceed bounds\n");
            return kExitNumeric;
        }
        return kExitOk;
    }

    return kExitUsage;
}
