#include "semloc/semloc.h"

#include <cstdio>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "dataset_io.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "semantic_map.hpp"

struct semloc_config {
    semloc::Config cfg;
};
struct semloc_map {
    semloc::SemanticMap map;
};
struct semloc_trajectory {
    semloc::Trajectory traj;
};
struct semloc_report {
    std::vector<std::pair<std::string, double>> entries;
};

namespace {

thread_local std::string g_last_error = "no error";

semloc_status to_status(const semloc::Error& e) {
    using semloc::Errc;
    switch (e.code()) {
        case Errc::invalid_argument:
            return SEMLOC_ERR_INVALID_ARGUMENT;
        case Errc::degenerate_input:
        case Errc::format_error:
        case Errc::version_error:
        case Errc::insufficient:
        case Errc::empty_ground:
        case Errc::no_overlap:
        case Errc::too_short:
            return SEMLOC_ERR_DATA;
        case Errc::io_error:
            return SEMLOC_ERR_IO;
        case Errc::numeric_error:
            return SEMLOC_ERR_NUMERIC;
    }
    return SEMLOC_ERR_INTERNAL;
}

semloc_status fail(semloc_status code, const char* what) {
    g_last_error = what;
    return code;
}

/* Runs `fn`, translating exceptions into status codes. */
template <typename Fn>
semloc_status guarded(Fn&& fn) {
    try {
        fn();
        return SEMLOC_OK;
    } catch (const semloc::Error& e) {
        g_last_error = e.what();
        return to_status(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SEMLOC_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return SEMLOC_ERR_INTERNAL;
    }
}

const semloc::Config& config_or_default(const semloc_config* cfg) {
    static const semloc::Config empty;
    return cfg ? cfg->cfg : empty;
}

semloc_report* report_from_metrics(const semloc::MetricsReport& m) {
    auto* r = new semloc_report;
    r->entries = {
        {"ate_trans_rmse_m", m.ate.trans_rmse},
        {"ate_rot_rmse_deg", m.ate.rot_rmse_deg},
        {"ate_rot_yaw_rmse_deg", m.ate.yaw_rmse_deg},
        {"rpe_trans_rmse_m", m.rpe_trans_rmse},
        {"recall_0.25m_2deg_pct", m.recalls[0]},
        {"recall_0.50m_5deg_pct", m.recalls[1]},
        {"recall_5.00m_10deg_pct", m.recalls[2]},
        {"lateral_rmse_m", m.decomposition.lateral_rmse},
        {"longitudinal_rmse_m", m.decomposition.longitudinal_rmse},
        {"heading_rmse_deg", m.decomposition.heading_rmse_deg},
        {"matched_frames", static_cast<double>(m.matched_frames)},
    };
    return r;
}

}  // namespace

extern "C" {

const char* semloc_version(void) { return "1.0.0"; }

const char* semloc_last_error(void) { return g_last_error.c_str(); }

semloc_status semloc_config_create(semloc_config** out) {
    if (!out) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "out is NULL");
    *out = new semloc_config;
    return SEMLOC_OK;
}

semloc_status semloc_config_load(const char* path, semloc_config** out) {
    if (!path || !out) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "path/out is NULL");
    return guarded([&] { *out = new semloc_config{semloc::Config::load(path)}; });
}

semloc_status semloc_config_parse(const char* text, semloc_config** out) {
    if (!text || !out) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "text/out is NULL");
    return guarded([&] { *out = new semloc_config{semloc::Config::parse_string(text)}; });
}

semloc_status semloc_config_set(semloc_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "NULL argument");
    cfg->cfg.set(key, value);
    return SEMLOC_OK;
}

void semloc_config_free(semloc_config* cfg) { delete cfg; }

semloc_status semloc_map_load(const char* path, semloc_map** out) {
    if (!path || !out) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "path/out is NULL");
    return guarded([&] { *out = new semloc_map{semloc::map_load(path)}; });
}

semloc_status semloc_map_save(const semloc_map* map, const char* path) {
    if (!map || !path) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "map/path is NULL");
    return guarded([&] { semloc::map_save(map->map, std::string(path)); });
}

size_t semloc_map_lane_point_count(const semloc_map* map) {
    return map ? map->map.lane_points().size() : 0;
}

size_t semloc_map_pole_count(const semloc_map* map) {
    return map ? map->map.poles().size() : 0;
}

void semloc_map_free(semloc_map* map) { delete map; }

semloc_status semloc_trajectory_load(const char* path, semloc_trajectory** out) {
    if (!path || !out) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "path/out is NULL");
    return guarded([&] { *out = new semloc_trajectory{semloc::trajectory_load(path)}; });
}

semloc_status semloc_trajectory_save(const semloc_trajectory* traj, const char* path) {
    if (!traj || !path) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "traj/path is NULL");
    return guarded([&] { semloc::trajectory_save(traj->traj, std::string(path)); });
}

size_t semloc_trajectory_size(const semloc_trajectory* traj) {
    return traj ? traj->traj.size() : 0;
}

void semloc_trajectory_free(semloc_trajectory* traj) { delete traj; }

size_t semloc_report_size(const semloc_report* report) {
    return report ? report->entries.size() : 0;
}

const char* semloc_report_key(const semloc_report* report, size_t index) {
    if (!report || index >= report->entries.size()) return nullptr;
    return report->entries[index].first.c_str();
}

double semloc_report_value(const semloc_report* report, size_t index) {
    if (!report || index >= report->entries.size()) return 0.0;
    return report->entries[index].second;
}

semloc_status semloc_report_get(const semloc_report* report, const char* key, double* out) {
    if (!report || !key || !out) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "NULL argument");
    for (const auto& [k, v] : report->entries) {
        if (k == key) {
            *out = v;
            return SEMLOC_OK;
        }
    }
    return fail(SEMLOC_ERR_INVALID_ARGUMENT, "no such report key");
}

semloc_status semloc_report_save(const semloc_report* report, const char* path) {
    if (!report || !path) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "report/path is NULL");
    return guarded([&] {
        FILE* f = std::fopen(path, "wb");
        if (!f) throw semloc::Error(semloc::Errc::io_error, std::string("cannot open ") + path);
        for (const auto& [k, v] : report->entries) {
            std::fprintf(f, "%s\t%.9f\n", k.c_str(), v);
        }
        std::fclose(f);
    });
}

void semloc_report_free(semloc_report* report) { delete report; }

semloc_status semloc_simulate(const semloc_config* cfg, const char* out_dir) {
    if (!out_dir) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "out_dir is NULL");
    return guarded([&] { semloc::run_simulate(config_or_default(cfg), out_dir); });
}

semloc_status semloc_build_map(const char* cloud_path, const semloc_config* cfg,
                               semloc_map** out) {
    if (!cloud_path || !out) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "cloud_path/out is NULL");
    return guarded([&] {
        *out = new semloc_map{semloc::run_build_map(cloud_path, config_or_default(cfg))};
    });
}

semloc_status semloc_localize(const semloc_map* map, const char* dataset_path,
                              const semloc_config* cfg, const char* diagnostics_path,
                              semloc_trajectory** out) {
    if (!map || !dataset_path || !out) {
        return fail(SEMLOC_ERR_INVALID_ARGUMENT, "map/dataset_path/out is NULL");
    }
    return guarded([&] {
        semloc::SequenceResult res =
            semloc::run_localize(map->map, dataset_path, config_or_default(cfg));
        if (diagnostics_path) semloc::write_diagnostics(res.diagnostics, diagnostics_path);
        *out = new semloc_trajectory{std::move(res.trajectory)};
    });
}

semloc_status semloc_evaluate(const semloc_trajectory* estimate,
                              const semloc_trajectory* ground_truth, semloc_report** out) {
    if (!estimate || !ground_truth || !out) {
        return fail(SEMLOC_ERR_INVALID_ARGUMENT, "estimate/ground_truth/out is NULL");
    }
    return guarded([&] {
        const semloc::MetricsReport m = semloc::evaluate(estimate->traj, ground_truth->traj);
        *out = report_from_metrics(m);
    });
}

semloc_status semloc_ipm_check(const semloc_config* cfg, semloc_report** out) {
    if (!out) return fail(SEMLOC_ERR_INVALID_ARGUMENT, "out is NULL");
    return guarded([&] {
        const semloc::IpmCheckResult check = semloc::run_ipm_check(config_or_default(cfg));
        auto* r = new semloc_report;
        r->entries = check.values;
        *out = r;
    });
}

}  // extern "C"
