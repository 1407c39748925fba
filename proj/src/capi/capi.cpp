#include "lidarsphere/lidarsphere.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

#include "common/error.hpp"
#include "common/log.hpp"
#include "ensemble/ensemble.hpp"
#include "eval/metrics.hpp"
#include "pipeline/config.hpp"
#include "pipeline/pipeline.hpp"
#include "pointcloud/ply.hpp"
#include "projection/spherical.hpp"

struct ls_config {
  lidarsphere::PipelineConfig value;
};
struct ls_pipeline {
  lidarsphere::Pipeline value;
};
struct ls_cloud {
  lidarsphere::PointCloud value;
};
struct ls_projection {
  lidarsphere::ProjectionIndex value;
  lidarsphere::DensityMap density;
};

namespace {

thread_local std::string g_last_error;

ls_status status_of(lidarsphere::Error::Kind kind) {
  using K = lidarsphere::Error::Kind;
  switch (kind) {
    case K::kInvalidArgument: return LS_ERR_INVALID_ARGUMENT;
    case K::kConfig: return LS_ERR_CONFIG;
    case K::kData: return LS_ERR_DATA;
    case K::kIo: return LS_ERR_IO;
    case K::kInvariant: return LS_ERR_INVARIANT;
  }
  return LS_ERR_INTERNAL;
}

template <typename F>
ls_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return LS_OK;
  } catch (const lidarsphere::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return LS_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw lidarsphere::InvalidArgument(std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

lidarsphere::GridSpec grid_of(double res, double zmin, double zmax, double amin, double amax) {
  return lidarsphere::GridSpec::from_degrees(res, zmin, zmax, amin, amax);
}

}  // namespace

extern "C" {

const char* ls_version(void) { return LIDARSPHERE_VERSION; }

const char* ls_last_error(void) { return g_last_error.c_str(); }

const char* ls_status_name(ls_status status) {
  switch (status) {
    case LS_OK: return "ok";
    case LS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case LS_ERR_CONFIG: return "config error";
    case LS_ERR_DATA: return "data error";
    case LS_ERR_INVARIANT: return "invariant violation";
    case LS_ERR_IO: return "i/o error";
    case LS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

int ls_status_exit_code(ls_status status) {
  switch (status) {
    case LS_OK: return 0;
    case LS_ERR_INVALID_ARGUMENT:
    case LS_ERR_CONFIG: return 2;
    case LS_ERR_DATA:
    case LS_ERR_IO: return 3;
    default: return 4;
  }
}

void ls_string_free(char* s) { std::free(s); }

ls_status ls_set_log_level(const char* level) {
  return guarded([&] {
    need(level, "level");
    using lidarsphere::log::Level;
    const std::string l = level;
    if (l == "debug") lidarsphere::log::set_level(Level::kDebug);
    else if (l == "info") lidarsphere::log::set_level(Level::kInfo);
    else if (l == "warn") lidarsphere::log::set_level(Level::kWarn);
    else if (l == "error") lidarsphere::log::set_level(Level::kError);
    else if (l == "off") lidarsphere::log::set_level(Level::kOff);
    else throw lidarsphere::ConfigError("unknown log level \"" + l + "\"");
  });
}

ls_status ls_config_default(ls_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ls_config{};
  });
}

ls_status ls_config_load(const char* path, ls_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ls_config{lidarsphere::load_config(path)};
  });
}

ls_status ls_config_parse(const char* json, ls_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new ls_config{lidarsphere::config_from_json(json)};
  });
}

ls_status ls_config_set(ls_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    lidarsphere::apply_override(config->value, key, value);
  });
}

ls_status ls_config_to_json(const ls_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = dup_string(lidarsphere::config_to_json(config->value));
  });
}

void ls_config_free(ls_config* config) { delete config; }

ls_status ls_pipeline_create(const ls_config* config, ls_pipeline** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = new ls_pipeline{lidarsphere::Pipeline(config->value)};
  });
}

ls_status ls_pipeline_run(ls_pipeline* pipeline, const char* stage, char** report) {
  return guarded([&] {
    need(pipeline, "pipeline");
    need(stage, "stage");
    const std::string r = pipeline->value.run(lidarsphere::parse_stage(stage));
    if (report) *report = dup_string(r);
  });
}

ls_status ls_pipeline_stage_names(char** json) {
  return guarded([&] {
    need(json, "json");
    *json = dup_string(nlohmann::json(lidarsphere::stage_names()).dump());
  });
}

void ls_pipeline_free(ls_pipeline* pipeline) { delete pipeline; }

ls_status ls_cloud_load(const char* path, ls_cloud** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto c = lidarsphere::load_ply(path);
    c.validate();
    *out = new ls_cloud{std::move(c)};
  });
}

size_t ls_cloud_size(const ls_cloud* cloud) { return cloud ? cloud->value.size() : 0; }

void ls_cloud_free(ls_cloud* cloud) { delete cloud; }

ls_status ls_grid_dims(double resolution_deg, double zenith_min, double zenith_max, double azimuth_min,
                       double azimuth_max, size_t* height, size_t* width) {
  return guarded([&] {
    need(height, "height");
    need(width, "width");
    const auto g = grid_of(resolution_deg, zenith_min, zenith_max, azimuth_min, azimuth_max);
    *height = g.height();
    *width = g.width();
  });
}

ls_status ls_project(const ls_cloud* cloud, double resolution_deg, double zenith_min, double zenith_max,
                     double azimuth_min, double azimuth_max, unsigned workers, ls_projection** out) {
  return guarded([&] {
    need(cloud, "cloud");
    need(out, "out");
    auto idx = lidarsphere::project(cloud->value, grid_of(resolution_deg, zenith_min, zenith_max, azimuth_min,
                                                          azimuth_max),
                                    workers);
    auto density = lidarsphere::density_map(idx);
    *out = new ls_projection{std::move(idx), std::move(density)};
  });
}

ls_status ls_projection_dims(const ls_projection* projection, size_t* height, size_t* width) {
  return guarded([&] {
    need(projection, "projection");
    need(height, "height");
    need(width, "width");
    *height = projection->value.height();
    *width = projection->value.width();
  });
}

ls_status ls_projection_density(const ls_projection* projection, size_t* mode, size_t* pixels_above_1) {
  return guarded([&] {
    need(projection, "projection");
    if (mode) *mode = projection->density.mode();
    if (pixels_above_1) *pixels_above_1 = projection->density.pixels_above(1);
  });
}

void ls_projection_free(ls_projection* projection) { delete projection; }

ls_status ls_virtual_sphere_count(double resolution_deg, double zenith_min, double zenith_max, double azimuth_min,
                                  double azimuth_max, size_t* count) {
  return guarded([&] {
    need(count, "count");
    if (!(resolution_deg > 0)) throw lidarsphere::InvalidArgument("virtual sphere: resolution must be positive");
    lidarsphere::VirtualSphereSpec s;
    s.resolution_deg = resolution_deg;
    s.zenith_min_deg = zenith_min;
    s.zenith_max_deg = zenith_max;
    s.azimuth_min_deg = azimuth_min;
    s.azimuth_max_deg = azimuth_max;
    *count = s.point_count();
  });
}

ls_status ls_uncertainty(const double* logits, size_t models, size_t classes, size_t pixels, double* total,
                         double* expected, double* epistemic) {
  return guarded([&] {
    need(logits, "logits");
    lidarsphere::LogitStack stack(models, classes, 1, pixels);
    for (size_t m = 0; m < models; ++m)
      for (size_t c = 0; c < classes; ++c) {
        auto plane = stack.plane(m, c);
        std::memcpy(plane.data(), logits + (m * classes + c) * pixels, pixels * sizeof(double));
      }
    const auto u = lidarsphere::uncertainty(stack);
    for (size_t i = 0; i < pixels; ++i) {
      if (total) total[i] = u.total[i];
      if (expected) expected[i] = u.expected[i];
      if (epistemic) epistemic[i] = u.epistemic[i];
    }
  });
}

ls_status ls_metrics(const uint8_t* gt, const uint8_t* pred, size_t n, size_t classes, int exclude_void,
                     double* oacc, double* macc, double* miou) {
  return guarded([&] {
    need(gt, "gt");
    need(pred, "pred");
    const std::uint8_t void_id[] = {0};
    const auto cm = lidarsphere::confusion({gt, n}, {pred, n}, classes,
                                           exclude_void ? std::span<const std::uint8_t>(void_id)
                                                        : std::span<const std::uint8_t>());
    if (cm.total() == 0) throw lidarsphere::DataError("metrics: no entries to evaluate");
    const auto m = lidarsphere::metrics(cm);
    if (oacc) *oacc = m.oacc;
    if (macc) *macc = m.macc;
    if (miou) *miou = m.miou;
  });
}

ls_status ls_auprc(const double* score, const uint8_t* errors, size_t n, double* out) {
  return guarded([&] {
    need(score, "score");
    need(errors, "errors");
    need(out, "out");
    *out = lidarsphere::auprc(lidarsphere::pr_curve({score, n}, {errors, n}));
  });
}

}  // extern "C"
