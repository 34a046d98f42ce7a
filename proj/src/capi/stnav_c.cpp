#include "stnav/stnav.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "core/commands.hpp"
#include "core/config.hpp"
#include "core/errors.hpp"

using nlohmann::json;

// The handle keeps the raw (possibly overridden) document so overrides can
// re-resolve it, plus the parsed result.
struct stnav_config {
    json document;
    stnav::config::RunConfig resolved;
};

namespace {

thread_local std::string g_last_error;

stnav_status fail(stnav_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

template <typename Fn>
stnav_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return STNAV_OK;
    } catch (const stnav::UsageError& e) {
        return fail(STNAV_ERR_USAGE, e.what());
    } catch (const stnav::NumericError& e) {
        return fail(STNAV_ERR_NUMERIC, e.what());
    } catch (const stnav::DataError& e) {
        return fail(STNAV_ERR_DATA, e.what());
    } catch (const std::exception& e) {
        return fail(STNAV_ERR_DATA, e.what());
    }
}

}  // namespace

extern "C" {

const char* stnav_version(void) { return "1.0.0"; }

const char* stnav_last_error(void) { return g_last_error.c_str(); }

stnav_status stnav_config_parse(const char* json_text, stnav_config** out) {
    if (json_text == nullptr || out == nullptr) {
        return fail(STNAV_ERR_USAGE, "stnav_config_parse: null argument");
    }
    *out = nullptr;
    return guarded([&]() {
        auto cfg = std::make_unique<stnav_config>();
        cfg->resolved = stnav::config::parse(json_text);
        cfg->document = json::parse(json_text);
        *out = cfg.release();
    });
}

stnav_status stnav_config_load(const char* path, stnav_config** out) {
    if (path == nullptr || out == nullptr) {
        return fail(STNAV_ERR_USAGE, "stnav_config_load: null argument");
    }
    *out = nullptr;
    return guarded([&]() {
        auto cfg = std::make_unique<stnav_config>();
        cfg->resolved = stnav::config::load(path);
        std::ifstream f(path);
        f >> cfg->document;
        *out = cfg.release();
    });
}

void stnav_config_free(stnav_config* cfg) { delete cfg; }

stnav_status stnav_config_override(stnav_config* cfg, const char* json_pointer,
                                   const char* json_value) {
    if (cfg == nullptr || json_pointer == nullptr || json_value == nullptr) {
        return fail(STNAV_ERR_USAGE, "stnav_config_override: null argument");
    }
    return guarded([&]() {
        json doc = cfg->document;
        json value;
        try {
            value = json::parse(json_value);
        } catch (const json::exception& e) {
            throw stnav::UsageError("override value is not valid JSON: " +
                                    std::string(e.what()));
        }
        try {
            doc[json::json_pointer(json_pointer)] = value;
        } catch (const json::exception& e) {
            throw stnav::UsageError("bad JSON pointer '" +
                                    std::string(json_pointer) + "': " + e.what());
        }
        // Validate before committing.
        stnav::config::RunConfig resolved = stnav::config::parse(doc.dump());
        cfg->document = std::move(doc);
        cfg->resolved = std::move(resolved);
    });
}

stnav_status stnav_config_set_seed(stnav_config* cfg, uint64_t seed) {
    if (cfg == nullptr) return fail(STNAV_ERR_USAGE, "stnav_config_set_seed: null config");
    return stnav_config_override(cfg, "/seed", std::to_string(seed).c_str());
}

stnav_status stnav_config_hash(const stnav_config* cfg, char* buf, size_t buflen) {
    if (cfg == nullptr || buf == nullptr) {
        return fail(STNAV_ERR_USAGE, "stnav_config_hash: null argument");
    }
    if (buflen < 17) return fail(STNAV_ERR_USAGE, "stnav_config_hash: buffer too small");
    const std::string h = stnav::config::hash_hex(cfg->resolved);
    std::memcpy(buf, h.c_str(), h.size() + 1);
    g_last_error.clear();
    return STNAV_OK;
}

const char* stnav_config_resolved_json(const stnav_config* cfg) {
    return cfg ? cfg->resolved.resolved_json.c_str() : "";
}

stnav_status stnav_simulate(const stnav_config* cfg, const char* out_dir) {
    if (cfg == nullptr || out_dir == nullptr) {
        return fail(STNAV_ERR_USAGE, "stnav_simulate: null argument");
    }
    return guarded([&]() { stnav::commands::simulate(cfg->resolved, out_dir); });
}

stnav_status stnav_train(const stnav_config* cfg, const char* data_dir,
                         const char* out_dir) {
    if (cfg == nullptr || data_dir == nullptr || out_dir == nullptr) {
        return fail(STNAV_ERR_USAGE, "stnav_train: null argument");
    }
    return guarded([&]() { stnav::commands::train(cfg->resolved, data_dir, out_dir); });
}

stnav_status stnav_evaluate(const stnav_config* cfg, const char* data_dir,
                            const char* weights_path, const char* out_dir,
                            int write_svg) {
    if (cfg == nullptr || data_dir == nullptr || weights_path == nullptr ||
        out_dir == nullptr) {
        return fail(STNAV_ERR_USAGE, "stnav_evaluate: null argument");
    }
    return guarded([&]() {
        stnav::commands::evaluate(cfg->resolved, data_dir, weights_path, out_dir,
                                  write_svg != 0);
    });
}

stnav_status stnav_report(const char* scenario_csv, const char* out_summary_csv) {
    if (scenario_csv == nullptr || out_summary_csv == nullptr) {
        return fail(STNAV_ERR_USAGE, "stnav_report: null argument");
    }
    return guarded([&]() { stnav::commands::report(scenario_csv, out_summary_csv); });
}

}  // extern "C"
