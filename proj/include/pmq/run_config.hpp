#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmq/calibration.hpp"
#include "pmq/errors.hpp"
#include "pmq/grid_builder.hpp"
#include "pmq/monte_carlo.hpp"
#include "pmq/pricing.hpp"
#include "pmq/sde_models.hpp"

namespace pmq {

/// Batch run description; schema-validated, unknown keys rejected.
struct RunConfig {
    enum class Task { quantize, price, compare_mc, calibrate };

    Task task = Task::quantize;
    std::string model_id;
    nlohmann::json model_params;
    Schedule schedule;
    std::vector<Scheme> schemes;
    OptimizerConfig optimizer;
    int threads = 1;

    struct Instrument {
        std::string id;
        OptionKind kind = OptionKind::european_put;
        double strike = 100.0;
        int maturity_step = -1;        // -1: last step
        double barrier = 0.0;
        std::vector<int> monitor_steps; // empty: every step up to maturity
    };
    std::vector<Instrument> instruments;

    McConfig mc;

    struct Calibration {
        std::string quote_file;
        double spot = 100.0;
        double rate = 0.0;
        double moneyness_filter = 0.30;
        SabrParams init;
        int max_evals = 300;
        RsveSettings settings;
    } calibration;

    struct Output {
        std::string grid_file;
        std::string table_file;
        std::string text_export;
    } output;

    double discount_rate = 0.0;     // resolved from the model parameters
    bool forward_underlying = false; // true when dimension 1 is a forward
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw config_error("config: expected an object at " + path);
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw config_error("config: unknown key '" + it.key() + "' at " + path);
    }
}

template <typename T>
T require(const nlohmann::json& j, const std::string& path, const char* key) {
    if (!j.contains(key))
        throw config_error("config: missing key '" + std::string(key) + "' at " + path);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error("config: wrong type for '" + std::string(key) + "' at " +
                           path);
    }
}

template <typename T>
T optional(const nlohmann::json& j, const std::string& path, const char* key,
           T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error("config: wrong type for '" + std::string(key) + "' at " +
                           path);
    }
}

inline Scheme parse_scheme(const std::string& s, const std::string& path) {
    if (s == "euler") return Scheme::euler;
    if (s == "wo2") return Scheme::wo2;
    throw config_error("config: unknown scheme '" + s + "' at " + path);
}

inline OptionKind parse_kind(const std::string& s, const std::string& path) {
    if (s == "european-put") return OptionKind::european_put;
    if (s == "european-call") return OptionKind::european_call;
    if (s == "up-and-out-put") return OptionKind::up_and_out_put;
    if (s == "bermudan-put") return OptionKind::bermudan_put;
    throw config_error("config: unknown option kind '" + s + "' at " + path);
}

inline OptimizerConfig parse_optimizer(const nlohmann::json& j, const std::string& path) {
    check_keys(j, path,
               {"nr_max_iters", "lloyd_max_iters", "grad_tol", "cond_threshold",
                "anderson_depth"});
    OptimizerConfig cfg;
    cfg.nr_max_iters = optional(j, path, "nr_max_iters", cfg.nr_max_iters);
    cfg.lloyd_max_iters = optional(j, path, "lloyd_max_iters", cfg.lloyd_max_iters);
    cfg.grad_tol = optional(j, path, "grad_tol", cfg.grad_tol);
    cfg.cond_threshold = optional(j, path, "cond_threshold", cfg.cond_threshold);
    cfg.anderson_depth = optional(j, path, "anderson_depth", cfg.anderson_depth);
    cfg.validate();
    return cfg;
}

} // namespace detail

/// Build the model named by the config; the SABR forward is pinned to the
/// schedule horizon.
inline SdeModel build_model(const RunConfig& cfg) {
    const auto& p = cfg.model_params;
    const std::string path = "/model/params";
    using detail::require;
    if (cfg.model_id == "gbm1d") {
        detail::check_keys(p, path, {"x0", "r", "sigma"});
        return gbm1d(require<double>(p, path, "x0"), require<double>(p, path, "r"),
                     require<double>(p, path, "sigma"));
    }
    if (cfg.model_id == "gbm2d") {
        detail::check_keys(p, path, {"x01", "x02", "r", "sigma1", "sigma2", "rho"});
        return gbm2d(require<double>(p, path, "x01"), require<double>(p, path, "x02"),
                     require<double>(p, path, "r"), require<double>(p, path, "sigma1"),
                     require<double>(p, path, "sigma2"),
                     require<double>(p, path, "rho"));
    }
    if (cfg.model_id == "heston") {
        detail::check_keys(p, path, {"s0", "v0", "kappa", "theta", "sigma", "r", "rho"});
        return heston(require<double>(p, path, "s0"), require<double>(p, path, "v0"),
                      require<double>(p, path, "kappa"),
                      require<double>(p, path, "theta"),
                      require<double>(p, path, "sigma"), require<double>(p, path, "r"),
                      require<double>(p, path, "rho"));
    }
    if (cfg.model_id == "sabr") {
        detail::check_keys(p, path, {"s0", "r", "y0", "beta", "nu", "rho"});
        const double f0 = require<double>(p, path, "s0") *
                          std::exp(require<double>(p, path, "r") * cfg.schedule.horizon);
        return sabr(f0, require<double>(p, path, "y0"), require<double>(p, path, "beta"),
                    require<double>(p, path, "nu"), require<double>(p, path, "rho"));
    }
    throw config_error("config: unknown model id '" + cfg.model_id + "'");
}

/// Parse and validate a config document. Parse errors are reported with the
/// line and column computed from the byte offset.
inline RunConfig parse_run_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw config_error("config: parse error at line " + std::to_string(line) +
                           ", column " + std::to_string(col) + ": " + e.what());
    }

    using detail::optional;
    using detail::require;
    detail::check_keys(j, "/",
                       {"task", "model", "schedule", "schemes", "optimizer", "threads",
                        "options", "mc", "calibration", "output"});
    RunConfig cfg;
    const std::string task = require<std::string>(j, "/", "task");
    if (task == "quantize")
        cfg.task = RunConfig::Task::quantize;
    else if (task == "price")
        cfg.task = RunConfig::Task::price;
    else if (task == "compare-mc")
        cfg.task = RunConfig::Task::compare_mc;
    else if (task == "calibrate")
        cfg.task = RunConfig::Task::calibrate;
    else
        throw config_error("config: unknown task '" + task + "'");

    if (j.contains("threads")) cfg.threads = require<int>(j, "/", "threads");
    if (cfg.threads < 1) throw config_error("config: threads must be >= 1");

    if (j.contains("optimizer"))
        cfg.optimizer = detail::parse_optimizer(j["optimizer"], "/optimizer");

    if (j.contains("output")) {
        detail::check_keys(j["output"], "/output",
                           {"grid_file", "table_file", "text_export"});
        cfg.output.grid_file = optional<std::string>(j["output"], "/output",
                                                     "grid_file", "");
        cfg.output.table_file = optional<std::string>(j["output"], "/output",
                                                      "table_file", "");
        cfg.output.text_export = optional<std::string>(j["output"], "/output",
                                                       "text_export", "");
    }

    if (cfg.task == RunConfig::Task::calibrate) {
        const auto& c = j.contains("calibration") ? j["calibration"] : nlohmann::json();
        detail::check_keys(c, "/calibration",
                           {"quote_file", "spot", "rate", "moneyness_filter", "init",
                            "max_evals", "codewords", "steps", "schemes"});
        cfg.calibration.quote_file = require<std::string>(c, "/calibration", "quote_file");
        cfg.calibration.spot = require<double>(c, "/calibration", "spot");
        cfg.calibration.rate = require<double>(c, "/calibration", "rate");
        cfg.calibration.moneyness_filter =
            optional(c, "/calibration", "moneyness_filter", 0.30);
        cfg.calibration.max_evals = optional(c, "/calibration", "max_evals", 300);
        const auto& init = c.contains("init") ? c["init"] : nlohmann::json();
        detail::check_keys(init, "/calibration/init", {"y0", "beta", "nu", "rho"});
        cfg.calibration.init.y0 = require<double>(init, "/calibration/init", "y0");
        cfg.calibration.init.beta = require<double>(init, "/calibration/init", "beta");
        cfg.calibration.init.nu = require<double>(init, "/calibration/init", "nu");
        cfg.calibration.init.rho = require<double>(init, "/calibration/init", "rho");
        cfg.calibration.settings.codewords =
            optional(c, "/calibration", "codewords", std::vector<int>{20, 10});
        cfg.calibration.settings.steps_override = optional(c, "/calibration", "steps", 0);
        cfg.calibration.settings.optimizer = cfg.optimizer;
        cfg.calibration.settings.threads = cfg.threads;
        if (c.contains("schemes")) {
            cfg.calibration.settings.schemes.clear();
            for (const auto& s : c["schemes"])
                cfg.calibration.settings.schemes.push_back(
                    detail::parse_scheme(s.get<std::string>(), "/calibration/schemes"));
        }
        return cfg;
    }

    const auto& m = j.contains("model") ? j["model"] : nlohmann::json();
    detail::check_keys(m, "/model", {"id", "params"});
    cfg.model_id = require<std::string>(m, "/model", "id");
    cfg.model_params =
        m.contains("params") ? m["params"] : nlohmann::json::object();

    const auto& s = j.contains("schedule") ? j["schedule"] : nlohmann::json();
    detail::check_keys(s, "/schedule",
                       {"horizon", "steps", "codewords", "codewords_per_step"});
    cfg.schedule.horizon = require<double>(s, "/schedule", "horizon");
    cfg.schedule.steps = require<int>(s, "/schedule", "steps");
    cfg.schedule.codewords = require<std::vector<int>>(s, "/schedule", "codewords");
    cfg.schedule.codewords_per_step = optional(
        s, "/schedule", "codewords_per_step", std::vector<std::vector<int>>{});
    if (!(cfg.schedule.horizon > 0.0))
        throw config_error("config: schedule horizon must be positive");

    if (!j.contains("schemes"))
        throw config_error("config: missing key 'schemes' at /");
    for (const auto& sc : j["schemes"])
        cfg.schemes.push_back(detail::parse_scheme(sc.get<std::string>(), "/schemes"));

    cfg.discount_rate =
        cfg.model_params.contains("r") ? cfg.model_params["r"].get<double>() : 0.0;
    cfg.forward_underlying = cfg.model_id == "sabr";

    if (j.contains("options")) {
        int auto_id = 0;
        for (const auto& o : j["options"]) {
            const std::string path = "/options[" + std::to_string(auto_id) + "]";
            detail::check_keys(o, path,
                               {"id", "kind", "strike", "maturity_step", "barrier",
                                "monitor_steps"});
            RunConfig::Instrument inst;
            inst.id = optional<std::string>(o, path, "id",
                                            "opt" + std::to_string(auto_id));
            inst.kind = detail::parse_kind(require<std::string>(o, path, "kind"), path);
            inst.strike = require<double>(o, path, "strike");
            inst.maturity_step = optional(o, path, "maturity_step", -1);
            inst.barrier = optional(o, path, "barrier", 0.0);
            inst.monitor_steps =
                optional(o, path, "monitor_steps", std::vector<int>{});
            cfg.instruments.push_back(std::move(inst));
            ++auto_id;
        }
    }

    if (j.contains("mc")) {
        detail::check_keys(j["mc"], "/mc",
                           {"paths", "steps_per_year", "seed", "antithetic"});
        cfg.mc.paths = optional<long>(j["mc"], "/mc", "paths", cfg.mc.paths);
        cfg.mc.steps_per_year =
            optional(j["mc"], "/mc", "steps_per_year", cfg.mc.steps_per_year);
        cfg.mc.seed = optional<std::uint64_t>(j["mc"], "/mc", "seed", cfg.mc.seed);
        cfg.mc.antithetic = optional(j["mc"], "/mc", "antithetic", cfg.mc.antithetic);
    }
    cfg.mc.threads = cfg.threads;
    return cfg;
}

inline RunConfig parse_run_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

/// Resolve an instrument against a schedule into a priceable OptionSpec.
inline OptionSpec resolve_instrument(const RunConfig& cfg,
                                     const RunConfig::Instrument& inst, int grid_steps) {
    OptionSpec spec;
    spec.kind = inst.kind;
    spec.strike = inst.strike;
    spec.rate = cfg.discount_rate;
    spec.forward_underlying = cfg.forward_underlying;
    spec.maturity_step = inst.maturity_step < 0 ? grid_steps : inst.maturity_step;
    spec.barrier = inst.barrier;
    if (inst.monitor_steps.empty() && (inst.kind == OptionKind::up_and_out_put ||
                                       inst.kind == OptionKind::bermudan_put)) {
        spec.monitor_steps.resize(spec.maturity_step);
        for (int k = 0; k < spec.maturity_step; ++k) spec.monitor_steps[k] = k + 1;
    } else {
        spec.monitor_steps = inst.monitor_steps;
    }
    spec.validate(grid_steps);
    return spec;
}

} // namespace pmq
