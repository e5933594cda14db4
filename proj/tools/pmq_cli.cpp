// Batch front end: build quantization grids, price option books, compare
// against Monte Carlo, and run calibrations from a JSON run config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pmq/black.hpp"
#include "pmq/calibration.hpp"
#include "pmq/grid_builder.hpp"
#include "pmq/monte_carlo.hpp"
#include "pmq/pricing.hpp"
#include "pmq/run_config.hpp"
#include "pmq/serialize.hpp"
#include "pmq/version.hpp"

namespace {

using namespace pmq;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct CliArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::string grid_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

std::string out_path(const CliArgs& args, const std::string& configured,
                     const std::string& fallback) {
    if (!configured.empty()) return configured;
    return (std::filesystem::path(args.out_dir) / fallback).string();
}

RunConfig load_config(const CliArgs& args) {
    RunConfig cfg = parse_run_config_file(args.config_path);
    if (args.threads) {
        cfg.threads = *args.threads;
        cfg.mc.threads = *args.threads;
        cfg.calibration.settings.threads = *args.threads;
    }
    if (args.seed) cfg.mc.seed = *args.seed;
    return cfg;
}

GridSequence build_from_config(const RunConfig& cfg) {
    auto model = build_model(cfg);
    BuildOptions opts;
    opts.optimizer = cfg.optimizer;
    opts.threads = cfg.threads;
    return pmq_build(model, cfg.schedule, cfg.schemes, opts);
}

/// Load a previously written grid and check it matches the config's model
/// and schedule before it is used for pricing.
GridSequence load_checked_grid(const RunConfig& cfg, const std::string& path) {
    GridSequence seq = read_grid_file(path);
    auto model = build_model(cfg);
    if (model_hash(seq.model_fingerprint) != model_hash(model.params_fingerprint))
        throw provenance_error("grid file " + path +
                               " was built from different model parameters");
    if (seq.schedule.steps != cfg.schedule.steps ||
        seq.schedule.horizon != cfg.schedule.horizon ||
        seq.schedule.codewords != cfg.schedule.codewords ||
        seq.schedule.codewords_per_step != cfg.schedule.codewords_per_step ||
        seq.schemes != cfg.schemes)
        throw provenance_error("grid file " + path +
                               " was built from a different schedule or schemes");
    return seq;
}

int cmd_quantize(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    GridSequence seq = build_from_config(cfg);

    const std::string grid_path = out_path(args, cfg.output.grid_file, "grid.pmqg");
    write_grid_file(grid_path, seq);
    if (!cfg.output.text_export.empty()) {
        std::ofstream ts(cfg.output.text_export);
        if (!ts) throw config_error("cannot open " + cfg.output.text_export);
        write_grid_text(ts, seq);
    }

    const std::string table_path =
        out_path(args, cfg.output.table_file, "quantize_summary.csv");
    std::ofstream table(table_path);
    if (!table) throw config_error("cannot open " + table_path);
    table << "step,dim,codewords,distortion,newton_iters,lloyd_iters,"
             "hessian_fallbacks,empty_region_merges,grad_norm,weight_sum_residual\n";
    for (std::size_t k = 1; k < seq.steps.size(); ++k) {
        const auto& step = seq.steps[k];
        double wsum = 0.0;
        for (double w : step.joint) wsum += w;
        for (std::size_t n = 0; n < step.marginals.size(); ++n) {
            const auto& r = step.reports[n];
            table << k << ',' << n << ',' << step.marginals[n].size() << ','
                  << fmt(step.distortions[n]) << ',' << r.newton_iters << ','
                  << r.lloyd_iters << ',' << r.hessian_fallbacks << ','
                  << r.empty_region_merges << ',' << fmt(r.grad_norm) << ','
                  << fmt(std::fabs(wsum - 1.0)) << '\n';
        }
    }
    std::cout << "wrote " << grid_path << " and " << table_path << "\n";
    return 0;
}

int cmd_price(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    GridSequence seq = args.grid_path.empty() ? build_from_config(cfg)
                                              : load_checked_grid(cfg, args.grid_path);
    const std::string table_path = out_path(args, cfg.output.table_file, "prices.csv");
    std::ofstream table(table_path);
    if (!table) throw config_error("cannot open " + table_path);
    table << "id,kind,strike,barrier,maturity_step,price\n";
    for (const auto& inst : cfg.instruments) {
        const OptionSpec spec = resolve_instrument(cfg, inst, seq.schedule.steps);
        const double price = price_option(seq, spec);
        table << inst.id << ',' << option_kind_name(spec.kind) << ','
              << fmt(spec.strike) << ','
              << (spec.kind == OptionKind::up_and_out_put ? fmt(spec.barrier) : "")
              << ',' << spec.maturity_step << ',' << fmt(price) << '\n';
    }
    std::cout << "wrote " << table_path << "\n";
    return 0;
}

PathFunctional mc_payoff(const RunConfig& cfg, const OptionSpec& spec,
                         const Schedule& sched) {
    const double t_mat = spec.maturity_step * sched.dt();
    const double df = std::exp(-spec.rate * t_mat);
    const double sf = spec.forward_underlying
                          ? std::exp(-spec.rate * (sched.horizon - t_mat))
                          : 1.0;
    const double strike = spec.strike;
    const bool call = spec.kind == OptionKind::european_call;
    if (spec.kind == OptionKind::up_and_out_put) {
        const double barrier = spec.barrier;
        std::vector<double> monitor_times;
        for (int k : spec.monitor_steps)
            if (k <= spec.maturity_step) monitor_times.push_back(k * sched.dt());
        return [=](const std::vector<double>& times,
                   const std::vector<std::vector<double>>& states) {
            const double dt_mc = times[1] - times[0];
            for (double t : monitor_times) {
                const auto idx = static_cast<std::size_t>(std::lround(t / dt_mc));
                if (idx < states.size() && states[idx][0] >= barrier) return 0.0;
            }
            return df * std::max(strike - states.back()[0] * sf, 0.0);
        };
    }
    return [=](const std::vector<double>&,
               const std::vector<std::vector<double>>& states) {
        const double s = states.back()[0] * sf;
        return df * (call ? std::max(s - strike, 0.0) : std::max(strike - s, 0.0));
    };
}

int cmd_compare_mc(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    GridSequence seq = args.grid_path.empty() ? build_from_config(cfg)
                                              : load_checked_grid(cfg, args.grid_path);
    auto model = build_model(cfg);
    const std::string table_path = out_path(args, cfg.output.table_file, "compare_mc.csv");
    std::ofstream table(table_path);
    if (!table) throw config_error("cannot open " + table_path);
    table << "id,kind,strike,barrier,pmq_price,mc_mean,mc_stderr,z\n";
    for (const auto& inst : cfg.instruments) {
        const OptionSpec spec = resolve_instrument(cfg, inst, seq.schedule.steps);
        if (spec.kind == OptionKind::bermudan_put)
            throw config_error(
                "compare-mc: no Monte Carlo benchmark for Bermudan exercise; "
                "compare the European leg instead");
        const double pmq_price = price_option(seq, spec);
        const double t_mat = spec.maturity_step * seq.schedule.dt();
        const auto est = mc_price(model, t_mat, mc_payoff(cfg, spec, seq.schedule), cfg.mc);
        const double z =
            est.std_error > 0.0 ? (pmq_price - est.mean) / est.std_error : 0.0;
        table << inst.id << ',' << option_kind_name(spec.kind) << ','
              << fmt(spec.strike) << ','
              << (spec.kind == OptionKind::up_and_out_put ? fmt(spec.barrier) : "")
              << ',' << fmt(pmq_price) << ',' << fmt(est.mean) << ','
              << fmt(est.std_error) << ',' << fmt(z) << '\n';
    }
    std::cout << "wrote " << table_path << "\n";
    return 0;
}

int cmd_calibrate(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    auto quotes =
        load_quotes_file(cfg.calibration.quote_file, cfg.calibration.spot,
                         cfg.calibration.rate, cfg.calibration.moneyness_filter);
    auto result = calibrate(quotes, cfg.calibration.init, cfg.calibration.max_evals,
                            cfg.calibration.settings);
    const std::string table_path =
        out_path(args, cfg.output.table_file, "calibration_report.csv");
    std::ofstream table(table_path);
    if (!table) throw config_error("cannot open " + table_path);
    table << "key,value\n";
    table << "y0," << fmt(result.params.y0) << '\n';
    table << "beta," << fmt(result.params.beta) << '\n';
    table << "nu," << fmt(result.params.nu) << '\n';
    table << "rho," << fmt(result.params.rho) << '\n';
    table << "objective," << fmt(result.objective) << '\n';
    table << "evaluations," << result.evaluations << '\n';
    table << "budget_exhausted," << (result.budget_exhausted ? 1 : 0) << '\n';
    table << "hessian_fallbacks," << result.diagnostics.hessian_fallbacks << '\n';
    table << "inversion_penalties," << result.diagnostics.inversion_penalties << '\n';
    table << "failed_builds," << result.diagnostics.failed_builds << '\n';
    table << "maturity_years,strike,kind,market_implied_vol,residual\n";
    for (std::size_t l = 0; l < quotes.quotes.size(); ++l) {
        const auto& q = quotes.quotes[l];
        table << fmt(q.maturity) << ',' << fmt(q.strike) << ','
              << option_kind_name(q.kind) << ',' << fmt(q.market_vol) << ','
              << (l < result.residuals.size() ? fmt(result.residuals[l]) : "") << '\n';
    }
    std::cout << "wrote " << table_path << "\n";
    return 0;
}

int dispatch(const std::string& task, const CliArgs& args) {
    if (task == "quantize") return cmd_quantize(args);
    if (task == "price") return cmd_price(args);
    if (task == "compare-mc") return cmd_compare_mc(args);
    return cmd_calibrate(args);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"product Markovian quantization toolkit"};
    app.set_version_flag("--version", pmq::library_version);
    app.require_subcommand(1);

    CliArgs args;
    std::string task;
    for (const char* name : {"quantize", "price", "compare-mc", "calibrate"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", args.config_path, "run config JSON")->required();
        sub->add_option("--out", args.out_dir, "output directory");
        sub->add_option("--seed", args.seed, "Monte Carlo seed override");
        sub->add_option("--threads", args.threads, "worker thread count");
        if (std::string(name) == "price" || std::string(name) == "compare-mc")
            sub->add_option("--grid", args.grid_path, "reuse a serialized grid file");
        sub->callback([&task, name]() { task = name; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::create_directories(args.out_dir);
        return dispatch(task, args);
    } catch (const pmq::provenance_error& e) {
        std::cerr << "provenance error: " << e.what() << "\n";
        return 3;
    } catch (const pmq::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const pmq::parameter_domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const pmq::error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        std::ofstream diag(std::filesystem::path(args.out_dir) / "diagnostics.txt");
        diag << "task: " << task << "\nconfig: " << args.config_path
             << "\nerror: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
