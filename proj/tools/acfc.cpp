#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "acfc/config.hpp"
#include "acfc/converter.hpp"
#include "acfc/design_rules.hpp"
#include "acfc/errors.hpp"
#include "acfc/sweep.hpp"
#include "acfc/transformer.hpp"

namespace {

constexpr int EXIT_OK = 0;
constexpr int EXIT_CONFIG = 1;
constexpr int EXIT_SIM = 2;
constexpr int EXIT_RULES = 3;

void write_file(const std::string& dir, const std::string& name, const std::string& text) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw acfc::config_error("cannot write " + path.string());
    out << text;
    if (!out) throw acfc::config_error("write failed: " + path.string());
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

int cmd_bode(const acfc::RunConfig& cfg, const std::string& out_dir, double f_from,
             double f_to, int ppd) {
    if (!cfg.transformer_set)
        throw acfc::config_error("no transformer parameters supplied (use --preset table1 or a config file)");
    acfc::validate(cfg.transformer);

    const auto points = acfc::frequency_sweep(cfg.transformer, f_from, f_to, ppd);
    const auto bw = acfc::bandwidth(cfg.transformer, f_from, f_to);
    write_file(out_dir, "bode.csv", acfc::sweep_csv(points));

    std::string summary = "{\n";
    summary += "  \"points\": " + std::to_string(points.size()) + ",\n";
    summary += "  \"f_start_hz\": " + fmt(f_from) + ",\n";
    summary += "  \"f_stop_hz\": " + fmt(f_to) + ",\n";
    summary += "  \"plateau_gain\": " + fmt(bw.plateau_gain) + ",\n";
    summary += "  \"lower_3db_hz\": " + (bw.lower_hz ? fmt(*bw.lower_hz) : "null") + ",\n";
    summary += "  \"upper_3db_hz\": " + (bw.upper_hz ? fmt(*bw.upper_hz) : "null") + "\n";
    summary += "}\n";
    write_file(out_dir, "bode_summary.json", summary);
    std::cout << summary;
    return EXIT_OK;
}

int cmd_simulate(const acfc::RunConfig& cfg, const std::string& out_dir) {
    if (!cfg.converter_set)
        throw acfc::config_error("no converter parameters supplied (use --preset prototype or a config file)");
    acfc::validate(cfg.converter);

    acfc::SteadyControl control;
    control.tolerance = cfg.sim.tolerance;
    control.max_cycles = cfg.sim.max_cycles;
    const acfc::SteadyResult res = acfc::steady_state(cfg.converter, control);

    write_file(out_dir, "waveform.csv", acfc::waveform_csv(res.records));
    const std::string rep = acfc::report_json(res.report);
    write_file(out_dir, "report.json", rep);
    std::cout << rep;

    if (!res.report.converged) {
        std::cerr << "steady state did not converge within " << cfg.sim.max_cycles
                  << " cycles (residual " << fmt(res.report.residual) << ")\n";
        return EXIT_SIM;
    }
    return EXIT_OK;
}

int cmd_check(const acfc::RunConfig& cfg, const std::string& out_dir, bool strict) {
    if (!cfg.converter_set)
        throw acfc::config_error("no converter parameters supplied (use --preset prototype or a config file)");
    acfc::validate(cfg.converter);

    const auto rules = acfc::feasibility_report(cfg.converter);
    std::cout << acfc::report_table(rules);
    write_file(out_dir, "check.json", acfc::report_json(rules));

    bool all_pass = true;
    for (const auto& r : rules) all_pass = all_pass && r.pass;
    if (!all_pass && strict) return EXIT_RULES;
    return EXIT_OK;
}

int cmd_sweep(const acfc::RunConfig& cfg, const std::string& out_dir,
              const std::string& param, const std::vector<double>& values,
              bool parallel) {
    if (!cfg.converter_set)
        throw acfc::config_error("no converter parameters supplied (use --preset prototype or a config file)");
    acfc::validate(cfg.converter);
    if (values.empty()) throw acfc::config_error("sweep value list is empty");

    acfc::SweepRequest req;
    req.param = param;
    req.values = values;
    req.control.tolerance = cfg.sim.tolerance;
    req.control.max_cycles = cfg.sim.max_cycles;
    const auto rows = acfc::run_sweep(cfg.converter, req,
                                      parallel ? acfc::ExecutionPolicy::Parallel
                                               : acfc::ExecutionPolicy::Serial);
    const std::string csv = acfc::sweep_csv(rows, param);
    write_file(out_dir, "sweep.csv", csv);
    std::cout << csv;
    return EXIT_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"active clamp forward converter design toolkit"};
    app.require_subcommand(1);

    std::string config_path, config_positional, preset, out_flag;
    std::vector<std::string> overrides;
    app.add_option("config_file", config_positional, "config file (key = value lines)");
    app.add_option("--config", config_path, "config file (key = value lines)");
    app.add_option("--preset", preset, "built-in parameter set: table1 | prototype");
    app.add_option("--set", overrides, "override, key=value (repeatable)")->take_all();
    app.add_option("--out", out_flag, "output directory (default: config, ACFC_OUT_DIR, or cwd)");

    double f_from = 10e3, f_to = 100e6;
    int ppd = 20;
    CLI::App* bode = app.add_subcommand("bode", "transformer frequency response + bandwidth");
    bode->add_option("--from", f_from, "start frequency, Hz");
    bode->add_option("--to", f_to, "stop frequency, Hz");
    bode->add_option("--ppd", ppd, "grid points per decade");

    CLI::App* simulate = app.add_subcommand("simulate", "steady-state converter run");

    bool strict = false;
    CLI::App* check = app.add_subcommand("check", "design-rule feasibility report");
    check->add_flag("--strict", strict, "exit 3 when any rule fails");

    std::string sweep_param;
    std::vector<double> sweep_values;
    double sw_from = 0.0, sw_to = 0.0;
    int sw_points = 0;
    bool parallel = false;
    CLI::App* sweep = app.add_subcommand("sweep", "steady state over a parameter range");
    sweep->add_option("--param", sweep_param, "converter parameter to vary (default fs)");
    sweep->add_option("--values", sweep_values, "explicit list of values")->delimiter(',');
    sweep->add_option("--from", sw_from, "range start (used with --to/--points)");
    sweep->add_option("--to", sw_to, "range end");
    sweep->add_option("--points", sw_points, "number of evenly spaced range points");
    sweep->add_flag("--parallel", parallel, "evaluate points concurrently");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return EXIT_CONFIG;
    }

    try {
        acfc::RunConfig cfg;
        if (!config_positional.empty() && !config_path.empty())
            throw acfc::config_error("config file given both positionally and via --config");
        const std::string file = !config_path.empty() ? config_path : config_positional;
        if (!file.empty()) cfg = acfc::parse_config_file(file);
        if (!preset.empty()) acfc::apply_preset(cfg, preset);
        for (const auto& kv : overrides) acfc::apply_override(cfg, kv);
        const std::string out_dir = acfc::resolve_out_dir(cfg, out_flag);

        if (bode->parsed()) {
            if (!(f_from > 0.0 && f_from < f_to))
                throw acfc::config_error("bode range must satisfy 0 < --from < --to");
            if (ppd < 1) throw acfc::config_error("--ppd must be >= 1");
            return cmd_bode(cfg, out_dir, f_from, f_to, ppd);
        }
        if (simulate->parsed()) return cmd_simulate(cfg, out_dir);
        if (check->parsed()) return cmd_check(cfg, out_dir, strict);
        if (sweep->parsed()) {
            std::string param = !sweep_param.empty() ? sweep_param : cfg.sweep_param;
            std::vector<double> values = !sweep_values.empty() ? sweep_values : cfg.sweep_values;
            if (values.empty() && sw_points > 0) {
                if (!(sw_points >= 2) || !(sw_to > sw_from))
                    throw acfc::config_error("sweep range needs --from < --to and --points >= 2");
                for (int i = 0; i < sw_points; ++i)
                    values.push_back(sw_from + (sw_to - sw_from) * i / (sw_points - 1));
            }
            return cmd_sweep(cfg, out_dir, param, values, parallel);
        }
        throw acfc::config_error("no subcommand given");
    } catch (const acfc::integration_error& e) {
        std::cerr << "simulation failure: " << e.what() << "\n";
        return EXIT_SIM;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return EXIT_CONFIG;
    }
}
