#include <cstdlib>
#include <fstream>
#include <sstream>

#include "acfc/config.hpp"
#include "acfc/errors.hpp"
#include "acfc/sweep.hpp"

namespace acfc {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& text, const std::string& where) {
    const std::string t = trim(text);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size())
        throw config_error(where + ": not a number: '" + t + "'");
    return v;
}

bool set_transformer_param(TransformerParams& p, const std::string& name, double value) {
    if (name == "r1") p.r1 = value;
    else if (name == "r2p") p.r2p = value;
    else if (name == "llk1") p.llk1 = value;
    else if (name == "llk2p") p.llk2p = value;
    else if (name == "c1") p.c1 = value;
    else if (name == "c2p") p.c2p = value;
    else if (name == "c12") p.c12 = value;
    else if (name == "lm1") p.lm1 = value;
    else if (name == "n") p.n = value;
    else return false;
    return true;
}

bool is_converter_field(const std::string& name) {
    static const char* fields[] = {
        "vb", "d", "fs", "lr", "lm", "cds", "cc", "lo", "co", "n", "rload",
        "rds_on_s1", "rds_on_s2", "vf_diode", "rw1", "rw2p", "dead_time_fraction",
    };
    for (const char* f : fields)
        if (name == f) return true;
    return false;
}

std::vector<double> parse_value_list(const std::string& text, const std::string& where) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) continue;
        out.push_back(parse_number(item, where));
    }
    if (out.empty()) throw config_error(where + ": empty value list");
    return out;
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value,
               const std::string& where) {
    if (key == "preset") {
        apply_preset(cfg, trim(value));
        return;
    }
    if (key == "output.dir" || key == "out_dir") {
        cfg.out_dir = trim(value);
        return;
    }
    if (key == "sweep.param") {
        cfg.sweep_param = trim(value);
        return;
    }
    if (key == "sweep.values") {
        cfg.sweep_values = parse_value_list(value, where);
        return;
    }
    if (key == "sim.tolerance") {
        cfg.sim.tolerance = parse_number(value, where);
        return;
    }
    if (key == "sim.max_cycles") {
        cfg.sim.max_cycles = static_cast<int>(parse_number(value, where));
        return;
    }
    if (key.rfind("converter.", 0) == 0) {
        try {
            set_converter_param(cfg.converter, key.substr(10), parse_number(value, where));
        } catch (const config_error& e) {
            throw config_error(where + ": " + e.what());
        }
        cfg.converter_set = true;
        return;
    }
    if (key.rfind("transformer.", 0) == 0) {
        if (!set_transformer_param(cfg.transformer, key.substr(12), parse_number(value, where)))
            throw config_error(where + ": unknown transformer parameter: " + key.substr(12));
        cfg.transformer_set = true;
        return;
    }
    if (is_converter_field(key)) {  // bare converter names as shorthand
        set_converter_param(cfg.converter, key, parse_number(value, where));
        cfg.converter_set = true;
        return;
    }
    throw config_error(where + ": unknown key: " + key);
}

}  // namespace

void apply_preset(RunConfig& cfg, const std::string& name) {
    if (name == "table1") {
        cfg.transformer = table1_preset();
        cfg.transformer_set = true;
    } else if (name == "prototype") {
        cfg.converter = prototype_preset();
        cfg.converter_set = true;
        cfg.transformer = table1_preset();
        cfg.transformer_set = true;
    } else {
        throw config_error("unknown preset: " + name + " (expected table1 or prototype)");
    }
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
        apply_key(cfg, key, value, path + ":" + std::to_string(lineno));
    }
    return cfg;
}

void apply_override(RunConfig& cfg, const std::string& key_eq_value) {
    const auto eq = key_eq_value.find('=');
    if (eq == std::string::npos)
        throw config_error("override must be key=value: " + key_eq_value);
    const std::string key = trim(key_eq_value.substr(0, eq));
    const std::string value = trim(key_eq_value.substr(eq + 1));
    if (key.empty()) throw config_error("override has empty key: " + key_eq_value);
    apply_key(cfg, key, value, "--set " + key);
}

std::string resolve_out_dir(const RunConfig& cfg, const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* env = std::getenv("ACFC_OUT_DIR"); env && *env) return env;
    return ".";
}

}  // namespace acfc
