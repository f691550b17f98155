#pragma once

#include <string>
#include <vector>

#include "acfc/converter.hpp"
#include "acfc/transformer.hpp"

namespace acfc {

struct SimControls {
    // one decade looser than the library default: hard-switched operating
    // points carry event-sequence noise near 5e-6 at the period boundary, and
    // the tool should report them rather than declare non-convergence
    double tolerance = 1e-5;
    int max_cycles = 8000;
};

struct RunConfig {
    ConverterParams converter;
    bool converter_set = false;  // a preset or explicit converter values were supplied
    TransformerParams transformer;
    bool transformer_set = false;
    SimControls sim;
    std::string out_dir;  // empty = environment default or cwd
    std::string sweep_param = "fs";
    std::vector<double> sweep_values;
};

// "table1" (transformer) or "prototype" (converter + transformer); throws
// config_error for unknown names
void apply_preset(RunConfig& cfg, const std::string& name);

// One dotted key per line, `key = value`, '#' starts a comment. Converter keys
// live under converter.*, transformer under transformer.*, solver controls under
// sim.*, sweep descriptor under sweep.* (sweep.values is comma separated),
// output.dir for the output directory. Bare converter field names are accepted
// as shorthand. Throws config_error naming the line/key.
RunConfig parse_config_file(const std::string& path);

// `--set key=value` override, same key grammar as the file
void apply_override(RunConfig& cfg, const std::string& key_eq_value);

// resolves the output directory: explicit flag > config > ACFC_OUT_DIR > "."
std::string resolve_out_dir(const RunConfig& cfg, const std::string& flag_value);

}  // namespace acfc
