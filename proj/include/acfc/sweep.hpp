#pragma once

#include <string>
#include <vector>

#include "acfc/converter.hpp"

namespace acfc {

enum class ExecutionPolicy {
    Serial,    // reference path, one point after another
    Parallel,  // OpenMP over points when compiled in, otherwise identical to Serial
};

struct SweepRequest {
    std::string param = "fs";     // ConverterParams field to vary
    std::vector<double> values;   // evaluated in order
    SteadyControl control;
};

struct SweepPointResult {
    double value = 0.0;
    bool ok = false;         // false when the point threw; error holds the message
    std::string error;
    SteadyStateReport report;
};

// Runs steady_state at every point. Points are independent; results are returned
// in input order and are identical under both policies.
std::vector<SweepPointResult> run_sweep(const ConverterParams& base,
                                        const SweepRequest& request,
                                        ExecutionPolicy policy);

// one row per point; failed points carry their error text in the last column
std::string sweep_csv(const std::vector<SweepPointResult>& rows,
                      const std::string& param);

// assigns `value` to the named ConverterParams field; throws config_error for
// unknown names
void set_converter_param(ConverterParams& p, const std::string& name, double value);

}  // namespace acfc
