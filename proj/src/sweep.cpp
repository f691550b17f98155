#include <cstdio>

#include "acfc/errors.hpp"
#include "acfc/sweep.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace acfc {

void set_converter_param(ConverterParams& p, const std::string& name, double value) {
    if (name == "vb") p.vb = value;
    else if (name == "d") p.d = value;
    else if (name == "fs") p.fs = value;
    else if (name == "lr") p.lr = value;
    else if (name == "lm") p.lm = value;
    else if (name == "cds") p.cds = value;
    else if (name == "cc") p.cc = value;
    else if (name == "lo") p.lo = value;
    else if (name == "co") p.co = value;
    else if (name == "n") p.n = value;
    else if (name == "rload") p.rload = value;
    else if (name == "rds_on_s1") p.rds_on_s1 = value;
    else if (name == "rds_on_s2") p.rds_on_s2 = value;
    else if (name == "vf_diode") p.vf_diode = value;
    else if (name == "rw1") p.rw1 = value;
    else if (name == "rw2p") p.rw2p = value;
    else if (name == "dead_time_fraction") p.dead_time_fraction = value;
    else throw config_error("unknown converter parameter: " + name);
}

std::vector<SweepPointResult> run_sweep(const ConverterParams& base,
                                        const SweepRequest& request,
                                        ExecutionPolicy policy) {
    if (request.values.empty()) throw config_error("sweep value list is empty");
    {
        ConverterParams probe = base;  // reject unknown names before any work
        set_converter_param(probe, request.param, request.values.front());
    }

    const int npts = static_cast<int>(request.values.size());
    std::vector<SweepPointResult> out(npts);

    auto eval_point = [&](int i) {
        SweepPointResult& r = out[i];
        r.value = request.values[i];
        try {
            ConverterParams p = base;
            set_converter_param(p, request.param, r.value);
            r.report = steady_state(p, request.control).report;
            r.ok = true;
        } catch (const std::exception& e) {
            r.ok = false;
            r.error = e.what();
        }
    };

#ifdef _OPENMP
    if (policy == ExecutionPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < npts; ++i) eval_point(i);
        return out;
    }
#else
    (void)policy;
#endif
    for (int i = 0; i < npts; ++i) eval_point(i);
    return out;
}

std::string sweep_csv(const std::vector<SweepPointResult>& rows,
                      const std::string& param) {
    std::string out = param +
        ",converged,cycles_used,residual,v_cc_mean_v,v_ds1_peak_v,v_out_mean_v,"
        "i_out_mean_a,zvs_s1,body_diode_s1_s,zvs_s2,body_diode_s2_s,p_in_w,p_out_w,"
        "efficiency,error\n";
    char line[512];
    for (const auto& r : rows) {
        std::string err = r.error;
        for (char& ch : err)
            if (ch == ',' || ch == '\n' || ch == '"') ch = ';';
        const SteadyStateReport& s = r.report;
        const double eff = s.p_in > 0.0 ? s.p_out / s.p_in : 0.0;
        std::snprintf(line, sizeof line,
                      "%.12g,%d,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%d,%.12g,%d,%.12g,"
                      "%.12g,%.12g,%.12g,%s\n",
                      r.value, r.ok && s.converged ? 1 : 0, s.cycles_used, s.residual,
                      s.v_cc_mean, s.v_ds1_peak, s.v_out_mean, s.i_out_mean,
                      s.zvs_s1.zvs ? 1 : 0, s.zvs_s1.body_diode_conduction_s,
                      s.zvs_s2.zvs ? 1 : 0, s.zvs_s2.body_diode_conduction_s,
                      s.p_in, s.p_out, eff, err.c_str());
        out += line;
    }
    return out;
}

}  // namespace acfc
