#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "acfc/design_rules.hpp"
#include "acfc/errors.hpp"

namespace acfc {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

double ilr_t6(double d, double vb, double lm, double fs) {
    require(d > 0.0 && d < 1.0, "ilr_t6: d must be in (0,1)");
    require(vb >= 0.0, "ilr_t6: vb must be >= 0");
    require(lm > 0.0, "ilr_t6: lm must be > 0");
    require(fs > 0.0, "ilr_t6: fs must be > 0");
    return d * vb / (2.0 * lm * fs);
}

double lr_min(double cds, double vin, double ilr) {
    require(cds >= 0.0, "lr_min: cds must be >= 0");
    require(vin >= 0.0, "lr_min: vin must be >= 0");
    if (ilr == 0.0)
        throw std::domain_error("lr_min: ilr is zero, no inductive energy available");
    return cds * vin * vin / (ilr * ilr);
}

double fs_max(double lr, double d, double lm, double cds) {
    require(lr > 0.0, "fs_max: lr must be > 0");
    require(d > 0.0 && d < 1.0, "fs_max: d must be in (0,1)");
    require(lm > 0.0, "fs_max: lm must be > 0");
    require(cds > 0.0, "fs_max: cds must be > 0");
    return std::sqrt(lr * d * d / (4.0 * lm * lm * cds));
}

double cc_min(double d, double fs, double lm, double lr) {
    require(d > 0.0 && d < 1.0, "cc_min: d must be in (0,1)");
    require(fs > 0.0, "cc_min: fs must be > 0");
    require(lm > 0.0, "cc_min: lm must be > 0");
    require(lr >= 0.0, "cc_min: lr must be >= 0");
    const double omd = 1.0 - d;
    return 25.0 * omd * omd / (M_PI * M_PI * fs * fs * (lm + lr));
}

double fs_min(double d, double cc, double lm, double lr) {
    require(d > 0.0 && d < 1.0, "fs_min: d must be in (0,1)");
    require(cc > 0.0, "fs_min: cc must be > 0");
    require(lm > 0.0, "fs_min: lm must be > 0");
    require(lr >= 0.0, "fs_min: lr must be >= 0");
    const double omd = 1.0 - d;
    return std::sqrt(25.0 * omd * omd / (M_PI * M_PI * cc * (lm + lr)));
}

double vc_expected(double vb, double d) {
    require(d >= 0.0 && d < 1.0, "vc_expected: d must be in [0,1)");
    require(vb >= 0.0, "vc_expected: vb must be >= 0");
    return vb / (1.0 - d);
}

double vds1_peak_expected(double vb, double d) { return vc_expected(vb, d); }

std::vector<DesignReport> feasibility_report(const ConverterParams& p) {
    validate(p);
    std::vector<DesignReport> out;

    const double i6 = ilr_t6(p.d, p.vb, p.lm, p.fs);

    {
        DesignReport r;
        r.rule = "lr_min";
        r.unit = "H";
        r.limit_value = (i6 > 0.0) ? lr_min(p.cds, p.vb, i6)
                                   : std::numeric_limits<double>::infinity();
        r.operating_value = p.lr;
        r.margin = r.operating_value / r.limit_value;
        r.pass = r.margin > 1.0;
        r.note = "series inductance energy vs node charge displacement";
        out.push_back(r);
    }
    {
        DesignReport r;
        r.rule = "fs_max";
        r.unit = "Hz";
        r.limit_value = fs_max(p.lr, p.d, p.lm, p.cds);
        r.operating_value = p.fs;
        r.margin = r.limit_value / r.operating_value;
        r.pass = r.margin > 1.0;
        r.note = "soft-switching ceiling on the switching frequency";
        out.push_back(r);
    }
    {
        DesignReport r;
        r.rule = "fs_min";
        r.unit = "Hz";
        r.limit_value = fs_min(p.d, p.cc, p.lm, p.lr);
        r.operating_value = p.fs;
        r.margin = r.operating_value / r.limit_value;
        r.pass = r.margin > 1.0;
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "clamp-resonance floor; formula gives %.4g Hz, the reference design "
                      "documentation quotes a 650 kHz floor for its component set",
                      r.limit_value);
        r.note = buf;
        out.push_back(r);
    }
    {
        DesignReport r;
        r.rule = "cc_min";
        r.unit = "F";
        r.limit_value = cc_min(p.d, p.fs, p.lm, p.lr);
        r.operating_value = p.cc;
        r.margin = r.operating_value / r.limit_value;
        r.pass = r.margin > 1.0;
        r.note = "clamp capacitor large enough to keep its resonance slow";
        out.push_back(r);
    }
    return out;
}

std::string report_table(const std::vector<DesignReport>& rules) {
    std::string out;
    char line[512];
    std::snprintf(line, sizeof line, "%-8s %-14s %-14s %-5s %-10s %-6s %s\n", "rule",
                  "limit", "operating", "unit", "margin", "pass", "note");
    out += line;
    for (const auto& r : rules) {
        std::snprintf(line, sizeof line, "%-8s %-14.6g %-14.6g %-5s %-10.4g %-6s %s\n",
                      r.rule.c_str(), r.limit_value, r.operating_value, r.unit.c_str(),
                      r.margin, r.pass ? "yes" : "NO", r.note.c_str());
        out += line;
    }
    return out;
}

std::string report_json(const std::vector<DesignReport>& rules) {
    std::ostringstream os;
    os << "{\n";
    bool all_pass = true;
    char buf[512];
    for (const auto& r : rules) {
        all_pass = all_pass && r.pass;
        std::snprintf(buf, sizeof buf,
                      "  \"%s\": {\"limit\": %.12g, \"operating\": %.12g, \"unit\": \"%s\", "
                      "\"margin\": %.12g, \"pass\": %s, \"note\": \"%s\"},\n",
                      r.rule.c_str(), r.limit_value, r.operating_value, r.unit.c_str(),
                      r.margin, r.pass ? "true" : "false", r.note.c_str());
        os << buf;
    }
    os << "  \"all_pass\": " << (all_pass ? "true" : "false") << "\n}\n";
    return os.str();
}

}  // namespace acfc
