#pragma once

#include <string>
#include <vector>

#include "acfc/converter.hpp"

namespace acfc {

// Closed-form sizing rules for the active clamp forward stage. All arguments in
// SI base units; preconditions throw std::invalid_argument naming the field.

// magnetizing current magnitude at the end of the clamp interval: d*vb/(2*lm*fs)
double ilr_t6(double d, double vb, double lm, double fs);

// smallest series inductance whose stored energy can displace the node charge:
// cds*vin^2/ilr^2; throws std::domain_error when ilr is zero
double lr_min(double cds, double vin, double ilr);

// largest switching frequency with enough magnetizing energy for the node swing:
// sqrt(lr*d^2/(4*lm^2*cds))
double fs_max(double lr, double d, double lm, double cds);

// smallest clamp capacitor keeping the clamp resonance slow against the off
// interval: 25*(1-d)^2/(pi^2*fs^2*(lm+lr))
double cc_min(double d, double fs, double lm, double lr);

// smallest switching frequency for a given clamp capacitor (inverse of cc_min):
// sqrt(25*(1-d)^2/(pi^2*cc*(lm+lr)))
double fs_min(double d, double cc, double lm, double lr);

// steady-state clamp capacitor voltage: vb/(1-d)
double vc_expected(double vb, double d);

// off-state switch stress equals the clamp voltage (ripple neglected)
double vds1_peak_expected(double vb, double d);

struct DesignReport {
    std::string rule;        // "lr_min" | "fs_max" | "fs_min" | "cc_min"
    double limit_value = 0;  // the rule's boundary value
    double operating_value = 0;
    std::string unit;
    double margin = 0;  // ratio oriented so that margin > 1 means pass
    bool pass = false;  // pass <=> margin > 1, ties fail
    std::string note;
};

std::vector<DesignReport> feasibility_report(const ConverterParams& p);

std::string report_table(const std::vector<DesignReport>& rules);
std::string report_json(const std::vector<DesignReport>& rules);

}  // namespace acfc
