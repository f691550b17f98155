#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace acfc {

using cplx = std::complex<double>;

// Lumped equivalent circuit of the coreless PCB transformer, everything referred
// to the primary: series r1 + llk1, shunt c1 at the input terminals, shunt lm1,
// interwinding c12 bridging input to output, series llk2p + r2p, shunt c2p at the
// output, then an ideal n:1 scaling to the physical secondary.
struct TransformerParams {
    double r1 = 0.0;     // ohm, primary winding
    double r2p = 0.0;    // ohm, secondary winding referred to primary
    double llk1 = 0.0;   // H, primary leakage
    double llk2p = 0.0;  // H, secondary leakage referred to primary
    double c1 = 0.0;     // F, primary self-capacitance
    double c2p = 0.0;    // F, secondary self-capacitance referred to primary
    double c12 = 0.0;    // F, interwinding capacitance
    double lm1 = 0.0;    // H, magnetizing inductance
    double n = 1.0;      // turns ratio primary:secondary, > 0
};

// throws std::invalid_argument naming the offending field
void validate(const TransformerParams& p);

struct FrequencyResponsePoint {
    double frequency_hz = 0.0;
    cplx gain;  // V_secondary / V_primary
    cplx zin;   // ohm, seen from the primary terminals
};

// Closed-form evaluation at s = j*2*pi*f. load_ohm is an optional resistor across
// the physical secondary; absent means open circuit. Throws singular_network if
// the network has no finite solution at this frequency.
cplx transfer_gain(const TransformerParams& p, double frequency_hz,
                   std::optional<double> load_ohm = std::nullopt);
cplx input_impedance(const TransformerParams& p, double frequency_hz,
                     std::optional<double> load_ohm = std::nullopt);

struct NodalResult {
    cplx gain;
    cplx zin;
};

// Independent cross-check: assembles the full node/branch equation system of the
// same circuit and solves it numerically. Shares no algebra with the closed form.
NodalResult nodal_oracle(const TransformerParams& p, double frequency_hz,
                         std::optional<double> load_ohm = std::nullopt);

// Log-spaced grid, ascending, both endpoints included; each entry equals the
// pointwise transfer_gain / input_impedance calls.
std::vector<FrequencyResponsePoint> frequency_sweep(const TransformerParams& p,
                                                    double f_start, double f_stop,
                                                    int points_per_decade);

struct BandwidthResult {
    std::optional<double> lower_hz;  // -3 dB edge below the plateau, absent if not in range
    std::optional<double> upper_hz;
    double plateau_gain = 0.0;  // |gain| magnitude the -3 dB threshold refers to
};

BandwidthResult bandwidth(const TransformerParams& p, double f_start, double f_stop);

TransformerParams table1_preset();

// Physical winding geometry of the measured transformer. Documentation only:
// no computation in this library derives circuit values from geometry.
struct WindingGeometry {
    double inner_radius_m;
    double outer_radius_m;
    double conductor_width_m;
    double conductor_separation_m;
    double conductor_height_m;
    double board_thickness_m;
    int turns_primary;
    int turns_secondary;
};

WindingGeometry table1_geometry();

// header: frequency_hz,gain_re,gain_im,gain_mag,gain_db,zin_re,zin_im,zin_mag
std::string sweep_csv(const std::vector<FrequencyResponsePoint>& points);

}  // namespace acfc
