#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace acfc {

// Active clamp forward converter, low-side clamp: input vb feeds the primary
// through the transformer two-element model (lm shunt, lr series) into the
// switched node; S1 (with lumped cds) pulls the node to ground, the clamp branch
// (S2 in series with cc) hangs from the node; secondary n:1 into a D3/D4 diode
// stage and an lo/co output filter loaded by rload.
struct ConverterParams {
    double vb = 0.0;    // V, input source
    double d = 0.5;     // duty cycle of S1, in (0,1)
    double fs = 0.0;    // Hz, switching frequency
    double lr = 0.0;    // H, series resonant/leakage inductance
    double lm = 0.0;    // H, magnetizing inductance
    double cds = 0.0;   // F, lumped drain-source capacitance at the S1 node
    double cc = 0.0;    // F, clamp capacitor
    double lo = 0.0;    // H, output inductor
    double co = 0.0;    // F, output capacitor
    double n = 1.0;     // turns ratio primary:secondary
    double rload = 0.0; // ohm, output load
    double rds_on_s1 = 0.0;  // ohm, S1 channel resistance
    double rds_on_s2 = 0.0;  // ohm, S2 channel resistance
    double vf_diode = 0.0;   // V, forward drop of D1..D4
    double rw1 = 0.0;        // ohm, primary winding series resistance
    double rw2p = 0.0;       // ohm, secondary winding resistance referred to primary
    double dead_time_fraction = 0.06;  // fraction of Ts between complementary gates, < min(d, 1-d)
};

// throws std::invalid_argument naming the offending field
void validate(const ConverterParams& p);

// Prototype operating point: 40 V, d = 0.5, 2 MHz, lr 3.9 uH, lm 10.1 uH,
// cds 80 pF, cc 1 uF, lo 100 uH, co 27 uF, n 1, rload 26 ohm, ideal devices.
ConverterParams prototype_preset();

enum class ModeId : int {
    HardSwitchFallback = 0,  // pseudo-mode recorded on forced gate transitions
    Mode1 = 1,  // S1 on, D3 conducting (power transfer)
    Mode2 = 2,  // all switches off, cds charging, D3 conducting
    Mode3 = 3,  // all switches off, cds charging, D3+D4 commutating
    Mode4 = 4,  // D2 conducting into the clamp, D3+D4 commutating
    Mode5 = 5,  // S2 channel on, lm+lr resonating with cc, D4 freewheeling
    Mode6 = 6,  // all switches off, cds discharging, D4 freewheeling
    Mode7 = 7,  // all switches off, cds discharging, D3+D4 commutating
    Mode8 = 8,  // D1 (body diode of S1) conducting, D3+D4 commutating
    Mode9 = 9,  // S1 on, D3+D4 commutating
};

struct CircuitState {
    double i_lm = 0.0;   // A, magnetizing inductor
    double i_lr = 0.0;   // A, series inductor = primary terminal current
    double v_ds1 = 0.0;  // V, across S1 / cds
    double v_cc = 0.0;   // V, clamp capacitor
    double i_lo = 0.0;   // A, output inductor
    double v_co = 0.0;   // V, output capacitor
};

// Affine dynamics dx/dt = A*x + b over the state order
// [i_lm, i_lr, v_ds1, v_cc, i_lo, v_co].
struct ModeSystem {
    std::array<std::array<double, 6>, 6> A{};
    std::array<double, 6> b{};
};

ModeSystem build_mode_system(ModeId mode, const ConverterParams& p);

// Successor mode due NOW at (state, mode, gates), or nullopt if the mode is
// consistent. Guard-driven exits fire when strictly past the crossing (1 mV /
// 1 uA tolerances); gate-driven exits fire when the gate pattern contradicts the
// mode; HardSwitchFallback is returned when a gate is on while the node voltage
// has not reached its switched value.
std::optional<ModeId> detect_transition(const CircuitState& x, ModeId mode,
                                        const ConverterParams& p,
                                        bool gate_s1, bool gate_s2);

struct WaveformRecord {
    double time_s = 0.0;
    ModeId mode = ModeId::Mode1;
    double i_lm_a = 0.0;
    double i_lr_a = 0.0;
    double v_ds1_v = 0.0;
    double v_cc_v = 0.0;
    double i_lo_a = 0.0;
    double v_co_v = 0.0;
    double i_d3_a = 0.0;  // forward diode current, secondary side
    double i_d4_a = 0.0;  // freewheeling diode current
    double v_n1_v = 0.0;  // primary winding (magnetizing branch) voltage
    double v_n2_v = 0.0;  // secondary winding voltage, v_n1 / n
    bool gate_s1 = false;
    bool gate_s2 = false;
};

struct TransitionEvent {
    double time_s = 0.0;
    ModeId from = ModeId::Mode1;
    ModeId to = ModeId::Mode1;
    CircuitState before;
    CircuitState after;
    bool hard_switch = false;      // true when a gate forced the node voltage
    double switching_loss_j = 0.0; // energy booked by the forced collapse
};

struct StepControl {
    double step_period_divisor = 2000.0;  // step <= Ts / this
    double step_resonance_divisor = 50.0; // step <= 2*pi*sqrt(lr*cds) / this
    double bisect_tol_s = 1e-16;          // event localization window
};

struct PeriodTotals {
    double e_in_j = 0.0;
    double e_out_j = 0.0;
    std::map<std::string, double> e_loss_j;  // per-element dissipated energy
};

struct SimulationResult {
    std::vector<WaveformRecord> records;
    std::vector<TransitionEvent> events;
    CircuitState final_state;
    ModeId final_mode = ModeId::Mode9;
    PeriodTotals totals;  // accumulated over all simulated cycles
};

// Integrates the switched system for `cycles` full periods. Starts from the
// given state/mode, or from the warm-start estimate when absent.
SimulationResult simulate(const ConverterParams& p, int cycles,
                          const StepControl& step = {},
                          std::optional<CircuitState> initial_state = std::nullopt,
                          std::optional<ModeId> initial_mode = std::nullopt);

struct ZvsVerdict {
    bool zvs = false;
    double body_diode_conduction_s = 0.0;  // anti-parallel diode time before gate-on
};

struct SteadyStateReport {
    bool converged = false;
    int cycles_used = 0;
    double residual = 0.0;  // final normalized period-boundary state mismatch
    double period_s = 0.0;
    double v_cc_mean = 0.0;
    double v_ds1_peak = 0.0;
    double v_out_mean = 0.0;
    double i_out_mean = 0.0;
    std::optional<double> i_lr_at_mode6_entry;  // signed; absent if no 5->6 event
    ZvsVerdict zvs_s1;
    ZvsVerdict zvs_s2;
    double p_in = 0.0;   // W, mean vb * i_in over the final period
    double p_out = 0.0;  // W, mean v_co^2 / rload
    std::map<std::string, double> loss_breakdown;  // W per element, final period
    CircuitState period_start_state;
};

struct SteadyControl {
    double tolerance = 1e-6;  // normalized inf-norm mismatch at period boundaries
    int max_cycles = 5000;
    StepControl step;
};

struct SteadyResult {
    SteadyStateReport report;
    std::vector<WaveformRecord> records;  // final recorded period
    std::vector<TransitionEvent> events;  // transitions of the final period
};

// Iterates the cycle map to a periodic solution (fixed-point iteration with
// guarded affine extrapolation), then records one full period.
// Non-convergence is reported, not thrown.
SteadyResult steady_state(const ConverterParams& p, const SteadyControl& control = {});

struct ZvsCheckResult {
    ZvsVerdict s1;
    ZvsVerdict s2;
};

// Re-derives the per-switch verdicts from the recorded waveforms alone:
// switch-voltage at the gate-on instant below tolerance AND a positive-duration
// anti-parallel-diode conduction window before it. Records are treated as one
// full period (the conduction window may wrap). Throws precondition_error if the
// report is not converged.
ZvsCheckResult zvs_check(const SteadyStateReport& report,
                         std::span<const WaveformRecord> records);

struct LossBreakdown {
    std::map<std::string, double> element_w;
    double p_in_w = 0.0;
    double p_out_w = 0.0;
    double efficiency = 0.0;  // p_out / p_in
};

// Fixed-trace accounting: integrates i^2*R and vf*|i| over the recorded period;
// forced-switching energies are taken from the event list. Throws
// precondition_error when the trace has no input power to normalize by.
LossBreakdown loss_breakdown(std::span<const WaveformRecord> records,
                             const ConverterParams& p,
                             std::span<const TransitionEvent> events = {});

struct BalanceReport {
    double volt_second_residual = 0.0;  // |mean v_n1| normalized by vb*d
    double cc_charge_residual = 0.0;    // net clamp charge / intraperiod swing
    double co_charge_residual = 0.0;
    double energy_residual = 0.0;       // closure error normalized by input energy
};

BalanceReport verify_balances(std::span<const WaveformRecord> records,
                              const ConverterParams& p,
                              std::span<const TransitionEvent> events = {});

// header: time_s,mode,i_lm_a,i_lr_a,v_ds1_v,v_cc_v,i_lo_a,v_co_v,i_d3_a,i_d4_a,v_n1_v,gate_s1,gate_s2
std::string waveform_csv(std::span<const WaveformRecord> records);

// flat key/value JSON text of the report
std::string report_json(const SteadyStateReport& report);

}  // namespace acfc
