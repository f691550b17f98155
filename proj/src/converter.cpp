#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "acfc/converter.hpp"
#include "acfc/errors.hpp"

namespace acfc {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

enum StateIx { ILM = 0, ILR = 1, VDS = 2, VCC = 3, ILO = 4, VCO = 5 };

// loss accumulator slots; strings must stay in step with loss_key()
enum LossIx {
    L_S1 = 0, L_S2, L_RW1, L_RW2, L_D1, L_D2, L_D3, L_D4, L_HARD1, L_HARD2, NLOSS
};

const char* loss_key(int ix) {
    switch (ix) {
        case L_S1: return "s1_conduction";
        case L_S2: return "s2_conduction";
        case L_RW1: return "primary_winding";
        case L_RW2: return "secondary_winding";
        case L_D1: return "d1";
        case L_D2: return "d2";
        case L_D3: return "d3";
        case L_D4: return "d4";
        case L_HARD1: return "s1_switching";
        case L_HARD2: return "s2_switching";
    }
    return "?";
}

constexpr double EPS_I = 1e-6;  // A, conduction-state crossing tolerance
constexpr double EPS_V = 1e-3;  // V, bias-state crossing tolerance

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// simulation entry preconditions: every element the dynamics divide by
void sim_validate(const ConverterParams& p) {
    validate(p);
    require(p.fs > 0.0, "ConverterParams.fs must be > 0 to simulate");
    require(p.lr > 0.0, "ConverterParams.lr must be > 0 to simulate");
    require(p.lm > 0.0, "ConverterParams.lm must be > 0 to simulate");
    require(p.cds > 0.0, "ConverterParams.cds must be > 0 to simulate");
    require(p.cc > 0.0, "ConverterParams.cc must be > 0 to simulate");
    require(p.lo > 0.0, "ConverterParams.lo must be > 0 to simulate");
    require(p.co > 0.0, "ConverterParams.co must be > 0 to simulate");
    require(p.rload > 0.0, "ConverterParams.rload must be > 0 to simulate");
    require(p.dead_time_fraction < (1.0 - p.d) / 2.0,
            "ConverterParams.dead_time_fraction must be < (1-d)/2 so the S2 window is nonempty");
}

// Continuous dynamics of each conduction pattern. The v_ds1 row is zero in the
// modes that pin the switched node (1, 8, 9); the pinned value is set at entry.
Vec6 deriv(ModeId m, const Vec6& x, const ConverterParams& p) {
    Vec6 dx = Vec6::Zero();
    const double vf = p.vf_diode;
    const double i_lm = x[ILM], i_lr = x[ILR], v_ds = x[VDS];
    const double v_cc = x[VCC], i_lo = x[ILO], v_co = x[VCO];

    dx[VCO] = (i_lo - v_co / p.rload) / p.co;

    switch (m) {
        case ModeId::Mode1:
        case ModeId::Mode2: {
            // S1 path (Mode1) or node charging (Mode2), forward diode alone:
            // the output inductor current is the reflected winding current, so
            // the primary and secondary loops are coupled through a 2x2 solve
            const double rs = (m == ModeId::Mode1) ? p.rds_on_s1 : 0.0;
            const double vsw = (m == ModeId::Mode1) ? 0.0 : v_ds;
            const double u1 = p.vb - (p.rw1 + rs) * i_lr - vsw;
            const double u2 = -v_co - vf - (p.rw2p / (p.n * p.n)) * i_lo;
            const double det = (p.lm + p.lr) * p.lo + p.lr * p.lm / (p.n * p.n);
            dx[ILM] = (p.lo * u1 - (p.lr / p.n) * u2) / det;
            dx[ILO] = ((p.lm / p.n) * u1 + (p.lm + p.lr) * u2) / det;
            dx[ILR] = dx[ILM] + dx[ILO] / p.n;
            if (m == ModeId::Mode2) dx[VDS] = i_lr / p.cds;
            break;
        }
        case ModeId::Mode3:
        case ModeId::Mode7: {
            // all switches off, both output diodes conduct: the winding is
            // shorted through the commutating secondary
            dx[ILM] = p.rw2p * (i_lr - i_lm) / p.lm;
            dx[ILR] = (p.vb - p.rw1 * i_lr - p.rw2p * (i_lr - i_lm) - v_ds) / p.lr;
            dx[VDS] = i_lr / p.cds;
            dx[ILO] = (-vf - v_co) / p.lo;
            break;
        }
        case ModeId::Mode4: {
            // clamp branch carries the primary current through D2
            dx[ILM] = p.rw2p * (i_lr - i_lm) / p.lm;
            dx[ILR] = (p.vb - p.rw1 * i_lr - p.rw2p * (i_lr - i_lm) - v_cc - vf) / p.lr;
            dx[VCC] = i_lr / (p.cc + p.cds);
            dx[VDS] = dx[VCC];
            dx[ILO] = (-vf - v_co) / p.lo;
            break;
        }
        case ModeId::Mode5: {
            // S2 channel on: lm + lr in series against the clamp capacitor
            const double di = (p.vb - (p.rw1 + p.rds_on_s2) * i_lr - v_cc) / (p.lm + p.lr);
            dx[ILM] = di;
            dx[ILR] = di;
            dx[VCC] = i_lr / (p.cc + p.cds);
            dx[VDS] = dx[VCC];
            dx[ILO] = (-vf - v_co) / p.lo;
            break;
        }
        case ModeId::Mode6: {
            // all off, freewheeling only: node discharges through lm + lr
            const double di = (p.vb - p.rw1 * i_lr - v_ds) / (p.lm + p.lr);
            dx[ILM] = di;
            dx[ILR] = di;
            dx[VDS] = i_lr / p.cds;
            dx[ILO] = (-vf - v_co) / p.lo;
            break;
        }
        case ModeId::Mode8: {
            // body diode D1 holds the node at ground while i_lr is negative
            dx[ILM] = p.rw2p * (i_lr - i_lm) / p.lm;
            dx[ILR] = (p.vb - p.rw1 * i_lr - p.rw2p * (i_lr - i_lm) + vf) / p.lr;
            dx[ILO] = (-vf - v_co) / p.lo;
            break;
        }
        case ModeId::Mode9: {
            // S1 channel on, secondary still commutating through both diodes
            dx[ILM] = p.rw2p * (i_lr - i_lm) / p.lm;
            dx[ILR] = (p.vb - (p.rw1 + p.rds_on_s1) * i_lr - p.rw2p * (i_lr - i_lm)) / p.lr;
            dx[ILO] = (-vf - v_co) / p.lo;
            break;
        }
        case ModeId::HardSwitchFallback:
            throw std::invalid_argument("build_mode_system: HardSwitchFallback has no continuous dynamics");
    }
    return dx;
}

// diode currents implied by the state under a given conduction pattern
double diode3_current(ModeId m, const Vec6& x, const ConverterParams& p) {
    switch (m) {
        case ModeId::Mode5:
        case ModeId::Mode6:
            return 0.0;
        default:
            return p.n * (x[ILR] - x[ILM]);
    }
}

double diode4_current(ModeId m, const Vec6& x, const ConverterParams& p) {
    switch (m) {
        case ModeId::Mode1:
        case ModeId::Mode2:
            return 0.0;
        case ModeId::Mode5:
        case ModeId::Mode6:
            return x[ILO];
        default:
            return x[ILO] - p.n * (x[ILR] - x[ILM]);
    }
}

struct Accum {
    double e_in = 0.0;
    double e_out = 0.0;
    double loss[NLOSS] = {};
    double v_cc_int = 0.0;
    double v_co_int = 0.0;
    double vds_peak = 0.0;
};

// instantaneous dissipation of every lossy element, W; shared between the
// integration quadrature and the fixed-trace accounting so the two agree
void element_powers(ModeId m, const Vec6& x, const ConverterParams& p, double out[NLOSS]) {
    const double i_lr = x[ILR];
    const double i_cm = x[ILR] - x[ILM];
    for (int i = 0; i < NLOSS; ++i) out[i] = 0.0;
    if (m == ModeId::Mode1 || m == ModeId::Mode9) out[L_S1] = p.rds_on_s1 * i_lr * i_lr;
    if (m == ModeId::Mode5) out[L_S2] = p.rds_on_s2 * i_lr * i_lr;
    out[L_RW1] = p.rw1 * i_lr * i_lr;
    out[L_RW2] = p.rw2p * i_cm * i_cm;
    if (p.vf_diode > 0.0) {
        if (m == ModeId::Mode8) out[L_D1] = p.vf_diode * std::max(0.0, -i_lr);
        if (m == ModeId::Mode4) out[L_D2] = p.vf_diode * std::max(0.0, i_lr);
        out[L_D3] = p.vf_diode * std::max(0.0, diode3_current(m, x, p));
        out[L_D4] = p.vf_diode * std::max(0.0, diode4_current(m, x, p));
    }
}

struct Ctx {
    ConverterParams p;
    StepControl sc;
    double ts = 0.0;      // switching period
    double td = 0.0;      // dead time
    double h_base = 0.0;  // nominal step
    Mat6 A[10];
    Vec6 bvec[10];
    // recording sinks, null while iterating to steady state
    std::vector<WaveformRecord>* rows = nullptr;
    std::vector<TransitionEvent>* events = nullptr;
};

Ctx make_ctx(const ConverterParams& p, const StepControl& sc) {
    sim_validate(p);
    Ctx c;
    c.p = p;
    c.sc = sc;
    c.ts = 1.0 / p.fs;
    c.td = p.dead_time_fraction * c.ts;
    const double t_res = 2.0 * M_PI * std::sqrt(p.lr * p.cds);
    c.h_base = std::min(c.ts / sc.step_period_divisor, t_res / sc.step_resonance_divisor);
    for (int m = 1; m <= 9; ++m) {
        const ModeId id = static_cast<ModeId>(m);
        const Vec6 b = deriv(id, Vec6::Zero(), p);
        c.bvec[m] = b;
        for (int j = 0; j < 6; ++j) c.A[m].col(j) = deriv(id, Vec6::Unit(j), p) - b;
    }
    return c;
}

Vec6 f_of(const Ctx& c, ModeId m, const Vec6& x) {
    return c.A[static_cast<int>(m)] * x + c.bvec[static_cast<int>(m)];
}

// classical fourth-order step; when acc is given, the energy integrals are
// advanced with the matching stage weights
Vec6 rk4_step(const Ctx& c, ModeId m, const Vec6& x, double h, Accum* acc) {
    const Vec6 k1 = f_of(c, m, x);
    const Vec6 x2 = x + 0.5 * h * k1;
    const Vec6 k2 = f_of(c, m, x2);
    const Vec6 x3 = x + 0.5 * h * k2;
    const Vec6 k3 = f_of(c, m, x3);
    const Vec6 x4 = x + h * k3;
    const Vec6 k4 = f_of(c, m, x4);
    if (acc) {
        const Vec6* xs[4] = {&x, &x2, &x3, &x4};
        const double ws[4] = {h / 6.0, h / 3.0, h / 3.0, h / 6.0};
        double pw[NLOSS];
        for (int s = 0; s < 4; ++s) {
            const Vec6& xv = *xs[s];
            const double w = ws[s];
            acc->e_in += w * c.p.vb * xv[ILR];
            acc->e_out += w * xv[VCO] * xv[VCO] / c.p.rload;
            element_powers(m, xv, c.p, pw);
            for (int i = 0; i < NLOSS; ++i) acc->loss[i] += w * pw[i];
            acc->v_cc_int += w * xv[VCC];
            acc->v_co_int += w * xv[VCO];
            acc->vds_peak = std::max(acc->vds_peak, xv[VDS]);
        }
    }
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct GuardSet {
    int n = 0;
    double g[2];
    ModeId succ[2];
    bool pin_vds[2];  // successor entered with the node pinned to ground
    double eps[2];
};

// Exit guards of each mode given the gate pattern. A guard fires when its value
// rises through zero; eps is the margin used for already-inside-the-region
// decisions at segment entry.
GuardSet guards_for(ModeId m, const Vec6& x, bool gs1, bool gs2, const ConverterParams& p) {
    GuardSet gs;
    auto add = [&](double g, ModeId succ, bool pin, double eps) {
        gs.g[gs.n] = g;
        gs.succ[gs.n] = succ;
        gs.pin_vds[gs.n] = pin;
        gs.eps[gs.n] = eps;
        ++gs.n;
    };
    switch (m) {
        case ModeId::Mode1:
            break;  // exits on the S1 gate edge
        case ModeId::Mode2:
            add(x[VDS] - p.vb, ModeId::Mode3, false, EPS_V);
            break;
        case ModeId::Mode3:
            add(x[VDS] - x[VCC], ModeId::Mode4, false, EPS_V);
            add(-x[VDS], ModeId::Mode8, true, EPS_V);
            break;
        case ModeId::Mode4:
            add(x[ILM] - x[ILR], ModeId::Mode5, false, EPS_I);
            break;
        case ModeId::Mode5:
            // with the gate on the resonance runs until the schedule ends it;
            // afterwards D2 blocks when the current reaches zero
            if (!gs2) add(-x[ILR], ModeId::Mode6, false, EPS_I);
            break;
        case ModeId::Mode6:
            add(p.vb - x[VDS], ModeId::Mode7, false, EPS_V);
            break;
        case ModeId::Mode7:
            add(-x[VDS], ModeId::Mode8, true, EPS_V);
            add(x[VDS] - x[VCC], ModeId::Mode4, false, EPS_V);
            break;
        case ModeId::Mode8:
            // rising current leaves the body diode: into the channel when the
            // gate is on, otherwise the node is released and rings back up
            add(x[ILR], gs1 ? ModeId::Mode9 : ModeId::Mode7, false, EPS_I);
            // commutation can finish while the current is still negative when
            // the frozen magnetizing current runs deeper than the output
            // current; with the gate on the channel carries the reverse
            // current and the circuit is already in the Mode1 topology
            if (gs1) add(p.n * (x[ILR] - x[ILM]) - x[ILO], ModeId::Mode1, false, EPS_I);
            break;
        case ModeId::Mode9:
            add(p.n * (x[ILR] - x[ILM]) - x[ILO], ModeId::Mode1, false, EPS_I);
            break;
        case ModeId::HardSwitchFallback:
            break;
    }
    return gs;
}

CircuitState to_state(const Vec6& x) {
    return CircuitState{x[ILM], x[ILR], x[VDS], x[VCC], x[ILO], x[VCO]};
}

void book_event(Ctx& c, double t, ModeId from, ModeId to, const Vec6& before,
                const Vec6& after, bool hard, double loss_j) {
    if (!c.events) return;
    TransitionEvent ev;
    ev.time_s = t;
    ev.from = from;
    ev.to = to;
    ev.before = to_state(before);
    ev.after = to_state(after);
    ev.hard_switch = hard;
    ev.switching_loss_j = loss_j;
    c.events->push_back(ev);
}

void append_row(Ctx& c, double t, ModeId m, const Vec6& x, bool gs1, bool gs2) {
    if (!c.rows) return;
    WaveformRecord r;
    r.time_s = t;
    r.mode = m;
    r.i_lm_a = x[ILM];
    r.i_lr_a = x[ILR];
    r.v_ds1_v = x[VDS];
    r.v_cc_v = x[VCC];
    r.i_lo_a = x[ILO];
    r.v_co_v = x[VCO];
    r.i_d3_a = diode3_current(m, x, c.p);
    r.i_d4_a = diode4_current(m, x, c.p);
    r.v_n1_v = c.p.lm * f_of(c, m, x)[ILM];
    r.v_n2_v = r.v_n1_v / c.p.n;
    r.gate_s1 = gs1;
    r.gate_s2 = gs2;
    if (!c.rows->empty() && !(t > c.rows->back().time_s)) {
        c.rows->back() = r;  // keep times strictly increasing at event instants
    } else {
        c.rows->push_back(r);
    }
}

// forced S1-side collapse: node snaps to ground, its charge is dissipated
void snap_s1(Ctx& c, Accum& acc, double t, ModeId& mode, Vec6& x, bool gs2) {
    const Vec6 before = x;
    const double loss = 0.5 * c.p.cds * x[VDS] * x[VDS];
    acc.loss[L_HARD1] += loss;
    x[VDS] = 0.0;
    const ModeId succ =
        (diode4_current(ModeId::Mode9, x, c.p) > EPS_I) ? ModeId::Mode9 : ModeId::Mode1;
    book_event(c, t, mode, succ, before, x, true, loss);
    append_row(c, t, succ, x, true, gs2);
    mode = succ;
}

// forced S2-side turn-on: the channel ties the node to the clamp capacitor;
// the two voltages meet at the charge-conserving value
void snap_s2(Ctx& c, Accum& acc, double t, ModeId& mode, Vec6& x, bool gs1) {
    const Vec6 before = x;
    const double ctot = c.p.cc + c.p.cds;
    const double v_common = (c.p.cc * x[VCC] + c.p.cds * x[VDS]) / ctot;
    const double dv = x[VCC] - x[VDS];
    const double loss = 0.5 * (c.p.cc * c.p.cds / ctot) * dv * dv;
    acc.loss[L_HARD2] += loss;
    x[VCC] = v_common;
    x[VDS] = v_common;
    const ModeId succ =
        (diode3_current(ModeId::Mode4, x, c.p) > EPS_I) ? ModeId::Mode4 : ModeId::Mode5;
    book_event(c, t, mode, succ, before, x, true, loss);
    append_row(c, t, succ, x, gs1, true);
    mode = succ;
}

void soft_transition(Ctx& c, double t, ModeId& mode, Vec6& x, ModeId succ, bool pin,
                     bool gs1, bool gs2) {
    const Vec6 before = x;
    if (pin) x[VDS] = 0.0;
    book_event(c, t, mode, succ, before, x, false, 0.0);
    append_row(c, t, succ, x, gs1, gs2);
    mode = succ;
}

// One settling pass at a segment entry: fires a guard already strictly inside
// its successor region, or resolves a gate/mode contradiction. Returns false
// when the mode is consistent.
bool settle_once(Ctx& c, Accum& acc, double t, ModeId& mode, Vec6& x, bool gs1, bool gs2) {
    const GuardSet gs = guards_for(mode, x, gs1, gs2, c.p);
    for (int i = 0; i < gs.n; ++i) {
        if (gs.g[i] > gs.eps[i]) {
            soft_transition(c, t, mode, x, gs.succ[i], gs.pin_vds[i], gs1, gs2);
            return true;
        }
    }
    if (!gs1 && (mode == ModeId::Mode1 || mode == ModeId::Mode9)) {
        // S1 channel opens; conduction pattern of the diodes is unchanged
        soft_transition(c, t, mode, x,
                        mode == ModeId::Mode1 ? ModeId::Mode2 : ModeId::Mode3, false, gs1, gs2);
        return true;
    }
    if (!gs2 && mode == ModeId::Mode5 && x[ILR] <= EPS_I) {
        // channel opened with the clamp current at or past zero: D2 cannot
        // hold the branch on. While the current is still positive the mode
        // stands, with D2 carrying it in place of the channel.
        soft_transition(c, t, mode, x, ModeId::Mode6, false, gs1, gs2);
        return true;
    }
    if (gs1 && (mode == ModeId::Mode2 || mode == ModeId::Mode3 || mode == ModeId::Mode4 ||
                mode == ModeId::Mode6 || mode == ModeId::Mode7)) {
        snap_s1(c, acc, t, mode, x, gs2);
        return true;
    }
    if (gs2 && (mode == ModeId::Mode2 || mode == ModeId::Mode3 || mode == ModeId::Mode6 ||
                mode == ModeId::Mode7 || mode == ModeId::Mode8)) {
        snap_s2(c, acc, t, mode, x, gs1);
        return true;
    }
    if ((gs1 && (mode == ModeId::Mode5 || mode == ModeId::Mode8)) ||
        (gs2 && (mode == ModeId::Mode1 || mode == ModeId::Mode9))) {
        // Mode5/Mode8 are compatible with S1/S2 respectively only through the
        // schedule; both gates on at once would short the clamp
        if (gs1 && gs2) throw integration_error("gate schedule drove both switches on at once");
    }
    return false;
}

void settle(Ctx& c, Accum& acc, double t, ModeId& mode, Vec6& x, bool gs1, bool gs2) {
    for (int it = 0; it < 8; ++it) {
        if (!settle_once(c, acc, t, mode, x, gs1, gs2)) return;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "mode settling did not terminate at t=%.12g (mode %d)",
                  t, static_cast<int>(mode));
    throw integration_error(buf);
}

// Integrate one gate segment [t0, t1) with fixed gates, localizing guard
// crossings by bisection and settling chained transitions at each event.
void run_segment(Ctx& c, Accum& acc, double t0, double t1, ModeId& mode, Vec6& x,
                 bool gs1, bool gs2) {
    // absolute-time floor keeps the final partial step representable late in
    // a long run, where ulp(t) can exceed a fixed fraction of the period
    const double tiny = std::max(1e-15 * c.ts,
                                 4.0 * std::numeric_limits<double>::epsilon() * std::abs(t1));
    double t = t0;
    while (t1 - t > tiny) {
        // a guard already past its region boundary fires before stepping
        {
            const GuardSet gs = guards_for(mode, x, gs1, gs2, c.p);
            bool fired = false;
            for (int i = 0; i < gs.n; ++i) {
                if (gs.g[i] > gs.eps[i]) {
                    soft_transition(c, t, mode, x, gs.succ[i], gs.pin_vds[i], gs1, gs2);
                    settle(c, acc, t, mode, x, gs1, gs2);
                    fired = true;
                    break;
                }
            }
            if (fired) continue;
        }

        const double h = std::min(c.h_base, t1 - t);
        const Vec6 x_try = rk4_step(c, mode, x, h, nullptr);
        if (!x_try.allFinite()) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "state diverged at t=%.12g in mode %d", t,
                          static_cast<int>(mode));
            throw integration_error(buf);
        }

        const GuardSet g0 = guards_for(mode, x, gs1, gs2, c.p);
        const GuardSet g1 = guards_for(mode, x_try, gs1, gs2, c.p);
        int hit = -1;
        double hit_frac = 2.0;
        for (int i = 0; i < g0.n; ++i) {
            if (g0.g[i] <= 0.0 && g1.g[i] > 0.0) {
                // earliest crossing wins when several guards flip in one step
                double lo = 0.0, hi = 1.0;
                while ((hi - lo) * h > c.sc.bisect_tol_s) {
                    const double mid = 0.5 * (lo + hi);
                    const Vec6 xm = rk4_step(c, mode, x, mid * h, nullptr);
                    if (guards_for(mode, xm, gs1, gs2, c.p).g[i] > 0.0)
                        hi = mid;
                    else
                        lo = mid;
                }
                if (hi < hit_frac) {
                    hit_frac = hi;
                    hit = i;
                }
            }
        }

        if (hit >= 0) {
            const double hs = hit_frac * h;
            const Vec6 x_ev = rk4_step(c, mode, x, hs, &acc);
            x = x_ev;
            t += hs;
            soft_transition(c, t, mode, x, g0.succ[hit], g0.pin_vds[hit], gs1, gs2);
            settle(c, acc, t, mode, x, gs1, gs2);
            continue;
        }

        rk4_step(c, mode, x, h, &acc);  // accumulate energies along the accepted step
        x = x_try;
        t += h;
        append_row(c, t, mode, x, gs1, gs2);
    }
}

struct PeriodOut {
    Vec6 x;
    ModeId mode;
    Accum acc;
};

// One full switching period from t_offset: S1 on over [0, d*Ts), S2 on over
// [d*Ts + td, Ts - td), dead time on both sides of the S2 window.
PeriodOut run_one_period(Ctx& c, const Vec6& x0, ModeId mode0, double t_offset) {
    PeriodOut out;
    out.x = x0;
    out.mode = mode0;
    Accum& acc = out.acc;

    struct Seg {
        double a, b;
        bool gs1, gs2;
    };
    const double don = c.p.d * c.ts;
    const Seg segs[4] = {
        {0.0, don, true, false},
        {don, don + c.td, false, false},
        {don + c.td, c.ts - c.td, false, true},
        {c.ts - c.td, c.ts, false, false},
    };

    for (const Seg& s : segs) {
        const double ta = t_offset + s.a;
        settle(c, acc, ta, out.mode, out.x, s.gs1, s.gs2);
        if (c.rows && s.a == 0.0) append_row(c, ta, out.mode, out.x, s.gs1, s.gs2);
        run_segment(c, acc, ta, t_offset + s.b, out.mode, out.x, s.gs1, s.gs2);
    }
    return out;
}

Vec6 warm_start(const ConverterParams& p) {
    Vec6 x = Vec6::Zero();
    x[VCC] = p.vb / (1.0 - p.d);
    x[VCO] = p.d * p.vb * (p.lm / (p.lm + p.lr)) / p.n;
    x[ILO] = x[VCO] / p.rload;
    return x;
}

Vec6 from_state(const CircuitState& s) {
    Vec6 x;
    x << s.i_lm, s.i_lr, s.v_ds1, s.v_cc, s.i_lo, s.v_co;
    return x;
}

std::map<std::string, double> loss_map_from(const Accum& acc, double scale) {
    std::map<std::string, double> out;
    for (int i = 0; i < NLOSS; ++i) out[loss_key(i)] = acc.loss[i] * scale;
    return out;
}

}  // namespace

void validate(const ConverterParams& p) {
    require(p.d > 0.0 && p.d < 1.0, "ConverterParams.d must be in (0,1)");
    require(p.fs >= 0.0, "ConverterParams.fs must be >= 0");
    require(p.vb >= 0.0, "ConverterParams.vb must be >= 0");
    require(p.lr >= 0.0, "ConverterParams.lr must be >= 0");
    require(p.lm >= 0.0, "ConverterParams.lm must be >= 0");
    require(p.cds >= 0.0, "ConverterParams.cds must be >= 0");
    require(p.cc >= 0.0, "ConverterParams.cc must be >= 0");
    require(p.lo >= 0.0, "ConverterParams.lo must be >= 0");
    require(p.co >= 0.0, "ConverterParams.co must be >= 0");
    require(p.n > 0.0, "ConverterParams.n must be > 0");
    require(p.rload >= 0.0, "ConverterParams.rload must be >= 0");
    require(p.rds_on_s1 >= 0.0, "ConverterParams.rds_on_s1 must be >= 0");
    require(p.rds_on_s2 >= 0.0, "ConverterParams.rds_on_s2 must be >= 0");
    require(p.vf_diode >= 0.0, "ConverterParams.vf_diode must be >= 0");
    require(p.rw1 >= 0.0, "ConverterParams.rw1 must be >= 0");
    require(p.rw2p >= 0.0, "ConverterParams.rw2p must be >= 0");
    require(p.dead_time_fraction >= 0.0 &&
                p.dead_time_fraction < std::min(p.d, 1.0 - p.d),
            "ConverterParams.dead_time_fraction must be in [0, min(d, 1-d))");
}

ConverterParams prototype_preset() {
    ConverterParams p;
    p.vb = 40.0;
    p.d = 0.5;
    p.fs = 2e6;
    p.lr = 3.9e-6;
    p.lm = 10.1e-6;
    p.cds = 80e-12;
    p.cc = 1e-6;
    p.lo = 100e-6;
    p.co = 27e-6;
    p.n = 1.0;
    p.rload = 26.0;
    return p;
}

ModeSystem build_mode_system(ModeId mode, const ConverterParams& p) {
    sim_validate(p);
    if (mode == ModeId::HardSwitchFallback)
        throw std::invalid_argument("build_mode_system: HardSwitchFallback has no continuous dynamics");
    ModeSystem out;
    const Vec6 b = deriv(mode, Vec6::Zero(), p);
    for (int i = 0; i < 6; ++i) out.b[i] = b[i];
    for (int j = 0; j < 6; ++j) {
        const Vec6 col = deriv(mode, Vec6::Unit(j), p) - b;
        for (int i = 0; i < 6; ++i) out.A[i][j] = col[i];
    }
    return out;
}

std::optional<ModeId> detect_transition(const CircuitState& s, ModeId mode,
                                        const ConverterParams& p,
                                        bool gate_s1, bool gate_s2) {
    sim_validate(p);
    const Vec6 x = from_state(s);
    const GuardSet gs = guards_for(mode, x, gate_s1, gate_s2, p);
    for (int i = 0; i < gs.n; ++i)
        if (gs.g[i] > gs.eps[i]) return gs.succ[i];
    if (!gate_s1 && mode == ModeId::Mode1) return ModeId::Mode2;
    if (!gate_s1 && mode == ModeId::Mode9) return ModeId::Mode3;
    if (!gate_s2 && mode == ModeId::Mode5 && x.coeff(ILR) <= EPS_I)
        return ModeId::Mode6;
    if (gate_s1 && (mode == ModeId::Mode2 || mode == ModeId::Mode3 || mode == ModeId::Mode4 ||
                    mode == ModeId::Mode6 || mode == ModeId::Mode7))
        return ModeId::HardSwitchFallback;
    if (gate_s2 && (mode == ModeId::Mode2 || mode == ModeId::Mode3 || mode == ModeId::Mode6 ||
                    mode == ModeId::Mode7 || mode == ModeId::Mode8))
        return ModeId::HardSwitchFallback;
    return std::nullopt;
}

SimulationResult simulate(const ConverterParams& p, int cycles, const StepControl& step,
                          std::optional<CircuitState> initial_state,
                          std::optional<ModeId> initial_mode) {
    if (cycles < 1) throw std::invalid_argument("simulate: cycles must be >= 1");
    Ctx c = make_ctx(p, step);
    SimulationResult res;
    c.rows = &res.records;
    c.events = &res.events;

    Vec6 x = initial_state ? from_state(*initial_state) : warm_start(p);
    ModeId mode = initial_mode.value_or(ModeId::Mode9);
    Accum total;
    for (int k = 0; k < cycles; ++k) {
        PeriodOut po = run_one_period(c, x, mode, k * c.ts);
        x = po.x;
        mode = po.mode;
        total.e_in += po.acc.e_in;
        total.e_out += po.acc.e_out;
        for (int i = 0; i < NLOSS; ++i) total.loss[i] += po.acc.loss[i];
    }
    res.final_state = to_state(x);
    res.final_mode = mode;
    res.totals.e_in_j = total.e_in;
    res.totals.e_out_j = total.e_out;
    res.totals.e_loss_j = loss_map_from(total, 1.0);
    return res;
}

SteadyResult steady_state(const ConverterParams& p, const SteadyControl& control) {
    if (!(control.tolerance > 0.0))
        throw std::invalid_argument("SteadyControl.tolerance must be > 0");
    Ctx c = make_ctx(p, control.step);

    Vec6 x = warm_start(p);
    ModeId mode = ModeId::Mode9;

    std::vector<Vec6> diffs;  // period-boundary differences since the last jump
    int cycles = 0;
    int since_attempt = 0;
    bool converged = false;
    double residual = std::numeric_limits<double>::infinity();

    auto run_cycle = [&](const Vec6& from, ModeId m) {
        PeriodOut po = run_one_period(c, from, m, 0.0);
        ++cycles;
        return po;
    };
    auto norm_res = [](const Vec6& diff, const Vec6& ref) {
        return diff.cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff());
    };

    while (cycles < control.max_cycles) {
        PeriodOut po = run_cycle(x, mode);
        const Vec6 d = po.x - x;
        residual = norm_res(d, po.x);
        diffs.push_back(d);
        x = po.x;
        mode = po.mode;
        ++since_attempt;
        if (residual < control.tolerance) {
            converged = true;
            break;
        }

        // affine acceleration: successive boundary differences of a stable
        // periodic map decay as d_{k+1} = M d_k; fit M and jump to the fixed
        // point, keeping the jump only if a verification period improves on
        // plain iteration
        if (diffs.size() >= 13 && since_attempt >= 8 && cycles + 1 < control.max_cycles) {
            since_attempt = 0;
            const int m = static_cast<int>(std::min<size_t>(diffs.size(), 17));
            Eigen::MatrixXd d0(6, m - 1), d1(6, m - 1);
            for (int j = 0; j < m - 1; ++j) {
                d0.col(j) = diffs[diffs.size() - m + j];
                d1.col(j) = diffs[diffs.size() - m + j + 1];
            }
            const Eigen::MatrixXd mt =
                d0.transpose().colPivHouseholderQr().solve(d1.transpose());
            const Mat6 M = mt.transpose();
            const Mat6 imm = Mat6::Identity() - M;
            const Vec6 rhs = M * diffs.back();
            const Vec6 z = imm.colPivHouseholderQr().solve(rhs);
            const double zres = (imm * z - rhs).cwiseAbs().maxCoeff();
            const bool sane = z.allFinite() &&
                              z.cwiseAbs().maxCoeff() <=
                                  50.0 * std::max(1.0, x.cwiseAbs().maxCoeff()) &&
                              zres <= 1e-6 * std::max(1.0, rhs.cwiseAbs().maxCoeff());
            if (sane) {
                const Vec6 y_trial = x + z;
                PeriodOut ver = run_cycle(y_trial, mode);
                const double r_trial = norm_res(ver.x - y_trial, ver.x);
                if (r_trial < residual) {
                    diffs.clear();
                    diffs.push_back(ver.x - y_trial);
                    x = ver.x;
                    mode = ver.mode;
                    residual = r_trial;
                    if (residual < control.tolerance) {
                        converged = true;
                        break;
                    }
                } else {
                    diffs.clear();  // model was not descriptive; rebuild history
                }
            }
        }
    }

    // record the final period from the (possibly non-converged) boundary state
    SteadyResult out;
    c.rows = &out.records;
    c.events = &out.events;
    PeriodOut fin = run_one_period(c, x, mode, 0.0);

    SteadyStateReport& rep = out.report;
    rep.converged = converged;
    rep.cycles_used = cycles + 1;
    rep.residual = residual;
    rep.period_s = c.ts;
    rep.period_start_state = to_state(x);
    rep.v_cc_mean = fin.acc.v_cc_int / c.ts;
    rep.v_out_mean = fin.acc.v_co_int / c.ts;
    rep.i_out_mean = rep.v_out_mean / p.rload;
    rep.v_ds1_peak = fin.acc.vds_peak;
    rep.p_in = fin.acc.e_in / c.ts;
    rep.p_out = fin.acc.e_out / c.ts;
    rep.loss_breakdown = loss_map_from(fin.acc, 1.0 / c.ts);
    for (const auto& ev : out.events) {
        if (ev.from == ModeId::Mode5 && ev.to == ModeId::Mode6)
            rep.i_lr_at_mode6_entry = ev.after.i_lr;
    }
    if (converged) {
        const ZvsCheckResult z = zvs_check(rep, out.records);
        rep.zvs_s1 = z.s1;
        rep.zvs_s2 = z.s2;
    }
    return out;
}

ZvsCheckResult zvs_check(const SteadyStateReport& report,
                         std::span<const WaveformRecord> records) {
    if (!report.converged)
        throw precondition_error("zvs_check: report is not converged");
    if (records.size() < 2)
        throw precondition_error("zvs_check: need at least two waveform records");
    const size_t n = records.size();
    const double period = report.period_s;

    double vds_amp = 0.0;
    for (const auto& r : records) vds_amp = std::max(vds_amp, std::abs(r.v_ds1_v));
    const double tol_v = std::max(0.01, 1e-3 * vds_amp);

    auto cyc_prev = [n](size_t i) { return (i + n - 1) % n; };
    // row j holds until the next row; the wrap interval closes the period
    auto dt_of = [&](size_t j) {
        if (j + 1 < n) return records[j + 1].time_s - records[j].time_s;
        return std::max(0.0, period - (records[n - 1].time_s - records[0].time_s));
    };

    auto analyze = [&](bool s2_side) {
        ZvsVerdict v;
        size_t edge = n;
        for (size_t i = 0; i < n; ++i) {
            const bool now = s2_side ? records[i].gate_s2 : records[i].gate_s1;
            const bool was = s2_side ? records[cyc_prev(i)].gate_s2 : records[cyc_prev(i)].gate_s1;
            if (now && !was) {
                edge = i;
                break;
            }
        }
        if (edge == n) return v;  // gate never rises in this trace

        const size_t pre = cyc_prev(edge);
        const double v_switch = s2_side
                                    ? std::abs(records[pre].v_cc_v - records[pre].v_ds1_v)
                                    : std::abs(records[pre].v_ds1_v);
        // the anti-parallel path of S1 is D1 (Mode8); for S2 it is D2, which
        // conducts in Mode4 and carries Mode5 whenever the channel is off
        auto diode_on = [&](const WaveformRecord& row) {
            if (s2_side)
                return row.mode == ModeId::Mode4 ||
                       (row.mode == ModeId::Mode5 && !row.gate_s2);
            return row.mode == ModeId::Mode8;
        };
        double dur = 0.0;
        size_t j = pre;
        for (size_t steps = 0; steps < n && diode_on(records[j]); ++steps) {
            dur += dt_of(j);
            j = cyc_prev(j);
        }
        v.body_diode_conduction_s = dur;

        double hard_w = 0.0;
        const auto it = report.loss_breakdown.find(s2_side ? "s2_switching" : "s1_switching");
        if (it != report.loss_breakdown.end()) hard_w = it->second;
        v.zvs = v_switch <= tol_v && dur > 0.0 && hard_w <= 0.0;
        return v;
    };

    ZvsCheckResult out;
    out.s1 = analyze(false);
    out.s2 = analyze(true);
    return out;
}

LossBreakdown loss_breakdown(std::span<const WaveformRecord> records,
                             const ConverterParams& p,
                             std::span<const TransitionEvent> events) {
    validate(p);
    if (records.size() < 2)
        throw precondition_error("loss_breakdown: need at least two waveform records");

    const double t_span = records.back().time_s - records.front().time_s;
    if (!(t_span > 0.0))
        throw precondition_error("loss_breakdown: records span zero time");

    double e_loss[NLOSS] = {};
    double e_in = 0.0, e_out = 0.0;
    double pw_a[NLOSS], pw_b[NLOSS];
    Vec6 xa, xb;
    for (size_t i = 0; i + 1 < records.size(); ++i) {
        const WaveformRecord& a = records[i];
        const WaveformRecord& b = records[i + 1];
        const double h = b.time_s - a.time_s;
        if (h <= 0.0) continue;
        xa << a.i_lm_a, a.i_lr_a, a.v_ds1_v, a.v_cc_v, a.i_lo_a, a.v_co_v;
        xb << b.i_lm_a, b.i_lr_a, b.v_ds1_v, b.v_cc_v, b.i_lo_a, b.v_co_v;
        // the interval belongs to the mode of its left edge
        element_powers(a.mode, xa, p, pw_a);
        element_powers(a.mode, xb, p, pw_b);
        for (int k = 0; k < NLOSS; ++k) e_loss[k] += 0.5 * h * (pw_a[k] + pw_b[k]);
        e_in += 0.5 * h * p.vb * (a.i_lr_a + b.i_lr_a);
        e_out += 0.5 * h * (a.v_co_v * a.v_co_v + b.v_co_v * b.v_co_v) / p.rload;
    }
    for (const auto& ev : events) {
        if (!ev.hard_switch) continue;
        if (ev.to == ModeId::Mode1 || ev.to == ModeId::Mode9)
            e_loss[L_HARD1] += ev.switching_loss_j;
        else
            e_loss[L_HARD2] += ev.switching_loss_j;
    }

    LossBreakdown out;
    for (int k = 0; k < NLOSS; ++k) out.element_w[loss_key(k)] = e_loss[k] / t_span;
    out.p_in_w = e_in / t_span;
    out.p_out_w = e_out / t_span;
    if (!(out.p_in_w > 0.0))
        throw precondition_error("loss_breakdown: input power is zero, efficiency undefined");
    out.efficiency = out.p_out_w / out.p_in_w;
    return out;
}

BalanceReport verify_balances(std::span<const WaveformRecord> records,
                              const ConverterParams& p,
                              std::span<const TransitionEvent> events) {
    validate(p);
    BalanceReport out;
    if (records.size() < 2) return out;

    const double t_span = records.back().time_s - records.front().time_s;
    if (!(t_span > 0.0)) return out;
    const double tiny = 1e-300;

    double vsec = 0.0, e_in = 0.0, e_out = 0.0, e_loss = 0.0;
    double pw_a[NLOSS], pw_b[NLOSS];
    Vec6 xa, xb;
    double cc_min_v = records.front().v_cc_v, cc_max_v = cc_min_v;
    double co_min_v = records.front().v_co_v, co_max_v = co_min_v;
    for (size_t i = 0; i + 1 < records.size(); ++i) {
        const WaveformRecord& a = records[i];
        const WaveformRecord& b = records[i + 1];
        const double h = b.time_s - a.time_s;
        if (h > 0.0) {
            vsec += 0.5 * h * (a.v_n1_v + b.v_n1_v);
            e_in += 0.5 * h * p.vb * (a.i_lr_a + b.i_lr_a);
            e_out += 0.5 * h * (a.v_co_v * a.v_co_v + b.v_co_v * b.v_co_v) / p.rload;
            xa << a.i_lm_a, a.i_lr_a, a.v_ds1_v, a.v_cc_v, a.i_lo_a, a.v_co_v;
            xb << b.i_lm_a, b.i_lr_a, b.v_ds1_v, b.v_cc_v, b.i_lo_a, b.v_co_v;
            element_powers(a.mode, xa, p, pw_a);
            element_powers(a.mode, xb, p, pw_b);
            for (int k = 0; k < NLOSS; ++k) e_loss += 0.5 * h * (pw_a[k] + pw_b[k]);
        }
        cc_min_v = std::min(cc_min_v, b.v_cc_v);
        cc_max_v = std::max(cc_max_v, b.v_cc_v);
        co_min_v = std::min(co_min_v, b.v_co_v);
        co_max_v = std::max(co_max_v, b.v_co_v);
    }
    // the first record is the post-settle state, so a forced collapse exactly at
    // the front timestamp destroyed its energy before the recorded path begins
    for (const auto& ev : events)
        if (ev.hard_switch && ev.time_s > records.front().time_s)
            e_loss += ev.switching_loss_j;

    const WaveformRecord& f = records.front();
    const WaveformRecord& l = records.back();
    auto stored = [&](const WaveformRecord& r) {
        return 0.5 * (p.lm * r.i_lm_a * r.i_lm_a + p.lr * r.i_lr_a * r.i_lr_a +
                      p.cds * r.v_ds1_v * r.v_ds1_v + p.cc * r.v_cc_v * r.v_cc_v +
                      p.lo * r.i_lo_a * r.i_lo_a + p.co * r.v_co_v * r.v_co_v);
    };
    const double de_stored = stored(l) - stored(f);

    out.volt_second_residual = std::abs(vsec) / std::max(p.vb * p.d * t_span, tiny);
    out.cc_charge_residual =
        std::abs(l.v_cc_v - f.v_cc_v) / std::max(cc_max_v - cc_min_v, tiny);
    out.co_charge_residual =
        std::abs(l.v_co_v - f.v_co_v) / std::max(co_max_v - co_min_v, tiny);
    out.energy_residual =
        std::abs(e_in - e_out - e_loss - de_stored) / std::max(e_in, tiny);
    return out;
}

std::string waveform_csv(std::span<const WaveformRecord> records) {
    std::string out =
        "time_s,mode,i_lm_a,i_lr_a,v_ds1_v,v_cc_v,i_lo_a,v_co_v,i_d3_a,i_d4_a,v_n1_v,"
        "gate_s1,gate_s2\n";
    char line[384];
    for (const auto& r : records) {
        std::snprintf(line, sizeof line,
                      "%.12g,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d,%d\n",
                      r.time_s, static_cast<int>(r.mode), r.i_lm_a, r.i_lr_a, r.v_ds1_v,
                      r.v_cc_v, r.i_lo_a, r.v_co_v, r.i_d3_a, r.i_d4_a, r.v_n1_v,
                      r.gate_s1 ? 1 : 0, r.gate_s2 ? 1 : 0);
        out += line;
    }
    return out;
}

std::string report_json(const SteadyStateReport& r) {
    std::string out = "{\n";
    char buf[256];
    auto kv = [&](const char* k, double v) {
        std::snprintf(buf, sizeof buf, "  \"%s\": %.12g,\n", k, v);
        out += buf;
    };
    auto kb = [&](const char* k, bool v) {
        std::snprintf(buf, sizeof buf, "  \"%s\": %s,\n", k, v ? "true" : "false");
        out += buf;
    };
    kb("converged", r.converged);
    std::snprintf(buf, sizeof buf, "  \"cycles_used\": %d,\n", r.cycles_used);
    out += buf;
    kv("residual", r.residual);
    kv("period_s", r.period_s);
    kv("v_cc_mean_v", r.v_cc_mean);
    kv("v_ds1_peak_v", r.v_ds1_peak);
    kv("v_out_mean_v", r.v_out_mean);
    kv("i_out_mean_a", r.i_out_mean);
    if (r.i_lr_at_mode6_entry)
        kv("i_lr_at_mode6_entry_a", *r.i_lr_at_mode6_entry);
    else
        out += "  \"i_lr_at_mode6_entry_a\": null,\n";
    kb("zvs_s1", r.zvs_s1.zvs);
    kv("body_diode_s1_s", r.zvs_s1.body_diode_conduction_s);
    kb("zvs_s2", r.zvs_s2.zvs);
    kv("body_diode_s2_s", r.zvs_s2.body_diode_conduction_s);
    kv("p_in_w", r.p_in);
    kv("p_out_w", r.p_out);
    kv("efficiency", r.p_in > 0.0 ? r.p_out / r.p_in : 0.0);
    for (const auto& [k, v] : r.loss_breakdown) {
        std::snprintf(buf, sizeof buf, "  \"loss_%s_w\": %.12g,\n", k.c_str(), v);
        out += buf;
    }
    if (out.size() >= 2 && out[out.size() - 2] == ',') out.erase(out.size() - 2, 1);
    out += "}\n";
    return out;
}

}  // namespace acfc
