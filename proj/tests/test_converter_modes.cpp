#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "acfc/converter.hpp"
#include "acfc/errors.hpp"
#include "doctest.h"

using namespace acfc;

namespace {

std::array<double, 6> eval_dx(const ModeSystem& ms, const std::array<double, 6>& x) {
    std::array<double, 6> dx{};
    for (int i = 0; i < 6; ++i) {
        dx[i] = ms.b[i];
        for (int j = 0; j < 6; ++j) dx[i] += ms.A[i][j] * x[j];
    }
    return dx;
}

ConverterParams lossy_prototype() {
    ConverterParams p = prototype_preset();
    p.rds_on_s1 = 0.15;
    p.rds_on_s2 = 0.12;
    p.rw1 = 0.2;
    p.rw2p = 0.18;
    p.vf_diode = 0.45;
    return p;
}

CircuitState state_of(const std::array<double, 6>& x) {
    return CircuitState{x[0], x[1], x[2], x[3], x[4], x[5]};
}

}  // namespace

TEST_CASE("prototype operating point values") {
    const ConverterParams p = prototype_preset();
    CHECK(p.vb == 40.0);
    CHECK(p.d == 0.5);
    CHECK(p.fs == 2e6);
    CHECK(p.lr == doctest::Approx(3.9e-6));
    CHECK(p.lm == doctest::Approx(10.1e-6));
    CHECK(p.cds == doctest::Approx(80e-12));
    CHECK(p.cc == doctest::Approx(1e-6));
    CHECK(p.lo == doctest::Approx(100e-6));
    CHECK(p.co == doctest::Approx(27e-6));
    CHECK(p.n == 1.0);
    CHECK(p.rload == doctest::Approx(26.0));
    CHECK(p.rds_on_s1 == 0.0);
    CHECK(p.vf_diode == 0.0);
}

TEST_CASE("parameter validation names the offending field") {
    ConverterParams p = prototype_preset();
    p.d = 1.5;
    CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("d"), std::invalid_argument);
    p = prototype_preset();
    p.lr = -1e-6;
    CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("lr"), std::invalid_argument);
    p = prototype_preset();
    p.n = 0.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = prototype_preset();
    p.dead_time_fraction = 0.6;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = prototype_preset();
    p.fs = 0.0;  // basic validation allows it, the simulator needs it positive
    CHECK_NOTHROW(validate(p));
    CHECK_THROWS_AS(build_mode_system(ModeId::Mode1, p), std::invalid_argument);
}

TEST_CASE("the pseudo-mode has no continuous dynamics") {
    CHECK_THROWS_AS(build_mode_system(ModeId::HardSwitchFallback, prototype_preset()),
                    std::invalid_argument);
}

TEST_CASE("affine offsets vanish without sources") {
    ConverterParams p = lossy_prototype();
    p.vb = 0.0;
    p.vf_diode = 0.0;
    for (int m = 1; m <= 9; ++m) {
        const ModeSystem ms = build_mode_system(static_cast<ModeId>(m), p);
        for (int i = 0; i < 6; ++i) CHECK(ms.b[i] == 0.0);
    }
}

TEST_CASE("conduction-path loop equations hold for the extracted matrices") {
    const ConverterParams p = lossy_prototype();
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> ui(-2.0, 2.0), uv(-100.0, 100.0);

    for (int k = 0; k < 20; ++k) {
        std::array<double, 6> x{ui(rng), ui(rng), uv(rng), uv(rng), ui(rng), uv(rng)};

        const auto rel0 = [](double residual, double scale) {
            return std::abs(residual) / std::max(scale, 1.0);
        };
        // power-transfer path: S1 on, output inductor follows the winding
        {
            const ModeSystem ms = build_mode_system(ModeId::Mode1, p);
            const auto dx = eval_dx(ms, x);
            const double u1 = p.vb - (p.rw1 + p.rds_on_s1) * x[1];
            const double u2 = -x[5] - p.vf_diode - (p.rw2p / (p.n * p.n)) * x[4];
            CHECK(rel0(p.lm * dx[0] + p.lr * dx[1] - u1,
                       std::abs(p.lm * dx[0]) + std::abs(u1)) < 1e-12);
            CHECK(rel0(p.lo * dx[4] - p.lm * dx[0] / p.n - u2,
                       std::abs(p.lo * dx[4]) + std::abs(u2)) < 1e-12);
            CHECK(rel0(p.n * (dx[1] - dx[0]) - dx[4],
                       std::abs(p.n * dx[1]) + std::abs(dx[4])) < 1e-12);
            CHECK(dx[2] == 0.0);
            CHECK(dx[3] == 0.0);
            CHECK(dx[5] == doctest::Approx((x[4] - x[5] / p.rload) / p.co).epsilon(1e-12));
        }
        // node-charging variant of the same coupled loops
        {
            const ModeSystem ms = build_mode_system(ModeId::Mode2, p);
            const auto dx = eval_dx(ms, x);
            const double u1 = p.vb - p.rw1 * x[1] - x[2];
            CHECK(rel0(p.lm * dx[0] + p.lr * dx[1] - u1,
                       std::abs(p.lm * dx[0]) + std::abs(u1)) < 1e-12);
            CHECK(dx[2] == doctest::Approx(x[1] / p.cds).epsilon(1e-12));
        }
        // clamp loop with the channel on: both inductor rows identical, both
        // capacitor rows share the branch current
        {
            const ModeSystem ms = build_mode_system(ModeId::Mode5, p);
            const auto dx = eval_dx(ms, x);
            CHECK(dx[0] == dx[1]);
            CHECK(dx[2] == dx[3]);
            const double rhs = p.vb - (p.rw1 + p.rds_on_s2) * x[1] - x[3];
            CHECK(rel0((p.lm + p.lr) * dx[1] - rhs, std::abs(rhs)) < 1e-12);
            CHECK(dx[3] == doctest::Approx(x[1] / (p.cc + p.cds)).epsilon(1e-12));
        }
    }
}

TEST_CASE("both commutation intervals with all switches off share one system") {
    const ConverterParams p = lossy_prototype();
    const ModeSystem a = build_mode_system(ModeId::Mode3, p);
    const ModeSystem b = build_mode_system(ModeId::Mode7, p);
    for (int i = 0; i < 6; ++i) {
        CHECK(a.b[i] == b.b[i]);
        for (int j = 0; j < 6; ++j) CHECK(a.A[i][j] == b.A[i][j]);
    }
}

TEST_CASE("clamp resonance frequency from the extracted matrix") {
    const ConverterParams p = prototype_preset();
    const ModeSystem ms = build_mode_system(ModeId::Mode5, p);
    Eigen::Matrix<double, 6, 6> A;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) A(i, j) = ms.A[i][j];
    const Eigen::EigenSolver<Eigen::Matrix<double, 6, 6>> es(A);
    double fmax = 0.0;
    for (int i = 0; i < 6; ++i) {
        CHECK(es.eigenvalues()[i].real() <= 1e-6);
        fmax = std::max(fmax, std::abs(es.eigenvalues()[i].imag()) / (2.0 * M_PI));
    }
    const double expected =
        1.0 / (2.0 * M_PI * std::sqrt((p.lm + p.lr) * (p.cc + p.cds)));
    CHECK(expected == doctest::Approx(42534.2464114).epsilon(1e-9));
    CHECK(fmax == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("transition detection: consistent states report no successor") {
    const ConverterParams p = prototype_preset();
    // power transfer, constraint satisfied
    CHECK(!detect_transition(state_of({0.1, 0.6, 0.0, 80.0, 0.5, 13.0}),
                             ModeId::Mode1, p, true, false));
    // node mid-swing upward
    CHECK(!detect_transition(state_of({0.3, 0.4, 20.0, 80.0, 0.5, 13.0}),
                             ModeId::Mode2, p, false, false));
    // clamp conducting with the channel on, either current direction
    CHECK(!detect_transition(state_of({0.2, 0.3, 80.0, 80.0, 0.5, 13.0}),
                             ModeId::Mode5, p, false, true));
    CHECK(!detect_transition(state_of({-0.2, -0.3, 80.0, 80.0, 0.5, 13.0}),
                             ModeId::Mode5, p, false, true));
    // channel off but the clamp diode still carries forward current
    CHECK(!detect_transition(state_of({0.2, 0.3, 80.0, 80.0, 0.5, 13.0}),
                             ModeId::Mode5, p, false, false));
    // node mid-swing downward
    CHECK(!detect_transition(state_of({-0.3, -0.4, 79.0, 80.0, 0.5, 13.0}),
                             ModeId::Mode6, p, false, false));
    // body diode carrying negative current
    CHECK(!detect_transition(state_of({-0.5, -0.2, 0.0, 80.0, 0.5, 13.0}),
                             ModeId::Mode8, p, false, false));
}

TEST_CASE("transition detection: guard crossings select the successor") {
    const ConverterParams p = prototype_preset();
    const auto at = [&](std::array<double, 6> x, ModeId m, bool g1, bool g2) {
        return detect_transition(state_of(x), m, p, g1, g2);
    };
    // node reached the source rail, commutation starts
    CHECK(at({0.3, 0.4, 40.1, 80.0, 0.5, 13.0}, ModeId::Mode2, false, false) ==
          ModeId::Mode3);
    // node reached the clamp rail
    CHECK(at({0.3, 0.4, 80.1, 80.0, 0.5, 13.0}, ModeId::Mode3, false, false) ==
          ModeId::Mode4);
    // node rang back below ground
    CHECK(at({-0.3, -0.4, -0.1, 80.0, 0.5, 13.0}, ModeId::Mode3, false, false) ==
          ModeId::Mode8);
    CHECK(at({-0.3, -0.4, -0.1, 80.0, 0.5, 13.0}, ModeId::Mode7, false, false) ==
          ModeId::Mode8);
    CHECK(at({0.3, 0.4, 80.1, 80.0, 0.5, 13.0}, ModeId::Mode7, false, false) ==
          ModeId::Mode4);
    // clamp diode branch current reverses into the channel
    CHECK(at({0.5, 0.4, 80.0, 80.0, 0.5, 13.0}, ModeId::Mode4, false, true) ==
          ModeId::Mode5);
    // channel off and branch current no longer positive
    CHECK(at({-0.2, -0.3, 80.0, 80.0, 0.5, 13.0}, ModeId::Mode5, false, false) ==
          ModeId::Mode6);
    // node fell below the source rail
    CHECK(at({-0.3, -0.4, 20.0, 80.0, 0.5, 13.0}, ModeId::Mode6, false, false) ==
          ModeId::Mode7);
    // body diode current turned positive: channel takes over if gated on
    CHECK(at({-0.5, 0.01, 0.0, 80.0, 0.5, 13.0}, ModeId::Mode8, true, false) ==
          ModeId::Mode9);
    CHECK(at({-0.5, 0.01, 0.0, 80.0, 0.5, 13.0}, ModeId::Mode8, false, false) ==
          ModeId::Mode7);
    // commutation can finish while the body diode still carries the primary
    CHECK(at({-0.5, -0.1, 0.0, 80.0, 0.3, 13.0}, ModeId::Mode8, true, false) ==
          ModeId::Mode1);
    // end of commutation in the channel-on interval
    CHECK(at({-0.1, 0.5, 0.0, 80.0, 0.5, 13.0}, ModeId::Mode9, true, false) ==
          ModeId::Mode1);
}

TEST_CASE("transition detection: gate edges force mode changes") {
    const ConverterParams p = prototype_preset();
    CHECK(detect_transition(state_of({0.1, 0.6, 0.0, 80.0, 0.5, 13.0}),
                            ModeId::Mode1, p, false, false) == ModeId::Mode2);
    CHECK(detect_transition(state_of({-0.1, 0.2, 0.0, 80.0, 0.5, 13.0}),
                            ModeId::Mode9, p, false, false) == ModeId::Mode3);
    // gate-on against an uncollapsed node is a forced transition
    CHECK(detect_transition(state_of({0.3, 0.4, 20.0, 80.0, 0.5, 13.0}),
                            ModeId::Mode2, p, true, false) ==
          ModeId::HardSwitchFallback);
    CHECK(detect_transition(state_of({0.3, 0.4, 35.0, 80.0, 0.5, 13.0}),
                            ModeId::Mode3, p, true, false) ==
          ModeId::HardSwitchFallback);
    CHECK(detect_transition(state_of({-0.3, -0.4, 20.0, 80.0, 0.5, 13.0}),
                            ModeId::Mode7, p, false, true) ==
          ModeId::HardSwitchFallback);
    CHECK(detect_transition(state_of({-0.5, -0.2, 0.0, 80.0, 0.5, 13.0}),
                            ModeId::Mode8, p, false, true) ==
          ModeId::HardSwitchFallback);
    // the clamp-interval gate arriving while the clamp diode conducts is the
    // designed soft turn-on, not a forced one
    CHECK(!detect_transition(state_of({0.2, 0.5, 80.0, 80.0, 0.5, 13.0}),
                             ModeId::Mode4, p, false, true));
}

TEST_CASE("short open-loop integration produces a well-formed trace") {
    const ConverterParams p = prototype_preset();
    const SimulationResult r = simulate(p, 2);
    REQUIRE(!r.records.empty());
    CHECK(r.records.front().time_s == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.records.back().time_s ==
          doctest::Approx(2.0 / p.fs).epsilon(1e-9));
    for (size_t i = 1; i < r.records.size(); ++i)
        CHECK(r.records[i].time_s > r.records[i - 1].time_s);
    for (const auto& rec : r.records) {
        CHECK(std::isfinite(rec.i_lr_a));
        CHECK(std::isfinite(rec.v_ds1_v));
        CHECK(std::isfinite(rec.v_co_v));
        CHECK(rec.i_d3_a >= -1e-6);
        CHECK(rec.i_d4_a >= -1e-6);
    }
    CHECK(r.totals.e_in_j != 0.0);
    CHECK(std::isfinite(r.totals.e_out_j));
}

TEST_CASE("repeated integration is bit-identical") {
    const ConverterParams p = prototype_preset();
    const SimulationResult a = simulate(p, 2);
    const SimulationResult b = simulate(p, 2);
    CHECK(waveform_csv(a.records) == waveform_csv(b.records));
    CHECK(a.final_state.i_lr == b.final_state.i_lr);
    CHECK(a.final_state.v_ds1 == b.final_state.v_ds1);
    CHECK(a.totals.e_in_j == b.totals.e_in_j);
}
