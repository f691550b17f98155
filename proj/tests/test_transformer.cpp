#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>
#include <vector>

#include "acfc/errors.hpp"
#include "acfc/transformer.hpp"
#include "doctest.h"

using namespace acfc;

namespace {

double rel_err(cplx a, cplx b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
    return std::abs(a - b) / scale;
}

TransformerParams random_passive_set(std::mt19937& rng) {
    auto logu = [&](double lo, double hi) {
        std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
        return std::exp(u(rng));
    };
    TransformerParams p;
    p.r1 = logu(0.1, 10.0);
    p.r2p = logu(0.1, 10.0);
    p.llk1 = logu(1e-7, 1e-5);
    p.llk2p = logu(1e-7, 1e-5);
    p.c1 = logu(5e-13, 5e-11);
    p.c2p = logu(5e-13, 5e-11);
    p.c12 = logu(5e-13, 5e-11);
    p.lm1 = logu(1e-6, 1e-4);
    p.n = logu(0.5, 2.0);
    return p;
}

}  // namespace

TEST_CASE("preset matches the measured equivalent-circuit values") {
    const TransformerParams p = table1_preset();
    CHECK(p.r1 == doctest::Approx(1.27).epsilon(1e-12));
    CHECK(p.r2p == doctest::Approx(1.27).epsilon(1e-12));
    CHECK(p.llk1 == doctest::Approx(3.9e-6).epsilon(1e-12));
    CHECK(p.llk2p == doctest::Approx(3.9e-6).epsilon(1e-12));
    CHECK(p.c1 == doctest::Approx(4e-12).epsilon(1e-12));
    CHECK(p.c2p == doctest::Approx(4e-12).epsilon(1e-12));
    CHECK(p.c12 == doctest::Approx(16e-12).epsilon(1e-12));
    CHECK(p.lm1 == doctest::Approx(10.1e-6).epsilon(1e-12));
    CHECK(p.n == 1.0);
}

TEST_CASE("winding geometry metadata") {
    const WindingGeometry g = table1_geometry();
    CHECK(g.inner_radius_m == doctest::Approx(2e-3));
    CHECK(g.outer_radius_m == doctest::Approx(25e-3));
    CHECK(g.conductor_width_m == doctest::Approx(0.635e-3));
    CHECK(g.conductor_separation_m == doctest::Approx(0.47e-3));
    CHECK(g.conductor_height_m == doctest::Approx(35e-6));
    CHECK(g.board_thickness_m == doctest::Approx(1.6e-3));
    CHECK(g.turns_primary == 23);
    CHECK(g.turns_secondary == 23);
}

TEST_CASE("validation rejects negative elements and non-positive ratio") {
    TransformerParams p = table1_preset();
    p.r1 = -1.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = table1_preset();
    p.c12 = -1e-12;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = table1_preset();
    p.n = 0.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    CHECK_THROWS_AS(transfer_gain(p, 1e6), std::invalid_argument);
}

TEST_CASE("lossless magnetizing-only network has exact 1/n gain") {
    TransformerParams p;
    p.lm1 = 10e-6;
    p.n = 2.5;
    for (double f : {1e3, 1e5, 1e7}) {
        const cplx g = transfer_gain(p, f);
        CHECK(g.real() == doctest::Approx(1.0 / 2.5).epsilon(1e-14));
        CHECK(g.imag() == doctest::Approx(0.0).epsilon(1e-14));
    }
}

TEST_CASE("low-frequency limits: gain collapses, input impedance approaches the winding resistance") {
    const TransformerParams p = table1_preset();
    CHECK(std::abs(transfer_gain(p, 1e-2)) < 1e-3);
    const cplx z = input_impedance(p, 1.0);
    CHECK(std::abs(z) == doctest::Approx(1.27).epsilon(0.01));
    CHECK(z.real() == doctest::Approx(1.27).epsilon(0.01));
}

TEST_CASE("mid-band magnitude sits on the inductive-divider plateau") {
    const TransformerParams p = table1_preset();
    const double divider = p.lm1 / (p.lm1 + p.llk1);
    const auto pts = frequency_sweep(p, 1e5, 5e6, 60);
    for (const auto& pt : pts) {
        const double mag = std::abs(pt.gain);
        CHECK(mag > 0.69);
        CHECK(mag < 0.75);
        CHECK(mag == doctest::Approx(divider).epsilon(0.04));
    }
}

TEST_CASE("input impedance magnitude grows through the inductive region") {
    const TransformerParams p = table1_preset();
    const auto pts = frequency_sweep(p, 1e4, 5e6, 20);
    for (size_t i = 1; i < pts.size(); ++i)
        CHECK(std::abs(pts[i].zin) > std::abs(pts[i - 1].zin));
}

TEST_CASE("passive networks present a non-negative input resistance") {
    const auto check_passive = [](const TransformerParams& p) {
        for (const auto& pt : frequency_sweep(p, 1e4, 1e8, 10)) {
            CHECK(pt.zin.real() >= -1e-9 * std::abs(pt.zin));
        }
    };
    check_passive(table1_preset());
    std::mt19937 rng(77);
    for (int k = 0; k < 5; ++k) check_passive(random_passive_set(rng));
}

TEST_CASE("open-circuit gain is invariant under uniform impedance scaling") {
    const TransformerParams base = table1_preset();
    TransformerParams scaled = base;
    const double k = 7.3;
    scaled.r1 *= k;
    scaled.r2p *= k;
    scaled.llk1 *= k;
    scaled.llk2p *= k;
    scaled.lm1 *= k;
    scaled.c1 /= k;
    scaled.c2p /= k;
    scaled.c12 /= k;
    for (double f : {1e4, 1e6, 3e7}) {
        CHECK(rel_err(transfer_gain(base, f), transfer_gain(scaled, f)) < 1e-12);
        CHECK(rel_err(input_impedance(base, f) * k, input_impedance(scaled, f)) < 1e-12);
    }
}

TEST_CASE("closed form agrees with the assembled-network solver") {
    const auto agree = [](const TransformerParams& p, std::optional<double> load) {
        for (const auto& pt : frequency_sweep(p, 1e4, 1e8, 10)) {
            const NodalResult nr = nodal_oracle(p, pt.frequency_hz, load);
            CHECK(rel_err(pt.gain, nr.gain) < 1e-9);
            CHECK(rel_err(pt.zin, nr.zin) < 1e-9);
        }
    };
    agree(table1_preset(), std::nullopt);

    std::mt19937 rng(12345);
    for (int k = 0; k < 20; ++k) {
        const TransformerParams p = random_passive_set(rng);
        for (double f : {1e4, 1e5, 1e6, 1e7, 1e8}) {
            const cplx g = transfer_gain(p, f);
            const cplx z = input_impedance(p, f);
            const NodalResult nr = nodal_oracle(p, f);
            CHECK(rel_err(g, nr.gain) < 1e-9);
            CHECK(rel_err(z, nr.zin) < 1e-9);
        }
    }
}

TEST_CASE("loaded-network solutions also match the assembled solver") {
    const TransformerParams p = table1_preset();
    for (double load : {5.0, 26.0, 1000.0}) {
        for (double f : {1e5, 2e6, 3e7}) {
            const NodalResult nr = nodal_oracle(p, f, load);
            CHECK(rel_err(transfer_gain(p, f, load), nr.gain) < 1e-9);
            CHECK(rel_err(input_impedance(p, f, load), nr.zin) < 1e-9);
        }
    }
}

TEST_CASE("sweep grid shape: endpoints exact, ascending, expected count") {
    const auto pts = frequency_sweep(table1_preset(), 1e4, 1e8, 10);
    REQUIRE(pts.size() == 41);
    CHECK(pts.front().frequency_hz == 1e4);
    CHECK(pts.back().frequency_hz == 1e8);
    for (size_t i = 1; i < pts.size(); ++i)
        CHECK(pts[i].frequency_hz > pts[i - 1].frequency_hz);

    const auto tiny = frequency_sweep(table1_preset(), 1e4, 1e8, 1);
    REQUIRE(tiny.size() == 5);
    CHECK(tiny.front().frequency_hz == 1e4);
    CHECK(tiny.back().frequency_hz == 1e8);
}

TEST_CASE("sweep entries equal the pointwise evaluations") {
    const TransformerParams p = table1_preset();
    for (const auto& pt : frequency_sweep(p, 1e4, 1e8, 7)) {
        CHECK(pt.gain == transfer_gain(p, pt.frequency_hz));
        CHECK(pt.zin == input_impedance(p, pt.frequency_hz));
    }
}

TEST_CASE("sweep range validation") {
    const TransformerParams p = table1_preset();
    CHECK_THROWS_AS(frequency_sweep(p, 0.0, 1e6, 10), std::invalid_argument);
    CHECK_THROWS_AS(frequency_sweep(p, 1e6, 1e4, 10), std::invalid_argument);
    CHECK_THROWS_AS(frequency_sweep(p, 1e4, 1e8, 0), std::invalid_argument);
}

TEST_CASE("bandwidth edges against a dense brute-force scan") {
    const TransformerParams p = table1_preset();
    const BandwidthResult bw = bandwidth(p, 1e4, 1e8);
    REQUIRE(bw.upper_hz.has_value());
    REQUIRE(bw.lower_hz.has_value());
    CHECK(*bw.upper_hz > 6e6);
    CHECK(*bw.upper_hz < 14e6);
    CHECK(*bw.lower_hz > 1e4);
    CHECK(*bw.lower_hz < 1e5);
    CHECK(bw.plateau_gain == doctest::Approx(0.72).epsilon(0.05));

    // independent scan at 1000 points per decade; agreement within one step of
    // the coarse search grid
    const int ppd = 1000;
    const double decades = 4.0;
    const int npts = static_cast<int>(ppd * decades) + 1;
    std::vector<double> freq(npts), mag(npts);
    for (int i = 0; i < npts; ++i) {
        freq[i] = 1e4 * std::pow(10.0, decades * i / (npts - 1));
        mag[i] = std::abs(transfer_gain(p, freq[i]));
    }
    std::vector<double> sorted = mag;
    std::nth_element(sorted.begin(), sorted.begin() + npts / 2, sorted.end());
    const double thresh = sorted[npts / 2] / std::sqrt(2.0);
    const auto anchor = std::min_element(
        mag.begin(), mag.end(),
        [&](double a, double b) { return std::abs(a - sorted[npts / 2]) < std::abs(b - sorted[npts / 2]); });
    const int ai = static_cast<int>(anchor - mag.begin());
    int lo = -1, hi = -1;
    for (int i = ai; i < npts; ++i)
        if (mag[i] < thresh) {
            hi = i;
            break;
        }
    for (int i = ai; i >= 0; --i)
        if (mag[i] < thresh) {
            lo = i;
            break;
        }
    REQUIRE(hi >= 0);
    REQUIRE(lo >= 0);
    const double coarse_step = std::pow(10.0, 1.0 / 60.0);
    CHECK(*bw.upper_hz / freq[hi] < coarse_step);
    CHECK(freq[hi] / *bw.upper_hz < coarse_step);
    CHECK(*bw.lower_hz / freq[lo] < coarse_step);
    CHECK(freq[lo] / *bw.lower_hz < coarse_step);
}

TEST_CASE("flat network reports no 3 dB edges") {
    TransformerParams p;
    p.lm1 = 10e-6;
    p.n = 1.0;
    const BandwidthResult bw = bandwidth(p, 1e4, 1e8);
    CHECK(!bw.lower_hz.has_value());
    CHECK(!bw.upper_hz.has_value());
    CHECK(bw.plateau_gain == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("degenerate networks without a solution throw") {
    TransformerParams p;  // every element zero: no path, no shunt
    CHECK_THROWS_AS(transfer_gain(p, 1e6), singular_network);
    CHECK_THROWS_AS(nodal_oracle(p, 1e6), singular_network);
}

TEST_CASE("sweep serialization carries the expected header and row count") {
    const auto pts = frequency_sweep(table1_preset(), 1e4, 1e8, 5);
    const std::string csv = sweep_csv(pts);
    std::istringstream in(csv);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "frequency_hz,gain_re,gain_im,gain_mag,gain_db,zin_re,zin_im,zin_mag");
    size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 7);
    }
    CHECK(rows == pts.size());
}
