#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "acfc/errors.hpp"
#include "acfc/transformer.hpp"

namespace acfc {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

bool finite(cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

struct LadderSolution {
    cplx gain;
    cplx zin;
};

// Closed-form ladder reduction with the input terminal driven at 1 V.
// Za = r1 + s*llk1, Zb = s*lm1, Zc = r2p + s*llk2p; Yp/Ys/Yx are the c1/c2p/c12
// admittances, yl the load referred to the primary. Zero series branches merge
// their end nodes; the merged cases are evaluated explicitly so that ideal
// parameter sets produce exact results.
LadderSolution solve_ladder(const TransformerParams& p, double frequency_hz,
                            std::optional<double> load_ohm) {
    const cplx s(0.0, 2.0 * M_PI * frequency_hz);
    const bool za_zero = p.r1 == 0.0 && p.llk1 == 0.0;
    const bool zb_zero = p.lm1 == 0.0;
    const bool zc_zero = p.r2p == 0.0 && p.llk2p == 0.0;

    const cplx yp = s * p.c1;
    const cplx ys = s * p.c2p;
    const cplx yx = s * p.c12;
    const cplx yl = load_ohm ? cplx(1.0 / (p.n * p.n * *load_ohm), 0.0) : cplx(0.0);

    if (za_zero && zb_zero)
        throw singular_network("transfer_gain: driven input node is shorted to ground");

    LadderSolution out;
    if (za_zero && zc_zero) {
        // whole ladder sits at the driven terminal
        out.gain = cplx(1.0, 0.0) / p.n;
        out.zin = 1.0 / (yp + 1.0 / (s * p.lm1) + ys + yl);
        return out;
    }

    if (za_zero) {
        // magnetizing node coincides with the driven terminal; zb_zero was
        // rejected above, so the shunt branch is a plain inductance here
        const cplx yc = 1.0 / (cplx(p.r2p, 0.0) + s * p.llk2p);
        const cplx yb = 1.0 / (s * p.lm1);
        const cplx vb = (yx + yc) / (yc + ys + yl + yx);
        out.gain = vb / p.n;
        out.zin = 1.0 / (yp + yb + (1.0 - vb) * yc + (1.0 - vb) * yx);
        return out;
    }

    const cplx ya = 1.0 / (cplx(p.r1, 0.0) + s * p.llk1);

    if (zb_zero) {
        // magnetizing node clamped to ground
        if (zc_zero) {
            // output node grounded as well: ys and the load carry nothing
            out.gain = cplx(0.0);
            out.zin = 1.0 / (yp + ya + yx);
            return out;
        }
        const cplx yc = 1.0 / (cplx(p.r2p, 0.0) + s * p.llk2p);
        const cplx vb = yx / (yc + ys + yl + yx);
        out.gain = vb / p.n;
        out.zin = 1.0 / (yp + ya + (1.0 - vb) * yx);
        return out;
    }

    const cplx yb = 1.0 / (s * p.lm1);

    if (zc_zero) {
        // output node coincides with the magnetizing node
        const cplx vab = (ya + yx) / (ya + yb + ys + yl + yx);
        out.gain = vab / p.n;
        out.zin = 1.0 / (yp + (1.0 - vab) * ya + (1.0 - vab) * yx);
        return out;
    }

    const cplx yc = 1.0 / (cplx(p.r2p, 0.0) + s * p.llk2p);
    const cplx d11 = ya + yb + yc;
    const cplx d22 = yc + ys + yl + yx;
    const cplx det = d11 * d22 - yc * yc;
    const cplx va = (ya * d22 + yc * yx) / det;
    const cplx vb = (d11 * yx + yc * ya) / det;
    out.gain = vb / p.n;
    out.zin = 1.0 / (yp + (1.0 - va) * ya + (1.0 - vb) * yx);
    return out;
}

LadderSolution solve_checked(const TransformerParams& p, double frequency_hz,
                             std::optional<double> load_ohm, const char* who) {
    validate(p);
    if (!(frequency_hz > 0.0))
        throw std::invalid_argument(std::string(who) + ": frequency_hz must be > 0");
    if (load_ohm && !(*load_ohm > 0.0))
        throw std::invalid_argument(std::string(who) + ": load_ohm must be > 0 when given");
    LadderSolution sol = solve_ladder(p, frequency_hz, load_ohm);
    if (!finite(sol.gain) || !finite(sol.zin))
        throw singular_network(std::string(who) + ": network is singular at this frequency");
    return sol;
}

}  // namespace

void validate(const TransformerParams& p) {
    require(p.r1 >= 0.0, "TransformerParams.r1 must be >= 0");
    require(p.r2p >= 0.0, "TransformerParams.r2p must be >= 0");
    require(p.llk1 >= 0.0, "TransformerParams.llk1 must be >= 0");
    require(p.llk2p >= 0.0, "TransformerParams.llk2p must be >= 0");
    require(p.c1 >= 0.0, "TransformerParams.c1 must be >= 0");
    require(p.c2p >= 0.0, "TransformerParams.c2p must be >= 0");
    require(p.c12 >= 0.0, "TransformerParams.c12 must be >= 0");
    require(p.lm1 >= 0.0, "TransformerParams.lm1 must be >= 0");
    require(p.n > 0.0, "TransformerParams.n must be > 0");
}

cplx transfer_gain(const TransformerParams& p, double frequency_hz,
                   std::optional<double> load_ohm) {
    return solve_checked(p, frequency_hz, load_ohm, "transfer_gain").gain;
}

cplx input_impedance(const TransformerParams& p, double frequency_hz,
                     std::optional<double> load_ohm) {
    return solve_checked(p, frequency_hz, load_ohm, "input_impedance").zin;
}

std::vector<FrequencyResponsePoint> frequency_sweep(const TransformerParams& p,
                                                    double f_start, double f_stop,
                                                    int points_per_decade) {
    if (!(f_start > 0.0) || !(f_stop > f_start))
        throw std::invalid_argument("frequency_sweep: need 0 < f_start < f_stop");
    if (points_per_decade < 1)
        throw std::invalid_argument("frequency_sweep: points_per_decade must be >= 1");

    const double decades = std::log10(f_stop / f_start);
    const int npts = std::max(2, static_cast<int>(std::lround(points_per_decade * decades)) + 1);

    std::vector<FrequencyResponsePoint> out;
    out.reserve(static_cast<size_t>(npts));
    for (int i = 0; i < npts; ++i) {
        double f;
        if (i == 0)
            f = f_start;
        else if (i == npts - 1)
            f = f_stop;
        else
            f = f_start * std::pow(10.0, decades * i / (npts - 1));
        FrequencyResponsePoint pt;
        pt.frequency_hz = f;
        LadderSolution sol = solve_checked(p, f, std::nullopt, "frequency_sweep");
        pt.gain = sol.gain;
        pt.zin = sol.zin;
        out.push_back(pt);
    }
    return out;
}

BandwidthResult bandwidth(const TransformerParams& p, double f_start, double f_stop) {
    if (!(f_start > 0.0) || !(f_stop > f_start))
        throw std::invalid_argument("bandwidth: need 0 < f_start < f_stop");

    const auto grid = frequency_sweep(p, f_start, f_stop, 60);
    std::vector<double> mags(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) mags[i] = std::abs(grid[i].gain);

    // the plateau is the median magnitude: robust against both roll-off tails
    // and a resonant peak inside the range
    std::vector<double> sorted = mags;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double plateau = sorted[sorted.size() / 2];
    const double thr = plateau / std::sqrt(2.0);

    BandwidthResult out;
    out.plateau_gain = plateau;
    if (plateau <= 0.0) return out;

    // anchor on the grid point closest to the plateau level, then scan outward
    // for the first drop below the threshold on each side
    size_t anchor = 0;
    double best = std::abs(mags[0] - plateau);
    for (size_t i = 1; i < mags.size(); ++i) {
        const double dv = std::abs(mags[i] - plateau);
        if (dv < best) {
            best = dv;
            anchor = i;
        }
    }

    auto refine = [&](double f_lo, double f_hi) {
        // |gain| - thr changes sign inside [f_lo, f_hi]; bisect in log-f
        const bool below_lo = std::abs(transfer_gain(p, f_lo)) < thr;
        for (int it = 0; it < 80 && (f_hi - f_lo) > 1e-7 * f_lo; ++it) {
            const double fm = std::sqrt(f_lo * f_hi);
            const bool below_m = std::abs(transfer_gain(p, fm)) < thr;
            if (below_m == below_lo)
                f_lo = fm;
            else
                f_hi = fm;
        }
        return std::sqrt(f_lo * f_hi);
    };

    for (size_t i = anchor; i > 0; --i) {
        if (mags[i] >= thr && mags[i - 1] < thr) {
            out.lower_hz = refine(grid[i - 1].frequency_hz, grid[i].frequency_hz);
            break;
        }
    }
    for (size_t i = anchor; i + 1 < mags.size(); ++i) {
        if (mags[i] >= thr && mags[i + 1] < thr) {
            out.upper_hz = refine(grid[i].frequency_hz, grid[i + 1].frequency_hz);
            break;
        }
    }
    return out;
}

TransformerParams table1_preset() {
    TransformerParams p;
    p.r1 = 1.27;
    p.r2p = 1.27;
    p.llk1 = 3.9e-6;
    p.llk2p = 3.9e-6;
    p.c1 = 4e-12;
    p.c2p = 4e-12;
    p.c12 = 16e-12;
    p.lm1 = 10.1e-6;
    p.n = 1.0;
    return p;
}

WindingGeometry table1_geometry() {
    WindingGeometry g;
    g.inner_radius_m = 2e-3;
    g.outer_radius_m = 25e-3;
    g.conductor_width_m = 0.635e-3;
    g.conductor_separation_m = 0.47e-3;
    g.conductor_height_m = 35e-6;
    g.board_thickness_m = 1.6e-3;
    g.turns_primary = 23;
    g.turns_secondary = 23;
    return g;
}

std::string sweep_csv(const std::vector<FrequencyResponsePoint>& points) {
    std::string out = "frequency_hz,gain_re,gain_im,gain_mag,gain_db,zin_re,zin_im,zin_mag\n";
    char line[256];
    for (const auto& pt : points) {
        const double gm = std::abs(pt.gain);
        const double zm = std::abs(pt.zin);
        std::snprintf(line, sizeof line, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      pt.frequency_hz, pt.gain.real(), pt.gain.imag(), gm,
                      20.0 * std::log10(gm), pt.zin.real(), pt.zin.imag(), zm);
        out += line;
    }
    return out;
}

}  // namespace acfc
