#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "acfc/errors.hpp"
#include "acfc/transformer.hpp"

namespace acfc {

// Direct node/branch formulation of the ladder, solved numerically. Five free
// nodes and six branch currents are kept even where branches could be merged,
// so the assembly shares nothing with the closed-form derivation.
//
//   P --r1-- A --llk1-- M --llk2p-- B --r2p-- S
//   shunts: c1 at P, lm1 at M, c2p at S; c12 bridges P to S; optional load at S.
//   A voltage source drives P at 1 V; the last unknown is its branch current.
NodalResult nodal_oracle(const TransformerParams& p, double frequency_hz,
                         std::optional<double> load_ohm) {
    validate(p);
    if (!(frequency_hz > 0.0))
        throw std::invalid_argument("nodal_oracle: frequency_hz must be > 0");
    if (load_ohm && !(*load_ohm > 0.0))
        throw std::invalid_argument("nodal_oracle: load_ohm must be > 0 when given");

    const cplx s(0.0, 2.0 * M_PI * frequency_hz);
    constexpr int P = 0, A = 1, M = 2, B = 3, S = 4;
    constexpr int NV = 5;   // node voltages
    constexpr int NB = 6;   // branch currents: r1, llk1, lm1, llk2p, r2p, source
    constexpr int N = NV + NB;

    Eigen::Matrix<cplx, N, N> sys = Eigen::Matrix<cplx, N, N>::Zero();
    Eigen::Matrix<cplx, N, 1> rhs = Eigen::Matrix<cplx, N, 1>::Zero();

    // series branch k from node i to node j with impedance z:
    // KCL rows get +-I_k, constitutive row NV+k is V_i - V_j - z*I_k = 0
    auto stamp_branch = [&](int k, int i, int j, cplx z) {
        sys(i, NV + k) += 1.0;
        if (j >= 0) sys(j, NV + k) -= 1.0;
        sys(NV + k, i) = 1.0;
        if (j >= 0) sys(NV + k, j) = -1.0;
        sys(NV + k, NV + k) = -z;
    };
    // shunt admittance y from node i to ground
    auto stamp_shunt = [&](int i, cplx y) { sys(i, i) += y; };

    stamp_branch(0, P, A, cplx(p.r1, 0.0));
    stamp_branch(1, A, M, s * p.llk1);
    stamp_branch(2, M, -1, s * p.lm1);
    stamp_branch(3, M, B, s * p.llk2p);
    stamp_branch(4, B, S, cplx(p.r2p, 0.0));

    stamp_shunt(P, s * p.c1);
    stamp_shunt(S, s * p.c2p);
    if (load_ohm) stamp_shunt(S, cplx(1.0 / (p.n * p.n * *load_ohm), 0.0));
    // interwinding capacitance, P to S
    sys(P, P) += s * p.c12;
    sys(P, S) -= s * p.c12;
    sys(S, S) += s * p.c12;
    sys(S, P) -= s * p.c12;

    // branch 5: source from ground into P, delivering current I_src; V_P = 1
    sys(P, NV + 5) -= 1.0;
    sys(NV + 5, P) = 1.0;
    rhs(NV + 5) = 1.0;

    Eigen::FullPivLU<Eigen::Matrix<cplx, N, N>> lu(sys);
    if (!lu.isInvertible())
        throw singular_network("nodal_oracle: network equations are rank deficient at this frequency");
    const Eigen::Matrix<cplx, N, 1> x = lu.solve(rhs);

    const cplx i_src = x(NV + 5);
    NodalResult out;
    out.gain = x(S) / p.n;
    out.zin = 1.0 / i_src;
    if (!std::isfinite(out.gain.real()) || !std::isfinite(out.gain.imag()) ||
        !std::isfinite(out.zin.real()) || !std::isfinite(out.zin.imag()))
        throw singular_network("nodal_oracle: non-finite solution at this frequency");
    return out;
}

}  // namespace acfc
