#pragma once

// Rigid-body model of the levitated plate:
//
//   M(q) q'' + C(q, q') q' + D q' = W
//
// with q = (x, y, z, chi, psi, zeta), Pitch-Yaw-Roll angles, and
// D = diag(c1..c6). M depends on chi and psi only, so the only non-zero
// partial derivatives of M are with respect to q(3) and q(4).

#include <array>
#include <cmath>
#include <string>

#include "maglev/errors.hpp"
#include "maglev/linalg.hpp"

namespace maglev {

namespace axis {
inline constexpr int x = 0;
inline constexpr int y = 1;
inline constexpr int z = 2;
inline constexpr int chi = 3;
inline constexpr int psi = 4;
inline constexpr int zeta = 5;
}  // namespace axis

using Wrench = Vec6;

struct PlantParams {
    double m = 10.0;
    double I_chi = 0.1;
    double I_psi = 0.1;
    double I_zeta = 0.2;
    // Viscous friction per coordinate [N s/m or N m s/rad].
    Vec6 c = (Vec6() << 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6).finished();

    Mat6 damping() const { return c.asDiagonal(); }

    // Rigid-body inertia at zero angles.
    Vec6 inertia_diagonal() const {
        return (Vec6() << m, m, m, I_chi, I_psi, I_zeta).finished();
    }

    void validate() const {
        if (!(m > 0.0) || !(I_chi > 0.0) || !(I_psi > 0.0) || !(I_zeta > 0.0)) {
            throw PreconditionViolation("plant: mass and inertias must be positive");
        }
        if (!c.allFinite() || (c.array() < 0.0).any()) {
            throw PreconditionViolation("plant: friction coefficients must be finite and >= 0");
        }
    }
};

struct GeneralizedState {
    Vec6 q = Vec6::Zero();
    Vec6 qdot = Vec6::Zero();

    Vec12 stacked() const {
        Vec12 x;
        x << q, qdot;
        return x;
    }
    static GeneralizedState from_stacked(const Vec12& x) {
        return {x.head<6>(), x.tail<6>()};
    }
};

// Christoffel symbols, indexed as gamma[i](j, k).
using Tensor666 = std::array<Mat6, 6>;

inline Mat6 mass_matrix(const Vec6& q, const PlantParams& p) {
    const double sc = std::sin(q(axis::chi));
    const double cc = std::cos(q(axis::chi));
    const double sp = std::sin(q(axis::psi));
    const double cp = std::cos(q(axis::psi));

    const double alpha1 = std::sin(2.0 * q(axis::chi)) * cp * (p.I_psi - p.I_zeta) / 2.0;
    const double alpha2 = -p.I_chi * sp;
    const double alpha3 = cp * cp * (p.I_zeta * cc * cc + p.I_psi * sc * sc) + p.I_chi * sp * sp;

    Mat6 M = Mat6::Zero();
    M(0, 0) = p.m;
    M(1, 1) = p.m;
    M(2, 2) = p.m;
    M(3, 3) = p.I_chi;
    M(4, 4) = p.I_psi * cc * cc + p.I_zeta * sc * sc;
    M(5, 5) = alpha3;
    M(3, 5) = M(5, 3) = alpha2;
    M(4, 5) = M(5, 4) = alpha1;
    return M;
}

// dM/dq_k for k = 0..5. Entries for translations and zeta are zero.
inline std::array<Mat6, 6> mass_matrix_partials(const Vec6& q, const PlantParams& p) {
    const double chi = q(axis::chi);
    const double psi = q(axis::psi);
    const double s2c = std::sin(2.0 * chi);
    const double c2c = std::cos(2.0 * chi);
    const double sc = std::sin(chi);
    const double cc = std::cos(chi);
    const double sp = std::sin(psi);
    const double cp = std::cos(psi);
    const double d = p.I_psi - p.I_zeta;

    std::array<Mat6, 6> dM;
    for (auto& m : dM) m.setZero();

    Mat6& dchi = dM[axis::chi];
    dchi(4, 4) = -d * s2c;
    dchi(4, 5) = dchi(5, 4) = d * c2c * cp;
    dchi(5, 5) = d * cp * cp * s2c;

    Mat6& dpsi = dM[axis::psi];
    dpsi(3, 5) = dpsi(5, 3) = -p.I_chi * cp;
    dpsi(4, 5) = dpsi(5, 4) = -d * s2c * sp / 2.0;
    dpsi(5, 5) = std::sin(2.0 * psi) * (p.I_chi - p.I_zeta * cc * cc - p.I_psi * sc * sc);
    return dM;
}

inline Tensor666 christoffel_from_partials(const std::array<Mat6, 6>& dM) {
    Tensor666 g;
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            for (int k = 0; k < 6; ++k) {
                g[i](j, k) = 0.5 * (dM[k](i, j) + dM[j](i, k) - dM[i](k, j));
            }
        }
    }
    return g;
}

inline Tensor666 christoffel(const Vec6& q, const PlantParams& p) {
    return christoffel_from_partials(mass_matrix_partials(q, p));
}

inline Mat6 coriolis_matrix(const Vec6& q, const Vec6& qdot, const PlantParams& p) {
    const Tensor666 g = christoffel(q, p);
    Mat6 C;
    for (int i = 0; i < 6; ++i) {
        C.row(i) = (g[i] * qdot).transpose();
    }
    return C;
}

inline Mat6 mass_matrix_rate(const Vec6& q, const Vec6& qdot, const PlantParams& p) {
    const auto dM = mass_matrix_partials(q, p);
    Mat6 Mdot = Mat6::Zero();
    for (int k = 0; k < 6; ++k) {
        Mdot += dM[k] * qdot(k);
    }
    return Mdot;
}

struct MassPdResult {
    bool positive_definite = false;
    std::array<double, 6> minors{};
};

// Normalised leading minors must exceed this to count as positive. The sixth
// normalised minor is cos^2(psi), so this rejects |psi| within ~1e-7 rad of pi/2.
inline constexpr double kMinorTolerance = 1e-14;

// Sylvester test on the closed-form leading principal minors of M(q).
inline MassPdResult is_mass_pd(const Vec6& q, const PlantParams& p) {
    const double sc = std::sin(q(axis::chi));
    const double cc = std::cos(q(axis::chi));
    const double cp = std::cos(q(axis::psi));
    const double m3 = p.m * p.m * p.m;

    MassPdResult r;
    r.minors = {p.m,
                p.m * p.m,
                m3,
                p.I_chi * m3,
                p.I_chi * m3 * (p.I_psi * cc * cc + p.I_zeta * sc * sc),
                m3 * p.I_chi * p.I_psi * p.I_zeta * cp * cp};

    const std::array<double, 6> scale = {p.m,
                                         p.m * p.m,
                                         m3,
                                         p.I_chi * m3,
                                         p.I_chi * m3 * std::max(p.I_psi, p.I_zeta),
                                         m3 * p.I_chi * p.I_psi * p.I_zeta};
    r.positive_definite = true;
    for (std::size_t k = 0; k < 6; ++k) {
        if (!(scale[k] > 0.0) || !(r.minors[k] / scale[k] > kMinorTolerance)) {
            r.positive_definite = false;
        }
    }
    return r;
}

inline void require_mass_pd(const Vec6& q, const PlantParams& p) {
    if (!is_mass_pd(q, p).positive_definite) {
        throw SingularMass("mass matrix not positive definite at psi = " +
                           std::to_string(q(axis::psi)));
    }
}

// q'' from M q'' = W - (C + D) q'. Uses a Cholesky solve, never M^-1.
inline Vec6 forward_dynamics(const GeneralizedState& s, const Wrench& w, const PlantParams& p) {
    require_mass_pd(s.q, p);
    const Mat6 M = mass_matrix(s.q, p);
    const Vec6 rhs = w - (coriolis_matrix(s.q, s.qdot, p) + p.damping()) * s.qdot;
    Eigen::LLT<Mat6> llt(M);
    if (llt.info() != Eigen::Success) {
        throw SingularMass("mass matrix Cholesky factorisation failed");
    }
    return llt.solve(rhs);
}

// Kinetic energy 1/2 q'^T M(q) q'.
inline double kinetic_energy(const GeneralizedState& s, const PlantParams& p) {
    return 0.5 * s.qdot.dot(mass_matrix(s.q, p) * s.qdot);
}

}  // namespace maglev
