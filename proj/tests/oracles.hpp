#pragma once

// Reference computations shared by the test suites. Nothing here calls the
// library's closed-form model; the mass matrix is rebuilt from the body-rate
// kinematics of the Pitch-Yaw-Roll angles in long double.

#include <cmath>
#include <random>

#include "maglev/dynamics.hpp"

namespace oracle {

using maglev::Mat6;
using maglev::PlantParams;
using maglev::Vec6;

using LMat3 = Eigen::Matrix<long double, 3, 3>;
using LMat6 = Eigen::Matrix<long double, 6, 6>;

// omega_body = T(chi, psi) [chi', psi', zeta']
inline LMat3 body_rate_map(long double chi, long double psi) {
    LMat3 T;
    T << 1.0L, 0.0L, -std::sin(psi),
         0.0L, std::cos(chi), std::sin(chi) * std::cos(psi),
         0.0L, -std::sin(chi), std::cos(chi) * std::cos(psi);
    return T;
}

inline LMat6 mass_matrix_ld(const Vec6& q, const PlantParams& p) {
    LMat6 M = LMat6::Zero();
    M(0, 0) = M(1, 1) = M(2, 2) = p.m;
    const LMat3 T = body_rate_map(q(3), q(4));
    Eigen::Matrix<long double, 3, 1> I(p.I_chi, p.I_psi, p.I_zeta);
    M.bottomRightCorner<3, 3>() = T.transpose() * I.asDiagonal() * T;
    return M;
}

inline Mat6 mass_matrix(const Vec6& q, const PlantParams& p) { return mass_matrix_ld(q, p).cast<double>(); }

// dM/dq_k by central differences of the kinematic oracle.
inline std::array<Mat6, 6> mass_partials_fd(const Vec6& q, const PlantParams& p, double h = 1e-6) {
    std::array<Mat6, 6> dM;
    for (int k = 0; k < 6; ++k) {
        Vec6 qp = q, qm = q;
        qp(k) += h;
        qm(k) -= h;
        dM[k] = ((mass_matrix_ld(qp, p) - mass_matrix_ld(qm, p)) / (2.0L * h)).cast<double>();
    }
    return dM;
}

// Gamma_ijk = 1/2 (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i)
inline std::array<Mat6, 6> christoffel_fd(const Vec6& q, const PlantParams& p) {
    const auto dM = mass_partials_fd(q, p);
    std::array<Mat6, 6> g;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            for (int k = 0; k < 6; ++k) g[i](j, k) = 0.5 * (dM[k](i, j) + dM[j](i, k) - dM[i](j, k));
    return g;
}

inline Mat6 coriolis_fd(const Vec6& q, const Vec6& qdot, const PlantParams& p) {
    const auto g = christoffel_fd(q, p);
    Mat6 C;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            double s = 0.0;
            for (int k = 0; k < 6; ++k) s += g[i](j, k) * qdot(k);
            C(i, j) = s;
        }
    return C;
}

// Random states in the operating box: translations +/-10 mm, angles +/-5 mrad.
struct StateSampler {
    std::mt19937_64 rng;
    explicit StateSampler(std::uint64_t seed) : rng(seed) {}

    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

    maglev::GeneralizedState operator()(double angle = 5e-3, double rate = 0.05) {
        maglev::GeneralizedState s;
        for (int i = 0; i < 3; ++i) {
            s.q(i) = uniform(-1e-2, 1e-2);
            s.qdot(i) = uniform(-0.1, 0.1);
        }
        for (int i = 3; i < 6; ++i) {
            s.q(i) = uniform(-angle, angle);
            s.qdot(i) = uniform(-rate, rate);
        }
        return s;
    }

    Vec6 vec(double scale) {
        Vec6 v;
        for (int i = 0; i < 6; ++i) v(i) = uniform(-scale, scale);
        return v;
    }
};

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace oracle
