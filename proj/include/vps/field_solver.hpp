#pragma once

// Newtonian potential U = 1/|.| * rho of axisymmetric, z-even densities.
//
// The azimuthal integral of 1/|x - x'| gives the kernel
//   G_axi(r, z; r', z') = 4 K(m) / sqrt(D),  D = (r + r')^2 + (z - z')^2,  m = 4 r r' / D,
// with K in the parameter convention K(m) = int_0^{pi/2} (1 - m sin^2 t)^{-1/2} dt.

#include <Eigen/Dense>

#include "vps/field.hpp"

namespace vps {

/// Complete elliptic integral of the first kind, parameter m in [0, 1), by the AGM.
double elliptic_K(double m);
/// Same integral given the complementary parameter m1 = 1 - m in (0, 1]; accurate as m1 -> 0.
double elliptic_K_complement(double m1);

double axi_kernel(double r, double z, double rp, double zp);

/// Weight C_ij such that U_i = sum_j C_ij rho_j, including the z-mirror image of cell j.
/// The target's own cell is integrated with the logarithmic singularity subtracted analytically.
double kernel_coefficient(const CylGrid& g, std::size_t target, std::size_t source);

/// Dense kernel matrix, built once per grid and reused across Newton iterations.
class PotentialOperator {
public:
    explicit PotentialOperator(const CylGrid& grid);

    const CylGrid& grid() const { return grid_; }
    const Eigen::MatrixXd& matrix() const { return C_; }
    /// Cell volumes, the quadrature weights of total_mass.
    const Eigen::VectorXd& volumes() const { return V_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& rho) const;
    ScalarField apply(const ScalarField& rho) const;

private:
    CylGrid grid_;
    Eigen::MatrixXd C_;
    Eigen::VectorXd V_;
};

/// Matrix-free route: sums only over sources with rho != 0.
ScalarField potential(const ScalarField& rho);

struct GradientField {
    ScalarField dr;
    ScalarField dz;
};

/// Second-order centered differences; d/dr = 0 on the axis, d/dz = 0 on the equator,
/// one-sided second-order stencils on the outer edges.
GradientField gradient(const ScalarField& U);

/// Discrete Laplacian at an interior node (both neighbours in each direction on the grid).
double laplacian_at(const ScalarField& U, std::size_t i, std::size_t j);

/// max |Delta U + 4 pi rho| / (4 pi sup rho) over support nodes whose whole stencil has rho > 0.
double laplacian_residual(const ScalarField& U, const ScalarField& rho);

double total_mass(const ScalarField& rho);

/// -(1/4 pi) times the flux of grad U through the sphere of the given radius.
double surface_flux_mass(const ScalarField& U, double radius);

}  // namespace vps
