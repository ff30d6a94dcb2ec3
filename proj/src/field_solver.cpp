#include "vps/field_solver.hpp"

#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>

#include "vps/parallel.hpp"

namespace vps {

namespace {

using boost::math::quadrature::gauss;

/// int_0^a int_0^b ln sqrt(x^2 + y^2) dy dx
double log_quadrant(double a, double b)
{
    return 0.5 * (a * b * std::log(a * a + b * b) - 3.0 * a * b + a * a * std::atan(b / a) + b * b * std::atan(a / b));
}

/// int_0^a int_{-b}^{b} r' / sqrt(r'^2 + s^2) ds dr'
double axis_cell(double a, double b)
{
    return 2.0 * (0.5 * b * std::sqrt(a * a + b * b) + 0.5 * a * a * std::asinh(b / a) - 0.5 * b * b);
}

/// Exact-singularity integral of G_axi r' over the target's own cell.
double self_cell(const CylGrid& g, std::size_t i, std::size_t j)
{
    const double r = g.r(i), z = g.z(j);
    const double hr = 0.5 * g.dr, hz = 0.5 * g.dz;
    double value;
    if (i == 0) {
        value = 2.0 * M_PI * axis_cell(hr, hz);
    } else {
        // G r' = A - B ln d with B -> 2 at the target; integrate G r' + 2 ln d by Gauss on the
        // four quadrants meeting at the target and add -2 int ln d in closed form.
        const double B0 = 2.0;
        auto smooth = [&](double rp, double zp) {
            const double d = std::hypot(r - rp, z - zp);
            return axi_kernel(r, z, rp, zp) * rp + B0 * std::log(d);
        };
        double sum = 0.0;
        for (double sr : {-1.0, 1.0}) {
            for (double sz : {-1.0, 1.0}) {
                sum += gauss<double, 20>::integrate(
                    [&](double x) {
                        return gauss<double, 20>::integrate(
                            [&](double y) { return smooth(r + sr * x, z + sz * y); }, 0.0, hz);
                    },
                    0.0, hr);
            }
        }
        value = sum - B0 * 4.0 * log_quadrant(hr, hz);
    }
    return value;
}

/// Gauss integral of G_axi r' over source cell (is, js), or its z-mirror, seen from (r, z).
template <unsigned Order = 10>
double cell_integral(const CylGrid& g, double r, double z, std::size_t is, std::size_t js, bool mirror)
{
    const double rlo = is == 0 ? 0.0 : g.r(is) - 0.5 * g.dr, rhi = g.r(is) + 0.5 * g.dr;
    const double zlo = js == 0 ? 0.0 : g.z(js) - 0.5 * g.dz, zhi = g.z(js) + 0.5 * g.dz;
    const double sign = mirror ? -1.0 : 1.0;
    return gauss<double, Order>::integrate(
        [&](double rp) {
            return gauss<double, Order>::integrate([&](double zp) { return axi_kernel(r, z, rp, sign * zp) * rp; },
                                                zlo, zhi);
        },
        rlo, rhi);
}

constexpr std::size_t kNear = 2;

std::size_t dist(std::size_t a, std::size_t b)
{
    return a > b ? a - b : b - a;
}

constexpr std::size_t kMid = 16;

}  // namespace

double axi_kernel(double r, double z, double rp, double zp)
{
    const double dz = z - zp;
    const double D = (r + rp) * (r + rp) + dz * dz;
    const double d2 = (r - rp) * (r - rp) + dz * dz;
    if (d2 == 0.0) return std::numeric_limits<double>::infinity();
    return 4.0 * elliptic_K_complement(d2 / D) / std::sqrt(D);
}

namespace {

/// Collocation weight of source cell (is, js) and its mirror at target (it, jt), before symmetrization.
double one_sided(const CylGrid& g, std::size_t it, std::size_t jt, std::size_t is, std::size_t js)
{
    const double r = g.r(it), z = g.z(jt), rp = g.r(is), zp = g.z(js);
    auto piece = [&](std::size_t di, std::size_t dj, bool mirror) {
        if (di <= kNear && dj <= kNear) return cell_integral<10>(g, r, z, is, js, mirror);
        if (di <= kMid && dj <= kMid) return cell_integral<3>(g, r, z, is, js, mirror);
        return g.cell_area(is, js) * axi_kernel(r, z, rp, mirror ? -zp : zp);
    };
    const std::size_t di = dist(it, is);
    if (it == is && jt == js) {
        // the row-0 self cell already spans its own mirror image
        return self_cell(g, it, jt) + (jt == 0 ? 0.0 : piece(di, jt + js, true));
    }
    return piece(di, dist(jt, js), false) + piece(di, jt + js, true);
}

}  // namespace

double kernel_coefficient(const CylGrid& g, std::size_t target, std::size_t source)
{
    const std::size_t it = target / g.Nz, jt = target % g.Nz;
    const std::size_t is = source / g.Nz, js = source % g.Nz;
    if (target == source) return one_sided(g, it, jt, is, js);
    // outside the quadrature window the collocation weights are already symmetric
    if (dist(it, is) > kMid || dist(jt, js) > kMid) return one_sided(g, it, jt, is, js);
    const double ratio = g.cell_area(is, js) / g.cell_area(it, jt);
    return 0.5 * (one_sided(g, it, jt, is, js) + ratio * one_sided(g, is, js, it, jt));
}

PotentialOperator::PotentialOperator(const CylGrid& grid) : grid_(grid), C_(grid.size(), grid.size()), V_(grid.size())
{
    const std::size_t n = grid.size();
    for (std::size_t s = 0; s < n; ++s) V_[s] = grid.cell_volume(s / grid.Nz, s % grid.Nz);
    parallel_for(n, [&](std::size_t t) {
        for (std::size_t s = t; s < n; ++s) {
            C_(t, s) = kernel_coefficient(grid_, t, s);
            if (s != t) C_(s, t) = C_(t, s) * V_[t] / V_[s];
        }
    });
}

Eigen::VectorXd PotentialOperator::apply(const Eigen::VectorXd& rho) const
{
    return C_ * rho;
}

ScalarField PotentialOperator::apply(const ScalarField& rho) const
{
    ScalarField U(grid_, FieldKind::Potential);
    Eigen::Map<Eigen::VectorXd>(U.values.data(), U.values.size()) =
        C_ * Eigen::Map<const Eigen::VectorXd>(rho.values.data(), rho.values.size());
    return U;
}

ScalarField potential(const ScalarField& rho)
{
    const CylGrid& g = rho.grid;
    std::vector<std::size_t> sources;
    for (std::size_t s = 0; s < g.size(); ++s)
        if (rho.values[s] != 0.0) sources.push_back(s);
    ScalarField U(g, FieldKind::Potential);
    parallel_for(g.size(), [&](std::size_t t) {
        double sum = 0.0;
        for (std::size_t s : sources) sum += kernel_coefficient(g, t, s) * rho.values[s];
        U.values[t] = sum;
    });
    return U;
}

GradientField gradient(const ScalarField& U)
{
    const CylGrid& g = U.grid;
    GradientField G{ScalarField(g, U.kind), ScalarField(g, U.kind)};
    for (std::size_t i = 0; i < g.Nr; ++i) {
        for (std::size_t j = 0; j < g.Nz; ++j) {
            if (i == 0) {
                G.dr(i, j) = 0.0;
            } else if (i == g.Nr - 1) {
                G.dr(i, j) = (3.0 * U(i, j) - 4.0 * U(i - 1, j) + U(i - 2, j)) / (2.0 * g.dr);
            } else {
                G.dr(i, j) = (U(i + 1, j) - U(i - 1, j)) / (2.0 * g.dr);
            }
            if (j == 0) {
                G.dz(i, j) = 0.0;
            } else if (j == g.Nz - 1) {
                G.dz(i, j) = (3.0 * U(i, j) - 4.0 * U(i, j - 1) + U(i, j - 2)) / (2.0 * g.dz);
            } else {
                G.dz(i, j) = (U(i, j + 1) - U(i, j - 1)) / (2.0 * g.dz);
            }
        }
    }
    return G;
}

double laplacian_at(const ScalarField& U, std::size_t i, std::size_t j)
{
    const CylGrid& g = U.grid;
    const double c = U(i, j);
    double radial;
    if (i == 0) {
        radial = 4.0 * (U(1, j) - c) / (g.dr * g.dr);
    } else {
        radial = (U(i + 1, j) - 2.0 * c + U(i - 1, j)) / (g.dr * g.dr)
               + (U(i + 1, j) - U(i - 1, j)) / (2.0 * g.dr * g.r(i));
    }
    double vertical;
    if (j == 0) {
        vertical = 2.0 * (U(i, 1) - c) / (g.dz * g.dz);
    } else {
        vertical = (U(i, j + 1) - 2.0 * c + U(i, j - 1)) / (g.dz * g.dz);
    }
    return radial + vertical;
}

double laplacian_residual(const ScalarField& U, const ScalarField& rho)
{
    const CylGrid& g = U.grid;
    const double sup = rho.sup_abs();
    if (sup == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < g.Nr; ++i) {
        for (std::size_t j = 0; j + 1 < g.Nz; ++j) {
            if (!(rho(i, j) > 0.0 && rho(i + 1, j) > 0.0 && rho(i, j + 1) > 0.0)) continue;
            if (i > 0 && !(rho(i - 1, j) > 0.0)) continue;
            if (j > 0 && !(rho(i, j - 1) > 0.0)) continue;
            worst = std::max(worst, std::abs(laplacian_at(U, i, j) + 4.0 * M_PI * rho(i, j)));
        }
    }
    return worst / (4.0 * M_PI * sup);
}

double total_mass(const ScalarField& rho)
{
    const CylGrid& g = rho.grid;
    double sum = 0.0;
    for (std::size_t i = 0; i < g.Nr; ++i)
        for (std::size_t j = 0; j < g.Nz; ++j) sum += g.cell_volume(i, j) * rho(i, j);
    return sum;
}

double surface_flux_mass(const ScalarField& U, double radius)
{
    const GradientField grad = gradient(U);
    auto integrand = [&](double theta) {
        const double s = std::sin(theta), c = std::cos(theta);
        const double r = radius * s, z = radius * c;
        return (interpolate(grad.dr, r, z) * s + interpolate(grad.dz, r, z) * c) * s;
    };
    constexpr int panels = 32;
    const double h = 0.5 * M_PI / panels;
    double sum = 0.0;
    for (int k = 0; k < panels; ++k) sum += gauss<double, 7>::integrate(integrand, k * h, (k + 1) * h);
    return -radius * radius * sum;
}

}  // namespace vps
