#include <cmath>

#include "vps/errors.hpp"
#include "vps/field_solver.hpp"
#include "vps/format.hpp"

namespace vps {

double elliptic_K_complement(double m1)
{
    if (!(m1 > 0.0) || m1 > 1.0) throw DomainError("elliptic_K: complementary parameter outside (0, 1]: " + fmt17(m1));
    double a = 1.0, b = std::sqrt(m1);
    for (int k = 0; k < 64 && std::abs(a - b) > 1e-15 * a; ++k) {
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
    }
    return M_PI / (a + b);
}

double elliptic_K(double m)
{
    if (!(m >= 0.0) || m >= 1.0) throw DomainError("elliptic_K: parameter must lie in [0, 1), got " + fmt17(m));
    return elliptic_K_complement(1.0 - m);
}

}  // namespace vps
