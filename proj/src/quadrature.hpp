#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "vps/errors.hpp"
#include "vps/structure_function.hpp"

namespace vps::detail {

/// Globally adaptive Gauss-Kronrod (G7/K15): repeatedly bisects the subinterval with the
/// largest error estimate until the total estimate meets max(abs_tol, rel_tol |I|).
template <class F>
double adaptive_gk(F&& f, double a, double b, const QuadratureOptions& opt, const char* what,
                   double* error_out = nullptr, std::size_t max_intervals = 4000)
{
    using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;
    struct Piece {
        double a, b, value, error;
        bool operator<(const Piece& o) const { return error < o.error; }
    };
    auto eval = [&](double lo, double hi) {
        double err = 0.0;
        const double v = Rule::integrate(f, lo, hi, 0, 0.0, &err);
        // the non-adaptive rule reports its error on the reference interval [-1, 1]
        return Piece{lo, hi, v, err * 0.5 * std::abs(hi - lo)};
    };
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (a == b) return 0.0;
    std::priority_queue<Piece> heap;
    Piece first = eval(a, b);
    double total = first.value;
    double total_err = first.error;
    heap.push(first);
    std::size_t count = 1;
    auto target = [&] {
        // roundoff floor of the rule itself, as in QUADPACK
        return std::max({opt.abs_tol, opt.rel_tol * std::abs(total), 50.0 * eps * std::abs(total)});
    };
    auto resum_error = [&] {
        auto copy = heap;
        total_err = 0.0;
        for (; !copy.empty(); copy.pop()) total_err += copy.top().error;
    };
    while (total_err > target()) {
        if (count % 64 == 0) {
            resum_error();
            if (total_err <= target()) break;
        }
        if (count >= max_intervals) {
            throw QuadratureFailure(std::string("adaptive quadrature did not converge for ") + what
                                    + " (error estimate " + std::to_string(total_err) + ")");
        }
        Piece worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            throw QuadratureFailure(std::string("interval underflow in quadrature for ") + what);
        }
        Piece left = eval(worst.a, mid);
        Piece right = eval(mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++count;
    }
    // re-sum to shed accumulated cancellation in the running total
    double sum = 0.0, err = 0.0;
    std::vector<Piece> pieces;
    pieces.reserve(heap.size());
    while (!heap.empty()) {
        pieces.push_back(heap.top());
        heap.pop();
    }
    for (auto it = pieces.rbegin(); it != pieces.rend(); ++it) {
        sum += it->value;
        err += it->error;
    }
    if (error_out) *error_out = err;
    return sum;
}

}  // namespace vps::detail
