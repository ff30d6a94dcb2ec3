#include "vps/radial_solver.hpp"

#include <array>
#include <cmath>
#include <ostream>

#include <boost/numeric/odeint.hpp>

#include "vps/errors.hpp"
#include "vps/format.hpp"
#include "vps/parallel.hpp"

namespace vps {

namespace {

using State = std::array<double, 2>;
namespace odeint = boost::numeric::odeint;

struct RadialSystem {
    const StructureFunction& sf;
    void operator()(const State& x, State& dxdr, double r) const
    {
        dxdr[0] = x[1];
        dxdr[1] = -2.0 * x[1] / r - 4.0 * M_PI * G_eval(sf, x[0]);
    }
};

struct Shot {
    double R = 0.0;
    double du_R = 0.0;
};

Shot shoot(const StructureFunction& sf, double u0, double Gc, const RadialConfig& cfg,
           double tol_scale, std::vector<double>* grid_r, std::vector<State>* grid_x)
{
    const double ell = std::sqrt(u0 / (4.0 * M_PI * Gc));
    const double r0 = cfg.start_factor * ell;
    State x{u0 - (2.0 * M_PI / 3.0) * Gc * r0 * r0, -(4.0 * M_PI / 3.0) * Gc * r0};

    auto stepper = odeint::make_dense_output(cfg.abs_tol * u0 * tol_scale, cfg.rel_tol * tol_scale,
                                             odeint::runge_kutta_dopri5<State>());
    RadialSystem sys{sf};
    stepper.initialize(x, r0, 1e-3 * ell);

    Shot shot;
    std::size_t steps = 0;
    for (;;) {
        auto [t0, t1] = stepper.do_step(sys);
        if (!std::isfinite(stepper.current_state()[0])) {
            throw StiffnessFailure("radial integration produced a non-finite state at r = " + fmt17(t1));
        }
        if (t1 - t0 < 1e-14 * t1 || ++steps > 2000000) {
            throw StiffnessFailure("radial step control collapsed at r = " + fmt17(t1));
        }
        if (stepper.current_state()[0] <= 0.0) {
            double lo = t0, hi = t1;
            State mid;
            while (hi - lo > cfg.root_tol * hi) {
                const double m = 0.5 * (lo + hi);
                stepper.calc_state(m, mid);
                (mid[0] > 0.0 ? lo : hi) = m;
            }
            shot.R = 0.5 * (lo + hi);
            stepper.calc_state(shot.R, mid);
            shot.du_R = mid[1];
            break;
        }
        if (t1 >= cfg.r_max) throw NoCompactSupport(cfg.r_max, stepper.current_state()[0]);
    }

    if (grid_r) {
        // second pass: identical steps, sampled through dense output
        std::vector<double> times;
        for (double r : *grid_r)
            if (r > r0 && r < shot.R) times.push_back(r);
        State y{u0 - (2.0 * M_PI / 3.0) * Gc * r0 * r0, -(4.0 * M_PI / 3.0) * Gc * r0};
        std::vector<State> out;
        times.insert(times.begin(), r0);
        odeint::integrate_times(odeint::make_dense_output(cfg.abs_tol * u0 * tol_scale, cfg.rel_tol * tol_scale,
                                                          odeint::runge_kutta_dopri5<State>()),
                                sys, y, times.begin(), times.end(), 1e-3 * ell,
                                [&](const State& s, double) { out.push_back(s); });
        grid_x->clear();
        std::size_t k = 1;
        for (double r : *grid_r) {
            if (r <= r0) {
                grid_x->push_back({u0 - (2.0 * M_PI / 3.0) * Gc * r * r, -(4.0 * M_PI / 3.0) * Gc * r});
            } else if (r < shot.R) {
                grid_x->push_back(out[k++]);
            } else {
                grid_x->push_back({0.0, shot.du_R});
            }
        }
    }
    return shot;
}

}  // namespace

double RadialProfile::u_at(double rq) const
{
    if (rq >= R) return M / rq + alpha;
    const std::size_t n = r.size();
    const double h = R / static_cast<double>(n - 1);
    std::size_t i = std::min(static_cast<std::size_t>(rq / h), n - 2);
    const double t = (rq - r[i]) / h;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * u[i] + h10 * h * du[i] + h01 * u[i + 1] + h11 * h * du[i + 1];
}

double RadialProfile::rho_at(const StructureFunction& sf, double rq) const
{
    return G_eval(sf, u_at(rq));
}

RadialProfile solve_radial(const StructureFunction& sf, double a, const RadialConfig& cfg)
{
    if (!(a > 0.0)) throw DomainError("center density must be positive, got " + fmt17(a));
    if (cfg.samples < 3 || cfg.samples % 2 == 0) throw DomainError("radial sample count must be odd and >= 3");

    RadialProfile p;
    p.a = a;
    p.sf_id = sf.id();
    p.u0 = G_inverse(sf, a);
    const double Gc = G_eval(sf, p.u0);

    const Shot first = shoot(sf, p.u0, Gc, cfg, 1.0, nullptr, nullptr);
    p.R = first.R;
    p.du_R = first.du_R;
    p.M = -p.R * p.R * p.du_R;
    p.alpha = -p.M / p.R;

    const int n = cfg.samples;
    p.r.resize(n);
    for (int i = 0; i < n; ++i) p.r[i] = p.R * static_cast<double>(i) / (n - 1);
    std::vector<State> xs;
    shoot(sf, p.u0, Gc, cfg, 1.0, &p.r, &xs);
    p.u.resize(n);
    p.du.resize(n);
    p.rho.resize(n);
    for (int i = 0; i < n; ++i) {
        p.u[i] = xs[i][0];
        p.du[i] = xs[i][1];
        p.rho[i] = G_eval(sf, p.u[i]);
    }
    p.u[n - 1] = 0.0;
    p.rho[n - 1] = 0.0;

    if (cfg.error_estimate) {
        const Shot loose = shoot(sf, p.u0, Gc, cfg, 10.0, nullptr, nullptr);
        p.R_error = std::abs(loose.R - p.R);
        p.M_error = std::abs(-loose.R * loose.R * loose.du_R - p.M);
    }
    return p;
}

double mass_of(const RadialProfile& p)
{
    const std::size_t n = p.r.size();
    const double h = p.R / static_cast<double>(n - 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = p.r[i] * p.r[i] * p.rho[i];
        const double wgt = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        sum += wgt * f;
    }
    return 4.0 * M_PI * sum * h / 3.0;
}

MassCurve mass_curve(const StructureFunction& sf, const std::vector<double>& a_list, const RadialConfig& cfg,
                     double h_log)
{
    static constexpr int offsets[5] = {0, -2, -1, 1, 2};
    RadialConfig quick = cfg;
    quick.error_estimate = false;
    quick.samples = 3;

    struct Job {
        double R = 0, M = 0, alpha = 0;
        std::optional<std::string> failure;
    };
    std::vector<Job> jobs(a_list.size() * 5);
    parallel_for(jobs.size(), [&](std::size_t k) {
        const double a = a_list[k / 5] * std::exp(offsets[k % 5] * h_log);
        try {
            const RadialProfile p = solve_radial(sf, a, quick);
            jobs[k] = {p.R, p.M, p.alpha, std::nullopt};
        } catch (const Error& e) {
            jobs[k].failure = e.what();
        }
    });

    MassCurve curve;
    for (std::size_t i = 0; i < a_list.size(); ++i) {
        MassCurvePoint pt;
        pt.a = a_list[i];
        const Job* J = &jobs[5 * i];
        pt.R = J[0].R;
        pt.M = J[0].M;
        pt.alpha = J[0].alpha;
        for (int k = 0; k < 5; ++k) {
            if (J[k].failure) {
                pt.failure = J[k].failure;
                break;
            }
        }
        if (!pt.failure) {
            const double dM_dlog = (J[1].M - 8.0 * J[2].M + 8.0 * J[3].M - J[4].M) / (12.0 * h_log);
            pt.dMda = dM_dlog / pt.a;
            if (std::abs(dM_dlog / pt.M) < curve.degenerate_tol) curve.degenerate = true;
        }
        curve.points.push_back(pt);
    }
    const MassCurvePoint* prev = nullptr;
    for (const auto& pt : curve.points) {
        if (pt.failure) continue;
        if (prev && prev->dMda * pt.dMda < 0.0) curve.sign_change = true;
        prev = &pt;
    }
    return curve;
}

void write_profile_csv(std::ostream& os, const RadialProfile& p)
{
    os << "r,u,rho\n";
    for (std::size_t i = 0; i < p.r.size(); ++i) {
        os << fmt17(p.r[i]) << ',' << fmt17(p.u[i]) << ',' << fmt17(p.rho[i]) << '\n';
    }
}

void write_mass_curve_csv(std::ostream& os, const MassCurve& curve)
{
    os << "a,R,M,alpha,dMda\n";
    for (const auto& pt : curve.points) {
        if (pt.failure) {
            os << fmt17(pt.a) << ",nan,nan,nan,nan\n";
            continue;
        }
        os << fmt17(pt.a) << ',' << fmt17(pt.R) << ',' << fmt17(pt.M) << ',' << fmt17(pt.alpha) << ','
           << fmt17(pt.dMda) << '\n';
    }
}

}  // namespace vps
