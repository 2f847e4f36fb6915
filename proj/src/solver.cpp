#include "bcmarket/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace bcmarket {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBindingTol = 1e-6;
constexpr double kZeroDemand = 1e-9;

// primal projected gradient
constexpr double kPrimalFloor = 1e-12;
constexpr double kPrimalRoundToZero = 1e-8;
// Stationarity target relative to the price tolerance. Allocation error on a
// binding piece is about |grad| * x, so budget feasibility at 1e-9 needs a
// gradient well below the price tolerance.
constexpr double kPrimalGradientScale = 1e-3;
constexpr double kArmijoShrink = 0.5;
constexpr double kArmijoInitialStep = 1.0;
constexpr double kArmijoSufficient = 1e-4;
constexpr int kMaxBacktracks = 200;

// constant-step divergence guard
constexpr long kGuardWindow = 100;
constexpr double kGuardGrowth = 10.0;

constexpr int kMaxBracketDoublings = 100;

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

void require_nontrivial(const Scenario& s, double lambda_floor, DemandMode mode) {
    const bool active = mode == DemandMode::budget_constrained
                            ? has_active_user(s)
                            : std::any_of(s.users.begin(), s.users.end(), [&](const User& u) {
                                  return choke_price(u.utility) > s.cost.c0;
                              });
    if (!active)
        throw MarketError(ErrorCode::trivial_equilibrium,
                          "no user with a positive budget has u'(0) above marginal cost C'(0) = " +
                              fmt_double(s.cost.c0) + ", the market clears only at zero consumption");
    const double f = excess_demand(s, lambda_floor, mode);
    if (f <= 0.0)
        throw MarketError(ErrorCode::trivial_equilibrium,
                          "excess demand at the price floor is " + fmt_double(f) +
                              " <= 0: no user values consumption above marginal cost C'(0) = " +
                              fmt_double(s.cost.c0) + ", the market clears only at zero consumption");
}

TraceRow make_row(const Scenario& s, long k, double lam, double alpha, DemandMode mode) {
    TraceRow row;
    row.k = k;
    row.lambda = lam;
    row.alpha = alpha;
    row.x.reserve(s.users.size());
    double total = 0.0;
    for (const User& u : s.users) {
        row.x.push_back(demand(u, lam, mode));
        total += row.x.back();
    }
    row.y = supply(s.cost, lam);
    row.f = total - row.y;
    return row;
}

double cost_increment(const CostFunction& c, double y, double dy) {
    // C(y + dy) - C(y) without cancellation
    return dy * (0.5 * c.a * (2.0 * y + dy) + c.c0);
}

double adaptive_trapezoid(const auto& f, double a, double b, double fa, double fb, double whole, double tol,
                          int depth) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double left = 0.5 * (m - a) * (fa + fm);
    const double right = 0.5 * (b - m) * (fm + fb);
    const double refined = left + right;
    const double err = refined - whole;
    if (depth >= 50 || (depth >= 4 && std::abs(err) <= 3.0 * tol)) return refined + err / 3.0;
    return adaptive_trapezoid(f, a, m, fa, fm, left, 0.5 * tol, depth + 1) +
           adaptive_trapezoid(f, m, b, fm, fb, right, 0.5 * tol, depth + 1);
}

}  // namespace

double step_size(const StepSchedule& schedule, long k) {
    if (const auto* c = std::get_if<ConstantStep>(&schedule)) return c->alpha0;
    const auto& d = std::get<DiminishingStep>(schedule);
    return d.alpha0 / (1.0 + static_cast<double>(k) / d.tau);
}

void SolverOptions::validate() const {
    auto fail = [](const std::string& what) { throw MarketError(ErrorCode::domain, what); };
    std::visit(
        [&](const auto& sched) {
            if (!(sched.alpha0 > 0.0)) fail("solver options: alpha0 must be > 0");
            if constexpr (std::is_same_v<std::decay_t<decltype(sched)>, DiminishingStep>) {
                if (!(sched.tau > 0.0)) fail("solver options: tau must be > 0");
            }
        },
        step_schedule);
    if (!(tolerance > 0.0)) fail("solver options: tolerance must be > 0");
    if (max_iters <= 0) fail("solver options: max_iters must be > 0");
    if (!(lambda0 > 0.0)) fail("solver options: lambda0 must be > 0");
    if (!(lambda_floor > 0.0)) fail("solver options: lambda_floor must be > 0");
}

const char* to_string(Method m) noexcept {
    switch (m) {
        case Method::dual: return "dual";
        case Method::bisect: return "bisect";
        case Method::primal: return "primal";
        case Method::unconstrained: return "unconstrained";
    }
    return "unknown";
}

EquilibriumResult evaluate_at(const Scenario& s, double lam, DemandMode mode, Method method, long iterations) {
    EquilibriumResult r;
    r.lambda_star = lam;
    r.method = method;
    r.iterations = iterations;
    double total = 0.0;
    for (const User& u : s.users) {
        const double x = demand(u, lam, mode);
        const double spend = lam * x;
        r.x_star.push_back(x);
        r.expenditures.push_back(spend);
        r.binding.push_back(u.budget && std::abs(spend - *u.budget) <= kBindingTol);
        total += x;
    }
    r.y_star = supply(s.cost, lam);
    r.clearing_residual = std::abs(total - r.y_star);
    return r;
}

DualAscentOutput dual_ascent(const Scenario& s, const SolverOptions& opts, DemandMode mode) {
    opts.validate();
    validate(s);
    require_nontrivial(s, opts.lambda_floor, mode);

    const bool guarded = std::holds_alternative<ConstantStep>(opts.step_schedule);
    const Method method = mode == DemandMode::budget_constrained ? Method::dual : Method::unconstrained;

    IterationTrace trace;
    double lam = std::max(opts.lambda_floor, opts.lambda0);
    for (long k = 0; k < opts.max_iters; ++k) {
        const double alpha = step_size(opts.step_schedule, k);
        trace.rows.push_back(make_row(s, k, lam, alpha, mode));
        const double f = trace.rows.back().f;

        if (guarded && k >= kGuardWindow) {
            const double past = std::abs(trace.rows[k - kGuardWindow].f);
            if (std::abs(f) > kGuardGrowth * std::max(past, opts.tolerance))
                throw NonConvergenceError("dual ascent diverging: |f| grew from " + fmt_double(past) + " to " +
                                              fmt_double(std::abs(f)) + " over " +
                                              std::to_string(kGuardWindow) + " iterations; reduce alpha0",
                                          std::move(trace));
        }

        const double next = std::max(opts.lambda_floor, lam + alpha * f);
        if (std::abs(next - lam) < opts.tolerance) {
            EquilibriumResult r = evaluate_at(s, next, mode, method, k + 1);
            return {std::move(r), std::move(trace)};
        }
        lam = next;
    }
    const double last_f = trace.rows.back().f;
    throw NonConvergenceError("dual ascent: max_iters = " + std::to_string(opts.max_iters) +
                                  " reached with excess demand " + fmt_double(last_f) + " at price " +
                                  fmt_double(lam),
                              std::move(trace));
}

EquilibriumResult bisection_clear(const Scenario& s, const SolverOptions& opts, DemandMode mode,
                                  IterationTrace* trace) {
    opts.validate();
    validate(s);
    require_nontrivial(s, opts.lambda_floor, mode);

    double lo = opts.lambda_floor;
    double hi = std::max(1.0, s.cost.c0 + 1.0);
    int doublings = 0;
    while (excess_demand(s, hi, mode) >= 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > kMaxBracketDoublings)
            throw MarketError(ErrorCode::internal, "bisection: no price up to 2^100 makes excess demand negative");
    }

    long it = 0;
    while (hi - lo >= opts.tolerance && it < opts.max_iters) {
        const double mid = 0.5 * (lo + hi);
        const double f = excess_demand(s, mid, mode);
        if (trace) trace->rows.push_back(make_row(s, it, mid, hi - lo, mode));
        if (f > 0.0)
            lo = mid;
        else
            hi = mid;
        ++it;
    }
    if (hi - lo >= opts.tolerance)
        throw NonConvergenceError("bisection: bracket width " + fmt_double(hi - lo) + " after max_iters",
                                  trace ? *trace : IterationTrace{});
    const Method method = mode == DemandMode::budget_constrained ? Method::bisect : Method::unconstrained;
    return evaluate_at(s, 0.5 * (lo + hi), mode, method, it);
}

EquilibriumResult primal_solve(const Scenario& s, const SolverOptions& opts) {
    opts.validate();
    validate(s);
    std::vector<ModifiedUtility> mus;
    mus.reserve(s.users.size());
    for (const User& u : s.users) {
        if (u.budget && *u.budget <= 0.0)
            throw MarketError(ErrorCode::unsupported_scenario,
                              "primal solve: user '" + u.name + "' has budget " + fmt_double(*u.budget) +
                                  "; the modified utility needs a positive budget");
        mus.push_back(build_modified(u.utility, u.budget.value_or(kInf)));
    }
    require_nontrivial(s, opts.lambda_floor, DemandMode::budget_constrained);

    const std::size_t n = s.users.size();
    std::vector<double> x(n, 1.0);
    std::vector<double> grad(n);
    std::vector<double> trial(n);

    long it = 0;
    bool converged = false;
    for (; it < opts.max_iters; ++it) {
        const double y = std::accumulate(x.begin(), x.end(), 0.0);
        const double marginal_cost = s.cost.marginal(y);
        double pg_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            grad[i] = eval_modified_du(mus[i], x[i]) - marginal_cost;
            const double step = std::max(kPrimalFloor, x[i] + grad[i]) - x[i];
            pg_sq += step * step;
        }
        if (std::sqrt(pg_sq) < kPrimalGradientScale * opts.tolerance) {
            converged = true;
            break;
        }

        double t = kArmijoInitialStep;
        bool accepted = false;
        for (int ls = 0; ls < kMaxBacktracks; ++ls, t *= kArmijoShrink) {
            double slope = 0.0;
            double gain = 0.0;
            double dy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                trial[i] = std::max(kPrimalFloor, x[i] + t * grad[i]);
                const double d = trial[i] - x[i];
                slope += grad[i] * d;
                dy += d;
                gain += modified_increment(mus[i], x[i], trial[i]);
            }
            gain -= cost_increment(s.cost, y, dy);
            if (gain >= kArmijoSufficient * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted)
            throw NonConvergenceError("primal solve: line search failed at iteration " + std::to_string(it),
                                      IterationTrace{}, x);
        x.swap(trial);
    }
    if (!converged)
        throw NonConvergenceError("primal solve: projected gradient above tolerance after max_iters = " +
                                      std::to_string(opts.max_iters),
                                  IterationTrace{}, x);

    for (double& xi : x)
        if (xi < kPrimalRoundToZero) xi = 0.0;

    EquilibriumResult r;
    r.method = Method::primal;
    r.iterations = it;
    r.x_star = x;
    r.y_star = std::accumulate(x.begin(), x.end(), 0.0);
    r.lambda_star = s.cost.marginal(r.y_star);
    for (std::size_t i = 0; i < n; ++i) {
        const double spend = r.lambda_star * x[i];
        r.expenditures.push_back(spend);
        const auto& b = s.users[i].budget;
        r.binding.push_back(b && std::abs(spend - *b) <= kBindingTol);
    }
    r.clearing_residual = std::abs(std::accumulate(x.begin(), x.end(), 0.0) - r.y_star);
    return r;
}

EquilibriumResult unconstrained_solve(const Scenario& s, const SolverOptions& opts) {
    return dual_ascent(s, opts, DemandMode::unconstrained).result;
}

double KktReport::max_stationarity() const {
    double m = 0.0;
    for (const auto& u : users) m = std::max(m, u.stationarity);
    return m;
}

double KktReport::min_budget_margin() const {
    double m = kInf;
    for (const auto& u : users) m = std::min(m, u.budget_margin);
    return m;
}

KktReport verify_kkt(const Scenario& s, const EquilibriumResult& r) {
    if (!(r.lambda_star > 0.0)) throw_domain("verify_kkt: result price must be > 0");
    if (r.x_star.size() != s.users.size()) throw_domain("verify_kkt: allocation count does not match users");

    const double lam = r.lambda_star;
    KktReport rep;
    bool pass = true;
    double total = 0.0;
    for (std::size_t i = 0; i < s.users.size(); ++i) {
        const User& u = s.users[i];
        const double x = r.x_star[i];
        total += x;
        UserResidual res;
        if (x > kZeroDemand) {
            double marginal = eval_du(u.utility, x);
            if (u.budget) marginal = std::min(marginal, *u.budget / x);
            res.stationarity = std::abs(marginal - lam);
        } else {
            // x = 0 is optimal iff the modified marginal at 0+ does not exceed the price
            double marginal0 = choke_price(u.utility);
            if (u.budget && *u.budget <= 0.0) marginal0 = 0.0;
            res.stationarity = std::max(0.0, marginal0 - lam);
        }
        res.budget_margin = u.budget ? *u.budget - lam * x : kInf;
        pass = pass && res.stationarity < kKktResidualTol && res.budget_margin > -kBudgetSlack;
        rep.users.push_back(res);
    }
    rep.clearing = std::abs(total - r.y_star);
    rep.supply_stationarity = r.y_star > kZeroDemand ? std::abs(s.cost.marginal(r.y_star) - lam)
                                                     : std::max(0.0, lam - s.cost.c0);
    rep.pass = pass && rep.clearing < kKktResidualTol && rep.supply_stationarity < kKktResidualTol;
    return rep;
}

double lyapunov_value(const Scenario& s, double lam, double lam_star, DemandMode mode) {
    if (!(lam > 0.0) || !(lam_star > 0.0)) throw_domain("lyapunov_value: prices must be > 0");
    if (lam == lam_star) return 0.0;

    auto f = [&](double mu) { return excess_demand(s, mu, mode); };
    const double fa = f(lam_star);
    const double fb = f(lam);
    // coarse estimate sets the absolute target for the 1e-8 relative accuracy
    constexpr int kCoarse = 16;
    double coarse = 0.0;
    double prev = fa;
    for (int i = 1; i <= kCoarse; ++i) {
        const double mu = lam_star + (lam - lam_star) * i / kCoarse;
        const double cur = i == kCoarse ? fb : f(mu);
        coarse += 0.5 * (cur + prev) * (lam - lam_star) / kCoarse;
        prev = cur;
    }
    const double tol = 1e-8 * std::max(std::abs(coarse), 1e-14);
    const double integral = adaptive_trapezoid(f, lam_star, lam, fa, fb, 0.5 * (lam - lam_star) * (fa + fb), tol, 0);
    return -integral;
}

void annotate_lyapunov(const Scenario& s, IterationTrace& trace, double lam_star, DemandMode mode) {
    for (auto& row : trace.rows) row.lyapunov = lyapunov_value(s, row.lambda, lam_star, mode);
}

}  // namespace bcmarket
