#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bcmarket/error.hpp"
#include "bcmarket/market.hpp"

namespace bcmarket {

struct ConstantStep {
    double alpha0 = 0.5;
};

/// alpha_k = alpha0 / (1 + k/tau)
struct DiminishingStep {
    double alpha0 = 0.5;
    double tau = 50.0;
};

using StepSchedule = std::variant<ConstantStep, DiminishingStep>;

double step_size(const StepSchedule& schedule, long k);

struct SolverOptions {
    StepSchedule step_schedule = DiminishingStep{};
    double tolerance = 1e-8;
    long max_iters = 200'000;
    double lambda0 = 1.0;
    double lambda_floor = 1e-9;

    /// Throws MarketError(domain) on non-positive settings.
    void validate() const;
};

enum class Method { dual, bisect, primal, unconstrained };

const char* to_string(Method m) noexcept;

struct EquilibriumResult {
    double lambda_star = 0.0;
    std::vector<double> x_star;
    double y_star = 0.0;
    std::vector<double> expenditures;
    std::vector<bool> binding;  // expenditure within 1e-6 of the budget
    double clearing_residual = 0.0;
    long iterations = 0;
    Method method = Method::bisect;
};

struct TraceRow {
    long k = 0;
    double lambda = 0.0;
    std::vector<double> x;
    double y = 0.0;
    double f = 0.0;
    double alpha = 0.0;
    std::optional<double> lyapunov;
};

struct IterationTrace {
    std::vector<TraceRow> rows;
};

class NonConvergenceError : public MarketError {
public:
    NonConvergenceError(const std::string& what, IterationTrace trace, std::vector<double> last_iterate = {})
        : MarketError(ErrorCode::non_convergence, what),
          trace_(std::move(trace)),
          last_iterate_(std::move(last_iterate)) {}

    const IterationTrace& trace() const noexcept { return trace_; }
    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

private:
    IterationTrace trace_;
    std::vector<double> last_iterate_;
};

struct DualAscentOutput {
    EquilibriumResult result;
    IterationTrace trace;
};

/// Price update lam <- max{floor, lam + alpha_k f(lam)} with budget-constrained
/// demand, stopped when |lam_{k+1} - lam_k| < tolerance.
DualAscentOutput dual_ascent(const Scenario& s, const SolverOptions& opts = {},
                             DemandMode mode = DemandMode::budget_constrained);

/// Bracket-and-bisect on the excess demand. Reference oracle for the other
/// solvers. When `trace` is given, each bisection midpoint is appended to it.
EquilibriumResult bisection_clear(const Scenario& s, const SolverOptions& opts = {},
                                  DemandMode mode = DemandMode::budget_constrained,
                                  IterationTrace* trace = nullptr);

/// Projected gradient ascent on sum_i û_i(x_i) - C(sum_i x_i); the price is
/// recovered as C'(y). Requires every budget to be > 0 (absent = unlimited).
EquilibriumResult primal_solve(const Scenario& s, const SolverOptions& opts = {});

/// Dual ascent with budget-free demand.
EquilibriumResult unconstrained_solve(const Scenario& s, const SolverOptions& opts = {});

/// Builds a result with all responses evaluated at `lam`.
EquilibriumResult evaluate_at(const Scenario& s, double lam, DemandMode mode, Method method, long iterations);

struct UserResidual {
    double stationarity = 0.0;  // |min{u'(x), b/x} - lam|, or the one-sided gap at x = 0
    double budget_margin = 0.0; // b - lam x (+inf without a budget)
};

struct KktReport {
    std::vector<UserResidual> users;
    double clearing = 0.0;
    double supply_stationarity = 0.0;
    bool pass = false;

    double max_stationarity() const;
    double min_budget_margin() const;
};

inline constexpr double kKktResidualTol = 1e-4;
inline constexpr double kBudgetSlack = 1e-9;

KktReport verify_kkt(const Scenario& s, const EquilibriumResult& r);

/// V(lam) = -int_{lam*}^{lam} f(mu) dmu by adaptive trapezoid.
double lyapunov_value(const Scenario& s, double lam, double lam_star,
                      DemandMode mode = DemandMode::budget_constrained);

/// Fills the lyapunov column of every trace row.
void annotate_lyapunov(const Scenario& s, IterationTrace& trace, double lam_star,
                       DemandMode mode = DemandMode::budget_constrained);

}  // namespace bcmarket
