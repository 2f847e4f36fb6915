#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bcmarket/utility.hpp"

namespace bcmarket {

struct User {
    std::string name;
    UtilitySpec utility;
    /// nullopt means no budget constraint (unconstrained demand).
    std::optional<double> budget;

    bool operator==(const User&) const = default;
};

/// C(y) = (a/2) y^2 + c0 y
struct CostFunction {
    double a = 1.0;
    double c0 = 0.0;

    double value(double y) const { return 0.5 * a * y * y + c0 * y; }
    double marginal(double y) const { return a * y + c0; }

    bool operator==(const CostFunction&) const = default;
};

struct Scenario {
    std::vector<User> users;
    CostFunction cost;

    bool operator==(const Scenario&) const = default;
};

/// Checks parameter ranges, budgets and name uniqueness. Throws
/// MarketError(validation) naming the offending user or field. Does not check
/// the non-trivial-market assumption; solvers report that separately.
void validate(const Scenario& s);

/// True if some user with positive budget has u'(0+) > C'(0).
bool has_active_user(const Scenario& s);

enum class DemandMode { budget_constrained, unconstrained };

/// max{0, min{(u')^-1(lam), b/lam}}
double demand(const User& user, double lam);

/// max{0, (u')^-1(lam)}, ignoring the budget.
double demand_unconstrained(const User& user, double lam);

double demand(const User& user, double lam, DemandMode mode);

/// max{0, (lam - c0)/a}
double supply(const CostFunction& cost, double lam);

/// sum_i x_i*(lam) - y*(lam)
double excess_demand(const Scenario& s, double lam, DemandMode mode = DemandMode::budget_constrained);

/// lam * demand(user, lam)
double expenditure(const User& user, double lam);

}  // namespace bcmarket
