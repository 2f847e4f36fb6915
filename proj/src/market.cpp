#include "bcmarket/market.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "bcmarket/error.hpp"

namespace bcmarket {

namespace {

void require_positive_price(double lam, const char* where) {
    if (!(lam > 0.0)) {
        std::ostringstream os;
        os << where << ": price must be > 0, got " << lam;
        throw_domain(os.str());
    }
}

}  // namespace

void validate(const Scenario& s) {
    auto fail = [](const std::string& msg) { throw MarketError(ErrorCode::validation, msg); };
    if (s.users.empty()) fail("scenario: at least one user is required");
    if (!std::isfinite(s.cost.a) || !(s.cost.a > 0.0))
        fail("cost: 'a' must be > 0, got " + std::to_string(s.cost.a));
    if (!std::isfinite(s.cost.c0) || s.cost.c0 < 0.0)
        fail("cost: 'c0' must be >= 0, got " + std::to_string(s.cost.c0));

    std::set<std::string> names;
    for (const User& u : s.users) {
        if (u.name.empty()) fail("user: name must be non-empty");
        if (!names.insert(u.name).second) fail("user '" + u.name + "': duplicate name");
        try {
            validate_utility(u.utility);
        } catch (const MarketError& e) {
            fail("user '" + u.name + "': " + e.what());
        }
        if (u.budget && (std::isnan(*u.budget) || *u.budget < 0.0 || std::isinf(*u.budget)))
            fail("user '" + u.name + "': budget must be a finite number >= 0, got " +
                 std::to_string(*u.budget));
    }
}

bool has_active_user(const Scenario& s) {
    return std::any_of(s.users.begin(), s.users.end(), [&](const User& u) {
        return (!u.budget || *u.budget > 0.0) && choke_price(u.utility) > s.cost.c0;
    });
}

double demand_unconstrained(const User& user, double lam) {
    require_positive_price(lam, "demand_unconstrained");
    return std::max(0.0, inv_du(user.utility, lam).value_or(0.0));
}

double demand(const User& user, double lam) {
    require_positive_price(lam, "demand");
    const double unconstrained = std::max(0.0, inv_du(user.utility, lam).value_or(0.0));
    if (!user.budget) return unconstrained;
    return std::max(0.0, std::min(unconstrained, *user.budget / lam));
}

double demand(const User& user, double lam, DemandMode mode) {
    return mode == DemandMode::budget_constrained ? demand(user, lam) : demand_unconstrained(user, lam);
}

double supply(const CostFunction& cost, double lam) {
    require_positive_price(lam, "supply");
    return std::max(0.0, (lam - cost.c0) / cost.a);
}

double excess_demand(const Scenario& s, double lam, DemandMode mode) {
    require_positive_price(lam, "excess_demand");
    double total = 0.0;
    for (const User& u : s.users) total += demand(u, lam, mode);
    return total - supply(s.cost, lam);
}

double expenditure(const User& user, double lam) {
    return lam * demand(user, lam);
}

}  // namespace bcmarket
