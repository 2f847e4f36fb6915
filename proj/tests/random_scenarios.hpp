#pragma once

// Seeded scenario generator shared by the property and acceptance suites.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bcmarket/market.hpp"

namespace bcmarket::testing {

inline UtilitySpec random_utility(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> beta(1.0, 10.0);
    std::uniform_real_distribution<double> curvature(0.1, 2.0);
    std::uniform_real_distribution<double> scale(1.0, 10.0);
    std::uniform_real_distribution<double> drag(0.0, 1.0);
    switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
        case 0: {
            const double b = beta(rng);
            return Quadratic{b, curvature(rng)};
        }
        case 1: return Sqrt{scale(rng)};
        default: {
            const double a = scale(rng);
            return SqrtLinear{a, drag(rng)};
        }
    }
}

/// n in [1, 10]; beta in [1, 10], quadratic alpha in [0.1, 2], sqrt scales in
/// [1, 10], budgets in [0.5, 10], cost a in [0.5, 2], c0 in [0, 1]. Redraws
/// until some user values consumption above C'(0).
inline Scenario random_scenario(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, 10);
    std::uniform_real_distribution<double> budget(0.5, 10.0);
    std::uniform_real_distribution<double> a(0.5, 2.0);
    std::uniform_real_distribution<double> c0(0.0, 1.0);
    for (;;) {
        Scenario s;
        s.cost = {a(rng), c0(rng)};
        const int n = count(rng);
        for (int i = 0; i < n; ++i)
            s.users.push_back({"u" + std::to_string(i + 1), random_utility(rng), budget(rng)});
        if (has_active_user(s)) return s;
    }
}

inline std::vector<Scenario> random_scenarios(std::uint64_t seed, int count) {
    std::mt19937_64 rng(seed);
    std::vector<Scenario> out;
    for (int i = 0; i < count; ++i) out.push_back(random_scenario(rng));
    return out;
}

inline Scenario two_quadratic(bool with_budgets = true) {
    Scenario s;
    s.cost = {1.0, 0.0};
    s.users.push_back({"user1", Quadratic{3.0, 0.2}, with_budgets ? std::optional<double>(5.0) : std::nullopt});
    s.users.push_back({"user2", Quadratic{5.0, 1.0}, with_budgets ? std::optional<double>(4.0) : std::nullopt});
    return s;
}

inline std::vector<double> log_grid(double lo, double hi, int points) {
    std::vector<double> g(static_cast<std::size_t>(points));
    const double step = std::log(hi / lo) / (points - 1);
    for (int i = 0; i < points; ++i) g[i] = lo * std::exp(step * i);
    g.back() = hi;
    return g;
}

}  // namespace bcmarket::testing
