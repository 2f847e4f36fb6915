#include "bcmarket/utility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bcmarket/error.hpp"

namespace bcmarket {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

void require_positive_budget(double budget, const char* where) {
    if (!(budget > 0.0)) {
        std::ostringstream os;
        os << where << ": budget must be > 0, got " << budget;
        throw_domain(os.str());
    }
}

// g(x) = u'(x) x - b. Positive where the budget binds.
double crossover_gap(const UtilitySpec& spec, double budget, double x) {
    return eval_du(spec, x) * x - budget;
}

// Largest x where u' > 0, or +inf.
double marginal_support(const UtilitySpec& spec) {
    return std::visit(overloaded{
                          [](const Quadratic& q) { return q.beta / q.alpha; },
                          [](const Sqrt&) { return kInf; },
                          [](const SqrtLinear& s) {
                              if (s.gamma <= 0.0) return kInf;
                              return s.alpha * s.alpha / (4.0 * s.gamma * s.gamma);
                          },
                      },
                      spec);
}

double piece_value(const ModifiedUtility& mu, SegmentKind kind, double x) {
    return kind == SegmentKind::original ? eval_u(mu.base, x) : mu.budget * std::log(x);
}

double piece_increment(const ModifiedUtility& mu, SegmentKind kind, double x0, double x1) {
    if (kind == SegmentKind::original) return utility_increment(mu.base, x0, x1);
    return mu.budget * std::log1p((x1 - x0) / x0);
}

}  // namespace

void validate_utility(const UtilitySpec& spec) {
    auto fail = [&](const std::string& param, double v, const char* rule) {
        std::ostringstream os;
        os << kind_name(spec) << " utility: parameter '" << param << "' must be " << rule
           << ", got " << v;
        throw MarketError(ErrorCode::validation, os.str());
    };
    std::visit(overloaded{
                   [&](const Quadratic& q) {
                       if (!finite_positive(q.beta)) fail("beta", q.beta, "> 0");
                       if (!finite_positive(q.alpha)) fail("alpha", q.alpha, "> 0");
                   },
                   [&](const Sqrt& s) {
                       if (!finite_positive(s.alpha)) fail("alpha", s.alpha, "> 0");
                   },
                   [&](const SqrtLinear& s) {
                       if (!finite_positive(s.alpha)) fail("alpha", s.alpha, "> 0");
                       if (!std::isfinite(s.gamma) || s.gamma < 0.0) fail("gamma", s.gamma, ">= 0");
                   },
               },
               spec);
}

std::string kind_name(const UtilitySpec& spec) {
    return std::visit(overloaded{
                          [](const Quadratic&) { return std::string("quadratic"); },
                          [](const Sqrt&) { return std::string("sqrt"); },
                          [](const SqrtLinear&) { return std::string("sqrt_linear"); },
                      },
                      spec);
}

double eval_u(const UtilitySpec& spec, double x) {
    if (!(x >= 0.0)) throw_domain("eval_u: quantity must be >= 0");
    return std::visit(overloaded{
                          [x](const Quadratic& q) { return q.beta * x - 0.5 * q.alpha * x * x; },
                          [x](const Sqrt& s) { return s.alpha * std::sqrt(x); },
                          [x](const SqrtLinear& s) { return s.alpha * std::sqrt(x) - s.gamma * x; },
                      },
                      spec);
}

double eval_du(const UtilitySpec& spec, double x) {
    return std::visit(overloaded{
                          [x](const Quadratic& q) {
                              if (!(x >= 0.0)) throw_domain("eval_du: quantity must be >= 0");
                              return q.beta - q.alpha * x;
                          },
                          [x](const Sqrt& s) {
                              if (!(x > 0.0)) throw_domain("eval_du: sqrt marginal needs x > 0");
                              return s.alpha / (2.0 * std::sqrt(x));
                          },
                          [x](const SqrtLinear& s) {
                              if (!(x > 0.0)) throw_domain("eval_du: sqrt_linear marginal needs x > 0");
                              return s.alpha / (2.0 * std::sqrt(x)) - s.gamma;
                          },
                      },
                      spec);
}

std::optional<double> inv_du(const UtilitySpec& spec, double lam) {
    if (!(lam > 0.0)) throw_domain("inv_du: price must be > 0");
    return std::visit(overloaded{
                          [lam](const Quadratic& q) -> std::optional<double> {
                              if (lam >= q.beta) return std::nullopt;
                              return (q.beta - lam) / q.alpha;
                          },
                          [lam](const Sqrt& s) -> std::optional<double> {
                              const double r = s.alpha / (2.0 * lam);
                              return r * r;
                          },
                          [lam](const SqrtLinear& s) -> std::optional<double> {
                              const double r = s.alpha / (2.0 * (lam + s.gamma));
                              return r * r;
                          },
                      },
                      spec);
}

double choke_price(const UtilitySpec& spec) {
    if (const auto* q = std::get_if<Quadratic>(&spec)) return q->beta;
    return kInf;
}

double utility_increment(const UtilitySpec& spec, double x0, double x1) {
    if (!(x0 >= 0.0) || !(x1 >= 0.0)) throw_domain("utility_increment: quantities must be >= 0");
    const double d = x1 - x0;
    if (d == 0.0) return 0.0;
    return std::visit(overloaded{
                          [&](const Quadratic& q) { return d * (q.beta - 0.5 * q.alpha * (x0 + x1)); },
                          [&](const Sqrt& s) { return s.alpha * d / (std::sqrt(x0) + std::sqrt(x1)); },
                          [&](const SqrtLinear& s) {
                              return s.alpha * d / (std::sqrt(x0) + std::sqrt(x1)) - s.gamma * d;
                          },
                      },
                      spec);
}

std::vector<double> find_crossovers(const UtilitySpec& spec, double budget) {
    require_positive_budget(budget, "find_crossovers");
    if (std::isinf(budget)) return {};
    if (const auto* q = std::get_if<Quadratic>(&spec)) {
        // alpha x^2 - beta x + b = 0; a double root is a tangency, not a regime change
        const double disc = q->beta * q->beta - 4.0 * q->alpha * budget;
        if (disc <= 0.0) return {};
        const double half = 0.5 * (q->beta + std::sqrt(disc));
        return {budget / half, half / q->alpha};
    }
    if (const auto* s = std::get_if<Sqrt>(&spec)) {
        // alpha sqrt(x) / 2 = b
        const double root = 2.0 * budget / s->alpha;
        return {root * root};
    }
    return find_crossovers_numeric(spec, budget);
}

std::vector<double> find_crossovers_numeric(const UtilitySpec& spec, double budget) {
    require_positive_budget(budget, "find_crossovers_numeric");
    if (std::isinf(budget)) return {};

    constexpr double kLo = 1e-8;
    constexpr int kGridPoints = 512;
    constexpr double kRelTol = 1e-10;

    double x_max = marginal_support(spec);
    if (std::isinf(x_max)) {
        // g is concave and increasing for these kinds; bracket its single root
        double x = 1.0;
        while (crossover_gap(spec, budget, x) <= 0.0 && x < 1e15) x *= 2.0;
        x_max = 4.0 * x;
    }
    if (x_max <= kLo) return {};

    const double log_lo = std::log(kLo);
    const double log_step = (std::log(x_max) - log_lo) / (kGridPoints - 1);
    std::vector<double> roots;
    double x_prev = kLo;
    bool pos_prev = crossover_gap(spec, budget, x_prev) > 0.0;
    for (int i = 1; i < kGridPoints; ++i) {
        const double x = (i == kGridPoints - 1) ? x_max : std::exp(log_lo + i * log_step);
        const bool pos = crossover_gap(spec, budget, x) > 0.0;
        if (pos != pos_prev) {
            double lo = x_prev;
            double hi = x;
            for (int it = 0; it < 200 && hi - lo > kRelTol * lo; ++it) {
                const double mid = 0.5 * (lo + hi);
                if ((crossover_gap(spec, budget, mid) > 0.0) == pos_prev)
                    lo = mid;
                else
                    hi = mid;
            }
            roots.push_back(0.5 * (lo + hi));
        }
        x_prev = x;
        pos_prev = pos;
    }
    return roots;
}

std::size_t ModifiedUtility::segment_at(double x) const {
    return static_cast<std::size_t>(
        std::lower_bound(crossovers.begin(), crossovers.end(), x) - crossovers.begin());
}

ModifiedUtility build_modified(const UtilitySpec& spec, double budget) {
    require_positive_budget(budget, "build_modified");

    ModifiedUtility mu{spec, budget, find_crossovers(spec, budget), {}};
    const auto& cx = mu.crossovers;
    const std::size_t k = cx.size();

    auto probe = [&](std::size_t j) {
        if (k == 0) return 1.0;
        if (j == 0) return 0.5 * cx.front();
        if (j == k) return 2.0 * cx.back();
        return 0.5 * (cx[j - 1] + cx[j]);
    };

    for (std::size_t j = 0; j <= k; ++j) {
        const double p = probe(j);
        const bool binding = !std::isinf(budget) && eval_du(spec, p) > budget / p;
        mu.segments.push_back({binding ? SegmentKind::log_budget : SegmentKind::original, 0.0});
    }
    for (std::size_t j = 1; j <= k; ++j) {
        if (mu.segments[j].kind == mu.segments[j - 1].kind)
            throw MarketError(ErrorCode::internal,
                              "build_modified: adjacent segments share a regime at crossover " +
                                  std::to_string(cx[j - 1]));
        // match values at the crossover
        const double left = piece_value(mu, mu.segments[j - 1].kind, cx[j - 1]) + mu.segments[j - 1].constant;
        mu.segments[j].constant = left - piece_value(mu, mu.segments[j].kind, cx[j - 1]);
    }
    return mu;
}

double eval_modified(const ModifiedUtility& mu, double x) {
    if (!(x > 0.0)) throw_domain("eval_modified: quantity must be > 0");
    const Segment& seg = mu.segments[mu.segment_at(x)];
    return piece_value(mu, seg.kind, x) + seg.constant;
}

double eval_modified_du(const ModifiedUtility& mu, double x) {
    if (!(x > 0.0)) throw_domain("eval_modified_du: quantity must be > 0");
    return std::min(eval_du(mu.base, x), mu.budget / x);
}

double modified_increment(const ModifiedUtility& mu, double x0, double x1) {
    if (!(x0 > 0.0) || !(x1 > 0.0)) throw_domain("modified_increment: quantities must be > 0");
    if (x1 < x0) return -modified_increment(mu, x1, x0);
    const std::size_t last = mu.segment_at(x1);
    double sum = 0.0;
    double from = x0;
    for (std::size_t j = mu.segment_at(x0); j <= last; ++j) {
        const double to = (j == last) ? x1 : mu.crossovers[j];
        sum += piece_increment(mu, mu.segments[j].kind, from, to);
        from = to;
    }
    return sum;
}

}  // namespace bcmarket
