#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace bcmarket {

/// u(x) = beta*x - (alpha/2)*x^2
struct Quadratic {
    double beta;
    double alpha;

    bool operator==(const Quadratic&) const = default;
};

/// u(x) = alpha*sqrt(x)
struct Sqrt {
    double alpha;

    bool operator==(const Sqrt&) const = default;
};

/// u(x) = alpha*sqrt(x) - gamma*x
struct SqrtLinear {
    double alpha;
    double gamma;

    bool operator==(const SqrtLinear&) const = default;
};

/// Parametric strictly concave utility. Parameters are validated by
/// validate_utility(); the evaluation functions assume a valid spec.
using UtilitySpec = std::variant<Quadratic, Sqrt, SqrtLinear>;

/// Throws MarketError(validation) naming the offending parameter.
void validate_utility(const UtilitySpec& spec);

/// "quadratic", "sqrt" or "sqrt_linear".
std::string kind_name(const UtilitySpec& spec);

double eval_u(const UtilitySpec& spec, double x);
double eval_du(const UtilitySpec& spec, double x);

/// Unique x > 0 with u'(x) = lam, or nullopt when lam >= u'(0+).
std::optional<double> inv_du(const UtilitySpec& spec, double lam);

/// u'(0+); +inf for the square-root families.
double choke_price(const UtilitySpec& spec);

/// u(x1) - u(x0), evaluated without cancellation for nearby points.
double utility_increment(const UtilitySpec& spec, double x0, double x1);

/// Positive solutions of u'(x)*x = b, ascending. Closed forms for the
/// quadratic and square-root kinds, numeric scan otherwise.
std::vector<double> find_crossovers(const UtilitySpec& spec, double budget);

/// Log-grid sign-change scan plus bisection on u'(x)*x - b. Works for every
/// kind; exposed so it can be checked against the closed forms.
std::vector<double> find_crossovers_numeric(const UtilitySpec& spec, double budget);

enum class SegmentKind { original, log_budget };

struct Segment {
    SegmentKind kind;
    double constant;  // additive constant on this piece
};

/// Budget-spliced utility: u(x) + c on slack pieces, b*log(x) + d on binding
/// pieces, joined continuously at the crossovers. An infinite budget yields a
/// single original segment (û = u).
struct ModifiedUtility {
    UtilitySpec base;
    double budget;
    std::vector<double> crossovers;  // strictly increasing, all > 0
    std::vector<Segment> segments;   // crossovers.size() + 1 entries

    /// Index of the segment containing x (crossover points belong to the left piece).
    std::size_t segment_at(double x) const;
};

ModifiedUtility build_modified(const UtilitySpec& spec, double budget);

double eval_modified(const ModifiedUtility& mu, double x);

/// min{u'(x), b/x}
double eval_modified_du(const ModifiedUtility& mu, double x);

/// û(x1) - û(x0) accumulated piece by piece; accurate when x1 is close to x0.
double modified_increment(const ModifiedUtility& mu, double x0, double x1);

}  // namespace bcmarket
