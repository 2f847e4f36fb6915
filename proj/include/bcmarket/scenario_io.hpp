#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcmarket/market.hpp"
#include "bcmarket/solver.hpp"

namespace bcmarket {

inline constexpr int kSchemaVersion = 1;

/// Parses a JSON scenario document (schema_version 1) and validates it.
/// Throws MarketError(parse) on malformed JSON and MarketError(validation)
/// on schema violations; messages name the offending field or user.
Scenario parse_scenario(std::string_view text);

Scenario load_scenario(const std::string& path);

/// JSON text that parse_scenario() maps back to an identical Scenario.
std::string serialize_scenario(const Scenario& s);

/// A header row plus numeric rows; written as comma-separated text.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::string to_csv() const;
};

/// Locale-independent, 12 significant digits.
std::string format_number(double v);

/// Columns: lambda, demand_<user>..., aggregate, supply, excess.
Table export_curves(const Scenario& s, std::span<const double> lam_grid,
                    DemandMode mode = DemandMode::budget_constrained);

/// Columns: x, u, u_hat, binding (1 where u'(x) > b/x).
Table export_modified_utility(const UtilitySpec& spec, double budget, std::span<const double> x_grid);

/// Columns: k, lambda, f, alpha, y, x_1..x_n, and lyapunov when every row has one.
Table export_trace(const IterationTrace& trace);

/// Parses comma-separated numeric text written by Table::to_csv.
Table parse_csv(std::string_view text);

std::vector<double> linspace(double lo, double hi, int points);

}  // namespace bcmarket
