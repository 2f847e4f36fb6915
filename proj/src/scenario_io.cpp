#include "bcmarket/scenario_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bcmarket/error.hpp"

namespace bcmarket {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& what) {
    throw MarketError(ErrorCode::validation, what);
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) invalid(where + ": unknown field '" + key + "'");
}

double number_field(const json& obj, const std::string& key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) invalid(where + ": missing field '" + key + "'");
    if (!it->is_number()) invalid(where + ": field '" + key + "' must be a number");
    return it->get<double>();
}

UtilitySpec parse_utility(const json& j, const std::string& where) {
    if (!j.is_object()) invalid(where + ": 'utility' must be an object");
    const auto kind_it = j.find("kind");
    if (kind_it == j.end() || !kind_it->is_string()) invalid(where + ": utility needs a string field 'kind'");
    const std::string kind = kind_it->get<std::string>();
    if (kind == "quadratic") {
        reject_unknown_keys(j, {"kind", "beta", "alpha"}, where + " utility");
        return Quadratic{number_field(j, "beta", where), number_field(j, "alpha", where)};
    }
    if (kind == "sqrt") {
        reject_unknown_keys(j, {"kind", "alpha"}, where + " utility");
        return Sqrt{number_field(j, "alpha", where)};
    }
    if (kind == "sqrt_linear") {
        reject_unknown_keys(j, {"kind", "alpha", "gamma"}, where + " utility");
        return SqrtLinear{number_field(j, "alpha", where), number_field(j, "gamma", where)};
    }
    invalid(where + ": unknown utility kind '" + kind + "' (expected quadratic, sqrt or sqrt_linear)");
}

json utility_to_json(const UtilitySpec& spec) {
    return std::visit(
        [](const auto& u) -> json {
            using T = std::decay_t<decltype(u)>;
            if constexpr (std::is_same_v<T, Quadratic>)
                return {{"kind", "quadratic"}, {"beta", u.beta}, {"alpha", u.alpha}};
            else if constexpr (std::is_same_v<T, Sqrt>)
                return {{"kind", "sqrt"}, {"alpha", u.alpha}};
            else
                return {{"kind", "sqrt_linear"}, {"alpha", u.alpha}, {"gamma", u.gamma}};
        },
        spec);
}

void require_increasing_positive(std::span<const double> grid, const char* what) {
    if (grid.empty()) throw_domain(std::string(what) + ": grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw_domain(std::string(what) + ": grid entries must be > 0, got " + format_number(grid[i]));
        if (i > 0 && !(grid[i] > grid[i - 1])) throw_domain(std::string(what) + ": grid must be strictly increasing");
    }
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw MarketError(ErrorCode::parse, std::string("scenario JSON: ") + e.what());
    }
    if (!doc.is_object()) invalid("scenario: top level must be a JSON object");
    reject_unknown_keys(doc, {"schema_version", "description", "cost", "users"}, "scenario");

    const auto ver = doc.find("schema_version");
    if (ver == doc.end()) invalid("scenario: missing field 'schema_version'");
    if (!ver->is_number_integer() || ver->get<long long>() != kSchemaVersion)
        invalid("scenario: unknown schema_version " + ver->dump() + " (supported: 1)");

    Scenario s;
    const auto cost = doc.find("cost");
    if (cost == doc.end() || !cost->is_object()) invalid("scenario: missing object field 'cost'");
    reject_unknown_keys(*cost, {"a", "c0"}, "cost");
    s.cost.a = number_field(*cost, "a", "cost");
    s.cost.c0 = number_field(*cost, "c0", "cost");

    const auto users = doc.find("users");
    if (users == doc.end() || !users->is_array()) invalid("scenario: missing array field 'users'");
    for (std::size_t i = 0; i < users->size(); ++i) {
        const json& ju = (*users)[i];
        std::string where = "users[" + std::to_string(i) + "]";
        if (!ju.is_object()) invalid(where + ": must be an object");
        reject_unknown_keys(ju, {"name", "utility", "budget"}, where);
        const auto name = ju.find("name");
        if (name == ju.end() || !name->is_string()) invalid(where + ": missing string field 'name'");
        User u;
        u.name = name->get<std::string>();
        where = "user '" + u.name + "'";
        const auto util = ju.find("utility");
        if (util == ju.end()) invalid(where + ": missing field 'utility'");
        u.utility = parse_utility(*util, where);
        if (ju.contains("budget")) u.budget = number_field(ju, "budget", where);
        s.users.push_back(std::move(u));
    }
    validate(s);
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) invalid("cannot open scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& s) {
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["cost"] = {{"a", s.cost.a}, {"c0", s.cost.c0}};
    json users = json::array();
    for (const User& u : s.users) {
        json ju = {{"name", u.name}, {"utility", utility_to_json(u.utility)}};
        if (u.budget) ju["budget"] = *u.budget;
        users.push_back(std::move(ju));
    }
    doc["users"] = std::move(users);
    return doc.dump(2) + "\n";
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

std::string Table::to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_number(row[i]);
        }
        out += '\n';
    }
    return out;
}

Table parse_csv(std::string_view text) {
    Table t;
    bool first = true;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        for (std::size_t start = 0;;) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (first) {
            for (auto c : cells) t.header.emplace_back(c);
            first = false;
            continue;
        }
        std::vector<double> row;
        for (auto c : cells) {
            double v = 0.0;
            const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (res.ec != std::errc{} || res.ptr != c.data() + c.size())
                throw MarketError(ErrorCode::parse, "csv: non-numeric cell '" + std::string(c) + "'");
            row.push_back(v);
        }
        if (row.size() != t.header.size())
            throw MarketError(ErrorCode::parse, "csv: row width does not match header");
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::vector<double> linspace(double lo, double hi, int points) {
    if (points < 2) throw_domain("linspace: need at least 2 points");
    std::vector<double> v(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) v[i] = i == points - 1 ? hi : lo + (hi - lo) * i / (points - 1);
    return v;
}

Table export_curves(const Scenario& s, std::span<const double> lam_grid, DemandMode mode) {
    require_increasing_positive(lam_grid, "export_curves");
    Table t;
    t.header.push_back("lambda");
    for (const User& u : s.users) t.header.push_back("demand_" + u.name);
    t.header.insert(t.header.end(), {"aggregate", "supply", "excess"});
    for (double lam : lam_grid) {
        std::vector<double> row{lam};
        double total = 0.0;
        for (const User& u : s.users) {
            row.push_back(demand(u, lam, mode));
            total += row.back();
        }
        const double y = supply(s.cost, lam);
        row.push_back(total);
        row.push_back(y);
        row.push_back(excess_demand(s, lam, mode));
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table export_modified_utility(const UtilitySpec& spec, double budget, std::span<const double> x_grid) {
    require_increasing_positive(x_grid, "export_modified_utility");
    const ModifiedUtility mu = build_modified(spec, budget);
    Table t;
    t.header = {"x", "u", "u_hat", "binding"};
    for (double x : x_grid) {
        const bool binding = eval_du(spec, x) > budget / x;
        t.rows.push_back({x, eval_u(spec, x), eval_modified(mu, x), binding ? 1.0 : 0.0});
    }
    return t;
}

Table export_trace(const IterationTrace& trace) {
    Table t;
    t.header = {"k", "lambda", "f", "alpha", "y"};
    const std::size_t n = trace.rows.empty() ? 0 : trace.rows.front().x.size();
    for (std::size_t i = 0; i < n; ++i) t.header.push_back("x_" + std::to_string(i + 1));
    const bool with_v = !trace.rows.empty() &&
                        std::all_of(trace.rows.begin(), trace.rows.end(), [](const TraceRow& r) { return r.lyapunov.has_value(); });
    if (with_v) t.header.push_back("lyapunov");
    for (const TraceRow& r : trace.rows) {
        std::vector<double> row{static_cast<double>(r.k), r.lambda, r.f, r.alpha, r.y};
        row.insert(row.end(), r.x.begin(), r.x.end());
        if (with_v) row.push_back(*r.lyapunov);
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace bcmarket
