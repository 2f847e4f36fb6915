#include "cli.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bcmarket/scenario_io.hpp"
#include "bcmarket/solver.hpp"

namespace bcmarket::cli {

namespace {

constexpr double kVerifyGap = 1e-4;

std::string strf(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    return buf;
}

struct SolverFlags {
    std::string schedule = "diminishing";
    double tol = 1e-8;
    double lambda0 = 1.0;
    double alpha0 = 0.5;
    double tau = 50.0;
    long max_iters = 200'000;

    void attach(CLI::App* cmd) {
        cmd->add_option("--tol", tol, "Price tolerance")->check(CLI::PositiveNumber);
        cmd->add_option("--lambda0", lambda0, "Initial price for dual ascent")->check(CLI::PositiveNumber);
        cmd->add_option("--alpha0", alpha0, "Initial dual step size")->check(CLI::PositiveNumber);
        cmd->add_option("--tau", tau, "Step decay horizon (diminishing schedule)")->check(CLI::PositiveNumber);
        cmd->add_option("--max-iters", max_iters, "Iteration limit")->check(CLI::PositiveNumber);
        cmd->add_option("--schedule", schedule, "Dual step schedule")
            ->check(CLI::IsMember({"diminishing", "constant"}));
    }

    SolverOptions options() const {
        SolverOptions o;
        if (schedule == "constant")
            o.step_schedule = ConstantStep{alpha0};
        else
            o.step_schedule = DiminishingStep{alpha0, tau};
        o.tolerance = tol;
        o.lambda0 = lambda0;
        o.max_iters = max_iters;
        return o;
    }
};

const std::map<std::string, Method> kMethods{
    {"dual", Method::dual}, {"bisect", Method::bisect}, {"primal", Method::primal}};

EquilibriumResult solve_with(Method m, const Scenario& s, const SolverOptions& o) {
    switch (m) {
        case Method::dual: return dual_ascent(s, o).result;
        case Method::primal: return primal_solve(s, o);
        case Method::unconstrained: return unconstrained_solve(s, o);
        case Method::bisect: break;
    }
    return bisection_clear(s, o);
}

Scenario without_budgets(Scenario s) {
    for (User& u : s.users) u.budget.reset();
    return s;
}

std::string budget_text(const User& u, const char* fmt) {
    return u.budget ? strf(fmt, *u.budget) : std::string("none");
}

void print_result(std::ostream& out, const Scenario& s, const EquilibriumResult& r) {
    out << strf("%-18s %s\n", "method", to_string(r.method));
    out << strf("%-18s %.9f\n", "lambda*", r.lambda_star);
    out << strf("%-18s %.9f\n", "y*", r.y_star);
    out << strf("%-18s %.3e\n", "clearing residual", r.clearing_residual);
    out << strf("%-18s %ld\n", "iterations", r.iterations);
    out << '\n';
    out << strf("%-12s %14s %14s %14s %8s\n", "user", "x*", "expenditure", "budget", "binding");
    for (std::size_t i = 0; i < s.users.size(); ++i)
        out << strf("%-12s %14.9f %14.9f %14s %8s\n", s.users[i].name.c_str(), r.x_star[i], r.expenditures[i],
                    budget_text(s.users[i], "%.9f").c_str(), r.binding[i] ? "yes" : "no");
}

void print_compare(std::ostream& out, const Scenario& s, const EquilibriumResult& unc,
                   const EquilibriumResult& con) {
    out << strf("%-12s %21s   %21s   %8s\n", "", "unconstrained", "budget constrained", "");
    out << strf("%-12s %10s %10s   %10s %10s   %8s\n", "user", "x*", "lambda*x*", "x*", "lambda*x*", "b");
    for (std::size_t i = 0; i < s.users.size(); ++i)
        out << strf("%-12s %10.3f %10.3f   %10.3f %10.3f   %8s\n", s.users[i].name.c_str(), unc.x_star[i],
                    unc.expenditures[i], con.x_star[i], con.expenditures[i],
                    budget_text(s.users[i], "%.1f").c_str());
    out << strf("%-12s %21.3f   %21.3f\n", "lambda", unc.lambda_star, con.lambda_star);
}

void write_table(const Table& t, const std::string& path, std::ostream& out) {
    const std::string csv = t.to_csv();
    if (path.empty()) {
        out << csv;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw MarketError(ErrorCode::validation, "--out: cannot write '" + path + "'");
    f << csv;
    out << "wrote " << t.rows.size() << " rows to " << path << '\n';
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::non_convergence:
        case ErrorCode::internal: return kNonConvergence;
        case ErrorCode::trivial_equilibrium: return kTrivialEquilibrium;
        case ErrorCode::domain:
        case ErrorCode::validation:
        case ErrorCode::parse:
        case ErrorCode::unsupported_scenario: return kInvalidScenario;
    }
    return kUsage;
}

int run_verify(std::ostream& out, const Scenario& s, const SolverOptions& o, Method reference) {
    std::vector<EquilibriumResult> results;
    for (Method m : {Method::bisect, Method::dual, Method::primal}) results.push_back(solve_with(m, s, o));
    const EquilibriumResult* ref = nullptr;
    for (const auto& r : results)
        if (r.method == reference) ref = &r;

    bool ok = true;
    out << strf("reference method: %s (lambda* = %.9f)\n", to_string(reference), ref->lambda_star);
    for (const auto& r : results) {
        double x_gap = 0.0;
        for (std::size_t i = 0; i < r.x_star.size(); ++i) x_gap = std::max(x_gap, std::abs(r.x_star[i] - ref->x_star[i]));
        const double lam_gap = std::abs(r.lambda_star - ref->lambda_star);
        const KktReport kkt = verify_kkt(s, r);
        const bool gaps_ok = lam_gap < kVerifyGap && x_gap < kVerifyGap;
        out << strf("%-8s lambda %.9f  |dlambda| %.2e  max|dx| %.2e  stationarity %.2e  clearing %.2e  supply %.2e  "
                    "min budget margin %.2e  %s\n",
                    to_string(r.method), r.lambda_star, lam_gap, x_gap, kkt.max_stationarity(), kkt.clearing,
                    kkt.supply_stationarity, kkt.min_budget_margin(), gaps_ok && kkt.pass ? "PASS" : "FAIL");
        if (!gaps_ok)
            out << strf("  mismatch: %s differs from %s by lambda %.3e, allocation %.3e (limit %.0e)\n",
                        to_string(r.method), to_string(reference), lam_gap, x_gap, kVerifyGap);
        if (!kkt.pass) {
            for (std::size_t i = 0; i < kkt.users.size(); ++i) {
                const auto& u = kkt.users[i];
                if (u.stationarity >= kKktResidualTol)
                    out << strf("  user '%s' stationarity residual %.3e >= %.0e\n", s.users[i].name.c_str(),
                                u.stationarity, kKktResidualTol);
                if (u.budget_margin <= -kBudgetSlack)
                    out << strf("  user '%s' budget margin %.3e < -%.0e\n", s.users[i].name.c_str(), u.budget_margin,
                                kBudgetSlack);
            }
            if (kkt.clearing >= kKktResidualTol) out << strf("  clearing residual %.3e\n", kkt.clearing);
            if (kkt.supply_stationarity >= kKktResidualTol)
                out << strf("  supply stationarity residual %.3e\n", kkt.supply_stationarity);
        }
        ok = ok && gaps_ok && kkt.pass;
    }
    out << (ok ? "verify: PASS\n" : "verify: FAIL\n");
    return ok ? kOk : kVerificationMismatch;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Budget-constrained competitive equilibrium solver for single-bus markets", "bcmarket"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string method_name = "bisect";
    std::string out_path;
    SolverFlags flags;
    double lam_min = 0.0;
    double lam_max = 0.0;
    double x_min = 0.0;
    double x_max = 0.0;
    int points = 101;
    std::string user_name;

    auto add_scenario = [&](CLI::App* cmd) {
        cmd->add_option("scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    };
    auto add_method = [&](CLI::App* cmd, std::vector<std::string> allowed) {
        cmd->add_option("--method", method_name, "Solver method")->check(CLI::IsMember(allowed));
    };

    auto* solve = app.add_subcommand("solve", "Compute the equilibrium and print prices and allocations");
    add_scenario(solve);
    add_method(solve, {"dual", "bisect", "primal"});
    flags.attach(solve);

    auto* compare = app.add_subcommand("compare", "Unconstrained vs budget-constrained equilibrium table");
    add_scenario(compare);
    flags.attach(compare);

    auto* sweep = app.add_subcommand("sweep", "Supply/demand curves over a price grid (CSV)");
    add_scenario(sweep);
    sweep->add_option("--lam-min", lam_min, "Smallest price")->required()->check(CLI::PositiveNumber);
    sweep->add_option("--lam-max", lam_max, "Largest price")->required()->check(CLI::PositiveNumber);
    sweep->add_option("--points", points, "Grid points (>= 2)")->check(CLI::Range(2, 10'000'000));
    sweep->add_option("--out", out_path, "Output CSV path (default stdout)");

    auto* trace = app.add_subcommand("trace", "Per-iteration price trace with Lyapunov values (CSV)");
    add_scenario(trace);
    trace->add_option("--method", method_name, "dual or bisect")->check(CLI::IsMember({"dual", "bisect"}));
    trace->add_option("--out", out_path, "Output CSV path (default stdout)");
    flags.attach(trace);

    auto* modified = app.add_subcommand("modified", "Sample u and the budget-spliced utility for one user (CSV)");
    add_scenario(modified);
    modified->add_option("--user", user_name, "User name")->required();
    modified->add_option("--x-min", x_min, "Smallest quantity")->required()->check(CLI::PositiveNumber);
    modified->add_option("--x-max", x_max, "Largest quantity")->required()->check(CLI::PositiveNumber);
    modified->add_option("--points", points, "Grid points (>= 2)")->check(CLI::Range(2, 10'000'000));
    modified->add_option("--out", out_path, "Output CSV path (default stdout)");

    auto* verify = app.add_subcommand("verify", "Run all three solvers and the KKT check");
    add_scenario(verify);
    add_method(verify, {"dual", "bisect", "primal"});
    flags.attach(verify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    // defaults differ per subcommand
    if (trace->parsed() && !trace->count("--method")) method_name = "dual";

    try {
        const Scenario s = load_scenario(scenario_path);
        const SolverOptions opts = flags.options();

        if (solve->parsed()) {
            print_result(out, s, solve_with(kMethods.at(method_name), s, opts));
        } else if (compare->parsed()) {
            const EquilibriumResult unc = bisection_clear(without_budgets(s), opts);
            const EquilibriumResult con = bisection_clear(s, opts);
            print_compare(out, s, unc, con);
        } else if (sweep->parsed()) {
            if (!(lam_max > lam_min)) {
                err << "error: --lam-max must exceed --lam-min\n";
                return kUsage;
            }
            const auto grid = linspace(lam_min, lam_max, points);
            write_table(export_curves(s, grid), out_path, out);
        } else if (trace->parsed()) {
            IterationTrace t;
            double lam_star = 0.0;
            if (method_name == "dual") {
                auto run = dual_ascent(s, opts);
                t = std::move(run.trace);
                lam_star = run.result.lambda_star;
            } else {
                lam_star = bisection_clear(s, opts, DemandMode::budget_constrained, &t).lambda_star;
            }
            annotate_lyapunov(s, t, lam_star);
            write_table(export_trace(t), out_path, out);
        } else if (modified->parsed()) {
            if (!(x_max > x_min)) {
                err << "error: --x-max must exceed --x-min\n";
                return kUsage;
            }
            const User* user = nullptr;
            for (const User& u : s.users)
                if (u.name == user_name) user = &u;
            if (!user) {
                err << "error: --user: no user named '" << user_name << "' in " << scenario_path << '\n';
                return kUsage;
            }
            if (user->budget && *user->budget <= 0.0) {
                err << "error: user '" << user_name << "': budget must be > 0 to build the modified utility\n";
                return kInvalidScenario;
            }
            const auto grid = linspace(x_min, x_max, points);
            write_table(export_modified_utility(user->utility, user->budget.value_or(INFINITY), grid), out_path, out);
        } else if (verify->parsed()) {
            return run_verify(out, s, opts, kMethods.at(method_name));
        }
    } catch (const MarketError& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return exit_code_for(e.code());
    }
    return kOk;
}

}  // namespace bcmarket::cli
