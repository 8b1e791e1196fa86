#pragma once

// Command implementations behind the CLI: solve / simulate / verify / fiscal
// / sweep / oracle. Each takes a Scenario plus invocation options, writes
// deterministic artifacts into the output directory, and returns a process
// exit code (0 all pass, 2 partial, 1 hard failure).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ramseq/artifacts.hpp"
#include "ramseq/fiscal.hpp"
#include "ramseq/flow.hpp"
#include "ramseq/model.hpp"
#include "ramseq/og_solver.hpp"
#include "ramseq/oracle.hpp"
#include "ramseq/phase.hpp"
#include "ramseq/renegotiation.hpp"
#include "ramseq/scenario.hpp"

namespace ramseq::cli {

inline constexpr const char* kToolName = "ramseq";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestSchemaVersion = 1;

struct CliOptions {
    std::string out_dir = "out";
    int threads = 1;
    std::optional<double> kbar;
    std::optional<double> k0;
    std::optional<double> horizon;
    bool allow_unverified = false;
    std::ostream* log = &std::cout;
};

namespace detail {

inline std::ostream& log(const CliOptions& opt) { return *opt.log; }

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

inline nlohmann::json manifest_base(const Scenario& s, const std::string& command) {
    nlohmann::json j;
    j["schema_version"] = kManifestSchemaVersion;
    j["tool"] = std::string(kToolName) + " " + kToolVersion;
    j["command"] = command;
    j["scenario_hash"] = hex64(fnv1a64(s.source_text));
    return j;
}

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g;
    g.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        g.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    return g;
}

// kbar targets implied by the scenario (and CLI override)
inline std::vector<double> kbar_targets(const Scenario& s, const OgEconomy& econ,
                                        const CliOptions& opt) {
    if (opt.kbar) return {*opt.kbar};
    if (econ.time_consistent()) {
        // degenerate interval: the single admissible steady state
        return {econ.tech().capital_at_marginal(econ.delta())};
    }
    const auto I = steady_state_interval(econ);
    switch (s.selection) {
        case RunSelection::Lrp:
            return {lrp_select(econ)};
        case RunSelection::Sweep: {
            std::vector<double> g;
            const std::size_t n = std::max<std::size_t>(s.sweep_points, 2);
            for (std::size_t i = 0; i < n; ++i) {
                const double q = (static_cast<double>(i) + 1.0) / (static_cast<double>(n) + 1.0);
                g.push_back(I.at_fraction(q));
            }
            return g;
        }
        case RunSelection::List:
        default:
            if (!s.kbar_list.empty()) return s.kbar_list;
            return {I.at_fraction(0.5)};
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Verification (shared by solve and verify)
// ---------------------------------------------------------------------------

struct VerificationReport {
    double max_ie_residual = 0.0;
    double max_de_residual = 0.0;
    double envelope_error = 0.0;           // relative, sup over probe points
    double p1_argmax_offset_cells = 0.0;   // sup over probe points
    double semigroup_error = 0.0;          // scaled by 1 + |k|
    double effective_rate_min = 0.0;
    double effective_rate_max = 0.0;
    std::vector<std::string> failures;
    bool pass = false;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["max_ie_residual"] = max_ie_residual;
        j["max_de_residual"] = max_de_residual;
        j["envelope_error"] = envelope_error;
        j["p1_argmax_offset_cells"] = p1_argmax_offset_cells;
        j["semigroup_error"] = semigroup_error;
        j["effective_rate_min"] = effective_rate_min;
        j["effective_rate_max"] = effective_rate_max;
        j["failures"] = failures;
        j["pass"] = pass;
        return j;
    }
};

// Runs the flow-engine certificate battery for a policy/value candidate on a
// grid interior to its domain.
inline VerificationReport verify_policy(const OgEconomy& econ, const Policy& policy,
                                        const ValueCandidate& value,
                                        const std::vector<double>& grid, double ie_tol,
                                        double de_tol, double envelope_tol) {
    VerificationReport rep;
    const Technology& tech = econ.tech();
    const DiscountKernel kernel = econ.kernel();

    const auto ie = ie_residual(policy, value, tech, kernel, grid);
    const auto de = de_residual(policy, value, tech, kernel, grid);
    for (const double r : ie) rep.max_ie_residual = std::max(rep.max_ie_residual, std::abs(r));
    for (const double r : de) rep.max_de_residual = std::max(rep.max_de_residual, std::abs(r));

    // probe points: a handful of interior grid nodes
    std::vector<double> probes;
    for (std::size_t i = grid.size() / 8; i < grid.size(); i += std::max<std::size_t>(1, grid.size() / 5))
        probes.push_back(grid[i]);
    if (probes.empty()) probes.push_back(grid[grid.size() / 2]);

    double rate_min = 1e300, rate_max = -1e300;
    for (const double k : probes) {
        // envelope: u'(sigma(k)) against a centered difference of the value
        // functional
        const double h = 1e-3 * (1.0 + std::abs(k));
        if (policy.domain().contains(k - h) && policy.domain().contains(k + h)) {
            const double vp_fd = (value_functional(policy, tech, kernel, k + h) -
                                  value_functional(policy, tech, kernel, k - h)) /
                                 (2.0 * h);
            const double up = LogUtility::marginal(policy(k));
            rep.envelope_error = std::max(rep.envelope_error, std::abs(vp_fd - up) / up);
        }
        // one-shot deviation: argmax over a consumption grid within one cell
        // of sigma(k)
        const double sig = policy(k);
        const double j = deviation_gradient(policy, tech, kernel, k);
        const int cells = 1000;
        int best = -1;
        double best_val = -1e300;
        for (int i = 0; i <= cells; ++i) {
            const double c = sig * (0.5 + static_cast<double>(i) / cells);
            const double p1 = LogUtility::u(c) - LogUtility::u(sig) - j * (c - sig);
            if (p1 > best_val) {
                best_val = p1;
                best = i;
            }
        }
        const double c_star = sig * (0.5 + static_cast<double>(best) / cells);
        rep.p1_argmax_offset_cells =
            std::max(rep.p1_argmax_offset_cells, std::abs(c_star - sig) / (sig / cells));
        // semigroup: K(2dt, k) vs K(dt, K(dt, k))
        const double dt = 1.0;
        FlowOptions fo;
        fo.horizon = 2.0 * dt;
        const FlowResult one = integrate_flow(policy, tech, k, 2.0 * dt, fo);
        const double k_mid = one.capital(dt), k_two = one.capital(2.0 * dt);
        FlowOptions fo2;
        fo2.horizon = dt;
        const FlowResult two = integrate_flow(policy, tech, k_mid, dt, fo2);
        rep.semigroup_error = std::max(
            rep.semigroup_error, std::abs(two.capital(dt) - k_two) / (1.0 + std::abs(k_two)));
        const double rate = effective_discount_rate(policy, tech, kernel, k);
        rate_min = std::min(rate_min, rate);
        rate_max = std::max(rate_max, rate);
    }
    rep.effective_rate_min = rate_min;
    rep.effective_rate_max = rate_max;

    if (rep.max_ie_residual > ie_tol) rep.failures.push_back("ie_residual");
    if (rep.max_de_residual > de_tol) rep.failures.push_back("de_residual");
    if (rep.envelope_error > envelope_tol) rep.failures.push_back("envelope");
    if (rep.p1_argmax_offset_cells > 1.0) rep.failures.push_back("p1_argmax");
    if (rep.semigroup_error > 1e-8) rep.failures.push_back("semigroup");
    rep.pass = rep.failures.empty();
    return rep;
}

// interior verification grid for a solved pair (keeps away from the exact
// domain edges where the flow stalls on the adjacent steady state)
inline std::vector<double> interior_grid(const SolveResult& sol, std::size_t n) {
    const double lo = sol.pair.domain.lo, hi = sol.pair.domain.hi;
    const double pad = 0.02 * (hi - lo);
    return detail::uniform_grid(lo + pad, hi - pad, n);
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

inline int cmd_solve(const Scenario& s, const CliOptions& opt) {
    detail::Timer timer;
    const OgEconomy econ = s.economy();
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);

    nlohmann::json manifest = detail::manifest_base(s, "solve");
    manifest["runs"] = nlohmann::json::array();

    std::vector<double> targets;
    try {
        targets = detail::kbar_targets(s, econ, opt);
    } catch (const Error& e) {
        detail::log(opt) << "solve: " << e.what() << "\n";
        return 1;
    }

    int ok = 0, failed = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double kbar = targets[i];
        nlohmann::json run;
        run["k_bar"] = kbar;
        const std::string suffix =
            targets.size() == 1 ? "" : "_" + std::to_string(i + 1);
        try {
            const SolveResult sol = solve_value_pair(econ, kbar, s.solve);
            const auto grid = interior_grid(sol, s.grid_points);
            const auto value = sol.pair.candidate();
            const VerificationReport rep = verify_policy(econ, sol.policy, value, grid, s.ie_tol,
                                                         s.de_tol, s.envelope_tol);
            run["status"] = rep.pass ? "ok" : "unverified";
            run["domain"] = {sol.pair.domain.lo, sol.pair.domain.hi};
            run["epsilon"] = sol.pair.epsilon;
            run["stability"] = sol.pair.seed.stability;
            run["verification"] = rep.to_json();
            if (rep.pass || opt.allow_unverified) {
                const auto ie = ie_residual(sol.policy, value, econ.tech(), econ.kernel(), grid);
                const auto de = de_residual(sol.policy, value, econ.tech(), econ.kernel(), grid);
                const std::string policy_name = "policy" + suffix + ".csv";
                CsvWriter pol(fs::path(opt.out_dir) / policy_name,
                              {"k", "sigma", "v", "w", "v_prime", "w_prime", "ie_residual",
                               "de_residual"});
                for (std::size_t g = 0; g < grid.size(); ++g) {
                    const double k = grid[g];
                    pol.row({k, sol.policy(k), sol.pair.v.eval(k), sol.pair.w.eval(k),
                             sol.pair.vp.eval(k), sol.pair.wp.eval(k), ie[g], de[g]});
                }
                const std::string pair_name = "valuepair" + suffix + ".csv";
                CsvWriter vp(fs::path(opt.out_dir) / pair_name,
                             {"k", "v", "w", "v_prime", "w_prime"});
                for (const double k : grid)
                    vp.row({k, sol.pair.v.eval(k), sol.pair.w.eval(k), sol.pair.vp.eval(k),
                            sol.pair.wp.eval(k)});
                run["policy_csv"] = policy_name;
                run["valuepair_csv"] = pair_name;
            }
            if (rep.pass) ++ok;
            else ++failed;
        } catch (const Error& e) {
            run["status"] = "inadmissible";
            run["error"] = e.what();
            ++failed;
        }
        manifest["runs"].push_back(run);
        detail::log(opt) << "solve k_bar=" << format_double(kbar) << ": "
                         << manifest["runs"].back()["status"].get<std::string>() << "\n";
    }

    manifest["wall_clock_sec"] = timer.seconds();
    write_json(fs::path(opt.out_dir) / "manifest.json", manifest);
    if (ok == 0) return 1;
    return failed == 0 ? 0 : 2;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline int cmd_simulate(const Scenario& s, const CliOptions& opt) {
    detail::Timer timer;
    const OgEconomy econ = s.economy();
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);

    try {
        const double kbar = detail::kbar_targets(s, econ, opt).front();
        const SolveResult sol = solve_value_pair(econ, kbar, s.solve);
        double K0 = opt.k0 ? *opt.k0 : (s.k0_abs ? *s.k0_abs : s.k0_frac * kbar);
        K0 = std::clamp(K0, sol.pair.domain.lo, sol.pair.domain.hi);
        const double T = opt.horizon ? *opt.horizon : s.horizon;

        SimulateOptions so;
        so.samples = s.samples;
        const Trajectory traj = simulate_policy(econ, sol.pair, sol.policy, K0, T, so);
        const auto psi = psi_path(traj, econ);
        const auto resid = autonomous_residual(traj, econ, sol.policy);

        CsvWriter csv(fs::path(opt.out_dir) / "trajectory.csv",
                      {"t", "K", "C", "W", "psi", "residual_autonomous"});
        for (std::size_t i = 0; i < traj.size(); ++i)
            csv.row({traj.t[i], traj.K[i], traj.C[i], traj.W[i], psi[i], resid[i]});

        nlohmann::json manifest = detail::manifest_base(s, "simulate");
        manifest["k_bar"] = kbar;
        manifest["K0"] = K0;
        manifest["horizon"] = T;
        manifest["terminal"] = {{"K", traj.K.back()},
                                {"C", traj.C.back()},
                                {"W", traj.W.back()},
                                {"psi", psi.back()},
                                {"psi_limit", econ.delta() - econ.tech().marginal(kbar)},
                                {"reached_steady", traj.reached_steady}};
        manifest["wall_clock_sec"] = timer.seconds();
        write_json(fs::path(opt.out_dir) / "manifest.json", manifest);
        detail::log(opt) << "simulate k_bar=" << format_double(kbar) << " K0=" << format_double(K0)
                         << " psi(T)=" << format_double(psi.back())
                         << " (limit " << format_double(econ.delta() - econ.tech().marginal(kbar))
                         << ")\n";
        return 0;
    } catch (const Error& e) {
        detail::log(opt) << "simulate: " << e.what() << "\n";
        return 1;
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

// Reconstructs the policy and value candidate from a solve artifact and
// re-runs the certificate battery against the scenario tolerances.
inline int cmd_verify(const Scenario& s, const CliOptions& opt) {
    detail::Timer timer;
    const OgEconomy econ = s.economy();
    namespace fs = std::filesystem;

    std::vector<fs::path> policy_files;
    for (const char* name : {"policy.csv"}) {
        if (fs::exists(fs::path(opt.out_dir) / name)) policy_files.push_back(fs::path(opt.out_dir) / name);
    }
    for (int i = 1; i < 100; ++i) {
        const fs::path p = fs::path(opt.out_dir) / ("policy_" + std::to_string(i) + ".csv");
        if (fs::exists(p)) policy_files.push_back(p);
    }
    if (policy_files.empty()) {
        detail::log(opt) << "verify: no policy artifacts in " << opt.out_dir << "\n";
        return 1;
    }

    nlohmann::json report;
    report["schema_version"] = kManifestSchemaVersion;
    report["checks"] = nlohmann::json::array();
    int ok = 0, failed = 0;
    for (const auto& path : policy_files) {
        nlohmann::json entry;
        entry["file"] = path.filename().string();
        try {
            const CsvData csv = read_csv(path);
            const auto k = csv.column_values("k");
            const auto sigma = csv.column_values("sigma");
            const auto v = csv.column_values("v");
            const auto vp = csv.column_values("v_prime");

            // steady state: the grid point where f(k) - sigma(k) changes sign
            double kbar = k.front();
            for (std::size_t i = 1; i < k.size(); ++i) {
                const double d0 = econ.tech().output(k[i - 1]) - sigma[i - 1];
                const double d1 = econ.tech().output(k[i]) - sigma[i];
                if (d0 > 0.0 && d1 <= 0.0) {
                    kbar = brent_root(
                        [&](double kk) {
                            return econ.tech().output(kk) -
                                   CubicHermite::with_estimated_slopes(
                                       std::vector<double>(k), std::vector<double>(sigma))
                                       .eval(kk);
                        },
                        k[i - 1], k[i]);
                    break;
                }
            }

            auto v_interp = CubicHermite(std::vector<double>(k), std::vector<double>(v),
                                         std::vector<double>(vp));
            auto vp_interp = CubicHermite::with_estimated_slopes(std::vector<double>(k),
                                                                 std::vector<double>(vp));
            std::vector<double> dsigma(k.size());
            for (std::size_t i = 0; i < k.size(); ++i)
                dsigma[i] = -vp_interp.derivative(k[i]) / (vp[i] * vp[i]);
            const Policy policy = Policy::from_grid(std::vector<double>(k),
                                                    std::vector<double>(sigma), dsigma, kbar);
            auto vi = std::make_shared<CubicHermite>(std::move(v_interp));
            auto vpi = std::make_shared<CubicHermite>(std::move(vp_interp));
            const ValueCandidate value{[vi](double kk) { return vi->eval(kk); },
                                       [vpi](double kk) { return vpi->eval(kk); }};

            const double pad = 0.02 * (k.back() - k.front());
            const auto grid = detail::uniform_grid(k.front() + pad, k.back() - pad,
                                                   std::min<std::size_t>(k.size(), 81));
            const VerificationReport rep = verify_policy(econ, policy, value, grid, s.ie_tol,
                                                         s.de_tol, s.envelope_tol);
            entry["report"] = rep.to_json();
            entry["k_bar"] = kbar;
            if (rep.pass) ++ok;
            else ++failed;
        } catch (const Error& e) {
            entry["error"] = e.what();
            ++failed;
        }
        report["checks"].push_back(entry);
        const bool pass = entry.contains("report") && entry["report"]["pass"].get<bool>();
        detail::log(opt) << "verify " << entry["file"].get<std::string>() << ": "
                         << (pass ? "pass" : "FAIL") << "\n";
    }
    report["wall_clock_sec"] = timer.seconds();
    write_json(fs::path(opt.out_dir) / "verification.json", report);
    if (ok == 0) return 1;
    return failed == 0 ? 0 : 2;
}

// ---------------------------------------------------------------------------
// fiscal
// ---------------------------------------------------------------------------

inline int cmd_fiscal(const Scenario& s, const CliOptions& opt) {
    detail::Timer timer;
    const OgEconomy econ = s.economy();
    namespace fs = std::filesystem;

    try {
        const fs::path traj_path = fs::path(opt.out_dir) / "trajectory.csv";
        if (!fs::exists(traj_path))
            throw ArtifactError("fiscal: missing trajectory.csv (run simulate first)");
        const CsvData csv = read_csv(traj_path);
        Trajectory traj;
        traj.t = csv.column_values("t");
        traj.K = csv.column_values("K");
        traj.C = csv.column_values("C");
        traj.W = csv.column_values("W");

        double kbar;
        const fs::path man_path = fs::path(opt.out_dir) / "manifest.json";
        if (opt.kbar) {
            kbar = *opt.kbar;
        } else if (fs::exists(man_path)) {
            std::ifstream in(man_path);
            nlohmann::json m;
            in >> m;
            if (!m.contains("k_bar")) throw ArtifactError("fiscal: manifest has no k_bar");
            kbar = m["k_bar"].get<double>();
        } else {
            throw ArtifactError("fiscal: no manifest.json and no --k-bar given");
        }

        const AllocationRule rule = allocation_rule(econ, s.allocation);
        const FiscalSchedule sched = tax_surface(traj, rule, econ, kbar, s.tax_grid);

        CsvWriter surf(fs::path(opt.out_dir) / "tax_surface.csv", {"n", "t", "eta"});
        for (std::size_t i = 0; i < sched.ages.size(); ++i)
            for (std::size_t j = 0; j < sched.times.size(); ++j)
                surf.row({sched.ages[i], sched.times[j], sched.at(i, j)});

        // lump sums
        std::vector<double> assets;
        if (s.initial_assets == "explicit") {
            assets = s.initial_assets_values;
            if (assets.size() != s.vintages.size())
                throw ScenarioError("fiscal: initial_assets array must match vintages");
        } else {
            for (const double tau : s.vintages)
                assets.push_back(tau < 0.0 ? econ.pi() * traj.K.front() : 0.0);
        }
        const auto lump = lump_sum_present_values(traj, rule, econ, s.vintages, assets);

        nlohmann::json summary = detail::manifest_base(s, "fiscal");
        summary["k_bar"] = kbar;
        summary["allocation"] =
            (s.allocation == AllocationVariant::Egalitarian) ? "egalitarian" : "optimal";
        summary["eta_bar"] = sched.eta_bar;
        summary["k_M"] = market_steady_state(econ);
        const double fpk = econ.tech().marginal(kbar);
        summary["psi_terminal"] = sched.psi.back();
        summary["psi_limit"] = econ.delta() - fpk;
        if (!econ.time_consistent() && s.allocation == AllocationVariant::Optimal) {
            summary["n_tilde"] = sched.n_tilde;
            // sign-change certification of the long-run slice at the cutoff
            const double lo = sched.n_tilde - 0.01, hi = sched.n_tilde + 0.01;
            const double eta_lo = (fpk - econ.delta() - rule.log_slope(lo)) / fpk;
            const double eta_hi = (fpk - econ.delta() - rule.log_slope(hi)) / fpk;
            summary["n_tilde_sign_change"] = (eta_lo > 0.0 && eta_hi < 0.0);
        }
        nlohmann::json lumps = nlohmann::json::array();
        for (const auto& e : lump) {
            lumps.push_back({{"vintage", e.vintage},
                             {"eval_time", e.eval_time},
                             {"consumption", e.consumption},
                             {"human_wealth", e.human_wealth},
                             {"initial_assets", e.initial_assets},
                             {"b", e.b}});
        }
        summary["lump_sums"] = lumps;
        summary["wall_clock_sec"] = timer.seconds();
        write_json(fs::path(opt.out_dir) / "fiscal_summary.json", summary);
        detail::log(opt) << "fiscal: eta_bar=" << format_double(sched.eta_bar)
                         << " k_M=" << format_double(summary["k_M"].get<double>()) << "\n";
        return 0;
    } catch (const Error& e) {
        detail::log(opt) << "fiscal: " << e.what() << "\n";
        return 1;
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

inline int cmd_sweep(const Scenario& s, const CliOptions& opt) {
    detail::Timer timer;
    const OgEconomy econ = s.economy();
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);

    if (econ.time_consistent()) {
        detail::log(opt) << "sweep: interval is a single point when rho = delta\n";
        return 1;
    }

    const auto I = steady_state_interval(econ);
    std::vector<double> grid;
    const std::size_t n = std::max<std::size_t>(s.sweep_points, 2);
    for (std::size_t i = 0; i < n; ++i)
        grid.push_back(I.at_fraction((static_cast<double>(i) + 1.0) / (static_cast<double>(n) + 1.0)));

    struct Row {
        double kbar = 0.0;
        double fprime = 0.0;
        double v_diag = 0.0;
        double reneg_derivative = 0.0;
        double stability_closed = 0.0;
        double stability_numeric = 0.0;
        bool is_lrp = false;
        std::string status = "ok";
        std::vector<std::pair<double, double>> surface;  // (k0, V)
    };
    std::vector<Row> rows(grid.size());

    auto compute_row = [&](std::size_t i) {
        Row& row = rows[i];
        row.kbar = grid[i];
        row.fprime = econ.tech().marginal(row.kbar);
        row.reneg_derivative = renegotiation_derivative(econ, row.kbar);
        try {
            const SolveResult sol = solve_value_pair(econ, row.kbar, s.solve);
            row.stability_closed = sol.pair.seed.stability;
            const double h = std::max(25.0 * sol.pair.epsilon, 1e-3 * (1.0 + row.kbar));
            const double vpp_num =
                (sol.pair.vp.eval(row.kbar + h) - sol.pair.vp.eval(row.kbar - h)) / (2.0 * h);
            const double vp0 = sol.pair.vp.eval(row.kbar);
            row.stability_numeric = econ.tech().marginal(row.kbar) + vpp_num / (vp0 * vp0);
            row.v_diag = value_functional(sol.policy, econ.tech(), econ.kernel(), row.kbar);
            for (const double frac : {0.85, 0.90, 0.95, 1.0}) {
                const double k0 = frac * row.kbar;
                if (sol.policy.domain().contains(k0))
                    row.surface.emplace_back(
                        k0, value_functional(sol.policy, econ.tech(), econ.kernel(), k0));
            }
        } catch (const Error& e) {
            row.status = std::string("failed: ") + e.what();
        }
    };

    const int threads = std::max(1, opt.threads);
    if (threads == 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) compute_row(i);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex mu;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                while (true) {
                    std::size_t i;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= grid.size()) return;
                        i = next++;
                    }
                    compute_row(i);
                }
            });
        for (auto& th : pool) th.join();
    }

    const double k_lrp = lrp_select(econ);
    CsvWriter surf(fs::path(opt.out_dir) / "surface.csv",
                   {"k_bar", "f_prime", "v_diag", "renegotiation_derivative", "stability_closed",
                    "stability_numeric", "is_lrp", "ok"});
    for (const auto& row : rows)
        surf.row({row.kbar, row.fprime, row.v_diag, row.reneg_derivative, row.stability_closed,
                  row.stability_numeric, 0.0, row.status == "ok" ? 1.0 : 0.0});
    // the renegotiation-proof steady state sits at the top of the interval;
    // emitted as a closed-form boundary row
    surf.row({k_lrp, lrp_marginal_product(econ),
              (econ.rho() + econ.pi()) / (econ.rho() * (econ.delta() + econ.pi())) *
                  std::log(econ.tech().output(k_lrp)),
              0.0, 0.0, 0.0, 1.0, 1.0});

    CsvWriter vs(fs::path(opt.out_dir) / "value_surface.csv", {"k0", "k_bar", "V"});
    for (const auto& row : rows)
        for (const auto& [k0, V] : row.surface) vs.row({k0, row.kbar, V});

    nlohmann::json manifest = detail::manifest_base(s, "sweep");
    manifest["rows"] = nlohmann::json::array();
    int ok = 0, failed = 0;
    for (const auto& row : rows) {
        manifest["rows"].push_back({{"k_bar", row.kbar}, {"status", row.status}});
        (row.status == "ok" ? ok : failed)++;
    }
    manifest["lrp_k_bar"] = k_lrp;
    manifest["wall_clock_sec"] = timer.seconds();
    write_json(fs::path(opt.out_dir) / "manifest.json", manifest);
    detail::log(opt) << "sweep: " << ok << "/" << rows.size() << " rows ok, lrp at k="
                     << format_double(k_lrp) << "\n";
    if (ok == 0) return 1;
    return failed == 0 ? 0 : 2;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

inline int cmd_oracle(const Scenario& s, const CliOptions& opt) {
    detail::Timer timer;
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);

    oracle::LinearCase c;  // canonical parameters
    nlohmann::json rep = detail::manifest_base(s, "oracle");
    bool pass = true;

    const double naive = c.naive_slope();
    const double closed = c.equilibrium_slope();
    const auto de = oracle::solve_linear_de(c);
    const double rel = std::abs(de.slope - closed) / closed;
    rep["naive_slope"] = naive;
    rep["equilibrium_slope_closed"] = closed;
    rep["equilibrium_slope_solver"] = de.slope;
    rep["solver_rel_error"] = rel;
    rep["solver_iterations"] = de.iterations;
    pass = pass && rel < 1e-6;

    // nonlocal term matches the log form (1/d1) e^{-d1 tau} ln k + const
    const Policy pol = oracle::linear_policy(de.slope);
    FlowOptions fo;
    fo.horizon = c.tau + 50.0;
    const double g1 = piecewise_nonlocal_term(pol, c.tech(), c.kernel(), 1.0, fo);
    const double coef = std::exp(-c.d1 * c.tau) / c.d1;
    double g_dev = 0.0;
    for (const double k : {0.5, 2.0, 5.0, 20.0}) {
        const double g = piecewise_nonlocal_term(pol, c.tech(), c.kernel(), k, fo);
        g_dev = std::max(g_dev, std::abs(g - (coef * std::log(k) + g1)));
    }
    rep["nonlocal_log_form_deviation"] = g_dev;
    pass = pass && g_dev < 1e-8;

    const auto resid = de_residual(pol, de.value.candidate(), c.tech(), c.kernel(),
                                   {0.5, 1.0, 2.0, 10.0});
    double worst = 0.0;
    for (const double r : resid) worst = std::max(worst, std::abs(r));
    rep["equilibrium_de_residual"] = worst;
    pass = pass && worst < 1e-6;

    rep["pass"] = pass;
    rep["wall_clock_sec"] = timer.seconds();
    write_json(fs::path(opt.out_dir) / "oracle_report.json", rep);
    detail::log(opt) << "oracle: closed slope " << format_double(closed) << ", solver "
                     << format_double(de.slope) << " (" << (pass ? "pass" : "FAIL") << ")\n";
    return pass ? 0 : 1;
}

}  // namespace ramseq::cli
