#pragma once

// Scenario files: a small TOML-compatible subset (tables, key = value,
// numbers, strings, booleans, flat arrays, # comments) parsed with line
// diagnostics, and the typed Scenario bundle the commands run from.

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ramseq/errors.hpp"
#include "ramseq/fiscal.hpp"
#include "ramseq/model.hpp"
#include "ramseq/og_solver.hpp"

namespace ramseq {

class TomlTable {
  public:
    using Value = std::variant<double, bool, std::string, std::vector<double>>;

    static TomlTable parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ScenarioError("cannot open scenario file: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    static TomlTable parse(const std::string& text, const std::string& origin = "<string>") {
        TomlTable t;
        std::string table;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string s = strip_comment(line);
            const std::string trimmed = trim(s);
            if (trimmed.empty()) continue;
            if (trimmed.front() == '[') {
                if (trimmed.back() != ']')
                    throw ScenarioError(origin + ":" + std::to_string(lineno) +
                                        ": unterminated table header");
                table = trim(trimmed.substr(1, trimmed.size() - 2));
                if (table.empty())
                    throw ScenarioError(origin + ":" + std::to_string(lineno) +
                                        ": empty table name");
                continue;
            }
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ScenarioError(origin + ":" + std::to_string(lineno) +
                                    ": expected 'key = value'");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string val = trim(trimmed.substr(eq + 1));
            if (key.empty() || val.empty())
                throw ScenarioError(origin + ":" + std::to_string(lineno) +
                                    ": empty key or value");
            t.values_[qualify(table, key)] = parse_value(val, origin, lineno);
        }
        return t;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    double number(const std::string& key) const {
        return expect<double>(key, "number");
    }
    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
    bool boolean_or(const std::string& key, bool fallback) const {
        return has(key) ? expect<bool>(key, "boolean") : fallback;
    }
    std::string text(const std::string& key) const {
        return expect<std::string>(key, "string");
    }
    std::string text_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }
    std::vector<double> array(const std::string& key) const {
        if (auto it = values_.find(key); it != values_.end()) {
            if (auto* arr = std::get_if<std::vector<double>>(&it->second)) return *arr;
            if (auto* num = std::get_if<double>(&it->second)) return {*num};
            throw ScenarioError("scenario key '" + key + "' is not an array");
        }
        throw ScenarioError("missing scenario key '" + key + "'");
    }
    std::vector<double> array_or(const std::string& key, std::vector<double> fallback) const {
        return has(key) ? array(key) : fallback;
    }

  private:
    template <class T>
    T expect(const std::string& key, const char* what) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ScenarioError("missing scenario key '" + key + "'");
        if (auto* v = std::get_if<T>(&it->second)) return *v;
        throw ScenarioError("scenario key '" + key + "' is not a " + std::string(what));
    }

    static std::string qualify(const std::string& table, const std::string& key) {
        return table.empty() ? key : table + "." + key;
    }

    static std::string strip_comment(const std::string& s) {
        bool in_str = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') in_str = !in_str;
            if (s[i] == '#' && !in_str) return s.substr(0, i);
        }
        return s;
    }

    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static Value parse_value(const std::string& v, const std::string& origin, int lineno) {
        if (v.front() == '"') {
            if (v.size() < 2 || v.back() != '"')
                throw ScenarioError(origin + ":" + std::to_string(lineno) +
                                    ": unterminated string");
            return v.substr(1, v.size() - 2);
        }
        if (v == "true") return true;
        if (v == "false") return false;
        if (v.front() == '[') {
            if (v.back() != ']')
                throw ScenarioError(origin + ":" + std::to_string(lineno) +
                                    ": unterminated array");
            std::vector<double> arr;
            std::string body = v.substr(1, v.size() - 2);
            std::istringstream bs(body);
            std::string item;
            while (std::getline(bs, item, ',')) {
                const std::string it = trim(item);
                if (it.empty()) continue;
                arr.push_back(to_number(it, origin, lineno));
            }
            return arr;
        }
        return to_number(v, origin, lineno);
    }

    static double to_number(const std::string& v, const std::string& origin, int lineno) {
        try {
            std::size_t pos = 0;
            const double x = std::stod(v, &pos);
            if (pos != v.size())
                throw ScenarioError(origin + ":" + std::to_string(lineno) +
                                    ": trailing characters after number '" + v + "'");
            return x;
        } catch (const std::invalid_argument&) {
            throw ScenarioError(origin + ":" + std::to_string(lineno) + ": not a number: '" + v +
                                "'");
        } catch (const std::out_of_range&) {
            throw ScenarioError(origin + ":" + std::to_string(lineno) + ": number out of range: '" +
                                v + "'");
        }
    }

    std::map<std::string, Value> values_;
};

enum class RunSelection { List, Lrp, Sweep };

struct Scenario {
    // economy
    double delta = 0.06;
    double rho = 0.02;
    double pi = 0.04;
    std::string technology = "cobb-douglas";
    double A = 1.0;
    double alpha = 0.3;

    // solver
    SolveOptions solve;
    double ie_tol = 1e-5;
    double de_tol = 1e-5;
    double envelope_tol = 1e-4;
    std::size_t grid_points = 241;

    // run selection
    RunSelection selection = RunSelection::List;
    std::vector<double> kbar_list;   // empty + List -> lrp point
    std::size_t sweep_points = 40;

    // simulation
    double k0_frac = 0.8;            // start as a fraction of kbar
    std::optional<double> k0_abs;
    double horizon = 400.0;
    std::size_t samples = 2001;

    // fiscal
    AllocationVariant allocation = AllocationVariant::Optimal;
    TaxGridOptions tax_grid;
    std::vector<double> vintages;    // lump-sum vintages (years)
    std::string initial_assets = "equal";  // or explicit array
    std::vector<double> initial_assets_values;

    std::string source_text;  // raw file content (hashed into the manifest)

    OgEconomy economy() const {
        Technology tech = (technology == "linear") ? Technology::linear(A)
                                                   : Technology::cobb_douglas(A, alpha);
        return OgEconomy(delta, rho, pi, tech);
    }
};

inline Scenario scenario_from_table(const TomlTable& t, std::string source_text) {
    Scenario s;
    s.delta = t.number_or("economy.delta", s.delta);
    s.rho = t.number_or("economy.rho", s.rho);
    s.pi = t.number_or("economy.pi", s.pi);
    s.technology = t.text_or("economy.technology", s.technology);
    s.A = t.number_or("economy.A", s.A);
    s.alpha = t.number_or("economy.alpha", s.alpha);
    if (s.technology != "cobb-douglas" && s.technology != "linear")
        throw ScenarioError("economy.technology must be \"cobb-douglas\" or \"linear\"");

    s.solve.omega_lo_frac = t.number_or("solver.omega_lo", s.solve.omega_lo_frac);
    s.solve.omega_hi_frac = t.number_or("solver.omega_hi", s.solve.omega_hi_frac);
    s.solve.epsilon_scale = t.number_or("solver.epsilon_scale", s.solve.epsilon_scale);
    s.solve.epsilon_agree = t.number_or("solver.epsilon_agree", s.solve.epsilon_agree);
    s.solve.base_steps = t.number_or("solver.base_steps", s.solve.base_steps);
    s.ie_tol = t.number_or("solver.ie_tol", s.ie_tol);
    s.de_tol = t.number_or("solver.de_tol", s.de_tol);
    s.envelope_tol = t.number_or("solver.envelope_tol", s.envelope_tol);
    s.grid_points = static_cast<std::size_t>(t.number_or("solver.grid_points",
                                                         static_cast<double>(s.grid_points)));
    if (!(s.ie_tol > 0.0) || !(s.de_tol > 0.0) || !(s.envelope_tol > 0.0))
        throw ScenarioError("solver tolerances must be positive");
    if (s.grid_points < 8) throw ScenarioError("solver.grid_points must be at least 8");

    const std::string mode = t.text_or("run.mode", "list");
    if (mode == "list") s.selection = RunSelection::List;
    else if (mode == "lrp") s.selection = RunSelection::Lrp;
    else if (mode == "sweep") s.selection = RunSelection::Sweep;
    else throw ScenarioError("run.mode must be list | lrp | sweep");
    s.kbar_list = t.array_or("run.k_bar", {});
    s.sweep_points = static_cast<std::size_t>(t.number_or("run.sweep_points",
                                                          static_cast<double>(s.sweep_points)));

    s.k0_frac = t.number_or("simulate.k0_frac", s.k0_frac);
    if (t.has("simulate.k0")) s.k0_abs = t.number("simulate.k0");
    s.horizon = t.number_or("simulate.horizon", s.horizon);
    s.samples = static_cast<std::size_t>(t.number_or("simulate.samples",
                                                     static_cast<double>(s.samples)));
    if (s.samples < 2) throw ScenarioError("simulate.samples must be at least 2");

    const std::string rule = t.text_or("fiscal.allocation", "optimal");
    if (rule == "optimal") s.allocation = AllocationVariant::Optimal;
    else if (rule == "egalitarian") s.allocation = AllocationVariant::Egalitarian;
    else throw ScenarioError("fiscal.allocation must be optimal | egalitarian");
    s.tax_grid.age_max = t.number_or("fiscal.age_max", s.tax_grid.age_max);
    s.tax_grid.age_step = t.number_or("fiscal.age_step", s.tax_grid.age_step);
    s.vintages = t.array_or("fiscal.vintages", {-40.0, -20.0, -10.0, 0.0, 10.0, 25.0});
    if (t.has("fiscal.initial_assets")) {
        // either the string "equal" or an explicit per-vintage array
        try {
            s.initial_assets_values = t.array("fiscal.initial_assets");
            s.initial_assets = "explicit";
        } catch (const ScenarioError&) {
            s.initial_assets = t.text("fiscal.initial_assets");
            if (s.initial_assets != "equal")
                throw ScenarioError("fiscal.initial_assets must be \"equal\" or an array");
        }
    }

    s.source_text = std::move(source_text);
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    return scenario_from_table(TomlTable::parse(text, path), text);
}

}  // namespace ramseq
