#include "tcbsde/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace tcbsde {

std::string kind_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::simulate_noise: return "simulate-noise";
        case ExperimentKind::isometry: return "isometry";
        case ExperimentKind::char_function: return "char-function";
        case ExperimentKind::solve_bsde: return "solve-bsde";
        case ExperimentKind::linear_oracle: return "linear-oracle";
        case ExperimentKind::comparison: return "comparison";
        case ExperimentKind::mean_variance: return "mean-variance";
        case ExperimentKind::utility: return "utility";
        case ExperimentKind::max_principle: return "max-principle";
    }
    return "unknown";
}

std::optional<ExperimentKind> kind_from_name(const std::string& name) {
    for (ExperimentKind kind :
         {ExperimentKind::simulate_noise, ExperimentKind::isometry, ExperimentKind::char_function,
          ExperimentKind::solve_bsde, ExperimentKind::linear_oracle, ExperimentKind::comparison,
          ExperimentKind::mean_variance, ExperimentKind::utility, ExperimentKind::max_principle})
        if (kind_name(kind) == name) return kind;
    return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

struct RawEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

struct RawConfig {
    std::map<std::string, RawEntry> entries;  // "section.key" -> value
    std::vector<ParseError> errors;
};

RawConfig tokenize(const std::string& text) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                raw.errors.push_back({line_no, "unterminated section header"});
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) raw.errors.push_back({line_no, "empty section name"});
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            raw.errors.push_back({line_no, "expected 'key = value': " + line});
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            raw.errors.push_back({line_no, "empty key"});
            continue;
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (raw.entries.count(full))
            raw.errors.push_back({line_no, "duplicate key '" + full + "'"});
        raw.entries[full] = RawEntry{value, line_no, false};
    }
    return raw;
}

class Reader {
  public:
    Reader(RawConfig& raw) : raw_(raw) {}

    bool has(const std::string& key) const { return raw_.entries.count(key) > 0; }

    std::optional<std::string> text(const std::string& key) {
        auto it = raw_.entries.find(key);
        if (it == raw_.entries.end()) return std::nullopt;
        it->second.used = true;
        return it->second.value;
    }

    std::optional<double> number(const std::string& key) {
        auto it = raw_.entries.find(key);
        if (it == raw_.entries.end()) return std::nullopt;
        it->second.used = true;
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second.value, &pos);
            if (pos != it->second.value.size()) throw std::invalid_argument("trailing characters");
            if (!std::isfinite(v)) throw std::invalid_argument("not finite");
            return v;
        } catch (const std::exception&) {
            fail(it->second.line, "key '" + key + "' expects a finite number, got '" +
                                      it->second.value + "'");
            return std::nullopt;
        }
    }

    std::optional<long long> integer(const std::string& key) {
        auto it = raw_.entries.find(key);
        if (it == raw_.entries.end()) return std::nullopt;
        it->second.used = true;
        long long v = 0;
        const auto& s = it->second.value;
        const auto result = std::from_chars(s.data(), s.data() + s.size(), v);
        if (result.ec != std::errc() || result.ptr != s.data() + s.size()) {
            fail(it->second.line, "key '" + key + "' expects an integer, got '" + s + "'");
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::vector<double>> number_list(const std::string& key) {
        auto raw_text = text(key);
        if (!raw_text) return std::nullopt;
        std::vector<double> out;
        std::istringstream in(*raw_text);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            try {
                std::size_t pos = 0;
                out.push_back(std::stod(item, &pos));
                if (pos != item.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                fail(line_of(key), "key '" + key + "' has a malformed list entry '" + item + "'");
                return std::nullopt;
            }
        }
        return out;
    }

    int line_of(const std::string& key) const {
        auto it = raw_.entries.find(key);
        return it == raw_.entries.end() ? 0 : it->second.line;
    }

    void fail(int line, const std::string& message) { raw_.errors.push_back({line, message}); }
    void fail(const std::string& key, const std::string& message) {
        raw_.errors.push_back({line_of(key), message});
    }

    RawConfig& raw_;
};

IntensityComponent parse_intensity_component(Reader& reader, const std::string& section) {
    const auto kind = reader.text(section + ".kind");
    if (!kind || *kind == "constant") {
        const auto value = reader.number(section + ".value");
        if (kind && !value)
            reader.fail(section + ".kind", "section [" + section + "] needs 'value'");
        return constant_intensity(value.value_or(1.0));
    }
    if (*kind == "piecewise") {
        auto times = reader.number_list(section + ".times");
        auto values = reader.number_list(section + ".values");
        if (!times || !values) {
            reader.fail(section + ".kind", "section [" + section + "] needs 'times' and 'values'");
            return constant_intensity(1.0);
        }
        return PiecewiseConstantIntensity{*times, *values};
    }
    if (*kind == "two-state") {
        TwoStateIntensity ts;
        ts.low = reader.number(section + ".low").value_or(0.0);
        ts.high = reader.number(section + ".high").value_or(0.0);
        ts.rate_up = reader.number(section + ".rate_up").value_or(0.0);
        ts.rate_down = reader.number(section + ".rate_down").value_or(0.0);
        ts.p_start_high = reader.number(section + ".p_start_high").value_or(0.0);
        return ts;
    }
    if (*kind == "cir") {
        CirIntensity cir;
        cir.mean_reversion = reader.number(section + ".mean_reversion").value_or(0.0);
        cir.level = reader.number(section + ".level").value_or(0.0);
        cir.vol = reader.number(section + ".vol").value_or(0.0);
        cir.x0 = reader.number(section + ".x0").value_or(0.0);
        return cir;
    }
    reader.fail(section + ".kind", "unknown intensity kind '" + *kind +
                                       "' (expected constant, piecewise, two-state or cir)");
    return constant_intensity(1.0);
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "experiment.kind", "experiment.seed", "experiment.threads", "experiment.out",
        "grid.T", "grid.N",
        "batch.M",
        "levy.atoms",
        "regression.degree", "regression.ridge", "regression.filtration",
        "bsde.driver", "bsde.terminal", "bsde.a", "bsde.c", "bsde.e0", "bsde.ez",
        "bsde.constant", "bsde.tol", "bsde.max_iter",
        "control.rho", "control.alpha", "control.psi0", "control.psi_jump", "control.k",
        "control.x0", "control.inner_paths", "control.utility", "control.gamma",
    };
    return keys;
}

bool key_is_known(const std::string& key) {
    for (const auto& k : known_keys())
        if (k == key) return true;
    // intensity sections and free-form tolerances are validated separately
    if (key.rfind("intensity.B.", 0) == 0 || key.rfind("intensity.H.", 0) == 0) return true;
    if (key.rfind("tolerances.", 0) == 0) return true;
    return false;
}

}  // namespace

ConfigResult parse_config(const std::string& text) {
    RawConfig raw = tokenize(text);
    Reader reader(raw);
    ExperimentConfig config;

    for (const auto& [key, entry] : raw.entries)
        if (!key_is_known(key)) reader.fail(entry.line, "unknown key '" + key + "'");

    if (auto kind_text = reader.text("experiment.kind")) {
        if (auto kind = kind_from_name(*kind_text))
            config.kind = *kind;
        else
            reader.fail("experiment.kind", "unknown experiment kind '" + *kind_text + "'");
    } else {
        reader.fail(0, "missing required key 'experiment.kind'");
    }

    if (auto seed = reader.integer("experiment.seed")) {
        config.seed = static_cast<std::uint64_t>(*seed);
    } else if (!reader.has("experiment.seed")) {
        reader.fail(0, "missing required key 'experiment.seed' (no wall-clock default)");
    }
    config.threads = static_cast<int>(reader.integer("experiment.threads").value_or(1));
    if (config.threads < 1) reader.fail("experiment.threads", "threads must be at least 1");
    config.out_dir = reader.text("experiment.out").value_or("out");

    if (auto t = reader.number("grid.T")) {
        config.horizon = *t;
        if (!(config.horizon > 0.0)) reader.fail("grid.T", "grid.T must be positive");
    } else if (!reader.has("grid.T")) {
        reader.fail(0, "missing required key 'grid.T'");
    }
    if (auto n = reader.integer("grid.N")) {
        config.steps = static_cast<int>(*n);
        if (config.steps < 1) reader.fail("grid.N", "grid.N must be at least 1");
    } else if (!reader.has("grid.N")) {
        reader.fail(0, "missing required key 'grid.N'");
    }
    if (auto m = reader.integer("batch.M")) {
        config.scenario_count = static_cast<int>(*m);
        if (config.scenario_count < 2)
            reader.fail("batch.M", "batch.M must be at least 2 (variance is undefined otherwise)");
    } else if (!reader.has("batch.M")) {
        reader.fail(0, "missing required key 'batch.M'");
    }

    if (auto atoms_text = reader.text("levy.atoms")) {
        std::istringstream in(*atoms_text);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            const std::size_t colon = item.find(':');
            bool ok = colon != std::string::npos;
            JumpAtom atom;
            if (ok) {
                try {
                    atom.z = std::stod(item.substr(0, colon));
                    atom.w = std::stod(item.substr(colon + 1));
                } catch (const std::exception&) {
                    ok = false;
                }
            }
            if (!ok) {
                reader.fail("levy.atoms", "malformed atom '" + item + "' (expected z:w)");
                continue;
            }
            config.atoms.push_back(atom);
        }
        try {
            make_levy_measure(config.atoms);
        } catch (const std::exception& e) {
            reader.fail("levy.atoms", e.what());
        }
    }

    if (reader.has("intensity.B.kind") || reader.has("intensity.B.value"))
        config.intensity.brownian = parse_intensity_component(reader, "intensity.B");
    if (reader.has("intensity.H.kind") || reader.has("intensity.H.value"))
        config.intensity.jump = parse_intensity_component(reader, "intensity.H");
    try {
        validate_component(config.intensity.brownian);
        validate_component(config.intensity.jump);
    } catch (const std::exception& e) {
        reader.fail(0, std::string("intensity: ") + e.what());
    }

    config.regression.degree = static_cast<int>(reader.integer("regression.degree").value_or(2));
    if (config.regression.degree < 0)
        reader.fail("regression.degree", "degree must be nonnegative");
    config.regression.ridge = reader.number("regression.ridge").value_or(1e-8);
    if (config.regression.ridge < 0.0) reader.fail("regression.ridge", "ridge must be nonnegative");
    if (auto filt = reader.text("regression.filtration")) {
        if (*filt == "G")
            config.regression.filtration = Filtration::G;
        else if (*filt == "F")
            config.regression.filtration = Filtration::F;
        else
            reader.fail("regression.filtration", "filtration must be G or F");
    }

    config.driver = reader.text("bsde.driver").value_or("zero");
    config.terminal = reader.text("bsde.terminal").value_or("zero");
    config.driver_a = reader.number("bsde.a").value_or(0.0);
    config.driver_c = reader.number("bsde.c").value_or(0.0);
    config.driver_e0 = reader.number("bsde.e0").value_or(0.0);
    config.driver_ez = reader.number("bsde.ez").value_or(0.0);
    config.terminal_constant = reader.number("bsde.constant").value_or(0.0);
    config.bsde_tolerance = reader.number("bsde.tol").value_or(1e-10);
    if (!(config.bsde_tolerance > 0.0)) reader.fail("bsde.tol", "bsde.tol must be positive");
    config.bsde_max_iterations =
        static_cast<int>(reader.integer("bsde.max_iter").value_or(25));
    if (config.bsde_max_iterations < 1)
        reader.fail("bsde.max_iter", "bsde.max_iter must be at least 1");

    config.rho = reader.number("control.rho").value_or(0.0);
    config.alpha = reader.number("control.alpha").value_or(0.0);
    config.psi0 = reader.number("control.psi0").value_or(0.0);
    config.psi_jump = reader.number("control.psi_jump").value_or(0.0);
    config.target_k = reader.number("control.k").value_or(0.0);
    config.initial_wealth = reader.number("control.x0").value_or(0.0);
    config.inner_paths = static_cast<int>(reader.integer("control.inner_paths").value_or(256));
    if (config.inner_paths < 1)
        reader.fail("control.inner_paths", "control.inner_paths must be at least 1");
    config.utility = reader.text("control.utility").value_or("quadratic");
    if (config.utility != "quadratic" && config.utility != "exp-utility")
        reader.fail("control.utility", "utility must be quadratic or exp-utility");
    config.utility_gamma = reader.number("control.gamma").value_or(1.0);

    for (const auto& [key, entry] : raw.entries) {
        if (key.rfind("tolerances.", 0) != 0) continue;
        const std::string name = key.substr(std::string("tolerances.").size());
        if (auto v = reader.number(key)) config.tolerances[name] = *v;
    }

    ConfigResult out;
    out.errors = raw.errors;
    if (out.errors.empty()) out.config = std::move(config);
    return out;
}

std::string describe_errors(const std::vector<ParseError>& errors) {
    std::ostringstream out;
    for (const auto& e : errors) {
        if (e.line > 0)
            out << "line " << e.line << ": " << e.message << "\n";
        else
            out << e.message << "\n";
    }
    return out.str();
}

}  // namespace tcbsde
