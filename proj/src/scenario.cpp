#include "bifocus/scenario.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bifocus/model_io.hpp"
#include "bifocus/raiser.hpp"
#include "bifocus/reference.hpp"
#include "bifocus/renorm.hpp"

namespace bifocus {

namespace {

namespace fs = std::filesystem;

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& what) {
    for (const auto& item : j.items()) {
        if (known.find(item.key()) == known.end()) {
            throw ContractError(what + ": unknown key '" + item.key() + "'");
        }
    }
}

fs::path resolve(const fs::path& base, const std::string& rel) {
    const fs::path p(rel);
    return p.is_absolute() ? p : base / p;
}

BiFocusSpectrum config_spectrum(const nlohmann::json& cfg, const fs::path& base) {
    if (cfg.contains("spectrum")) {
        return load_spectrum(resolve(base, cfg.at("spectrum").get<std::string>()));
    }
    return BiFocusSpectrum::defaults();
}

std::vector<int> config_k_list(const nlohmann::json& cfg) {
    if (cfg.contains("k_list")) {
        const auto list = cfg.at("k_list").get<std::vector<int>>();
        if (list.empty()) throw ContractError("config: k_list must not be empty");
        return list;
    }
    if (cfg.contains("k")) return {cfg.at("k").get<int>()};
    throw ContractError("config: need 'k' or 'k_list'");
}

struct RunDir {
    fs::path dir;
    std::vector<std::string> csv_lines;
    std::ostringstream summary;
    int soft_exit = kExitOk; // reported after artifacts are flushed

    explicit RunDir(const fs::path& d) : dir(d) { fs::create_directories(dir); }

    void flush() const {
        std::string csv;
        for (const auto& line : csv_lines) csv += line + "\r\n";
        write_file_atomic(dir / "results.csv", csv);
        write_file_atomic(dir / "summary.txt", summary.str());
    }
};

DiskMap config_target(const nlohmann::json& t) {
    reject_unknown(t, {"type", "m", "n"}, "config.target");
    const std::string type = t.at("type").get<std::string>();
    if (type == "zero") {
        return [](double, double) { return std::array<double, 2>{0.0, 0.0}; };
    }
    if (type == "henon") {
        return [](double y1, double y2) {
            return std::array<double, 2>{1.0 - 1.4 * y1 * y1 + y2, 0.3 * y1};
        };
    }
    if (type == "poly") {
        const auto mc = t.at("m").get<std::vector<double>>();
        const auto nc = t.at("n").get<std::vector<double>>();
        if (mc.size() != nc.size() || mc.empty()) {
            throw ContractError("config.target: m and n must be equal-length triangles");
        }
        // Triangle length determines the degree.
        int deg = 0;
        while (static_cast<std::size_t>((deg + 1) * (deg + 2) / 2) < mc.size()) ++deg;
        if (static_cast<std::size_t>((deg + 1) * (deg + 2) / 2) != mc.size()) {
            throw ContractError("config.target: coefficient count is not triangular");
        }
        Jet2 jm(deg), jn(deg);
        jm.raw() = mc;
        jn.raw() = nc;
        return [jm, jn](double y1, double y2) {
            return std::array<double, 2>{jet_eval(jm, y1, y2), jet_eval(jn, y1, y2)};
        };
    }
    throw ContractError("config.target: unknown type '" + type + "'");
}

void run_validate(const nlohmann::json& cfg, const fs::path& base, RunDir& run) {
    reject_unknown(cfg, {"kind", "model", "out_dir"}, "config");
    const GlobalMapModel gm = load_model(resolve(base, cfg.at("model").get<std::string>()));
    const GenericityReport rep = validate_genericity(gm);
    run.csv_lines.push_back(csv_row({"det_a34", "det_b12", "det_d6", "pass"}));
    run.csv_lines.push_back(csv_row({format_double(rep.det_a34), format_double(rep.det_b12),
                                     format_double(rep.det_d6), rep.pass() ? "1" : "0"}));
    run.summary << "validate: det_a34 = " << rep.det_a34 << ", det_b12 = " << rep.det_b12
                << ", det_d6 = " << rep.det_d6 << "\n"
                << "pass: " << (rep.pass() ? "yes" : "no") << "\n";
    if (!rep.pass()) {
        std::cerr << "contract violation: validate: genericity test failed\n";
        run.soft_exit = kExitContract;
    }
}

void append_raise_rows(RunDir& run, const std::vector<RaiseRow>& rows) {
    for (const auto& r : rows) {
        run.csv_lines.push_back(csv_row({std::to_string(r.k), format_double(r.residual_pre),
                                         format_double(r.residual_post),
                                         std::to_string(r.index_n),
                                         std::to_string(r.index_m)}));
    }
}

void run_raise(const nlohmann::json& cfg, const fs::path& base, RunDir& run) {
    reject_unknown(cfg, {"kind", "model1", "model2", "k_min", "k_max", "spectrum", "out_dir"},
                   "config");
    const GlobalMapModel gm1 = load_model(resolve(base, cfg.at("model1").get<std::string>()));
    const GlobalMapModel gm2 = load_model(resolve(base, cfg.at("model2").get<std::string>()));
    const BiFocusSpectrum spec = config_spectrum(cfg, base);
    const int k_min = cfg.value("k_min", 5);
    const int k_max = cfg.value("k_max", 400);
    const RaiseOutcome res = raise_suborder(gm1, gm2, spec, k_min, k_max);
    run.csv_lines.push_back(
        csv_row({"k", "residual_pre", "residual_post", "index_n", "index_m"}));
    append_raise_rows(run, res.rows);
    save_model(run.dir / "model_out.json", res.model);
    run.summary << "raise: index " << res.index.str() << " reached after "
                << res.rows.size() << " candidate k\n";
}

void run_order_n(const nlohmann::json& cfg, const fs::path& base, RunDir& run) {
    reject_unknown(cfg, {"kind", "models", "N", "k_min", "k_max", "spectrum", "out_dir"},
                   "config");
    const auto paths = cfg.at("models").get<std::vector<std::string>>();
    const int N = cfg.at("N").get<int>();
    const std::uint64_t need = required_count(N);
    if (paths.size() != need) {
        throw ContractError("order_n: required_count(" + std::to_string(N) + ")=" +
                            std::to_string(need) + ", got " + std::to_string(paths.size()) +
                            " models");
    }
    std::vector<GlobalMapModel> models;
    models.reserve(paths.size());
    for (const auto& p : paths) models.push_back(load_model(resolve(base, p)));
    const BiFocusSpectrum spec = config_spectrum(cfg, base);
    const int k_min = cfg.value("k_min", 5);
    const int k_max = cfg.value("k_max", 400);
    TangencyBag bag(std::move(models), spec);
    const RaiseOutcome res = build_order_n(bag, N, k_min, k_max);
    run.csv_lines.push_back(
        csv_row({"k", "residual_pre", "residual_post", "index_n", "index_m"}));
    append_raise_rows(run, res.rows);
    save_model(run.dir / "model_out.json", res.model);
    run.summary << "order_n: reached index " << res.index.str() << " from "
                << paths.size() << " inputs\n";
}

void run_renorm(const nlohmann::json& cfg, const fs::path& base, RunDir& run) {
    reject_unknown(cfg, {"kind", "model", "scheme", "k_list", "k", "spectrum", "out_dir"},
                   "config");
    const GlobalMapModel gm = load_model(resolve(base, cfg.at("model").get<std::string>()));
    const BiFocusSpectrum spec = config_spectrum(cfg, base);
    const std::string scheme_name = cfg.value("scheme", std::string("order"));
    RescalingScheme scheme = RescalingScheme::order_form(gm.order_cap());
    if (scheme_name == "full_polynomial") {
        scheme = RescalingScheme::full_polynomial_form(gm.order_cap());
    } else if (scheme_name != "order") {
        throw ContractError("renorm: scheme must be 'order' or 'full_polynomial'");
    }
    const ConvergenceTable table = convergence_report(gm, spec, scheme, config_k_list(cfg));
    run.csv_lines.push_back(csv_row({"k", "sup_error", "aux_norm"}));
    for (const auto& r : table.rows) {
        run.csv_lines.push_back(csv_row({std::to_string(r.k), format_double(r.sup_error),
                                         format_double(r.aux_norm)}));
    }
    run.summary << "renorm: " << table.rows.size() << " rows, monotone "
                << (table.monotone_ok ? "yes" : "no") << "\n";
}

void run_universal(const nlohmann::json& cfg, const fs::path& base, RunDir& run) {
    reject_unknown(cfg, {"kind", "model", "n", "k", "k_list", "target", "spectrum", "out_dir"},
                   "config");
    const GlobalMapModel gm = load_model(resolve(base, cfg.at("model").get<std::string>()));
    const BiFocusSpectrum spec = config_spectrum(cfg, base);
    const int n = cfg.at("n").get<int>();
    const DiskMap target = config_target(cfg.at("target"));
    run.csv_lines.push_back(csv_row({"k", "fit_error", "total_error"}));
    for (int k : config_k_list(cfg)) {
        const UniversalResult res = universal_approx(target, n, gm, spec, k);
        run.csv_lines.push_back(csv_row({std::to_string(k), format_double(res.fit_error),
                                         format_double(res.total_error)}));
        run.summary << "universal: k = " << k << ", fit_error = " << res.fit_error
                    << ", total_error = " << res.total_error << "\n";
    }
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

std::string csv_row(const std::vector<std::string>& fields) {
    std::string row;
    for (std::size_t t = 0; t < fields.size(); ++t) {
        if (t) row += ',';
        const std::string& f = fields[t];
        if (f.find_first_of(",\"\n\r") != std::string::npos) {
            row += '"';
            for (char ch : f) {
                if (ch == '"') row += '"';
                row += ch;
            }
            row += '"';
        } else {
            row += f;
        }
    }
    return row;
}

int run_scenario(const std::filesystem::path& config_path,
                 const std::string& expected_kind) {
    try {
        std::ifstream in(config_path);
        if (!in) {
            throw ContractError("run_scenario: cannot open config " + config_path.string());
        }
        nlohmann::json cfg;
        try {
            in >> cfg;
        } catch (const nlohmann::json::exception& e) {
            throw ContractError(std::string("run_scenario: config parse error: ") + e.what());
        }
        const fs::path base = fs::absolute(config_path).parent_path();
        const std::string kind = cfg.at("kind").get<std::string>();
        if (!expected_kind.empty() && kind != expected_kind) {
            throw ContractError("run_scenario: config kind '" + kind +
                                "' does not match subcommand '" + expected_kind + "'");
        }
        const std::string out_rel = cfg.value("out_dir", "run_" + kind);
        RunDir run(resolve(base, out_rel));

        if (kind == "validate") {
            run_validate(cfg, base, run);
        } else if (kind == "raise") {
            run_raise(cfg, base, run);
        } else if (kind == "order_n") {
            run_order_n(cfg, base, run);
        } else if (kind == "renorm") {
            run_renorm(cfg, base, run);
        } else if (kind == "universal") {
            run_universal(cfg, base, run);
        } else {
            throw ContractError("run_scenario: unknown kind '" + kind + "'");
        }
        run.flush();
        return run.soft_exit;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitContract;
    } catch (const ContractError& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return kExitContract;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}

int run_gen_reference(std::uint64_t seed, int count, int order,
                      const std::filesystem::path& out_dir) {
    try {
        fs::create_directories(out_dir);
        const auto models = gen_reference(seed, count, order);
        for (std::size_t i = 0; i < models.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "model_%03zu.json", i);
            save_model(out_dir / name, models[i]);
        }
        return kExitOk;
    } catch (const ContractError& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return kExitContract;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}

int run_gen_renorm_reference(const std::filesystem::path& out_file) {
    try {
        if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
        save_model(out_file, reference_renorm_model());
        return kExitOk;
    } catch (const ContractError& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return kExitContract;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}

} // namespace bifocus
