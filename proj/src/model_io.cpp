#include "bifocus/model_io.hpp"

#include <fstream>
#include <set>

namespace bifocus {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows,
                                 Eigen::Index cols, const std::string& name) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw ContractError("model_from_json: field '" + name + "' must have " +
                            std::to_string(rows) + " rows");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ContractError("model_from_json: field '" + name + "' must have " +
                                std::to_string(cols) + " columns");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return m;
}

ordered_json vector_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
    ordered_json arr = ordered_json::array();
    for (Eigen::Index t = 0; t < v.size(); ++t) arr.push_back(v(t));
    return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& name) {
    if (!j.is_array()) {
        throw ContractError("model_from_json: field '" + name + "' must be an array");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t t = 0; t < j.size(); ++t) {
        v(static_cast<Eigen::Index>(t)) = j.at(t).get<double>();
    }
    return v;
}

ordered_json triangle_to_json(const Jet2& jet) {
    ordered_json arr = ordered_json::array();
    for (double v : jet.raw()) arr.push_back(v);
    return arr;
}

Jet2 triangle_from_json(const nlohmann::json& j, int cap, const std::string& name) {
    Jet2 jet(cap);
    if (!j.is_array() || j.size() != jet.raw().size()) {
        throw ContractError("model_from_json: field '" + name + "' must hold " +
                            std::to_string(jet.raw().size()) + " coefficients");
    }
    for (std::size_t t = 0; t < j.size(); ++t) {
        jet.raw()[t] = j.at(t).get<double>();
    }
    return jet;
}

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const std::string& what) {
    for (const auto& item : j.items()) {
        if (known.find(item.key()) == known.end()) {
            throw ContractError(what + ": unknown key '" + item.key() + "'");
        }
    }
}

std::vector<double> dvec_from_json(const nlohmann::json& j, std::size_t size,
                                   const std::string& name) {
    if (!j.is_array() || j.size() != size) {
        throw ContractError("model_from_json: field '" + name + "' must hold " +
                            std::to_string(size) + " entries");
    }
    std::vector<double> v(size);
    for (std::size_t t = 0; t < size; ++t) v[t] = j.at(t).get<double>();
    return v;
}

} // namespace

ordered_json model_to_json(const GlobalMapModel& gm) {
    ordered_json j;
    j["order_cap"] = gm.order_cap();
    j["dim_u"] = gm.dim_u();
    j["dim_v"] = gm.dim_v();
    j["x_plus"] = vector_to_json(gm.x_plus);
    j["u_plus"] = vector_to_json(gm.u_plus);
    j["y_minus"] = vector_to_json(gm.y_minus);
    j["v_minus"] = vector_to_json(gm.v_minus);
    j["a12"] = matrix_to_json(gm.a12);
    j["a34"] = matrix_to_json(gm.a34);
    j["a5"] = matrix_to_json(gm.a5);
    j["a6"] = matrix_to_json(gm.a6);
    j["b12"] = matrix_to_json(gm.b12);
    j["b5"] = matrix_to_json(gm.b5);
    j["b6"] = matrix_to_json(gm.b6);
    j["c_x"] = matrix_to_json(gm.c_x);
    j["c_y"] = matrix_to_json(gm.c_y);
    j["c_u"] = matrix_to_json(gm.c_u);
    j["c_v"] = matrix_to_json(gm.c_v);
    j["d_x"] = matrix_to_json(gm.d_x);
    j["d_y"] = matrix_to_json(gm.d_y);
    j["d_u"] = matrix_to_json(gm.d_u);
    j["d6"] = matrix_to_json(gm.d6);
    j["mu"] = triangle_to_json(gm.mu);
    j["nu"] = triangle_to_json(gm.nu);
    j["lead_a"] = gm.lead_a;
    j["lead_b"] = gm.lead_b;
    return j;
}

GlobalMapModel model_from_json(const nlohmann::json& j) {
    static const std::set<std::string> keys = {
        "order_cap", "dim_u", "dim_v", "x_plus", "u_plus", "y_minus", "v_minus",
        "a12",       "a34",   "a5",    "a6",     "b12",    "b5",      "b6",
        "c_x",       "c_y",   "c_u",   "c_v",    "d_x",    "d_y",     "d_u",
        "d6",        "mu",    "nu",    "lead_a", "lead_b"};
    reject_unknown_keys(j, keys, "model_from_json");

    const int n = j.at("order_cap").get<int>();
    const int du = j.at("dim_u").get<int>();
    const int dv = j.at("dim_v").get<int>();
    GlobalMapModel gm(n, du, dv);
    gm.x_plus = vector_from_json(j.at("x_plus"), "x_plus");
    gm.u_plus = vector_from_json(j.at("u_plus"), "u_plus");
    gm.y_minus = vector_from_json(j.at("y_minus"), "y_minus");
    gm.v_minus = vector_from_json(j.at("v_minus"), "v_minus");
    if (gm.x_plus.size() != 2 || gm.y_minus.size() != 2 || gm.u_plus.size() != du ||
        gm.v_minus.size() != dv) {
        throw ContractError("model_from_json: point dimensions are inconsistent");
    }
    gm.a12 = matrix_from_json(j.at("a12"), 2, 2, "a12");
    gm.a34 = matrix_from_json(j.at("a34"), 2, 2, "a34");
    gm.a5 = matrix_from_json(j.at("a5"), du, 2, "a5");
    gm.a6 = matrix_from_json(j.at("a6"), dv, 2, "a6");
    gm.b12 = matrix_from_json(j.at("b12"), 2, 2, "b12");
    gm.b5 = matrix_from_json(j.at("b5"), du, 2, "b5");
    gm.b6 = matrix_from_json(j.at("b6"), dv, 2, "b6");
    gm.c_x = matrix_from_json(j.at("c_x"), 2, du, "c_x");
    gm.c_y = matrix_from_json(j.at("c_y"), 2, du, "c_y");
    gm.c_u = matrix_from_json(j.at("c_u"), du, du, "c_u");
    gm.c_v = matrix_from_json(j.at("c_v"), dv, du, "c_v");
    gm.d_x = matrix_from_json(j.at("d_x"), 2, dv, "d_x");
    gm.d_y = matrix_from_json(j.at("d_y"), 2, dv, "d_y");
    gm.d_u = matrix_from_json(j.at("d_u"), du, dv, "d_u");
    gm.d6 = matrix_from_json(j.at("d6"), dv, dv, "d6");
    gm.mu = triangle_from_json(j.at("mu"), n, "mu");
    gm.nu = triangle_from_json(j.at("nu"), n, "nu");
    gm.lead_a = dvec_from_json(j.at("lead_a"), static_cast<std::size_t>(n) + 2, "lead_a");
    gm.lead_b = dvec_from_json(j.at("lead_b"), static_cast<std::size_t>(n) + 2, "lead_b");
    gm.check_invariants();
    return gm;
}

ordered_json spectrum_to_json(const BiFocusSpectrum& spec) {
    ordered_json j;
    j["lambda"] = spec.lambda;
    j["gamma"] = spec.gamma;
    j["phi"] = spec.phi;
    j["psi"] = spec.psi;
    j["lambda_hat"] = spec.lambda_hat;
    j["gamma_hat"] = spec.gamma_hat;
    j["stable_nonleading"] = spec.stable_nonleading;
    j["unstable_nonleading"] = spec.unstable_nonleading;
    return j;
}

BiFocusSpectrum spectrum_from_json(const nlohmann::json& j) {
    static const std::set<std::string> keys = {
        "lambda",     "gamma",      "phi",
        "psi",        "lambda_hat", "gamma_hat",
        "stable_nonleading", "unstable_nonleading"};
    reject_unknown_keys(j, keys, "spectrum_from_json");
    return BiFocusSpectrum(
        j.at("lambda").get<double>(), j.at("gamma").get<double>(),
        j.at("phi").get<double>(), j.at("psi").get<double>(),
        j.at("lambda_hat").get<double>(), j.at("gamma_hat").get<double>(),
        j.at("stable_nonleading").get<std::vector<double>>(),
        j.at("unstable_nonleading").get<std::vector<double>>());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ContractError("write_file_atomic: cannot open " + tmp.string());
        }
        out << content;
        if (!out.good()) {
            throw ContractError("write_file_atomic: write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void save_model(const std::filesystem::path& path, const GlobalMapModel& gm) {
    write_file_atomic(path, model_to_json(gm).dump(2) + "\n");
}

GlobalMapModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("load_model: cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

void save_spectrum(const std::filesystem::path& path, const BiFocusSpectrum& spec) {
    write_file_atomic(path, spectrum_to_json(spec).dump(2) + "\n");
}

BiFocusSpectrum load_spectrum(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("load_spectrum: cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return spectrum_from_json(j);
}

} // namespace bifocus
