#include "ralqr/cli.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

namespace ralqr {

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

// Unwraps a manifest ({"config": {...}, ...}) down to the bare config.
json unwrap_config(json j) {
    if (j.is_object() && j.contains("config") && j["config"].is_object()) return j["config"];
    return j;
}

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw ConfigError(field + ": " + what);
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& field) {
    if (j.is_number()) {
        Eigen::MatrixXd m(1, 1);
        m(0, 0) = j.get<double>();
        return m;
    }
    if (!j.is_array() || j.empty() || !j[0].is_array())
        field_error(field, "expected a number or a nested array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    if (cols == 0) field_error(field, "rows must be non-empty");
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) field_error(field, "rows have unequal length");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) field_error(field, "matrix entries must be numbers");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

// One named object in the config, with typed field accessors that
// report errors as "<section>.<field>: ...". A null object stands for
// an omitted optional section, in which case every fallback applies.
class Section {
public:
    Section(const json* obj, std::string name) : obj_(obj), name_(std::move(name)) {}

    const json* find(const char* key) const {
        if (!obj_) return nullptr;
        const auto it = obj_->find(key);
        return it == obj_->end() ? nullptr : &*it;
    }

    std::string path(const char* key) const { return name_ + "." + key; }

    const json& require(const char* key) const {
        const json* j = find(key);
        if (!j) field_error(path(key), "missing required field");
        return *j;
    }

    double number(const char* key) const {
        const json& j = require(key);
        if (!j.is_number()) field_error(path(key), "expected a number");
        return j.get<double>();
    }

    double number_or(const char* key, double fallback) const {
        return find(key) ? number(key) : fallback;
    }

    int integer(const char* key) const {
        const json& j = require(key);
        if (!j.is_number_integer()) field_error(path(key), "expected an integer");
        return j.get<int>();
    }

    int integer_or(const char* key, int fallback) const {
        return find(key) ? integer(key) : fallback;
    }

    std::uint64_t seed_or(const char* key, std::uint64_t fallback) const {
        const json* j = find(key);
        if (!j) return fallback;
        if (!j->is_number_integer() || (j->is_number_integer() && !j->is_number_unsigned() &&
                                        j->get<std::int64_t>() < 0))
            field_error(path(key), "expected a nonnegative integer");
        return j->get<std::uint64_t>();
    }

    Eigen::MatrixXd matrix(const char* key) const { return parse_matrix(require(key), path(key)); }

    Eigen::MatrixXd matrix_or(const char* key, const Eigen::MatrixXd& fallback) const {
        const json* j = find(key);
        return j ? parse_matrix(*j, path(key)) : fallback;
    }

    void check_known_keys(std::initializer_list<const char*> known) const {
        if (!obj_) return;
        for (const auto& item : obj_->items()) {
            bool ok = false;
            for (const char* k : known) ok = ok || item.key() == k;
            if (!ok) field_error(name_ + "." + item.key(), "unknown field");
        }
    }

private:
    const json* obj_;
    std::string name_;
};

Section section(const json& root, const char* name, bool required) {
    const auto it = root.find(name);
    if (it == root.end()) {
        if (required) throw ConfigError(std::string(name) + ": missing required section");
        return Section(nullptr, name);
    }
    if (!it->is_object()) throw ConfigError(std::string(name) + ": expected an object");
    return Section(&*it, name);
}

ExperimentConfig config_from_json(const json& root) {
    if (!root.is_object()) throw ConfigError("top level must be an object");
    for (const auto& item : root.items())
        if (item.key() != "plant" && item.key() != "controller" && item.key() != "experiment" &&
            item.key() != "uncertainty")
            field_error(item.key(), "unknown section");

    ExperimentConfig cfg;

    const Section plant = section(root, "plant", /*required=*/true);
    plant.check_known_keys({"A", "B", "W"});
    cfg.plant.A = plant.matrix("A");
    cfg.plant.B = plant.matrix("B");
    cfg.plant.W = plant.matrix("W");
    const Eigen::Index n = cfg.plant.A.rows();
    const Eigen::Index m = cfg.plant.B.cols();

    const Section ctrl = section(root, "controller", /*required=*/true);
    ctrl.check_known_keys({"Q", "R", "U", "X0", "t_explore", "T", "N_b", "gamma", "epsilon",
                           "uncertainty_norm"});
    cfg.controller.Q = ctrl.matrix("Q");
    cfg.controller.R = ctrl.matrix("R");
    cfg.controller.U = ctrl.matrix_or("U", Eigen::MatrixXd::Identity(m, m));
    cfg.controller.X0 = ctrl.matrix_or("X0", Eigen::MatrixXd::Zero(n, n));
    cfg.controller.t_explore = ctrl.integer("t_explore");
    cfg.controller.T = ctrl.integer("T");
    cfg.controller.N_b = ctrl.integer_or("N_b", 100);
    cfg.controller.gamma = ctrl.number_or("gamma", 1.0);
    cfg.controller.epsilon = ctrl.number_or("epsilon", 0.01);
    if (const json* norm = ctrl.find("uncertainty_norm")) {
        if (!norm->is_string()) field_error(ctrl.path("uncertainty_norm"), "expected a string");
        const std::string name = norm->get<std::string>();
        if (name == "max_spectral")
            cfg.controller.uncertainty_norm = UncertaintyNorm::MaxSpectral;
        else if (name == "frobenius")
            cfg.controller.uncertainty_norm = UncertaintyNorm::Frobenius;
        else
            field_error(ctrl.path("uncertainty_norm"),
                        "expected \"max_spectral\" or \"frobenius\"");
    }

    const Section exp = section(root, "experiment", /*required=*/false);
    exp.check_known_keys({"N_s", "quantiles", "master_seed", "arms", "workers"});
    cfg.N_s = exp.integer_or("N_s", 2000);
    cfg.master_seed = exp.seed_or("master_seed", 0);
    cfg.workers = exp.integer_or("workers", 1);
    if (const json* q = exp.find("quantiles")) {
        if (!q->is_array() || q->empty()) field_error(exp.path("quantiles"), "expected an array");
        cfg.quantiles.clear();
        for (const json& level : *q) {
            if (!level.is_number()) field_error(exp.path("quantiles"), "levels must be numbers");
            cfg.quantiles.push_back(level.get<double>());
        }
    }
    if (const json* arms = exp.find("arms")) {
        if (!arms->is_array() || arms->empty()) field_error(exp.path("arms"), "expected an array");
        cfg.arms.clear();
        for (const json& arm : *arms) {
            if (arm == "CE")
                cfg.arms.push_back(Arm::CE);
            else if (arm == "RMN")
                cfg.arms.push_back(Arm::RMN);
            else
                field_error(exp.path("arms"), "expected \"CE\" or \"RMN\"");
        }
    }

    try {
        cfg.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    return cfg;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["plant"] = {{"A", matrix_to_json(cfg.plant.A)},
                  {"B", matrix_to_json(cfg.plant.B)},
                  {"W", matrix_to_json(cfg.plant.W)}};
    j["controller"] = {
        {"Q", matrix_to_json(cfg.controller.Q)},
        {"R", matrix_to_json(cfg.controller.R)},
        {"U", matrix_to_json(cfg.controller.U)},
        {"X0", matrix_to_json(cfg.controller.X0)},
        {"t_explore", cfg.controller.t_explore},
        {"T", cfg.controller.T},
        {"N_b", cfg.controller.N_b},
        {"gamma", cfg.controller.gamma},
        {"epsilon", cfg.controller.epsilon},
        {"uncertainty_norm", cfg.controller.uncertainty_norm == UncertaintyNorm::MaxSpectral
                                 ? "max_spectral"
                                 : "frobenius"}};
    json arms = json::array();
    for (Arm arm : cfg.arms) arms.push_back(arm_name(arm));
    j["experiment"] = {{"N_s", cfg.N_s},
                       {"quantiles", cfg.quantiles},
                       {"master_seed", cfg.master_seed},
                       {"arms", arms},
                       {"workers", cfg.workers}};
    return j;
}

std::string fmt_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Column label for a quantile level: 0.95 -> q95, 0.999 -> q999.
std::string quantile_label(double level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", level);
    std::string s = buf;
    if (s.rfind("0.", 0) == 0) {
        s = s.substr(2);
    } else {
        for (char& c : s) {
            if (c == '.' || c == '-' || c == '+') c = '_';
        }
    }
    return "q" + s;
}

// Levels other than the median, which gets its own column.
std::vector<std::size_t> quantile_columns(const std::vector<double>& levels) {
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] != 0.5) cols.push_back(i);
    return cols;
}

class TableWriter {
public:
    TableWriter(const std::filesystem::path& path) : path_(path.string()), out_(path) {
        if (!out_) throw IoError("cannot open " + path_ + " for writing");
    }

    void header(const std::vector<std::string>& cols) { row_strings(cols); }

    void field(const std::string& s) {
        if (!first_) out_ << ',';
        out_ << s;
        first_ = false;
    }
    void field(double v) { field(fmt_value(v)); }
    void field(int v) { field(std::to_string(v)); }
    void end_row() {
        out_ << '\n';
        first_ = true;
    }

    void close() {
        out_.flush();
        if (!out_) throw IoError("failed writing " + path_);
        out_.close();
    }

private:
    void row_strings(const std::vector<std::string>& cols) {
        for (const std::string& c : cols) field(c);
        end_row();
    }

    std::string path_;
    std::ofstream out_;
    bool first_ = true;
};

// Emits one aggregate table row: mean, median, configured quantiles.
void stat_fields(TableWriter& w, const QuantileTable& table, Eigen::Index row,
                 const std::vector<std::size_t>& q_cols) {
    w.field(table.mean[row]);
    w.field(table.median[row]);
    for (std::size_t q : q_cols) w.field(table.quantiles(row, static_cast<Eigen::Index>(q)));
}

}  // namespace

ExperimentConfig parse_config(const std::string& path) {
    return config_from_json(unwrap_config(load_json(path)));
}

std::optional<UncertaintyEstimate> parse_uncertainty_block(const std::string& path) {
    const json root = unwrap_config(load_json(path));
    if (!root.is_object() || !root.contains("uncertainty")) return std::nullopt;
    const Section unc = section(root, "uncertainty", /*required=*/true);
    unc.check_known_keys({"sigma_A", "sigma_B"});

    UncertaintyEstimate u;
    u.sigma_A = unc.matrix("sigma_A");
    u.sigma_B = unc.matrix("sigma_B");
    if (u.sigma_A.rows() != u.sigma_A.cols())
        field_error("uncertainty.sigma_A", "must be square (n^2 x n^2)");
    if (u.sigma_B.rows() != u.sigma_B.cols())
        field_error("uncertainty.sigma_B", "must be square (nm x nm)");
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(
        static_cast<double>(u.sigma_A.rows()))));
    if (n * n != u.sigma_A.rows())
        field_error("uncertainty.sigma_A", "row count must be a perfect square");
    if (u.sigma_B.rows() % n != 0)
        field_error("uncertainty.sigma_B", "row count must be a multiple of n");
    u.n = n;
    u.m = u.sigma_B.rows() / n;
    try {
        u.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("uncertainty: ") + e.what());
    }
    return u;
}

TrajectoryData parse_trajectory(const std::string& path) {
    const json root = load_json(path);
    if (!root.is_object()) throw ConfigError("top level must be an object");
    const Section traj = Section(&root, "trajectory");
    Eigen::MatrixXd states = parse_matrix(traj.require("states"), "states");
    Eigen::MatrixXd inputs = parse_matrix(traj.require("inputs"), "inputs");
    try {
        return TrajectoryData(std::move(states), std::move(inputs));
    } catch (const Error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::vector<std::string> emit_results(const RegretRecord& record, const ExperimentConfig& cfg,
                                      const std::string& out_dir, double duration_seconds) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
    const fs::path dir(out_dir);

    const std::vector<std::size_t> q_cols = quantile_columns(record.levels);
    std::vector<std::string> stat_headers = {"mean", "median"};
    for (std::size_t q : q_cols) stat_headers.push_back(quantile_label(record.levels[q]));

    const auto header_with = [&](std::vector<std::string> prefix, const char* suffix) {
        prefix.insert(prefix.end(), stat_headers.begin(), stat_headers.end());
        prefix.push_back(suffix);
        return prefix;
    };

    std::vector<std::string> files;

    {
        TableWriter w(dir / "regret.csv");
        w.header(header_with({"arm", "t"}, "aborts"));
        for (std::size_t a = 0; a < record.arms.size(); ++a) {
            const QuantileTable& table = record.regret_stats[a];
            for (Eigen::Index i = 0; i < table.mean.size(); ++i) {
                w.field(arm_name(record.arms[a].arm));
                w.field(table.timesteps[static_cast<std::size_t>(i)]);
                stat_fields(w, table, i, q_cols);
                w.field(record.arms[a].aborts);
                w.end_row();
            }
        }
        w.close();
        files.push_back((dir / "regret.csv").string());
    }

    const auto diagnostic_table = [&](const char* filename, const char* quantity_a,
                                      const char* quantity_b,
                                      const std::vector<QuantileTable>& stats_a,
                                      const std::vector<QuantileTable>& stats_b) {
        TableWriter w(dir / filename);
        w.header(header_with({"arm", "quantity", "t"}, "excluded"));
        for (std::size_t a = 0; a < record.arms.size(); ++a) {
            const auto emit_quantity = [&](const char* quantity, const QuantileTable& table) {
                for (Eigen::Index i = 0; i < table.mean.size(); ++i) {
                    w.field(arm_name(record.arms[a].arm));
                    w.field(quantity);
                    w.field(table.timesteps[static_cast<std::size_t>(i)]);
                    stat_fields(w, table, i, q_cols);
                    w.field(table.excluded[static_cast<std::size_t>(i)]);
                    w.end_row();
                }
            };
            emit_quantity(quantity_a, stats_a[a]);
            emit_quantity(quantity_b, stats_b[a]);
        }
        w.close();
        files.push_back((dir / filename).string());
    };

    diagnostic_table("model_error.csv", "A", "B", record.err_A_stats, record.err_B_stats);
    diagnostic_table("noise_variance.csv", "alpha", "beta", record.sigma_A_stats,
                     record.sigma_B_stats);

    {
        TableWriter w(dir / "cgamma_scale.csv");
        w.header(header_with({"arm", "t"}, "excluded"));
        for (std::size_t a = 0; a < record.arms.size(); ++a) {
            const QuantileTable& table = record.c_gamma_stats[a];
            for (Eigen::Index i = 0; i < table.mean.size(); ++i) {
                w.field(arm_name(record.arms[a].arm));
                w.field(table.timesteps[static_cast<std::size_t>(i)]);
                stat_fields(w, table, i, q_cols);
                w.field(table.excluded[static_cast<std::size_t>(i)]);
                w.end_row();
            }
        }
        w.close();
        files.push_back((dir / "cgamma_scale.csv").string());
    }

    json manifest;
    manifest["version"] = "0.1.0";
    manifest["master_seed"] = cfg.master_seed;
    manifest["duration_seconds"] = duration_seconds;
    json aborts;
    for (const ArmData& arm : record.arms) aborts[arm_name(arm.arm)] = arm.aborts;
    manifest["aborts"] = aborts;
    json file_list = json::array();
    for (const std::string& f : files) file_list.push_back(fs::path(f).filename().string());
    manifest["files"] = file_list;
    manifest["config"] = config_to_json(cfg);

    const fs::path manifest_path = dir / "manifest.json";
    std::ofstream out(manifest_path);
    if (!out) throw IoError("cannot open " + manifest_path.string() + " for writing");
    out << manifest.dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("failed writing " + manifest_path.string());
    files.push_back(manifest_path.string());
    return files;
}

}  // namespace ralqr
