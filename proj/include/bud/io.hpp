#pragma once

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <string>

#include "bud/sim.hpp"

namespace bud {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON scenario schema
// ---------------------------------------------------------------------------

namespace io_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
    throw config_error(path + ": " + msg);
}

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& path) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) fail(path + "." + it.key(), "unknown key");
}

inline double get_prob(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    double v = j.get<double>();
    if (!is_probability(v)) fail(path, "probability outside [0,1]");
    return v;
}

inline std::vector<double> get_prob_vector(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array");
    std::vector<double> out;
    for (size_t i = 0; i < j.size(); ++i)
        out.push_back(get_prob(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline MetricKind parse_metric_kind(const std::string& s, const std::string& path) {
    for (MetricKind k : {MetricKind::VarianceSum, MetricKind::TruncatedVarianceSum,
                         MetricKind::EntropyOfMax, MetricKind::AsymEntropyBiomarker,
                         MetricKind::AsymEntropyCoprimary, MetricKind::VarianceCoprimary,
                         MetricKind::DifferentialEntropySum, MetricKind::MADSum,
                         MetricKind::DiscretizedVariance, MetricKind::DiscretizedEntropy,
                         MetricKind::MaxEffectVariance})
        if (s == metric_kind_name(k)) return k;
    fail(path, "unknown metric kind '" + s + "'");
}

inline PolicyKind parse_policy_kind(const std::string& s, const std::string& path) {
    for (PolicyKind k : {PolicyKind::BUD, PolicyKind::Myopic, PolicyKind::BR,
                         PolicyKind::BAR_Trippa, PolicyKind::BAR2_Thall, PolicyKind::ThompsonBest,
                         PolicyKind::RPW, PolicyKind::DBCD_Neyman, PolicyKind::DBCD_SqrtRate,
                         PolicyKind::OracleFixed})
        if (s == policy_kind_name(k)) return k;
    fail(path, "unknown policy kind '" + s + "'");
}

inline DesignFamily parse_family(const std::string& s, const std::string& path) {
    for (DesignFamily f : {DesignFamily::MultiArmControlled, DesignFamily::BestArm,
                           DesignFamily::Normal, DesignFamily::CoPrimary,
                           DesignFamily::Biomarker})
        if (s == family_name(f)) return f;
    fail(path, "unknown design family '" + s + "'");
}

}  // namespace io_detail

inline json metric_to_json(const MetricSpec& m) {
    return json{{"kind", metric_kind_name(m.kind)},
                {"w", m.w},
                {"beta_exp", m.beta_exp},
                {"cutpoints", m.cutpoints},
                {"grid_points", m.grid_points},
                {"gl_points", m.gl_points},
                {"mc_draws", m.mc_draws}};
}

inline MetricSpec metric_from_json(const json& j, const std::string& path = "metric") {
    io_detail::check_keys(
        j, {"kind", "w", "beta_exp", "cutpoints", "grid_points", "gl_points", "mc_draws"}, path);
    MetricSpec m;
    if (j.contains("kind"))
        m.kind = io_detail::parse_metric_kind(j["kind"].get<std::string>(), path + ".kind");
    if (j.contains("w")) m.w = j["w"].get<double>();
    if (j.contains("beta_exp")) m.beta_exp = j["beta_exp"].get<double>();
    if (j.contains("cutpoints")) m.cutpoints = j["cutpoints"].get<std::vector<double>>();
    if (j.contains("grid_points")) m.grid_points = j["grid_points"].get<int>();
    if (j.contains("gl_points")) m.gl_points = j["gl_points"].get<int>();
    if (j.contains("mc_draws")) m.mc_draws = j["mc_draws"].get<int64_t>();
    m.validate();
    return m;
}

inline json policy_to_json(const PolicySpec& p) {
    json h;
    if (p.h.type == ExponentSchedule::Type::Constant) {
        h = p.h.value;
    } else {
        h = json{{"type", "power"}, {"scale", p.h.value}, {"power", p.h.power}};
    }
    return json{{"kind", policy_kind_name(p.kind)},
                {"h", h},
                {"rpw_initial", p.rpw_initial},
                {"rpw_add", p.rpw_add},
                {"bar_gamma_scale", p.bar_gamma_scale},
                {"bar_gamma_power", p.bar_gamma_power},
                {"bar_control_scale", p.bar_control_scale},
                {"dbcd_gamma", p.dbcd_gamma},
                {"oracle_quotas", p.oracle_quotas}};
}

inline PolicySpec policy_from_json(const json& j, const std::string& path = "policy") {
    io_detail::check_keys(j,
                          {"kind", "h", "rpw_initial", "rpw_add", "bar_gamma_scale",
                           "bar_gamma_power", "bar_control_scale", "dbcd_gamma", "oracle_quotas"},
                          path);
    PolicySpec p;
    if (j.contains("kind"))
        p.kind = io_detail::parse_policy_kind(j["kind"].get<std::string>(), path + ".kind");
    if (j.contains("h")) {
        const json& h = j["h"];
        if (h.is_number()) {
            p.h.type = ExponentSchedule::Type::Constant;
            p.h.value = h.get<double>();
        } else {
            io_detail::check_keys(h, {"type", "scale", "power"}, path + ".h");
            std::string type = h.value("type", "constant");
            if (type == "power") p.h.type = ExponentSchedule::Type::PowerOfT;
            else if (type != "constant") io_detail::fail(path + ".h.type", "unknown schedule");
            p.h.value = h.value("scale", 3.0);
            p.h.power = h.value("power", 0.75);
        }
    }
    if (j.contains("rpw_initial")) p.rpw_initial = j["rpw_initial"].get<double>();
    if (j.contains("rpw_add")) p.rpw_add = j["rpw_add"].get<double>();
    if (j.contains("bar_gamma_scale")) p.bar_gamma_scale = j["bar_gamma_scale"].get<double>();
    if (j.contains("bar_gamma_power")) p.bar_gamma_power = j["bar_gamma_power"].get<double>();
    if (j.contains("bar_control_scale"))
        p.bar_control_scale = j["bar_control_scale"].get<double>();
    if (j.contains("dbcd_gamma")) p.dbcd_gamma = j["dbcd_gamma"].get<double>();
    if (j.contains("oracle_quotas"))
        p.oracle_quotas = j["oracle_quotas"].get<std::vector<int64_t>>();
    p.validate();
    return p;
}

inline json scenario_to_json(const ScenarioConfig& cfg) {
    json truth;
    switch (cfg.family) {
        case DesignFamily::MultiArmControlled:
        case DesignFamily::BestArm: truth = json{{"theta", cfg.theta}}; break;
        case DesignFamily::Normal:
            truth = json{{"means", cfg.normal_means},
                         {"outcome_vars", cfg.normal_outcome_vars},
                         {"prior_var", cfg.normal_prior_var}};
            break;
        case DesignFamily::CoPrimary: {
            json cells = json::array();
            for (const auto& c : cfg.cells) cells.push_back(std::vector<double>(c.begin(), c.end()));
            truth = json{{"cells", cells}};
            break;
        }
        case DesignFamily::Biomarker:
            truth = json{{"B", cfg.biomarker.n_biomarkers},
                         {"K", cfg.biomarker.n_experimental},
                         {"targets", cfg.biomarker.targets},
                         {"prevalences", cfg.biomarker.prevalences},
                         {"pi", cfg.biomarker.pi},
                         {"lambda", cfg.biomarker.lambda},
                         {"control_rate", cfg.bm_control_rate},
                         {"positive_rates", cfg.bm_positive_rate},
                         {"negative_rates", cfg.bm_negative_rate}};
            break;
    }
    return json{{"name", cfg.name},
                {"family", family_name(cfg.family)},
                {"truth", truth},
                {"prior", json{{"v1", cfg.prior_v1}, {"v2", cfg.prior_v2}}},
                {"T", cfg.T},
                {"replications", cfg.replications},
                {"seed", cfg.seed},
                {"workers", cfg.workers},
                {"metric", metric_to_json(cfg.metric)},
                {"policy", policy_to_json(cfg.policy)},
                {"analysis", json{{"test", cfg.analysis.test},
                                  {"level", cfg.analysis.level},
                                  {"bootstrap_B", cfg.analysis.bootstrap_B}}},
                {"joint", json{{"draws", cfg.joint_draws}, {"mode", cfg.joint_mode}}}};
}

inline ScenarioConfig scenario_from_json(const json& j) {
    io_detail::check_keys(j,
                          {"name", "family", "truth", "prior", "T", "replications", "seed",
                           "workers", "metric", "policy", "analysis", "joint"},
                          "config");
    ScenarioConfig cfg;
    if (j.contains("name")) cfg.name = j["name"].get<std::string>();
    if (!j.contains("family")) io_detail::fail("config.family", "missing");
    cfg.family = io_detail::parse_family(j["family"].get<std::string>(), "config.family");

    if (!j.contains("truth")) io_detail::fail("config.truth", "missing");
    const json& truth = j["truth"];
    switch (cfg.family) {
        case DesignFamily::MultiArmControlled:
        case DesignFamily::BestArm:
            io_detail::check_keys(truth, {"theta"}, "truth");
            cfg.theta = io_detail::get_prob_vector(truth.at("theta"), "truth.theta");
            break;
        case DesignFamily::Normal:
            io_detail::check_keys(truth, {"means", "outcome_vars", "prior_var"}, "truth");
            cfg.normal_means = truth.at("means").get<std::vector<double>>();
            cfg.normal_outcome_vars = truth.at("outcome_vars").get<std::vector<double>>();
            if (truth.contains("prior_var")) cfg.normal_prior_var = truth["prior_var"].get<double>();
            break;
        case DesignFamily::CoPrimary: {
            io_detail::check_keys(truth, {"cells"}, "truth");
            const json& cells = truth.at("cells");
            for (size_t a = 0; a < cells.size(); ++a) {
                auto v = io_detail::get_prob_vector(cells[a], "truth.cells[" + std::to_string(a) + "]");
                if (v.size() != 4)
                    io_detail::fail("truth.cells[" + std::to_string(a) + "]", "need 4 cells");
                cfg.cells.push_back({v[0], v[1], v[2], v[3]});
            }
            break;
        }
        case DesignFamily::Biomarker: {
            io_detail::check_keys(truth,
                                  {"B", "K", "targets", "prevalences", "pi", "lambda",
                                   "control_rate", "positive_rates", "negative_rates"},
                                  "truth");
            cfg.biomarker.n_biomarkers = truth.at("B").get<int>();
            cfg.biomarker.n_experimental = truth.at("K").get<int>();
            cfg.biomarker.targets = truth.at("targets").get<std::vector<int>>();
            for (size_t i = 0; i < cfg.biomarker.targets.size(); ++i)
                if (cfg.biomarker.targets[i] < 1 ||
                    cfg.biomarker.targets[i] > cfg.biomarker.n_biomarkers)
                    io_detail::fail("truth.targets[" + std::to_string(i) + "]",
                                    "target biomarker out of range");
            cfg.biomarker.prevalences =
                io_detail::get_prob_vector(truth.at("prevalences"), "truth.prevalences");
            cfg.biomarker.pi = io_detail::get_prob(truth.at("pi"), "truth.pi");
            cfg.biomarker.lambda = io_detail::get_prob(truth.at("lambda"), "truth.lambda");
            cfg.bm_control_rate =
                io_detail::get_prob(truth.at("control_rate"), "truth.control_rate");
            cfg.bm_positive_rate =
                io_detail::get_prob_vector(truth.at("positive_rates"), "truth.positive_rates");
            cfg.bm_negative_rate =
                io_detail::get_prob_vector(truth.at("negative_rates"), "truth.negative_rates");
            break;
        }
    }
    if (j.contains("prior")) {
        io_detail::check_keys(j["prior"], {"v1", "v2"}, "prior");
        cfg.prior_v1 = j["prior"].value("v1", 1.0);
        cfg.prior_v2 = j["prior"].value("v2", 1.0);
    }
    if (j.contains("T")) cfg.T = j["T"].get<int64_t>();
    if (j.contains("replications")) cfg.replications = j["replications"].get<int64_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
    if (j.contains("metric")) cfg.metric = metric_from_json(j["metric"]);
    if (j.contains("policy")) cfg.policy = policy_from_json(j["policy"]);
    if (j.contains("analysis")) {
        io_detail::check_keys(j["analysis"], {"test", "level", "bootstrap_B"}, "analysis");
        cfg.analysis.test = j["analysis"].value("test", std::string("fisher"));
        if (cfg.analysis.test != "fisher" && cfg.analysis.test != "bootstrap" &&
            cfg.analysis.test != "none")
            io_detail::fail("analysis.test", "unknown test kind");
        cfg.analysis.level = j["analysis"].value("level", 0.05);
        cfg.analysis.bootstrap_B = j["analysis"].value("bootstrap_B", int64_t{2000});
    }
    if (j.contains("joint")) {
        io_detail::check_keys(j["joint"], {"draws", "mode"}, "joint");
        cfg.joint_draws = j["joint"].value("draws", int64_t{4096});
        cfg.joint_mode = j["joint"].value("mode", std::string("crn"));
        if (cfg.joint_mode != "crn" && cfg.joint_mode != "frozen")
            io_detail::fail("joint.mode", "must be 'crn' or 'frozen'");
    }
    cfg.validate();
    return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw config_error(path + ": malformed JSON: " + e.what());
    }
    return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline std::string report_csv(const OCReport& rep) {
    std::ostringstream os;
    os << "design,scenario,arm,ess,sd,rejection_rate,p_best,mse_e3,mse_pm_e3\n";
    os.precision(10);
    for (size_t a = 0; a < rep.arms.size(); ++a) {
        const auto& arm = rep.arms[a];
        os << rep.design << ',' << rep.scenario << ',' << a << ',' << arm.ess << ',' << arm.sd
           << ',' << arm.rejection_rate << ',' << arm.p_selected << ',' << arm.mse_raw_e3 << ','
           << arm.mse_pm_e3 << '\n';
    }
    return os.str();
}

inline std::string biomarker_csv(const OCReport& rep, const BiomarkerConfig& bm) {
    std::ostringstream os;
    os << "design,scenario,arm,biomarker,stratum_ess,stratum_sd,power_pos,power_neg\n";
    os.precision(10);
    const int A = bm.n_arms();
    for (int a = 0; a < A; ++a)
        for (int l = 0; l < bm.n_biomarkers; ++l) {
            os << rep.design << ',' << rep.scenario << ',' << a << ',' << (l + 1) << ','
               << rep.stratum_ess[static_cast<size_t>(l) * A + a] << ','
               << rep.stratum_sd[static_cast<size_t>(l) * A + a] << ',';
            if (a >= 1 && !rep.bm_power_pos.empty()) {
                os << rep.bm_power_pos[a - 1] << ',' << rep.bm_power_neg[a - 1];
            } else {
                os << ",";
            }
            os << '\n';
        }
    return os.str();
}

inline json report_to_json(const OCReport& rep) {
    json arms = json::array();
    for (size_t a = 0; a < rep.arms.size(); ++a)
        arms.push_back(json{{"arm", a},
                            {"ess", rep.arms[a].ess},
                            {"sd", rep.arms[a].sd},
                            {"rejection_rate", rep.arms[a].rejection_rate},
                            {"p_best", rep.arms[a].p_selected},
                            {"mse_e3", rep.arms[a].mse_raw_e3},
                            {"mse_pm_e3", rep.arms[a].mse_pm_e3}});
    json out{{"design", rep.design},
             {"scenario", rep.scenario},
             {"T", rep.T},
             {"replications", rep.replications},
             {"seed", rep.seed},
             {"arms", arms},
             {"util_mean", rep.util_mean},
             {"util_median", rep.util_median},
             {"util_raw_mean", rep.util_raw_mean}};
    if (!rep.bm_power_pos.empty()) {
        out["bm_power_pos"] = rep.bm_power_pos;
        out["bm_power_neg"] = rep.bm_power_neg;
    }
    if (!rep.stratum_ess.empty()) {
        out["stratum_ess"] = rep.stratum_ess;
        out["stratum_sd"] = rep.stratum_sd;
    }
    if (!rep.cop_power_both.empty()) {
        out["cop_power_e1"] = rep.cop_power_e1;
        out["cop_power_e2"] = rep.cop_power_e2;
        out["cop_power_both"] = rep.cop_power_both;
    }
    if (!rep.cop_mse1_pm_e3.empty()) {
        out["cop_mse1_pm_e3"] = rep.cop_mse1_pm_e3;
        out["cop_mse2_pm_e3"] = rep.cop_mse2_pm_e3;
        out["cop_mse1_raw_e3"] = rep.cop_mse1_raw_e3;
        out["cop_mse2_raw_e3"] = rep.cop_mse2_raw_e3;
    }
    if (rep.best_mse_e3 > 0.0) out["best_mse_e3"] = rep.best_mse_e3;
    return out;
}

inline std::string regret_csv(const std::vector<RegretPoint>& pts) {
    std::ostringstream os;
    os << "T,design,regret,oracle_utility,design_utility\n";
    os.precision(10);
    for (const auto& p : pts)
        os << p.T << ',' << p.design << ',' << p.regret << ',' << p.oracle_utility << ','
           << p.design_utility << '\n';
    return os.str();
}

// FNV-1a over the canonical (sorted-key) serialization
inline std::string config_hash(const json& j) {
    std::string s = j.dump();
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

inline json manifest_for(const ScenarioConfig& cfg) {
    json cj = scenario_to_json(cfg);
    return json{{"config", cj},
                {"config_hash", config_hash(cj)},
                {"seed", cfg.seed},
                {"code_version", "bud 1.0.0"}};
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw error("cannot write file: " + path);
    out << content;
}

}  // namespace bud
