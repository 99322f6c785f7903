#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "bud/bi_study.hpp"
#include "bud/io.hpp"
#include "bud/sim.hpp"

namespace fs = std::filesystem;
using namespace bud;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    int64_t seed_override = -1;
    int64_t reps_override = -1;
    int workers_override = -1;
    double h_override = -1.0;
};

void apply_overrides(ScenarioConfig& cfg, const CommonOpts& opt) {
    if (opt.seed_override >= 0) cfg.seed = static_cast<uint64_t>(opt.seed_override);
    if (opt.reps_override > 0) cfg.replications = opt.reps_override;
    if (opt.workers_override > 0) cfg.workers = opt.workers_override;
    if (opt.h_override >= 0.0) {
        cfg.policy.h.type = ExponentSchedule::Type::Constant;
        cfg.policy.h.value = opt.h_override;
    }
}

std::vector<int64_t> parse_int_list(const std::string& s) {
    std::vector<int64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoll(item));
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

PolicyKind parse_policy_name(const std::string& s) {
    for (PolicyKind k : {PolicyKind::BUD, PolicyKind::Myopic, PolicyKind::BR,
                         PolicyKind::BAR_Trippa, PolicyKind::BAR2_Thall, PolicyKind::ThompsonBest,
                         PolicyKind::RPW, PolicyKind::DBCD_Neyman, PolicyKind::DBCD_SqrtRate,
                         PolicyKind::OracleFixed})
        if (s == policy_kind_name(k)) return k;
    throw config_error("unknown policy name: " + s);
}

int cmd_validate(const CommonOpts& opt) {
    try {
        ScenarioConfig cfg = load_scenario(opt.config_path);
        std::cout << "valid: " << cfg.name << " (" << family_name(cfg.family) << ", T=" << cfg.T
                  << ", reps=" << cfg.replications << ")\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return 1;
    }
}

int cmd_simulate(const CommonOpts& opt) {
    ScenarioConfig cfg = load_scenario(opt.config_path);
    apply_overrides(cfg, opt);
    fs::create_directories(opt.out_dir);
    OCReport rep = run_batch(cfg);

    write_file(opt.out_dir + "/report.csv", report_csv(rep));
    write_file(opt.out_dir + "/report.json", report_to_json(rep).dump(2) + "\n");
    if (cfg.family == DesignFamily::Biomarker)
        write_file(opt.out_dir + "/subgroups.csv", biomarker_csv(rep, cfg.biomarker));
    write_file(opt.out_dir + "/manifest.json", manifest_for(cfg).dump(2) + "\n");

    std::cout << report_csv(rep);
    return 0;
}

int cmd_regret(const CommonOpts& opt, const std::string& t_list, const std::string& policies) {
    ScenarioConfig cfg = load_scenario(opt.config_path);
    apply_overrides(cfg, opt);
    std::vector<PolicySpec> specs;
    std::stringstream ss(policies);
    std::string item;
    while (std::getline(ss, item, ',')) {
        PolicySpec p = cfg.policy;
        p.kind = parse_policy_name(item);
        specs.push_back(p);
    }
    auto pts = regret_curve(cfg, parse_int_list(t_list), specs);
    fs::create_directories(opt.out_dir);
    write_file(opt.out_dir + "/regret.csv", regret_csv(pts));
    std::cout << regret_csv(pts);
    return 0;
}

int cmd_oracle(const CommonOpts& opt, int64_t T) {
    ScenarioConfig cfg = load_scenario(opt.config_path);
    require(cfg.family == DesignFamily::MultiArmControlled,
            "oracle: controlled binary scenarios only");
    auto res = oracle_allocation_variance_sum(cfg.theta, T > 0 ? T : cfg.T, cfg.prior_v1,
                                              cfg.prior_v2);
    std::cout << "oracle quotas:";
    for (auto q : res.quotas) std::cout << ' ' << q;
    std::cout << "\nexpected utility: " << res.expected_utility << "\n";
    return 0;
}

int cmd_limits(const std::string& variances, double h, int64_t T) {
    auto vars = parse_double_list(variances);
    std::vector<double> sigmas;
    for (double v : vars) sigmas.push_back(std::sqrt(v));
    auto rho = asymptotic_limit(sigmas, h);
    std::cout << "rho:";
    for (double r : rho) std::cout << ' ' << r;
    std::cout << "\n";
    if (T > 0) {
        std::cout << "T*rho:";
        for (double r : rho) std::cout << ' ' << r * static_cast<double>(T);
        std::cout << "\n";
    }
    return 0;
}

int cmd_bi(const CommonOpts& opt, const std::string& family, int arms, int64_t T, int64_t sims,
           int64_t draws, double h, double w, double beta_exp, const std::string& policies,
           int grid_points) {
    int threads = opt.workers_override > 0 ? opt.workers_override : 2;
    uint64_t seed = opt.seed_override >= 0 ? static_cast<uint64_t>(opt.seed_override) : 20240101;
    fs::create_directories(opt.out_dir);
    std::ostringstream csv;
    csv << "T,design,expected_u,root_u,regret\n";
    csv.precision(10);

    BiOptions opts;
    opts.threads = threads;
    if (family == "best-arm") {
        SharedEntropyMemo memo(grid_points);
        SharedProbBestMemo pbest(grid_points);
        double root = bi_root_best_arm(arms, static_cast<int>(T), memo, opts);
        std::cout << "BI root value at T=" << T << ": " << root << "\n";
        std::stringstream ss(policies);
        std::string item;
        while (std::getline(ss, item, ',')) {
            PolicyKind kind = parse_policy_name(item);
            double eu = simulate_best_arm_expected_u(arms, static_cast<int>(T), kind, h, sims,
                                                     seed, threads, memo, pbest);
            csv << T << ',' << item << ',' << eu << ',' << root << ',' << regret(root, eu) << '\n';
            std::cout << item << ": E[u]=" << eu << " regret=" << regret(root, eu) << "\n";
        }
    } else if (family == "co-primary") {
        FrozenPairJointEval joint(draws);
        joint.precompute(static_cast<int>(T), threads);
        double root = bi_root_coprimary(arms, static_cast<int>(T), w, beta_exp, joint, opts);
        std::cout << "BI root value at T=" << T << ": " << root << "\n";
        std::stringstream ss(policies);
        std::string item;
        while (std::getline(ss, item, ',')) {
            PolicyKind kind = parse_policy_name(item);
            double eu = simulate_coprimary_expected_u(arms, static_cast<int>(T), kind, h, w,
                                                      beta_exp, sims, seed, threads, joint);
            double shortfall = root != 0.0 ? 100.0 * (root - eu) / std::abs(root) : 0.0;
            csv << T << ',' << item << ',' << eu << ',' << root << ',' << regret(root, eu) << '\n';
            std::cout << item << ": E[u]=" << eu << " shortfall=" << shortfall << "%\n";
        }
    } else {
        throw config_error("bi: family must be best-arm or co-primary");
    }
    write_file(opt.out_dir + "/bi.csv", csv.str());
    return 0;
}

int cmd_presets(const std::string& dir) {
    if (!fs::exists(dir)) {
        std::cerr << "preset directory not found: " << dir << "\n";
        return 1;
    }
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".json") names.push_back(entry.path().string());
    std::sort(names.begin(), names.end());
    for (const auto& n : names) std::cout << n << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BUD adaptive-trial simulation engine"};
    app.set_help_flag("--help", "print help");  // frees -h / --h for the exponent
    app.require_subcommand(1);
    CommonOpts opt;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        sub->set_help_flag("--help", "print help");
        if (needs_config)
            sub->add_option("--config", opt.config_path, "scenario JSON")->required();
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--seed", opt.seed_override, "master seed override");
        sub->add_option("--reps", opt.reps_override, "replication override");
        sub->add_option("--workers", opt.workers_override, "worker threads (or BUD_WORKERS)");
        sub->add_option("--h", opt.h_override, "constant BUD exponent override");
    };

    auto* validate = app.add_subcommand("validate", "schema-check a scenario config");
    add_common(validate, true);

    auto* simulate = app.add_subcommand("simulate", "run a scenario batch");
    add_common(simulate, true);

    auto* regret_cmd = app.add_subcommand("regret", "oracle regret curve");
    add_common(regret_cmd, true);
    std::string t_list = "20,60,100,150,200";
    std::string policies = "BUD,BR";
    regret_cmd->add_option("--t-list", t_list, "comma-separated horizons");
    regret_cmd->add_option("--policies", policies, "comma-separated designs");

    auto* oracle_cmd = app.add_subcommand("oracle", "fixed-allocation oracle");
    add_common(oracle_cmd, true);
    int64_t oracle_T = 0;
    oracle_cmd->add_option("--T", oracle_T, "horizon (default: config T)");

    auto* limits = app.add_subcommand("limits", "asymptotic allocation limit");
    limits->set_help_flag("--help", "print help");
    std::string variances = "2,2,1.5,0.5";
    double limits_h = 3.0;
    int64_t limits_T = 0;
    limits->add_option("--variances", variances, "comma-separated outcome variances");
    limits->add_option("--h", limits_h, "BUD exponent");
    limits->add_option("--T", limits_T, "scale the limit to a sample size");

    auto* bi = app.add_subcommand("bi", "backward-induction comparison");
    add_common(bi, false);
    std::string bi_family = "best-arm";
    int bi_arms = 4;
    int64_t bi_T = 10, bi_sims = 100000, bi_draws = 16384;
    double bi_h = 3.0, bi_w = 5.0, bi_beta = 6.0;
    std::string bi_policies = "BUD,BAR-thompson,BR,RPW";
    int bi_grid = 1025;
    bi->add_option("--family", bi_family, "best-arm | co-primary");
    bi->add_option("--arms", bi_arms, "arms (best-arm) or experimental arms (co-primary)");
    bi->add_option("--T", bi_T, "horizon");
    bi->add_option("--sims", bi_sims, "policy simulations");
    bi->add_option("--draws", bi_draws, "joint-probability MC draws per pair");
    bi->add_option("--exponent", bi_h, "BUD exponent (h)");
    bi->add_option("--w", bi_w, "composite weight");
    bi->add_option("--beta", bi_beta, "asymmetric-entropy exponent");
    bi->add_option("--policies", bi_policies, "comma-separated designs");
    bi->add_option("--grid", bi_grid, "entropy grid points");

    auto* presets = app.add_subcommand("presets", "list checked-in scenario presets");
    presets->set_help_flag("--help", "print help");
    std::string preset_dir = "presets";
    presets->add_option("--dir", preset_dir, "preset directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(opt);
        if (simulate->parsed()) return cmd_simulate(opt);
        if (regret_cmd->parsed()) return cmd_regret(opt, t_list, policies);
        if (oracle_cmd->parsed()) return cmd_oracle(opt, oracle_T);
        if (limits->parsed()) return cmd_limits(variances, limits_h, limits_T);
        if (bi->parsed())
            return cmd_bi(opt, bi_family, bi_arms, bi_T, bi_sims, bi_draws, bi_h, bi_w, bi_beta,
                          bi_policies, bi_grid);
        if (presets->parsed()) return cmd_presets(preset_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
