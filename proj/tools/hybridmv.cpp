#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "hybridmv/backtest.hpp"
#include "hybridmv/config.hpp"
#include "hybridmv/experiments.hpp"
#include "hybridmv/solution_io.hpp"
#include "hybridmv/stochastic_markets.hpp"

namespace fs = std::filesystem;
using namespace hybridmv;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInfeasible = 2, kSolver = 3, kMismatch = 4, kResolution = 5 };

struct MismatchError : Error {
    using Error::Error;
};

struct Options {
    std::string config;
    std::string solution;
    std::string out;
    int threads = 1;
    long long seed = -1;
};

fs::path output_dir(const config::ExperimentConfig& c, const Options& o) {
    fs::path dir = o.out.empty() ? fs::path(c.output_dir) : fs::path(o.out);
    if (o.out.empty() && dir.is_relative())
        if (const char* root = std::getenv("HYBRIDMV_OUTPUT_ROOT")) dir = fs::path(root) / dir;
    fs::create_directories(dir);
    return dir;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + p.string());
    return f;
}

std::string g(double v) {
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

std::string spectrum_label(const Spectrum& s) {
    switch (s.kind()) {
        case SpectrumKind::exponential: return "exponential k_e=" + g(s.param());
        case SpectrumKind::power: return "power k_p=" + g(s.param());
        default: return to_string(s.kind()) + " gamma=" + g(s.param());
    }
}

ScenarioSet load_scenarios(const config::ProblemSection& p, const MarketModel& m) {
    double rf = std::exp(m.integrated_rate(0.0, m.horizon()));
    if (!p.scenarios.csv.empty()) {
        std::ifstream in(p.scenarios.csv);
        if (!in) throw ConfigError("cannot open scenario file " + p.scenarios.csv);
        return read_scenarios_csv(in, rf);
    }
    return model_scenarios(m, p.scenarios.generate, p.scenarios.seed, p.scenarios.steps);
}

StaticProblem static_problem(const config::ProblemSection& p, const MarketModel& m) {
    ScenarioSet sc = load_scenarios(p, m);
    return {sc, sc.covariance(), sc.mean(), p.x0, p.x_d, p.omega};
}

// --- solve --------------------------------------------------------------------------------

SolutionRecord solve_problem(const config::ExperimentConfig& c, std::ostream& log) {
    const auto& p = *c.problem;
    MarketModel m = c.market->build();
    SolutionRecord rec;
    rec.set("model", config::to_string(p.model));
    rec.set("x0", p.x0);
    rec.set("x_d", p.x_d);
    rec.set("omega", p.omega);
    log << "model " << config::to_string(p.model) << "  x0=" << g(p.x0) << "  x_d=" << g(p.x_d)
        << "  omega=" << g(p.omega);
    if (p.spectrum) log << "  spectrum " << spectrum_label(*p.spectrum);
    if (p.model == config::ModelKind::vrmv || p.model == config::ModelKind::static_vrmv) log << "  gamma=" << g(p.gamma);
    log << '\n';

    switch (p.model) {
        case config::ModelKind::mv: {
            auto s = solve_mv(p.x0, p.x_d, m);
            rec.set("rho", s.rho);
            rec.set("eta", s.eta);
            log << "rho* = " << g(s.rho) << "\neta* = " << g(s.eta) << '\n';
            break;
        }
        case config::ModelKind::srmv: {
            SrmvProblem sp{p.x0, p.x_d, p.omega, *p.spectrum, m};
            auto s = solve_multipliers(sp);
            rec.set("rho", s.rho);
            rec.set("eta", s.eta);
            rec.set("s_dag", s.s_dag);
            rec.set("z_dag", s.z_dag);
            rec.set("objective", s.objective);
            rec.set("residual_budget", s.residual_budget);
            rec.set("residual_target", s.residual_target);
            log << "rho* = " << g(s.rho) << "\neta* = " << g(s.eta) << "\ns_dag = " << g(s.s_dag)
                << "\nz_dag = " << g(s.z_dag) << "\nresidual budget = " << s.residual_budget
                << "\nresidual target = " << s.residual_target << '\n';
            break;
        }
        case config::ModelKind::vrmv: {
            VrmvProblem vp{p.x0, p.x_d, p.omega, p.gamma, m};
            auto s = solve(vp);
            rec.set("gamma", p.gamma);
            for (auto [k, v] : {std::pair{"rho", s.rho}, {"eta", s.eta}, {"beta", s.beta}, {"c1", s.c1},
                                {"c2", s.c2}, {"xi", s.xi}, {"residual_budget", s.residual_budget},
                                {"residual_target", s.residual_target}})
                rec.set(k, v);
            rec.set("regime", to_string(s.regime));
            log << "rho* = " << g(s.rho) << "\neta* = " << g(s.eta) << "\nbeta* = " << g(s.beta) << "\nc1 = " << g(s.c1)
                << "\nc2 = " << g(s.c2) << "\nxi = " << g(s.xi) << "\nregime = " << to_string(s.regime)
                << "\nresidual budget = " << s.residual_budget << "\nresidual target = " << s.residual_target << '\n';
            break;
        }
        case config::ModelKind::static_srmv:
        case config::ModelKind::static_vrmv: {
            StaticProblem sp = static_problem(p, m);
            StaticSolution s = p.model == config::ModelKind::static_srmv
                                   ? solve_static_srmv(sp, discretize(*p.spectrum, sp.scenarios.N()))
                                   : solve_static_vrmv(sp, p.gamma, p.mode);
            if (p.model == config::ModelKind::static_vrmv) rec.set("gamma", p.gamma);
            rec.set("assets", static_cast<double>(sp.n()));
            rec.set("scenarios", static_cast<double>(sp.scenarios.N()));
            for (int k = 0; k < sp.n(); ++k) rec.set("u" + std::to_string(k + 1), s.u[k]);
            rec.set("u_f", s.u_f);
            rec.set("objective", s.objective);
            rec.set("risk", s.risk_component);
            rec.set("variance", s.variance);
            rec.set("status", to_string(s.status));
            Vec w = sp.scenarios.wealth(s.u, s.u_f);
            double budget = s.u.sum() + s.u_f - p.x0;
            double target = sp.ER.dot(s.u) + sp.scenarios.r_free * s.u_f - p.x_d;
            rec.set("residual_budget", budget);
            rec.set("residual_target", target);
            rec.set("min_scenario_wealth", w.minCoeff());
            log << "u* =";
            for (int k = 0; k < sp.n(); ++k) log << ' ' << g(s.u[k]);
            log << "\nu_f* = " << g(s.u_f) << "\nobjective = " << g(s.objective) << "\nrisk = " << g(s.risk_component)
                << "\nstatus = " << to_string(s.status) << "\nresidual budget = " << budget
                << "\nresidual target = " << target << "\nmin scenario wealth = " << g(w.minCoeff()) << '\n';
            break;
        }
    }
    return rec;
}

int cmd_solve(const Options& o) {
    auto c = config::load(o.config);
    if (!c.problem) throw ConfigError("solve: config has no problem section");
    fs::path dir = output_dir(c, o);
    SolutionRecord rec = solve_problem(c, std::cout);
    auto f = open_out(dir / "solution.txt");
    rec.write(f);
    std::cout << "wrote " << (dir / "solution.txt").string() << '\n';
    return kOk;
}

// --- simulate -----------------------------------------------------------------------------

void require_match(const SolutionRecord& rec, const config::ProblemSection& p) {
    if (rec.text("model") != config::to_string(p.model))
        throw MismatchError("solution is for model '" + rec.text("model") + "' but the config asks for '" +
                            config::to_string(p.model) + "'");
    for (auto [k, v] : {std::pair{"x0", p.x0}, {"x_d", p.x_d}, {"omega", p.omega}})
        if (rec.number(k) != v) throw MismatchError(std::string("solution and config disagree on ") + k);
    if ((p.model == config::ModelKind::vrmv || p.model == config::ModelKind::static_vrmv) &&
        rec.number("gamma") != p.gamma)
        throw MismatchError("solution and config disagree on gamma");
}

int cmd_simulate(const Options& o) {
    auto c = config::load(o.config);
    if (!c.problem) throw ConfigError("simulate: config has no problem section");
    if (!c.simulation) throw ConfigError("simulate: config has no simulation section");
    fs::path dir = output_dir(c, o);
    fs::path sol = o.solution.empty() ? dir / "solution.txt" : fs::path(o.solution);
    std::ifstream in(sol);
    if (!in) throw ConfigError("cannot open solution file " + sol.string());
    SolutionRecord rec = SolutionRecord::read(in);
    const auto& p = *c.problem;
    require_match(rec, p);

    auto sim = *c.simulation;
    if (o.seed >= 0) sim.sim.seed = static_cast<std::uint64_t>(o.seed);
    sim.sim.threads = o.threads;
    MarketModel m = c.market->build();
    RolloutOptions ro;
    ro.mode = sim.mode;

    PathEnsemble ens;
    switch (p.model) {
        case config::ModelKind::mv: {
            MvSolution mv{rec.number("rho"), rec.number("eta")};
            ens = rollout_dynamic(mv_dynamic_policy(mv, m), m, p.x0, sim.sim, ro);
            break;
        }
        case config::ModelKind::srmv: {
            SrmvProblem sp{p.x0, p.x_d, p.omega, *p.spectrum, m};
            SrmvSolution s;
            s.rho = rec.number("rho");
            s.eta = rec.number("eta");
            s.s_dag = rec.number("s_dag");
            s.z_dag = rec.number("z_dag");
            ens = rollout_dynamic(srmv_dynamic_policy(SrmvStrategy(s, sp)), m, p.x0, sim.sim, ro);
            break;
        }
        case config::ModelKind::vrmv: {
            VrmvProblem vp{p.x0, p.x_d, p.omega, p.gamma, m};
            VrmvSolution s;
            s.rho = rec.number("rho");
            s.eta = rec.number("eta");
            s.beta = rec.number("beta");
            s.c1 = rec.number("c1");
            s.c2 = rec.number("c2");
            s.xi = rec.number("xi");
            ens = rollout_dynamic(vrmv_dynamic_policy(VrmvStrategy(s, vp)), m, p.x0, sim.sim, ro);
            break;
        }
        case config::ModelKind::static_srmv:
        case config::ModelKind::static_vrmv: {
            int n = static_cast<int>(rec.number("assets"));
            if (n != m.n()) throw MismatchError("solution asset count differs from the market");
            StaticSolution s;
            s.u.resize(n);
            for (int k = 0; k < n; ++k) s.u[k] = rec.number("u" + std::to_string(k + 1));
            s.u_f = rec.number("u_f");
            ens = rollout_static(s, simulate_paths(m, sim.sim));
            break;
        }
    }

    auto f1 = open_out(dir / "ensemble.csv");
    write_ensemble_csv(f1, ens);
    auto f2 = open_out(dir / "metrics.csv");
    MetricsReport mr = compute_metrics(ens, p.x0, m, sim.sortino);
    write_metrics_csv(f2, {{config::to_string(p.model), mr}});
    auto f3 = open_out(dir / "pdf.csv");
    write_histogram_csv(f3, empirical_pdf(ens.terminal_wealth, sim.bins));
    if (!ens.trajectories.empty()) {
        auto f4 = open_out(dir / "trajectories.csv");
        write_trajectories_csv(f4, ens);
    }
    std::cout << "paths " << ens.paths() << "  steps " << sim.sim.steps << "  seed " << sim.sim.seed << '\n';
    std::cout << "mean terminal wealth " << g(mr.mean) << "\n";
    auto names = MetricsReport::columns();
    auto vals = mr.values();
    for (std::size_t i = 0; i < names.size(); ++i) std::cout << names[i] << ' ' << fmt_num(vals[i]) << '\n';
    std::cout << "wrote ensemble.csv metrics.csv pdf.csv to " << dir.string() << '\n';
    return kOk;
}

// --- pde ----------------------------------------------------------------------------------

TerminalWealth pde_terminal(const config::ExperimentConfig& c, const MarketModel& ref, double& x0_out) {
    const auto& pde = *c.pde;
    if (pde.terminal == config::PdeSection::Terminal::constant) return constant_terminal(pde.constant);
    if (!c.problem) throw ConfigError("pde: terminal 'problem' needs a problem section");
    const auto& p = *c.problem;
    x0_out = p.x0;
    switch (p.model) {
        case config::ModelKind::mv: {
            SrmvProblem sp{p.x0, p.x_d, 0.0, Spectrum::exponential(1.0), ref};
            return terminal_wealth_of(SrmvStrategy(solve_multipliers(sp), sp));
        }
        case config::ModelKind::srmv: {
            SrmvProblem sp{p.x0, p.x_d, p.omega, *p.spectrum, ref};
            return terminal_wealth_of(SrmvStrategy(solve_multipliers(sp), sp));
        }
        case config::ModelKind::vrmv: {
            VrmvProblem vp{p.x0, p.x_d, p.omega, p.gamma, ref};
            return terminal_wealth_of(VrmvStrategy(solve(vp), vp));
        }
        default: throw ConfigError("pde: terminal wealth must come from a dynamic model (mv, srmv, vrmv)");
    }
}

int cmd_pde(const Options& o) {
    auto c = config::load(o.config);
    if (!c.pde) throw ConfigError("pde: config has no pde section");
    fs::path dir = output_dir(c, o);
    const auto& pde = *c.pde;
    const bool ou = pde.kind == config::PdeSection::Kind::ou;
    MarketModel ref = ou ? bs_reference(pde.ou) : bs_reference(pde.heston);
    double x0 = 1.0;
    TerminalWealth term = pde_terminal(c, ref, x0);
    PdeSolution sol = ou ? solve_pde_ou(pde.ou, term, pde.grid) : solve_pde_heston(pde.heston, term, pde.grid);

    const double r = ou ? pde.ou.r : pde.heston.r, T = ou ? pde.ou.T : pde.heston.T;
    const bool constant = pde.terminal == config::PdeSection::Terminal::constant;
    const bool degenerate = ou ? (pde.ou.lambda == 0.0 && pde.ou.gamma_ou == 0.0)
                               : (pde.heston.xi <= 1e-4 && pde.heston.nu0 == pde.heston.nu_bar);
    std::function<double(double, double)> reference;
    if (constant) {
        reference = [&](double t, double) { return pde.constant * std::exp(-r * (T - t)); };
    } else if (degenerate) {
        const auto& p = *c.problem;
        if (p.model == config::ModelKind::vrmv) {
            VrmvProblem vp{p.x0, p.x_d, p.omega, p.gamma, ref};
            VrmvStrategy st(solve(vp), vp);
            reference = [st](double t, double z) { return st.wealth(t, z); };
        } else {
            SrmvProblem sp{p.x0, p.x_d, p.model == config::ModelKind::mv ? 0.0 : p.omega,
                           p.spectrum ? *p.spectrum : Spectrum::exponential(1.0), ref};
            SrmvStrategy st(solve_multipliers(sp), sp);
            reference = [st](double t, double z) { return st.wealth(t, z); };
        }
    }

    auto lat = open_out(dir / "lattice.csv");
    sol.write_csv(lat, pde.all_layers);
    auto pr = open_out(dir / "probes.csv");
    pr << "t,z," << sol.state_name << ",X,policy" << (reference ? ",reference,rel_error" : "") << '\n';
    double worst = 0.0;
    for (const auto& q : pde.probes) {
        double x = sol.value(q.t, q.z, q.state);
        double u = ou ? policy_ou(sol, pde.ou, q.t, q.z, q.state) : policy_heston(sol, pde.heston, q.t, q.z, q.state);
        pr << fmt_num(q.t) << ',' << fmt_num(q.z) << ',' << fmt_num(q.state) << ',' << fmt_num(x) << ',' << fmt_num(u);
        if (reference) {
            double ref_x = reference(q.t, q.z);
            double err = std::abs(x - ref_x) / std::max(std::abs(ref_x), 1e-12);
            worst = std::max(worst, err);
            pr << ',' << fmt_num(ref_x) << ',' << fmt_num(err);
        }
        pr << '\n';
    }
    std::cout << (ou ? "OU" : "Heston") << " PDE  grid " << sol.nz() << "x" << sol.ns() << "  steps " << sol.steps
              << "  scheme " << sol.scheme << '\n';
    if (reference && !pde.probes.empty()) {
        double tol = constant ? 1e-6 : pde.tolerance;
        std::cout << (constant ? "discount check: " : "reduction check: ") << (worst <= tol ? "PASS" : "FAIL")
                  << "  max rel error " << worst << "  tolerance " << tol << '\n';
    }
    std::cout << "wrote lattice.csv probes.csv to " << dir.string() << '\n';
    return kOk;
}

// --- reproduce-paper ----------------------------------------------------------------------

int cmd_reproduce(const Options& o) {
    auto c = config::load(o.config);
    config::ReproduceSection rp = c.reproduce ? *c.reproduce : config::ReproduceSection{};
    if (o.seed >= 0) rp.seed = static_cast<std::uint64_t>(o.seed);
    fs::path dir = output_dir(c, o);

    // single-asset profiles
    MarketModel one = experiments::one_asset_market();
    auto mv = solve_mv(1.0, 1.2, one);
    SrmvProblem pe{1.0, 1.2, 0.5, Spectrum::exponential(10.0), one};
    SrmvProblem pp{1.0, 1.2, 1.5, Spectrum::power(0.6), one};
    SrmvStrategy se(solve_multipliers(pe), pe), sp(solve_multipliers(pp), pp);
    VrmvProblem v05{1.0, 1.2, 0.8, 0.05, one}, v10{1.0, 1.2, 0.8, 0.10, one};
    VrmvStrategy a05(solve(v05), v05), a10(solve(v10), v10);
    {
        auto f = open_out(dir / "terminal_wealth.csv");
        f << "z_T,mv,srmv_exp,srmv_pow,vrmv_g05,vrmv_g10\n";
        for (int i = 1; i <= 300; ++i) {
            double z = 0.01 * i;
            f << fmt_num(z) << ',' << fmt_num(mv_terminal_wealth(mv, z)) << ',' << fmt_num(se.terminal(z)) << ','
              << fmt_num(sp.terminal(z)) << ',' << fmt_num(a05.terminal(z)) << ',' << fmt_num(a10.terminal(z)) << '\n';
        }
    }
    {
        auto f = open_out(dir / "policy_half_horizon.csv");
        f << "z,mv,srmv_exp,srmv_pow,vrmv_g05,vrmv_g10\n";
        for (int i = 1; i <= 300; ++i) {
            double z = 0.01 * i;
            f << fmt_num(z) << ',' << fmt_num(mv_policy(mv, one, 0.5, z)[0]) << ',' << fmt_num(se.policy(0.5, z)[0])
              << ',' << fmt_num(sp.policy(0.5, z)[0]) << ',' << fmt_num(a05.policy(0.5, z)[0]) << ','
              << fmt_num(a10.policy(0.5, z)[0]) << '\n';
        }
    }
    {
        // one price path with the three allocations along it
        SimConfig cfg;
        cfg.paths = 1;
        cfg.steps = 250;
        cfg.seed = rp.seed;
        cfg.record_paths = 1;
        auto pm = rollout_dynamic(mv_dynamic_policy(mv, one), one, 1.0, cfg, {RolloutMode::closed_form});
        auto ps = rollout_dynamic(srmv_dynamic_policy(se), one, 1.0, cfg, {RolloutMode::closed_form});
        auto pv = rollout_dynamic(vrmv_dynamic_policy(a10), one, 1.0, cfg, {RolloutMode::closed_form});
        const auto& tm = pm.trajectories[0];
        const double th = one.theta(0.0)[0], s = one.sigma(0.0)(0, 0), mu = one.mu(0.0)[0], r = one.rate(0.0);
        auto f = open_out(dir / "path_policies.csv");
        f << "t,S,z,u_mv,u_srmv_exp,u_vrmv\n";
        for (std::size_t k = 0; k + 1 < tm.t.size(); ++k) {
            double t = tm.t[k], z = tm.z[k];
            double lnS = (mu - 0.5 * s * s - r * s / th - 0.5 * th * s) * t - s / th * std::log(z);
            f << fmt_num(t) << ',' << fmt_num(std::exp(lnS)) << ',' << fmt_num(z) << ','
              << fmt_num(tm.allocation[k][0]) << ',' << fmt_num(ps.trajectories[0].allocation[k][0]) << ','
              << fmt_num(pv.trajectories[0].allocation[k][0]) << '\n';
        }
    }

    // performance tables on the three-asset market
    experiments::PerformanceSetup setup;
    setup.x0 = rp.x0;
    setup.omega = rp.omega;
    setup.k_e = rp.k_e;
    setup.k_p = rp.k_p;
    setup.gamma = rp.gamma;
    setup.sim.paths = rp.paths;
    setup.sim.steps = rp.steps;
    setup.sim.seed = rp.seed;
    setup.sim.threads = o.threads;
    setup.mode = rp.mode;
    setup.scenarios = rp.scenarios;
    setup.scenario_seed = rp.scenario_seed;
    setup.sortino = rp.sortino;
    for (double xd : {rp.x_d, rp.x_d + 0.1}) {
        setup.x_d = xd;
        auto rows = experiments::run_performance_table(setup);
        std::vector<std::pair<std::string, MetricsReport>> table;
        for (const auto& r : rows) table.emplace_back(r.name, r.metrics);
        std::string tag = "xd" + g(xd);
        auto f = open_out(dir / ("performance_" + tag + ".csv"));
        write_metrics_csv(f, table);
        for (const auto& r : rows) {
            auto h = open_out(dir / ("pdf_" + tag + "_" + r.name + ".csv"));
            write_histogram_csv(h, empirical_pdf(r.ensemble.terminal_wealth, rp.bins));
        }
        std::cout << "x_d = " << g(xd) << '\n';
        write_metrics_csv(std::cout, table);
    }

    {
        // Sortino and Sharpe of the exponential-spectrum policy across omega
        auto f = open_out(dir / "omega_sweep.csv");
        f << "omega,sharpe,sortino\n";
        setup.x_d = rp.x_d;
        RolloutOptions ro;
        ro.mode = rp.mode;
        for (int i = 0; i <= 10; ++i) {
            double w = 0.1 * i;
            SrmvProblem q{rp.x0, rp.x_d, w, Spectrum::exponential(rp.k_e), setup.market};
            auto ens = rollout_dynamic(srmv_dynamic_policy(SrmvStrategy(solve_multipliers(q), q)), setup.market,
                                       rp.x0, setup.sim, ro);
            auto mr = compute_metrics(ens, rp.x0, setup.market, rp.sortino);
            f << fmt_num(w) << ',' << fmt_num(mr.sharpe) << ',' << fmt_num(mr.sortino) << '\n';
        }
    }
    std::cout << "wrote reproduction files to " << dir.string() << '\n';
    return kOk;
}

int run(const std::string& cmd, const Options& o) {
    try {
        if (cmd == "solve") return cmd_solve(o);
        if (cmd == "simulate") return cmd_simulate(o);
        if (cmd == "pde") return cmd_pde(o);
        if (cmd == "reproduce-paper") return cmd_reproduce(o);
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const ResolutionError& e) {
        std::cerr << "resolution: " << e.what() << '\n';
        return kResolution;
    } catch (const MismatchError& e) {
        std::cerr << "mismatch: " << e.what() << '\n';
        return kMismatch;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolver;
    } catch (const NumericError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolver;
    } catch (const ConsistencyError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybridmv: dynamic and static hybrid mean-variance portfolio models"};
    app.require_subcommand(1);
    Options o;
    std::string which;
    auto add = [&](const char* name, const char* help, bool takes_solution) {
        auto* sc = app.add_subcommand(name, help);
        sc->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sc->add_option("--threads", o.threads, "worker threads for path simulation")->check(CLI::Range(1, 256));
        sc->add_option("--seed", o.seed, "override the simulation seed")->check(CLI::NonNegativeNumber);
        sc->add_option("--out", o.out, "output directory (overrides output.directory)");
        if (takes_solution) sc->add_option("--solution", o.solution, "solution file from 'solve'");
        sc->callback([&which, name] { which = name; });
    };
    add("solve", "solve the configured problem and write solution.txt", false);
    add("simulate", "back-test a solved policy and write ensemble, metrics and pdf CSVs", true);
    add("pde", "solve the wealth PDE in an OU or Heston market", false);
    add("reproduce-paper", "regenerate the profile, policy and performance tables", false);
    CLI11_PARSE(app, argc, argv);
    return run(which, o);
}
