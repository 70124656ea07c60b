// ckrf -- numerical laboratory for the regularized conical Kahler-Ricci flow
// on S^1-symmetric P^1 / P^1 x P^1 models.
//
//   ckrf run <scenario>      integrate the eps ladder, emit CSV + JSON report
//   ckrf check               built-in invariant suite on small grids
//   ckrf fit <csv>           blow-up exponent fit on a monitor table
//   ckrf list-scenarios      registry contents
//
// Exit codes: 0 success, 1 invariant/bound failure, 2 configuration error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ckrf/base.hpp"
#include "ckrf/report.hpp"
#include "ckrf/runner.hpp"
#include "ckrf/scenario.hpp"
#include "ckrf/selfcheck.hpp"

namespace {

std::string resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("CKRF_OUT_DIR"); env && *env) return env;
    return "ckrf-out";
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string scenario_hash(const ckrf::Scenario& sc) {
    std::string canon = sc.name;
    for (const auto& f : sc.factors)
        canon += "|" + std::to_string(f.n_nodes) + ":" + (f.has_cone ? "c" : "s") + ":" +
                 ckrf::fmt_g(f.area0) + ":" + ckrf::fmt_g(f.bump);
    canon += "|b" + ckrf::fmt_g(sc.beta) + "|k" + ckrf::fmt_g(sc.k);
    for (double e : sc.eps_ladder) canon += "|e" + ckrf::fmt_g(e);
    canon += "|t" + ckrf::fmt_g(sc.t_stop_frac) + "|c" + ckrf::fmt_g(sc.c_cfl);
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
    return buf;
}

void apply_config_file(ckrf::Scenario& sc, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ckrf::ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw ckrf::ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (j.contains("n"))
        for (auto& f : sc.factors) f.n_nodes = j["n"].get<int>();
    if (j.contains("beta")) sc.beta = j["beta"].get<double>();
    if (j.contains("k")) {
        if (j["k"].is_string() && j["k"] == "auto")
            sc.k = -1.0;
        else
            sc.k = j["k"].get<double>();
    }
    if (j.contains("eps_ladder")) sc.eps_ladder = j["eps_ladder"].get<std::vector<double>>();
    if (j.contains("t_stop_frac")) sc.t_stop_frac = j["t_stop_frac"].get<double>();
    if (j.contains("c_cfl")) sc.c_cfl = j["c_cfl"].get<double>();
    if (j.contains("samples_per_octave")) sc.samples_per_octave = j["samples_per_octave"].get<int>();
}

void write_checkpoint(const std::filesystem::path& dir, const ckrf::ScenarioRun& run,
                      std::size_t rung) {
    const auto& st = run.final_state[rung];
    const std::string stem = "checkpoint_eps" + ckrf::fmt_g(run.series[rung].eps);
    std::ofstream bin(dir / (stem + ".bin"), std::ios::binary);
    bin.write(reinterpret_cast<const char*>(&st.t), sizeof(double));
    for (const auto& arr : {st.phi, st.q})
        for (const auto& v : arr)
            bin.write(reinterpret_cast<const char*>(v.data()),
                      static_cast<std::streamsize>(v.size() * sizeof(double)));
    nlohmann::json side;
    side["schema_version"] = 1;
    side["scenario"] = run.setup.scenario.name;
    side["scenario_hash"] = scenario_hash(run.setup.scenario);
    side["eps"] = run.series[rung].eps;
    side["t"] = st.t;
    side["n_nodes"] = nlohmann::json::array();
    for (const auto& g : run.setup.geom) side["n_nodes"].push_back(g.grid.n);
    side["layout"] = "t, phi per factor, q per factor (float64 little-endian)";
    std::ofstream(dir / (stem + ".json")) << side.dump(2) << "\n";
}

int cmd_run(const std::string& name, int n_override, const std::string& k_flag,
            double beta_flag, std::vector<double> eps_flag, double t_stop_flag,
            const std::string& out_flag, const std::string& config_path, int jobs,
            bool checkpoints) {
    ckrf::Scenario sc = ckrf::make_scenario(name);
    if (!config_path.empty()) apply_config_file(sc, config_path);
    if (n_override > 0)
        for (auto& f : sc.factors) f.n_nodes = n_override;
    if (beta_flag > 0.0) sc.beta = beta_flag;
    if (!k_flag.empty()) {
        if (k_flag == "auto") {
            sc.k = -1.0;
        } else {
            try {
                sc.k = std::stod(k_flag);
            } catch (const std::exception&) {
                throw ckrf::ConfigError("--k expects a number or 'auto'");
            }
        }
    }
    if (!eps_flag.empty()) sc.eps_ladder = eps_flag;
    if (t_stop_flag > 0.0) sc.t_stop_frac = t_stop_flag;

    const ckrf::ScenarioRun run = ckrf::run_scenario(sc, jobs);

    const std::filesystem::path dir =
        std::filesystem::path(resolve_out_dir(out_flag)) / sc.name;
    std::filesystem::create_directories(dir);
    nlohmann::json rep = ckrf::to_json(run.report);
    rep["files"] = nlohmann::json::array();
    for (std::size_t r = 0; r < run.series.size(); ++r) {
        const std::string fname = "monitor_eps" + ckrf::fmt_g(run.series[r].eps) + ".csv";
        std::ofstream os(dir / fname, std::ios::binary);
        ckrf::write_monitor_csv(os, run.setup, run.series[r]);
        rep["files"].push_back(fname);
        if (checkpoints) write_checkpoint(dir, run, r);
    }
    std::ofstream(dir / "report.json") << rep.dump(2) << "\n";

    std::cout << "scenario " << sc.name << ": T = " << ckrf::fmt_g(run.setup.sched.T)
              << ", collapsing factor " << run.setup.sched.collapsing << ", k = "
              << ckrf::fmt_g(run.setup.k) << " (k_max " << ckrf::fmt_g(run.setup.k_max) << ")\n";
    for (std::size_t r = 0; r < run.series.size(); ++r) {
        std::string stop_tag;
        if (run.series[r].truncated)
            stop_tag = " [truncated: " + run.series[r].stop_reason + "]";
        else if (run.series[r].density_stopped)
            stop_tag = " [stopped: " + run.series[r].stop_reason + "]";
        std::cout << "  eps " << ckrf::fmt_g(run.series[r].eps) << ": "
                  << run.series[r].samples.size() << " samples, " << run.series[r].steps
                  << " steps" << stop_tag
                  << ", fit p = " << ckrf::fmt_g(run.report.fits[r].p) << "\n";
    }
    for (const auto& e : run.report.entries) {
        std::cout << "  " << (e.applicable ? (e.pass ? "PASS " : "FAIL ") : "---- ") << e.name;
        if (e.applicable && !e.value.empty())
            std::cout << " = " << ckrf::fmt_g(e.value.back())
                      << " (drift " << ckrf::fmt_g(e.rel_change) << ")";
        if (!e.note.empty()) std::cout << "  [" << e.note << "]";
        std::cout << "\n";
    }
    std::cout << "report: " << (dir / "report.json").string() << "\n";
    std::cout << (run.report.overall_pass ? "PASS" : "FAIL") << " overall\n";
    return run.report.overall_pass ? 0 : 1;
}

int cmd_check(const std::string& filter, bool mutate) {
    const auto results = ckrf::run_self_checks(filter, mutate);
    if (results.empty()) {
        std::cerr << "no self-check matches filter '" << filter << "'\n";
        return 2;
    }
    int failed = 0;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        failed += r.pass ? 0 : 1;
    }
    std::cout << results.size() - failed << "/" << results.size() << " checks passed\n";
    return failed ? 1 : 0;
}

int cmd_fit(const std::string& csv_path, double window_lo, double window_hi, double T_override) {
    std::ifstream is(csv_path);
    if (!is) throw ckrf::FitError("cannot open csv: " + csv_path);
    const ckrf::CsvTable tab = ckrf::parse_monitor_csv(is);
    const double T = T_override > 0.0 ? T_override : tab.T;
    if (!(T > 0.0)) throw ckrf::FitError("csv carries no singular time; pass --T");
    const ckrf::FitResult fr =
        ckrf::fit_blowup_exponent(tab.column("t"), tab.column("sup_R"), T, window_lo, window_hi);
    std::cout << "p = " << ckrf::fmt_g(fr.p) << "\nC = " << ckrf::fmt_g(fr.C) << "\nwindow = ["
              << ckrf::fmt_g(window_hi) << ", " << ckrf::fmt_g(window_lo) << "] (T - t), "
              << fr.n_used << " samples\nrms_loglog = " << ckrf::fmt_g(fr.rms) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regularized conical Kahler-Ricci flow laboratory"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "integrate a scenario's epsilon ladder");
    std::string run_name, run_k, run_out, run_config;
    int run_n = 0, run_jobs = 4;
    double run_beta = 0.0, run_tstop = 0.0;
    std::vector<double> run_eps;
    bool run_ckpt = false;
    run->add_option("scenario", run_name, "registry name (see list-scenarios)")->required();
    run->add_option("--n", run_n, "grid nodes per factor");
    run->add_option("--beta", run_beta, "cone angle parameter in (0,1)");
    run->add_option("--k", run_k, "cone coupling (number or 'auto')");
    run->add_option("--eps", run_eps, "epsilon ladder (>= 3 decreasing rungs)");
    run->add_option("--t-stop", run_tstop, "stop fraction of T in (0,1)");
    run->add_option("--out", run_out, "output directory (overrides CKRF_OUT_DIR)");
    run->add_option("--config", run_config, "JSON config file applied over scenario defaults");
    run->add_option("--jobs", run_jobs, "parallel ladder slots");
    run->add_flag("--checkpoints", run_ckpt, "write final-state binary checkpoints");

    auto* check = app.add_subcommand("check", "run the built-in invariant suite");
    std::string check_filter;
    bool check_mutate = false;
    check->add_option("--filter", check_filter, "run only checks whose name contains this");
    check->add_flag("--mutate-trace-sign", check_mutate,
                    "flip a sign inside the trace identity (must fail)");

    auto* fit = app.add_subcommand("fit", "fit the blow-up exponent from a monitor CSV");
    std::string fit_csv;
    double fit_lo = 0.1, fit_hi = 1e-3, fit_T = 0.0;
    fit->add_option("csv", fit_csv, "monitor table from `ckrf run`")->required();
    fit->add_option("--window-lo", fit_lo, "largest T - t in the fit window");
    fit->add_option("--window-hi", fit_hi, "smallest T - t in the fit window");
    fit->add_option("--T", fit_T, "override the singular time from the CSV header");

    auto* list = app.add_subcommand("list-scenarios", "print the scenario registry");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(run_name, run_n, run_k, run_beta, run_eps, run_tstop, run_out,
                           run_config, run_jobs, run_ckpt);
        if (check->parsed()) return cmd_check(check_filter, check_mutate);
        if (fit->parsed()) return cmd_fit(fit_csv, fit_lo, fit_hi, fit_T);
        if (list->parsed()) {
            for (const auto& n : ckrf::scenario_names()) {
                const ckrf::Scenario sc = ckrf::make_scenario(n);
                std::cout << n << ": " << sc.factors.size() << " factor(s)";
                for (const auto& f : sc.factors)
                    std::cout << " [area " << ckrf::fmt_g(f.area0 / std::numbers::pi) << "*pi"
                              << (f.has_cone ? ", cone" : "") << "]";
                std::cout << "\n";
            }
            return 0;
        }
    } catch (const ckrf::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ckrf::FitError& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
