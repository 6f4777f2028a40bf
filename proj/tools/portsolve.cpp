#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "portsolve/csv.hpp"
#include "portsolve/manifest.hpp"
#include "portsolve/netlist.hpp"
#include "portsolve/vdp.hpp"

namespace ps = portsolve;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;     // parse / validation / io problems
constexpr int kExitDiverged = 2;  // NonFinite iterates
constexpr int kExitNotConverged = 3;
constexpr int kExitViolation = 4;  // monotonicity audit failure

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start)
            .count();
    }
};

// mu values in file names and summaries use positional decimals
// (vdp_0.0002.csv, not vdp_2e-04.csv)
std::string format_mu(double mu) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10f", mu);
    std::string s = buf;
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s.empty() || s == "0" || s == "-0") return ps::format_double(mu);
    return s;
}

void write_residuals_csv(const std::string& path, const std::vector<double>& residuals) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ps::ValidationError("cannot open '" + path + "' for writing");
    out << "iter,residual\n";
    for (std::size_t i = 0; i < residuals.size(); ++i)
        out << (i + 1) << ',' << ps::format_double(residuals[i]) << '\n';
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ps::ValidationError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

ps::InitPolicy parse_init(const std::string& text) {
    if (text == "zero") return ps::InitZero{};
    if (text.rfind("const:", 0) == 0)
        return ps::InitConstant{std::stod(text.substr(6))};
    if (text.rfind("sin:", 0) == 0) {
        const std::string rest = text.substr(4);
        const auto colon = rest.find(':');
        ps::InitSinusoid s;
        s.amplitude = std::stod(rest.substr(0, colon));
        if (colon != std::string::npos) s.harmonic = std::stoi(rest.substr(colon + 1));
        return s;
    }
    throw ps::ValidationError("bad --init value '" + text +
                              "' (use zero, const:<v> or sin:<amp>[:harmonic])");
}

std::string init_label(const ps::InitPolicy& init) {
    return std::visit(
        [](const auto& p) -> std::string {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ps::InitZero>) return "zero";
            if constexpr (std::is_same_v<P, ps::InitConstant>)
                return "const:" + ps::format_double(p.value);
            if constexpr (std::is_same_v<P, ps::InitSinusoid>)
                return "sin:" + ps::format_double(p.amplitude) + ":" +
                       std::to_string(p.harmonic);
            if constexpr (std::is_same_v<P, ps::Signal>) return "user";
        },
        init);
}

int run_solve(const std::string& netlist_path, bool naive, const std::string& out_dir,
              const std::optional<std::string>& init_text) {
    ps::netlist::NetlistDocument doc;
    try {
        doc = ps::netlist::parse(read_file(netlist_path));
    } catch (const ps::netlist::NetlistError& e) {
        std::cerr << netlist_path << ": " << e.what() << "\n";
        return kExitInput;
    }

    const std::string base_dir = fs::path(netlist_path).parent_path().string();
    ps::netlist::Lowered lowered =
        ps::netlist::lower(doc, base_dir.empty() ? "." : base_dir);

    const std::string stem = (fs::path(out_dir) / fs::path(netlist_path).stem()).string();
    ps::RunManifest manifest;
    manifest.input = netlist_path;

    Timer timer;
    ps::SolveResult result;
    ps::SolverConfig cfg;
    if (auto* tree = std::get_if<ps::netlist::LoweredTree>(&lowered)) {
        cfg = tree->config;
        if (init_text) cfg.init = parse_init(*init_text);
        manifest.solver = naive ? "naive" : "nested";
        result = naive ? ps::solve_naive(tree->tree, tree->drive, cfg)
                       : ps::solve_nested(tree->tree, tree->drive, cfg);
    } else {
        auto& mixed = std::get<ps::netlist::LoweredMixed>(lowered);
        cfg = mixed.config;
        if (init_text) cfg.init = parse_init(*init_text);
        manifest.solver = "mmdr";
        const ps::Signal x1 = cfg.make_initial(mixed.problem.drive.size(),
                                               mixed.problem.drive.period_T);
        result = ps::mmdr(mixed.problem, x1, cfg);
    }

    const std::string out_csv = stem + "_out.csv";
    const std::string res_csv = stem + "_residuals.csv";
    ps::write_csv_file(out_csv, result.solution);
    write_residuals_csv(res_csv, result.residuals);

    manifest.alphas = cfg.level_alphas.empty() ? std::vector<double>{cfg.alpha}
                                               : cfg.level_alphas;
    manifest.eps = cfg.epsilon;
    manifest.max_iter = cfg.max_iter;
    manifest.init = init_label(cfg.init);
    manifest.outputs = {out_csv, res_csv};
    manifest.iterations = result.iterations;
    manifest.converged = result.converged;
    manifest.final_residual = result.residuals.empty() ? 0.0 : result.residuals.back();
    manifest.fixed_point_residual = result.fixed_point_residual;
    manifest.duration_ms = timer.ms();
    ps::write_manifest(stem + "_manifest.json", manifest);

    std::cout << "converged=" << (result.converged ? "true" : "false")
              << " iters=" << result.iterations
              << " residual=" << ps::format_double(manifest.final_residual) << "\n";
    return result.converged ? kExitOk : kExitNotConverged;
}

struct VdpTask {
    double mu = 0.0;
    ps::VdpParams params;
    ps::SolverConfig cfg;
    bool scan = false;

    bool ok = false;
    bool trivial = false;
    bool diverged = false;
    std::string error;
    ps::SolveResult result;
    double used_period = 0.0;
};

void run_vdp_task(VdpTask& task, const std::string& out_dir) {
    Timer timer;
    try {
        if (task.scan) {
            auto [best, result] = ps::vdp_scan_period(task.params, task.cfg);
            task.params = best;
            task.result = std::move(result);
        } else {
            task.result = ps::vdp_solve(task.params, task.cfg);
        }
        task.used_period = task.params.period_T;
        task.trivial = task.result.trivial_fixed_point;
        task.ok = task.result.converged && !task.trivial;
    } catch (const ps::NonFinite& e) {
        task.diverged = true;
        task.error = e.what();
        return;
    } catch (const ps::Error& e) {
        task.error = e.what();
        return;
    }

    const std::string stem =
        (fs::path(out_dir) / ("vdp_" + format_mu(task.mu))).string();
    const std::string out_csv = stem + ".csv";
    ps::write_csv_file(out_csv, task.result.solution);

    ps::RunManifest manifest;
    manifest.input = "vdp mu=" + format_mu(task.mu) +
                     " period=" + ps::format_double(task.used_period) +
                     " steps=" + std::to_string(task.params.n_samples);
    manifest.solver = "mmdr";
    manifest.alphas = {task.cfg.alpha};
    manifest.eps = task.cfg.epsilon;
    manifest.max_iter = task.cfg.max_iter;
    manifest.init = "sin:" + ps::format_double(task.params.amplitude_init) + ":1";
    manifest.outputs = {out_csv};
    manifest.iterations = task.result.iterations;
    manifest.converged = task.result.converged;
    manifest.final_residual =
        task.result.residuals.empty() ? 0.0 : task.result.residuals.back();
    manifest.fixed_point_residual = task.result.fixed_point_residual;
    manifest.duration_ms = timer.ms();
    ps::write_manifest(stem + "_manifest.json", manifest);
}

int run_vdp(std::vector<double> mus, double alpha, double eps, long steps,
            std::vector<double> periods, bool scan, const std::string& out_dir,
            long max_iter, bool gnuplot) {
    if (!periods.empty() && periods.size() != mus.size())
        throw ps::ValidationError("--period count must match --mu count");

    std::vector<VdpTask> tasks(mus.size());
    for (std::size_t i = 0; i < mus.size(); ++i) {
        tasks[i].mu = mus[i];
        tasks[i].params.mu = mus[i];
        tasks[i].params.n_samples = static_cast<ps::Index>(steps);
        tasks[i].params.period_T =
            periods.empty() ? ps::vdp_default_period(mus[i]) : periods[i];
        tasks[i].cfg.alpha = alpha;
        tasks[i].cfg.epsilon = eps;
        tasks[i].cfg.max_iter = max_iter;
        tasks[i].scan = scan;
    }

    std::size_t n_threads = tasks.size();
    if (const char* env = std::getenv("PORTSOLVE_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n_threads = std::min<std::size_t>(n_threads, std::size_t(cap));
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
            run_vdp_task(tasks[i], out_dir);
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    int exit_code = kExitOk;
    for (const VdpTask& task : tasks) {
        if (!task.error.empty()) {
            std::cerr << "mu=" << format_mu(task.mu) << ": " << task.error << "\n";
            exit_code = std::max(exit_code, task.diverged ? kExitDiverged : kExitInput);
            continue;
        }
        const double peak = task.result.solution.samples.abs().maxCoeff();
        std::cout << "mu=" << format_mu(task.mu) << " converged="
                  << (task.result.converged ? "true" : "false")
                  << " iters=" << task.result.iterations << " residual="
                  << ps::format_double(task.result.residuals.empty()
                                           ? 0.0
                                           : task.result.residuals.back())
                  << " period=" << ps::format_double(task.used_period)
                  << " peak=" << ps::format_double(peak) << "\n";
        if (task.trivial) {
            std::cerr << "mu=" << format_mu(task.mu)
                      << ": converged to the zero equilibrium (trivial fixed point); "
                         "check the period and initialization\n";
            exit_code = std::max(exit_code, kExitNotConverged);
        } else if (!task.result.converged) {
            exit_code = std::max(exit_code, kExitNotConverged);
        }
    }

    if (gnuplot) {
        const std::string path = (fs::path(out_dir) / "vdp_plot.gp").string();
        std::ofstream out(path, std::ios::binary);
        out << "set datafile separator ','\n"
            << "set xlabel 'Time t'\nset ylabel 'Voltage v'\nset key top right\nplot \\\n";
        for (std::size_t i = 0; i < tasks.size(); ++i)
            out << "  'vdp_" << format_mu(tasks[i].mu)
                << ".csv' using 1:2 with lines title 'mu=" << format_mu(tasks[i].mu)
                << (i + 1 < tasks.size() ? "', \\\n" : "'\n");
    }
    return exit_code;
}

int run_check(const std::string& netlist_path, long trials) {
    ps::netlist::NetlistDocument doc;
    try {
        doc = ps::netlist::parse(read_file(netlist_path));
    } catch (const ps::netlist::NetlistError& e) {
        std::cerr << netlist_path << ": " << e.what() << "\n";
        return kExitInput;
    }

    // Names used in positions that require a monotone relation: every tree
    // leaf, and the mixed a1/a2/b slots (b is entered positively).
    std::vector<std::string> monotone_slots;
    if (const auto* tree = std::get_if<ps::netlist::TreeExprPtr>(&doc.topology)) {
        const std::function<void(const ps::netlist::TreeExpr&)> collect =
            [&](const ps::netlist::TreeExpr& e) {
                if (e.op == ps::netlist::TreeExpr::Op::kName)
                    monotone_slots.push_back(e.name);
                for (const auto& c : e.children) collect(*c);
            };
        collect(**tree);
    } else {
        const auto& m = std::get<ps::netlist::MixedTopology>(doc.topology);
        monotone_slots = {m.a1, m.a2, m.b};
    }
    const auto required_monotone = [&](const std::string& name) {
        return std::find(monotone_slots.begin(), monotone_slots.end(), name) !=
               monotone_slots.end();
    };

    const auto n = static_cast<ps::Index>(std::max<long>(doc.n_samples, 16));
    const double T = doc.period_T > 0.0 ? doc.period_T : 1.0;
    const int harmonics = static_cast<int>(std::min<ps::Index>(8, (n - 1) / 2));
    const ps::SignalSampler sampler = ps::band_limited_sampler(n, T, harmonics);

    int exit_code = kExitOk;
    for (const auto& [name, op] : ps::netlist::lower_elements(doc)) {
        const bool expect_monotone = required_monotone(name) || op.declared_monotone();
        const ps::OperatorSpec audited =
            expect_monotone ? op : ps::OperatorSpec::negated(op);
        const ps::MonotonicityReport report =
            ps::check_monotone(audited, sampler, trials);
        const bool pass = report.consistent();
        std::cout << "element " << name << ": expected="
                  << (expect_monotone ? "monotone" : "anti-monotone")
                  << " verdict=" << (pass ? "monotone-consistent" : "violation-found")
                  << " min_pairing=" << ps::format_double(report.min_pairing)
                  << " pairs=" << report.tested_pairs
                  << " inconclusive=" << report.inconclusive_pairs << "\n";
        if (!pass) exit_code = kExitViolation;
    }
    return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady-state port behavior of one-port circuits and mixed-feedback "
                 "oscillators via monotone operator splitting"};
    app.require_subcommand(1);

    std::string netlist_path;
    std::string out_dir = ".";
    bool naive = false;
    std::optional<std::string> init_text;
    auto* solve = app.add_subcommand("solve", "Parse a netlist and run its solver");
    solve->add_option("netlist", netlist_path, "netlist (.msn) path")->required();
    solve->add_flag("--naive", naive, "use the naive double-loop solver for trees");
    solve->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
    solve->add_option("--init", init_text,
                      "initial iterate: zero, const:<v>, sin:<amp>[:harmonic]");

    std::vector<double> mus{0.0002, 1.5, 10.0};
    double alpha = 0.05, eps = 0.01;
    long steps = 5000, vdp_max_iter = 100000;
    std::vector<double> periods;
    bool scan = false, gnuplot = false;
    std::string vdp_out_dir = ".";
    auto* vdp = app.add_subcommand("vdp", "Van der Pol steady-state demo sweep");
    vdp->add_option("--mu", mus, "damping parameters")->capture_default_str();
    vdp->add_option("--alpha", alpha, "step size")->check(CLI::PositiveNumber)
        ->capture_default_str();
    vdp->add_option("--eps", eps, "convergence tolerance")->check(CLI::PositiveNumber)
        ->capture_default_str();
    vdp->add_option("--steps", steps, "samples per period")->check(CLI::Range(2l, 100000000l))
        ->capture_default_str();
    vdp->add_option("--period", periods,
                    "cycle period per mu (default: measured limit-cycle period)");
    vdp->add_flag("--scan-period", scan,
                  "refine the period by minimizing the fixed-point residual");
    vdp->add_option("--maxiter", vdp_max_iter, "iteration cap")->check(CLI::PositiveNumber)
        ->capture_default_str();
    vdp->add_option("--out-dir", vdp_out_dir, "output directory")->capture_default_str();
    vdp->add_flag("--gnuplot", gnuplot, "also write a gnuplot script");

    std::string check_path;
    long trials = 200;
    auto* check = app.add_subcommand("check", "Monotonicity audit of netlist elements");
    check->add_option("netlist", check_path, "netlist (.msn) path")->required();
    check->add_option("--trials", trials, "sampled pairs per element")
        ->check(CLI::PositiveNumber)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (solve->parsed()) return run_solve(netlist_path, naive, out_dir, init_text);
        if (vdp->parsed())
            return run_vdp(mus, alpha, eps, steps, periods, scan, vdp_out_dir,
                           vdp_max_iter, gnuplot);
        return run_check(check_path, trials);
    } catch (const ps::NonFinite& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const ps::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
}
