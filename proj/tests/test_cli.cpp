#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "portsolve/csv.hpp"
#include "portsolve/manifest.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBin = PORTSOLVE_BIN;

struct RunOutcome {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

RunOutcome run(const std::string& args, const fs::path& dir,
               const std::string& env = "") {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = "cd " + dir.string() + " && " + env + " " + kBin + " " + args +
                            " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    RunOutcome r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::path("cli_scratch") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

const char* kFig1 =
    "space N=8 T=1\n"
    "solver alpha=0.3 eps=1e-9 maxiter=100000\n"
    "element m1: gain 1\n"
    "element m2: gain 1\n"
    "element m3: gain 1\n"
    "tree series(m1, parallel(m2, m3))\n"
    "drive const 3\n";

}  // namespace

TEST_CASE("solve: three-element netlist produces the scalar-oracle answer") {
    const fs::path dir = fresh_dir("solve_ok");
    write_file(dir / "fig1.msn", kFig1);
    const RunOutcome r = run("solve fig1.msn", dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("converged=true") == 0);
    CHECK(r.out.find("iters=") != std::string::npos);
    CHECK(r.out.find("residual=") != std::string::npos);

    const auto solution = portsolve::read_csv_file((dir / "fig1_out.csv").string());
    CHECK(solution.samples[0] == doctest::Approx(2.0).epsilon(1e-6));

    const auto manifest =
        portsolve::read_manifest((dir / "fig1_manifest.json").string());
    CHECK(manifest.solver == "nested");
    CHECK(manifest.converged);
    CHECK(manifest.outputs.size() == 2);
    CHECK(fs::exists(dir / "fig1_residuals.csv"));
}

TEST_CASE("solve: identical runs produce byte-identical outputs") {
    const fs::path dir1 = fresh_dir("det_a");
    const fs::path dir2 = fresh_dir("det_b");
    for (const auto& dir : {dir1, dir2}) {
        write_file(dir / "fig1.msn", kFig1);
        const RunOutcome r = run("solve fig1.msn", dir);
        REQUIRE(r.exit_code == 0);
    }
    CHECK(slurp(dir1 / "fig1_out.csv") == slurp(dir2 / "fig1_out.csv"));
    CHECK(slurp(dir1 / "fig1_residuals.csv") == slurp(dir2 / "fig1_residuals.csv"));
}

TEST_CASE("solve: parse failures exit 1 with a positioned diagnostic") {
    const fs::path dir = fresh_dir("solve_parse");
    write_file(dir / "bad.msn",
               "space N=8 T=1\nsolver alpha=0.3 eps=1e-9 maxiter=100\n"
               "element m1: gain 1\ntree series(m1, ghost)\ndrive zero\n");
    const RunOutcome r = run("solve bad.msn", dir);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("ghost") != std::string::npos);
    CHECK(r.err.find("line 4") != std::string::npos);
}

TEST_CASE("solve: divergent and exhausted configurations map to exits 2 and 3") {
    const char* stiff_template =
        "space N=8 T=1\n"
        "solver alpha=0.5 eps=1e-12 maxiter=%s\n"
        "element weak: gain 1\n"
        "element stiff: gain 10\n"
        "tree series(weak, stiff)\n"
        "drive const 1\n";

    const fs::path dir2 = fresh_dir("solve_diverge");
    char netlist[512];
    std::snprintf(netlist, sizeof(netlist), stiff_template, "5000");
    write_file(dir2 / "stiff.msn", netlist);
    CHECK(run("solve stiff.msn", dir2).exit_code == 2);

    const fs::path dir3 = fresh_dir("solve_maxiter");
    std::snprintf(netlist, sizeof(netlist), stiff_template, "40");
    write_file(dir3 / "stiff.msn", netlist);
    const RunOutcome r = run("solve stiff.msn", dir3);
    CHECK(r.exit_code == 3);
    CHECK(r.out.find("converged=false") == 0);
}

TEST_CASE("vdp: reduced-size run writes csv and a reproducible manifest") {
    const fs::path dir = fresh_dir("vdp_small");
    const std::string args = "vdp --mu 1.5 --steps 500 --maxiter 40000";
    const RunOutcome r = run(args, dir, "PORTSOLVE_THREADS=1");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("mu=1.5") != std::string::npos);
    CHECK(r.out.find("converged=true") != std::string::npos);

    const auto wave = portsolve::read_csv_file((dir / "vdp_1.5.csv").string());
    CHECK(wave.size() == 500);
    const double peak = wave.samples.abs().maxCoeff();
    CHECK(peak >= 1.8);  // coarser grid: amplitude within 2.0 +- 0.2
    CHECK(peak <= 2.2);

    const auto manifest = portsolve::read_manifest((dir / "vdp_1.5_manifest.json").string());
    CHECK(manifest.solver == "mmdr");
    CHECK(manifest.eps == 0.01);
    CHECK(manifest.alphas == std::vector<double>{0.05});

    // same flags, parallel sweep allowed: byte-identical waveform
    const fs::path dir_b = fresh_dir("vdp_small_b");
    const RunOutcome rb = run(args, dir_b, "PORTSOLVE_THREADS=3");
    REQUIRE(rb.exit_code == 0);
    CHECK(slurp(dir / "vdp_1.5.csv") == slurp(dir_b / "vdp_1.5.csv"));
}

TEST_CASE("vdp: flag validation failures exit 1") {
    const fs::path dir = fresh_dir("vdp_flags");
    CHECK(run("vdp --eps -1", dir).exit_code == 1);
    CHECK(run("vdp --mu 1.5 --period 7.1 --period 8.0", dir).exit_code == 1);
}

TEST_CASE("shipped netlists solve and audit clean") {
    const fs::path dir = fresh_dir("shipped");
    const fs::path src = PORTSOLVE_NETLIST_DIR;

    fs::copy_file(src / "three_element.msn", dir / "three_element.msn");
    const RunOutcome three = run("solve three_element.msn", dir);
    CHECK(three.exit_code == 0);
    const auto sol = portsolve::read_csv_file((dir / "three_element_out.csv").string());
    CHECK(sol.samples[0] == doctest::Approx(2.0).epsilon(1e-6));

    fs::copy_file(src / "saturating_ladder.msn", dir / "saturating_ladder.msn");
    CHECK(run("solve saturating_ladder.msn", dir).exit_code == 0);

    fs::copy_file(src / "vdp.msn", dir / "vdp.msn");
    CHECK(run("solve vdp.msn --init sin:2", dir).exit_code == 0);
    CHECK(run("check vdp.msn --trials 32", dir).exit_code == 0);
}

TEST_CASE("check: audits element declarations against their slots") {
    const fs::path dir = fresh_dir("check_ok");
    write_file(dir / "gains.msn", kFig1);
    const RunOutcome ok = run("check gains.msn --trials 64", dir);
    CHECK(ok.exit_code == 0);
    CHECK(ok.out.find("element m1:") != std::string::npos);
    CHECK(ok.out.find("violation") == std::string::npos);

    write_file(dir / "lying.msn",
               "space N=16 T=1\nsolver alpha=0.1 eps=1e-6 maxiter=100\n"
               "element g1: gain 1\n"
               "element nb: neg g1\n"
               "tree series(g1, nb)\n"
               "drive zero\n");
    const RunOutcome bad = run("check lying.msn --trials 64", dir);
    CHECK(bad.exit_code == 4);
    CHECK(bad.out.find("violation-found") != std::string::npos);

    write_file(dir / "vdp.msn",
               "space N=256 T=6.283185307179586\nsolver alpha=0.05 eps=0.01 maxiter=100\n"
               "element a1: tf num=1,0,1 den=1,0\n"
               "element a2: cubic 1.5\n"
               "element b: gain 1.5\n"
               "mixed a1=a1 a2=a2 b=b\n"
               "drive zero\n");
    const RunOutcome vdp = run("check vdp.msn --trials 64", dir);
    CHECK(vdp.exit_code == 0);
}
