#pragma once

#include <string>
#include <vector>

namespace portsolve {

/// Machine-readable record of one solver run, written as a JSON sidecar
/// next to every output CSV. Re-running with the recorded configuration
/// reproduces the outputs byte-identically (duration excepted).
struct RunManifest {
    std::string input;   // netlist path or parameter description
    std::string solver;  // forward-backward | douglas-rachford | nested | naive | mmdr
    std::vector<double> alphas;
    double eps = 0.0;
    long max_iter = 0;
    std::string init = "zero";
    std::vector<std::string> outputs;
    long iterations = 0;
    bool converged = false;
    double final_residual = 0.0;
    double fixed_point_residual = 0.0;
    double duration_ms = 0.0;
};

void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);

}  // namespace portsolve
