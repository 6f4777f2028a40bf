#include "portsolve/manifest.hpp"

#include <fstream>

#include "json.hpp"
#include "portsolve/errors.hpp"

namespace portsolve {

using nlohmann::json;

void write_manifest(const std::string& path, const RunManifest& m) {
    json j{{"input", m.input},
           {"solver", m.solver},
           {"config",
            {{"alpha", m.alphas}, {"eps", m.eps}, {"maxiter", m.max_iter}, {"init", m.init}}},
           {"outputs", m.outputs},
           {"iterations", m.iterations},
           {"converged", m.converged},
           {"final_residual", m.final_residual},
           {"fixed_point_residual", m.fixed_point_residual},
           {"duration_ms", m.duration_ms}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "' for reading");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("manifest '" + path + "' is not valid json: " + e.what());
    }
    RunManifest m;
    m.input = j.at("input").get<std::string>();
    m.solver = j.at("solver").get<std::string>();
    m.alphas = j.at("config").at("alpha").get<std::vector<double>>();
    m.eps = j.at("config").at("eps").get<double>();
    m.max_iter = j.at("config").at("maxiter").get<long>();
    m.init = j.at("config").at("init").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.iterations = j.at("iterations").get<long>();
    m.converged = j.at("converged").get<bool>();
    m.final_residual = j.at("final_residual").get<double>();
    m.fixed_point_residual = j.at("fixed_point_residual").get<double>();
    m.duration_ms = j.at("duration_ms").get<double>();
    return m;
}

}  // namespace portsolve
