#include "portsolve/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace portsolve {

std::string format_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Signal& x) {
    out << "t,v\n";
    const double dt = x.dt();
    for (Index k = 0; k < x.size(); ++k)
        out << format_double(k * dt) << ',' << format_double(x.samples[k]) << '\n';
}

void write_csv_file(const std::string& path, const Signal& x) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    write_csv(out, x);
}

Signal read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty csv input");
    // tolerate a UTF-8 BOM and trailing CR
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,v") throw ValidationError("csv header must be exactly 't,v'");

    std::vector<double> ts, vs;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ValidationError("csv row without comma: '" + line + "'");
        try {
            ts.push_back(std::stod(line.substr(0, comma)));
            vs.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw ValidationError("csv row is not two numbers: '" + line + "'");
        }
    }
    const auto n = static_cast<Index>(vs.size());
    if (n < 2) throw ValidationError("csv needs at least 2 samples");
    if (ts.front() != 0.0) throw ValidationError("csv t column must start at 0");
    const double dt = ts[1] - ts[0];
    if (!(dt > 0.0)) throw ValidationError("csv t column must be ascending");
    for (Index k = 1; k < n; ++k)
        if (std::fabs(ts[size_t(k)] - k * dt) > 1e-9 * (1.0 + std::fabs(ts[size_t(k)])))
            throw ValidationError("csv t column is not uniformly spaced");
    ArrayXd samples(n);
    for (Index k = 0; k < n; ++k) {
        if (!std::isfinite(vs[size_t(k)]))
            throw ValidationError("csv contains a non-finite sample");
        samples[k] = vs[size_t(k)];
    }
    return {std::move(samples), dt * double(n)};
}

Signal read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "' for reading");
    return read_csv(in);
}

}  // namespace portsolve
