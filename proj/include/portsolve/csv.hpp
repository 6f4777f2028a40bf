#pragma once

#include <iosfwd>
#include <string>

#include "portsolve/signal.hpp"

namespace portsolve {

/// Writes the `t,v` CSV form of a signal: header line, one row per sample,
/// t ascending from 0 with step dt. Numbers use shortest round-trip form,
/// so output is byte-deterministic.
void write_csv(std::ostream& out, const Signal& x);
void write_csv_file(const std::string& path, const Signal& x);

/// Reads a `t,v` CSV back into a signal. The period is recovered as
/// n * dt from the (validated, uniform) t column.
Signal read_csv(std::istream& in);
Signal read_csv_file(const std::string& path);

/// Shortest decimal form of x that parses back to exactly x.
std::string format_double(double x);

}  // namespace portsolve
