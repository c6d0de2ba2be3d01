#pragma once

#include "vortlab/transport.hpp"

#include <string>
#include <utility>
#include <vector>

namespace vortlab {

/// Ordered key=value summary; one line per entry.
using Summary = std::vector<std::pair<std::string, std::string>>;

/// Write a run directory: manifest.txt, fields/omega_NNNNN.{csv,f64} at the
/// snapshot levels (the grid writers of the domain module), circulations.csv and budgets/ledger.csv. Throws IoError.
void write_record(const RunRecord& rec, const std::string& dir);

void write_summary(const Summary& s, const std::string& path);

/// Create the directory and its parents; IoError on failure.
void make_dirs(const std::string& dir);

std::string format_double(double x);

} // namespace vortlab
