#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace baryflow {

// 17 significant digits, so the text reads back to the same double.
std::string format_double(double v);

/// One objective evaluation: B_hat is the barycenter term, V the weighted
/// potential (and, for mixtures, internal) energies, U the weighted interaction
/// energy and F = B_hat + V + U.
struct TraceRecord {
    int iter = 0;
    double B_hat = 0;
    double V = 0;
    double U = 0;
    double F = 0;
    double wall_ms = 0;
    // mixture flows only
    double mean_norm = std::numeric_limits<double>::quiet_NaN();
    double chol_norm = std::numeric_limits<double>::quiet_NaN();
};

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace, bool with_norms = false);
void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace, bool with_norms = false);

std::vector<double> b_hat_series(const std::vector<TraceRecord>& trace);

} // namespace baryflow
