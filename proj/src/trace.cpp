#include "baryflow/trace.hpp"
#include "baryflow/types.hpp"

#include <charconv>
#include <fstream>

namespace baryflow {

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace, bool with_norms)
{
    os << "iter,B_hat,V,U,F,wall_ms";
    if (with_norms) os << ",mean_norm,chol_norm";
    os << '\n';
    for (const auto& r : trace) {
        os << r.iter << ',' << format_double(r.B_hat) << ',' << format_double(r.V) << ',' << format_double(r.U) << ','
           << format_double(r.F) << ',' << format_double(r.wall_ms);
        if (with_norms) os << ',' << format_double(r.mean_norm) << ',' << format_double(r.chol_norm);
        os << '\n';
    }
}

void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace, bool with_norms)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_trace_csv(os, trace, with_norms);
}

std::vector<double> b_hat_series(const std::vector<TraceRecord>& trace)
{
    std::vector<double> out;
    out.reserve(trace.size());
    for (const auto& r : trace) out.push_back(r.B_hat);
    return out;
}

} // namespace baryflow
