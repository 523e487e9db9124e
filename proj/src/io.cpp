#include "dissent/io.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "dissent/errors.hpp"

namespace dissent {

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s == "nan") return NAN;
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        throw UsageError("not a number: '" + std::string(s) + "'");
    }
    return v;
}

void write_meta_comment(std::ostream& os, const nlohmann::json& meta) {
    os << "# " << meta.dump() << '\n';
}

nlohmann::json make_meta(const std::string& command, const nlohmann::json& params,
                         unsigned long long seed) {
    return {{"artifact", "dissent"},
            {"version", version()},
            {"command", command},
            {"seed", seed},
            {"params", params}};
}

void write_population_csv(std::ostream& os, const PopulationSeries& series) {
    os << "time_ms,n44,n43,nh,N2,P2,Jx\n";
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const auto& s = series.states[i];
        os << fmt_double(series.times[i]) << ',' << fmt_double(s.n44) << ',' << fmt_double(s.n43)
           << ',' << fmt_double(s.nh) << ',' << fmt_double(s.N2()) << ',' << fmt_double(s.P2())
           << ',' << fmt_double(s.Jx()) << '\n';
    }
}

}  // namespace dissent
