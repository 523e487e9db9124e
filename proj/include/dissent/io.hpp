#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dissent/multilevel_rates.hpp"

namespace dissent {

// Shortest representation that parses back to the same double.
std::string fmt_double(double v);
// Throws UsageError on anything that is not a complete number.
double parse_double(std::string_view s);

// Metadata block for CSV outputs: one "# " line holding a compact JSON object.
void write_meta_comment(std::ostream& os, const nlohmann::json& meta);
nlohmann::json make_meta(const std::string& command, const nlohmann::json& params,
                         unsigned long long seed);

// time_ms,n44,n43,nh,N2,P2,Jx
void write_population_csv(std::ostream& os, const PopulationSeries& series);

}  // namespace dissent
