#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "condbm/flows.hpp"
#include "condbm/sde.hpp"

namespace condbm {

inline constexpr const char* kVersion = "1.0.0";

// Shortest decimal that round-trips a double exactly ("%.17g").
std::string fmt17(double v);

// CSV row writers for the three trajectory schemas. Headers are written by
// the caller once; rows are ordered by id then time.
inline constexpr const char* kPathCsvHeader = "path_id,t,value,weight";
inline constexpr const char* kPairCsvHeader = "path_id,t,alpha,beta";
inline constexpr const char* kSystemCsvHeader = "particle_id,t,position,survivor_id";

void write_path_rows(std::ostream& os, const PathRealization& path,
                     std::size_t path_id);
void write_pair_rows(std::ostream& os, const BoundaryPair& pair, std::size_t path_id);
void write_system_rows(std::ostream& os, const ParticleSystem& system);

// Numeric CSV reader for the round-trip contract: header line plus rows of
// decimal fields. Throws std::invalid_argument on ragged or non-numeric
// input.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};
CsvTable read_csv(std::istream& is);

} // namespace condbm
