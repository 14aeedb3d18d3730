#include "condbm/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace condbm {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_path_rows(std::ostream& os, const PathRealization& path,
                     std::size_t path_id) {
    for (std::size_t k = 0; k < path.n_times(); ++k) {
        os << path_id << ',' << fmt17(path.time(k)) << ',' << fmt17(path.value(k))
           << ',' << fmt17(path.weight) << '\n';
    }
}

void write_pair_rows(std::ostream& os, const BoundaryPair& pair, std::size_t path_id) {
    for (std::size_t k = 0; k < pair.path.n_times(); ++k) {
        os << path_id << ',' << fmt17(pair.path.time(k)) << ',' << fmt17(pair.alpha(k))
           << ',' << fmt17(pair.beta(k)) << '\n';
    }
}

void write_system_rows(std::ostream& os, const ParticleSystem& system) {
    for (std::size_t i = 0; i < system.n(); ++i) {
        for (std::size_t k = 0; k < system.n_times(); ++k) {
            os << i << ',' << fmt17(system.grid->t[k]) << ',' << fmt17(system.pos(k, i))
               << ',' << system.rep(k, i) << '\n';
        }
    }
}

CsvTable read_csv(std::istream& is) {
    CsvTable table;
    std::string line;
    const auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = s.find(',', start);
            if (comma == std::string::npos) {
                out.push_back(s.substr(start));
                return out;
            }
            out.push_back(s.substr(start, comma - start));
            start = comma + 1;
        }
    };
    if (!std::getline(is, line)) throw std::invalid_argument("read_csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    table.header = split(line);
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line);
        if (fields.size() != table.header.size())
            throw std::invalid_argument("read_csv: ragged row '" + line + "'");
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            char* end = nullptr;
            const double v = std::strtod(f.c_str(), &end);
            if (end != f.c_str() + f.size() || f.empty())
                throw std::invalid_argument("read_csv: non-numeric field '" + f + "'");
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace condbm
