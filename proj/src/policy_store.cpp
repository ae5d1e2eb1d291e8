#include "qest/policy_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qest {

namespace {

// Optimized policy vectors, keyed by (Rabi-cycle count, prior sigma class,
// readout-error flag). t_max is in time units of the run-wide scale.
constexpr const char* kBuiltinPolicies =
    "policy_id,a,b,d,f,g_pol,t_max,D_th,C_0\n"
    "mach_u_2_2,3.92,5.61,0.94,5.04,3.47,9.18,6,190\n"
    "mach_u_2_2_re,1.45,3.52,3.14,6.28,1.38,9.17,5,118\n"
    "mach_u_2_10,1.29,3.53,3.09,4.44,4.9,9.17,9,28\n"
    "mach_u_2_20,1.04,3.41,3.13,5.41,3.18,9.17,8,198\n"
    "mach_u_8_2,2.65,2.21,8.58,4.72,6.16,37.95,3,195\n"
    "mach_u_8_2_re,3.88,2.16,0.73,4.46,1.05,34.93,2,194\n"
    "mach_u_8_10,3.13,0,3.56,3.83,0.91,36.19,8,61\n"
    "mach_u_8_20,3.56,1.39,5.37,5.03,3.21,35.02,3,195\n"
    "mach_u_12_2,8.68,7.37,4.38,4.14,5.34,56.17,5,121\n"
    "mach_u_12_2_re,3.88,6.02,2.71,5.18,4.84,55.42,1,199\n"
    "mach_u_12_10,4.57,0,1.76,4.74,1.48,52.78,7,159\n"
    "mach_u_12_20,3.79,0,2.81,4.57,3.79,58.43,7,76\n"
    "mach_u_20_2,7.49,3.11,1.44,4.96,5.98,94.25,6,129\n"
    "mach_u_20_2_re,7.31,2.83,0,4.73,4.57,86.08,8,199\n"
    "mach_u_20_10,5.38,0,0.84,3.88,0.33,93.62,9,199\n"
    "mach_u_20_20,4.02,0.06,5.87,4.74,0,97.34,6,94\n";

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ','))
        cells.push_back(cell);
    return cells;
}

double parse_double(const std::string& cell) {
    try {
        std::size_t used = 0;
        const double value = std::stod(cell, &used);
        if (used == cell.size())
            return value;
    } catch (const std::exception&) {
    }
    throw std::runtime_error("policy store: bad numeric cell '" + cell + "'");
}

int parse_int(const std::string& cell) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw std::runtime_error("policy store: bad integer cell '" + cell + "'");
    return value;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc())
        throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

PolicyStore PolicyStore::builtin() {
    std::istringstream in(kBuiltinPolicies);
    return read_csv(in, "builtin");
}

PolicyStore PolicyStore::load(const std::string& file_path) {
    PolicyStore store = builtin();
    if (file_path.empty())
        return store;
    std::ifstream in(file_path);
    if (!in)
        return store;  // a store path that does not exist yet is just empty
    PolicyStore extra = read_csv(in, file_path);
    for (const PolicyRecord& rec : extra.records())
        store.add(rec, /*allow_replace=*/true);
    return store;
}

bool PolicyStore::contains(const std::string& id) const {
    return std::any_of(records_.begin(), records_.end(),
                       [&](const PolicyRecord& r) { return r.id == id; });
}

const PolicyRecord& PolicyStore::get(const std::string& id) const {
    for (const PolicyRecord& rec : records_)
        if (rec.id == id)
            return rec;
    throw std::out_of_range("unknown policy id '" + id + "'");
}

void PolicyStore::add(PolicyRecord record, bool allow_replace) {
    for (PolicyRecord& rec : records_) {
        if (rec.id == record.id) {
            if (!allow_replace)
                throw std::invalid_argument("duplicate policy id '" + record.id + "'");
            rec = std::move(record);
            return;
        }
    }
    records_.push_back(std::move(record));
}

void PolicyStore::write_csv(std::ostream& out) const {
    out << kPolicyCsvHeader << '\n';
    for (const PolicyRecord& rec : records_) {
        const MachinePolicyParams& p = rec.params;
        out << rec.id << ',' << format_double(p.a) << ',' << format_double(p.b) << ','
            << format_double(p.d) << ',' << format_double(p.f) << ',' << format_double(p.g_pol)
            << ',' << format_double(p.t_max) << ',' << p.d_th << ',' << p.c0 << '\n';
    }
}

PolicyStore PolicyStore::read_csv(std::istream& in, const std::string& origin) {
    PolicyStore store;
    std::string line;
    if (!std::getline(in, line) || line != kPolicyCsvHeader)
        throw std::runtime_error("policy store: bad or missing header");
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const std::vector<std::string> cells = split_csv_row(line);
        if (cells.size() != 9)
            throw std::runtime_error("policy store: expected 9 cells, got row '" + line + "'");
        PolicyRecord rec;
        rec.id = cells[0];
        rec.params.a = parse_double(cells[1]);
        rec.params.b = parse_double(cells[2]);
        rec.params.d = parse_double(cells[3]);
        rec.params.f = parse_double(cells[4]);
        rec.params.g_pol = parse_double(cells[5]);
        rec.params.t_max = parse_double(cells[6]);
        rec.params.d_th = parse_int(cells[7]);
        rec.params.c0 = parse_int(cells[8]);
        rec.origin = origin;
        store.add(std::move(rec));
    }
    return store;
}

}  // namespace qest
