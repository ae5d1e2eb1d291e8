#ifndef QEST_POLICY_STORE_HPP
#define QEST_POLICY_STORE_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "qest/policies.hpp"

namespace qest {

struct PolicyRecord {
    std::string id;
    MachinePolicyParams params;
    std::string origin;  // "builtin" or the file the record was loaded from
};

// Keyed collection of batched-policy parameter vectors. The sixteen shipped
// policies are keyed mach_u_<nR>_<sigma-class> with an optional _re suffix
// for the readout-error variants; trained policies are appended by id.
class PolicyStore {
public:
    static PolicyStore builtin();

    // builtin rows plus (or overridden by) rows from the file, if present
    static PolicyStore load(const std::string& file_path);

    bool contains(const std::string& id) const;
    const PolicyRecord& get(const std::string& id) const;
    const std::vector<PolicyRecord>& records() const { return records_; }

    // replaces an existing id when allow_replace, otherwise duplicate ids throw
    void add(PolicyRecord record, bool allow_replace = false);

    void write_csv(std::ostream& out) const;
    static PolicyStore read_csv(std::istream& in, const std::string& origin);

private:
    std::vector<PolicyRecord> records_;
};

// CSV field order for the store and for trained-policy exports.
inline constexpr const char* kPolicyCsvHeader = "policy_id,a,b,d,f,g_pol,t_max,D_th,C_0";

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

}  // namespace qest

#endif
