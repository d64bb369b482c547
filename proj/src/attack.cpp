#include "rdsa/attack.hpp"

#include <cstdio>
#include <fstream>

namespace rdsa {

void write_adversarial_csv(const AttackSetResult& result, const Dataset& source,
                           const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::data, ErrorCode::io_failure, "cannot write " + path.string());
    for (const auto& m : source.meta) out << m.name << ',';
    out << "label,succeeded,attempts_used,original_label,adversarial_label\n";
    char buf[32];
    for (const AttackOutcome& o : result.outcomes) {
        const std::vector<double>& row = o.adversary ? *o.adversary : o.original;
        for (double v : row) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << buf << ',';
        }
        out << o.original_label << ',' << (o.succeeded ? 1 : 0) << ',' << o.attempts_used << ','
            << o.original_label << ',';
        if (o.adversarial_label) out << *o.adversarial_label;
        out << '\n';
    }
}

}  // namespace rdsa
