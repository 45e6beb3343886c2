#include "vulninstruct/jsonl.hpp"

#include "vulninstruct/errors.hpp"
#include "vulninstruct/util.hpp"

#include <fstream>

namespace vulninstruct {

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    std::vector<nlohmann::json> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto row = nlohmann::json::parse(line, nullptr, false);
        if (row.is_discarded())
            throw Error(path.string() + ":" + std::to_string(line_no) + ": invalid JSON");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string to_jsonl(const std::vector<nlohmann::json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += json_line(r);
        out.push_back('\n');
    }
    return out;
}

} // namespace vulninstruct
