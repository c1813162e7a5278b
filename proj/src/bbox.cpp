#include "ccswap/bbox.hpp"

#include <sstream>
#include <vector>

#include "ccswap/error.hpp"

namespace ccswap {

void BBox::validate() const {
    if (!valid()) throw ShapeError("invalid bbox " + str());
}

std::string BBox::str() const {
    std::ostringstream os;
    os << "BBox(" << row_min << "," << col_min << "," << row_max << "," << col_max << ")@" << grid.height << "x"
       << grid.width;
    return os.str();
}

void to_json(nlohmann::json& j, const BBox& b) {
    j = nlohmann::json{{"row_min", b.row_min},
                       {"col_min", b.col_min},
                       {"row_max", b.row_max},
                       {"col_max", b.col_max},
                       {"grid", {b.grid.height, b.grid.width}}};
}

void from_json(const nlohmann::json& j, BBox& b) {
    try {
        b.row_min = j.at("row_min").get<int>();
        b.col_min = j.at("col_min").get<int>();
        b.row_max = j.at("row_max").get<int>();
        b.col_max = j.at("col_max").get<int>();
        const auto& g = j.at("grid");
        if (!g.is_array() || g.size() != 2) throw ShapeError("bbox grid must be [h, w]");
        b.grid = GridSize{g[0].get<int>(), g[1].get<int>()};
    } catch (const nlohmann::json::exception& e) {
        throw ShapeError(std::string("malformed bbox json: ") + e.what());
    }
    b.validate();
}

BBox parse_bbox(const std::string& text, GridSize grid) {
    std::vector<int> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stoi(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ParamError("bbox component '" + item + "' is not an integer");
        }
    }
    if (parts.size() != 4) throw ParamError("bbox needs 4 comma-separated integers, got '" + text + "'");
    BBox b{parts[0], parts[1], parts[2], parts[3], grid};
    b.validate();
    return b;
}

}  // namespace ccswap
