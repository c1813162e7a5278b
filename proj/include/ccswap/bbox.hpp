#pragma once

#include <string>

#include <json.hpp>

namespace ccswap {

struct GridSize {
    int height = 0;
    int width  = 0;
    bool operator==(const GridSize&) const = default;
};

// Inclusive integer rectangle on a (height, width) grid.
struct BBox {
    int row_min = 0;
    int col_min = 0;
    int row_max = 0;
    int col_max = 0;
    GridSize grid{};

    bool operator==(const BBox&) const = default;

    static BBox full(GridSize g) { return BBox{0, 0, g.height - 1, g.width - 1, g}; }

    bool valid() const {
        return grid.height > 0 && grid.width > 0 && 0 <= row_min && row_min <= row_max &&
               row_max < grid.height && 0 <= col_min && col_min <= col_max && col_max < grid.width;
    }
    // Throws ShapeError when the invariants do not hold.
    void validate() const;

    bool contains(int row, int col) const {
        return row >= row_min && row <= row_max && col >= col_min && col <= col_max;
    }
    // Both boxes on the same grid and this one inside `other`.
    bool inside(const BBox& other) const {
        return grid == other.grid && row_min >= other.row_min && col_min >= other.col_min &&
               row_max <= other.row_max && col_max <= other.col_max;
    }
    bool is_full() const { return *this == full(grid); }
    int rows() const { return row_max - row_min + 1; }
    int cols() const { return col_max - col_min + 1; }

    std::string str() const;
};

void to_json(nlohmann::json& j, const BBox& b);
void from_json(const nlohmann::json& j, BBox& b);

// "r0,c0,r1,c1" on the given grid.
BBox parse_bbox(const std::string& text, GridSize grid);

}  // namespace ccswap
