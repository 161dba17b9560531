#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace levelsmith {

enum class TileKind {
    Solid,
    Empty,
    Treasure,
    Ground,
    Breakable,
    Question,
    PipeTopLeft,
    PipeTopRight,
    PipeLeft,
    PipeRight,
    Start,
    End,
};

enum class Game { Cave, Mario };

struct GridError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownGlyph : GridError {
    int row, col;
    UnknownGlyph(int r, int c, char g)
        : GridError("unknown glyph '" + std::string(1, g) + "' at row " + std::to_string(r) +
                    ", col " + std::to_string(c)),
          row(r), col(c) {}
};
struct RaggedRows : GridError {
    RaggedRows() : GridError("all rows must have the same length") {}
};
struct EmptyInput : GridError {
    EmptyInput() : GridError("level text is empty") {}
};
struct IndexOutOfRange : GridError {
    using GridError::GridError;
};
struct ChannelMismatch : GridError {
    using GridError::GridError;
};

/// Ordered tile alphabet of a game. Index order follows the declaration
/// order of the symbols list and fixes the one-hot channel layout.
struct TileSet {
    std::string game_name;
    std::vector<std::pair<TileKind, char>> symbols;
    char start_glyph = '{';
    char end_glyph = '}';

    int size() const { return static_cast<int>(symbols.size()); }
    char glyph(int index) const { return symbols.at(index).second; }
    TileKind kind(int index) const { return symbols.at(index).first; }
    int index_of(char glyph) const;  // -1 when absent
    int start_index() const { return index_of(start_glyph); }
    int end_index() const { return index_of(end_glyph); }

    static const TileSet& cave();
    static const TileSet& mario();
    static const TileSet& for_game(Game game);
};

/// Rectangular level segment; cells are indices into a TileSet.
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> cells;  // row-major, rows*cols entries

    Grid() = default;
    Grid(int r, int c, std::uint8_t fill = 0)
        : rows(r), cols(c), cells(static_cast<std::size_t>(r) * c, fill) {}

    std::uint8_t at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
    void set(int r, int c, std::uint8_t v) { cells[static_cast<std::size_t>(r) * cols + c] = v; }
    bool in_bounds(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
    bool operator==(const Grid&) const = default;
};

/// channels x rows x cols dense encoding of a grid (or of generator output).
struct OneHot {
    int channels = 0;
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // channel-major: [c][r][col]

    double at(int ch, int r, int c) const {
        return values[(static_cast<std::size_t>(ch) * rows + r) * cols + c];
    }
    double& at(int ch, int r, int c) {
        return values[(static_cast<std::size_t>(ch) * rows + r) * cols + c];
    }
};

struct ValidationReport {
    int start_count = 0;
    int end_count = 0;
    bool structurally_valid = false;
};

Grid parse_level(const std::string& text, const TileSet& tileset);
std::string render_level(const Grid& grid, const TileSet& tileset);
OneHot encode_onehot(const Grid& grid, const TileSet& tileset);
Grid decode_onehot(const OneHot& t, const TileSet& tileset);
ValidationReport validate_grid(const Grid& grid, const TileSet& tileset);

}  // namespace levelsmith
