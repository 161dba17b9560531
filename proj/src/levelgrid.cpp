#include "levelsmith/levelgrid.hpp"

#include <sstream>

namespace levelsmith {

int TileSet::index_of(char glyph) const {
    for (int i = 0; i < size(); ++i)
        if (symbols[i].second == glyph) return i;
    return -1;
}

const TileSet& TileSet::cave() {
    static const TileSet ts{
        "cave",
        {{TileKind::Solid, 'X'},
         {TileKind::Empty, '-'},
         {TileKind::Treasure, '2'},
         {TileKind::Start, '{'},
         {TileKind::End, '}'}},
        '{',
        '}',
    };
    return ts;
}

const TileSet& TileSet::mario() {
    static const TileSet ts{
        "mario",
        {{TileKind::Ground, 'X'},
         {TileKind::Breakable, 'S'},
         {TileKind::Empty, '-'},
         {TileKind::Question, 'Q'},
         {TileKind::PipeTopLeft, '<'},
         {TileKind::PipeTopRight, '>'},
         {TileKind::PipeLeft, '['},
         {TileKind::PipeRight, ']'},
         {TileKind::Start, '{'},
         {TileKind::End, '}'}},
        '{',
        '}',
    };
    return ts;
}

const TileSet& TileSet::for_game(Game game) {
    return game == Game::Cave ? cave() : mario();
}

Grid parse_level(const std::string& text, const TileSet& tileset) {
    std::vector<std::string> lines;
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line)) lines.push_back(line);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw EmptyInput{};

    const int rows = static_cast<int>(lines.size());
    const int cols = static_cast<int>(lines[0].size());
    if (cols == 0) throw EmptyInput{};
    Grid grid(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(lines[r].size()) != cols) throw RaggedRows{};
        for (int c = 0; c < cols; ++c) {
            const int idx = tileset.index_of(lines[r][c]);
            if (idx < 0) throw UnknownGlyph(r, c, lines[r][c]);
            grid.set(r, c, static_cast<std::uint8_t>(idx));
        }
    }
    return grid;
}

std::string render_level(const Grid& grid, const TileSet& tileset) {
    std::string out;
    out.reserve(static_cast<std::size_t>(grid.rows) * (grid.cols + 1));
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            const int idx = grid.at(r, c);
            if (idx >= tileset.size())
                throw IndexOutOfRange("tile index " + std::to_string(idx) + " out of range");
            out += tileset.glyph(idx);
        }
        if (r + 1 < grid.rows) out += '\n';
    }
    return out;
}

OneHot encode_onehot(const Grid& grid, const TileSet& tileset) {
    for (std::uint8_t cell : grid.cells)
        if (cell >= tileset.size())
            throw IndexOutOfRange("tile index " + std::to_string(cell) + " out of range");
    OneHot t;
    t.channels = tileset.size();
    t.rows = grid.rows;
    t.cols = grid.cols;
    t.values.assign(static_cast<std::size_t>(t.channels) * t.rows * t.cols, 0.0);
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) t.at(grid.at(r, c), r, c) = 1.0;
    return t;
}

Grid decode_onehot(const OneHot& t, const TileSet& tileset) {
    if (t.channels != tileset.size())
        throw ChannelMismatch("expected " + std::to_string(tileset.size()) + " channels, got " +
                              std::to_string(t.channels));
    Grid grid(t.rows, t.cols);
    for (int r = 0; r < t.rows; ++r) {
        for (int c = 0; c < t.cols; ++c) {
            int best = 0;
            double best_v = t.at(0, r, c);
            for (int ch = 1; ch < t.channels; ++ch) {
                const double v = t.at(ch, r, c);
                if (v > best_v) {  // ties keep the lowest channel index
                    best_v = v;
                    best = ch;
                }
            }
            grid.set(r, c, static_cast<std::uint8_t>(best));
        }
    }
    return grid;
}

ValidationReport validate_grid(const Grid& grid, const TileSet& tileset) {
    ValidationReport rep;
    const int start = tileset.start_index();
    const int end = tileset.end_index();
    for (std::uint8_t cell : grid.cells) {
        if (cell == start) ++rep.start_count;
        if (cell == end) ++rep.end_count;
    }
    rep.structurally_valid = rep.start_count == 1 && rep.end_count == 1;
    return rep;
}

}  // namespace levelsmith
