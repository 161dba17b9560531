#include "levelsmith/reachability.hpp"

#include <algorithm>
#include <deque>

namespace levelsmith {

bool MoveModel::passable(TileKind kind) const {
    if (game == Game::Cave) return kind != TileKind::Solid;
    switch (kind) {
        case TileKind::Empty:
        case TileKind::Start:
        case TileKind::End:
            return true;
        default:
            return false;
    }
}

namespace {

struct Walker {
    const Grid& grid;
    const TileSet& tileset;
    const MoveModel& model;

    bool passable_at(int r, int c) const {
        return grid.in_bounds(r, c) && model.passable(tileset.kind(grid.at(r, c)));
    }

    // A cell is supported when it rests on the bottom boundary or on an
    // impassable tile. Start and end markers never require support.
    bool supported(int r, int c) const {
        if (r + 1 >= grid.rows) return true;
        return !model.passable(tileset.kind(grid.at(r + 1, c)));
    }

    template <typename Visit>
    void neighbors(int r, int c, Visit&& visit) const {
        if (model.game == Game::Cave) {
            // Fixed expansion order: up, down, left, right.
            if (passable_at(r - 1, c)) visit(r - 1, c);
            if (passable_at(r + 1, c)) visit(r + 1, c);
            if (passable_at(r, c - 1)) visit(r, c - 1);
            if (passable_at(r, c + 1)) visit(r, c + 1);
            return;
        }
        // Mario. Falls first (down, down-left, down-right), then walks
        // (left, right), then jump templates in declaration order.
        if (passable_at(r + 1, c)) visit(r + 1, c);
        if (passable_at(r + 1, c - 1)) visit(r + 1, c - 1);
        if (passable_at(r + 1, c + 1)) visit(r + 1, c + 1);
        if (passable_at(r, c - 1) && supported(r, c - 1)) visit(r, c - 1);
        if (passable_at(r, c + 1) && supported(r, c + 1)) visit(r, c + 1);
        if (!supported(r, c)) return;
        for (int h = 1; h <= model.max_jump_height; ++h) {
            if (!passable_at(r - h, c)) break;  // vertical leg blocked
            visit(r - h, c);
            for (int dir : {-1, +1}) {
                for (int d = 1; d <= model.max_jump_lateral; ++d) {
                    if (!passable_at(r - h, c + dir * d)) break;  // apex leg blocked
                    visit(r - h, c + dir * d);
                }
            }
        }
    }
};

}  // namespace

PathResult is_playable(const Grid& grid, const TileSet& tileset, const MoveModel& model) {
    PathResult result;
    const auto report = validate_grid(grid, tileset);
    if (!report.structurally_valid) return result;

    int start_r = -1, start_c = -1, end_r = -1, end_c = -1;
    const int start_idx = tileset.start_index();
    const int end_idx = tileset.end_index();
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            if (grid.at(r, c) == start_idx) start_r = r, start_c = c;
            if (grid.at(r, c) == end_idx) end_r = r, end_c = c;
        }
    }

    const Walker walker{grid, tileset, model};
    const int n = grid.rows * grid.cols;
    std::vector<int> parent(n, -2);  // -2 unvisited, -1 root
    std::deque<int> queue;
    const int start = start_r * grid.cols + start_c;
    const int goal = end_r * grid.cols + end_c;
    parent[start] = -1;
    queue.push_back(start);
    while (!queue.empty() && parent[goal] == -2) {
        const int cur = queue.front();
        queue.pop_front();
        walker.neighbors(cur / grid.cols, cur % grid.cols, [&](int nr, int nc) {
            const int next = nr * grid.cols + nc;
            if (parent[next] == -2) {
                parent[next] = cur;
                queue.push_back(next);
            }
        });
    }
    if (parent[goal] == -2) return result;

    std::vector<std::pair<int, int>> path;
    for (int cur = goal; cur != -1; cur = parent[cur])
        path.emplace_back(cur / grid.cols, cur % grid.cols);
    std::reverse(path.begin(), path.end());
    result.playable = true;
    result.length = static_cast<int>(path.size()) - 1;
    result.path = std::move(path);
    return result;
}

int count_features(const Grid& grid, Game game) {
    const TileSet& tileset = TileSet::for_game(game);
    const TileKind feature = game == Game::Cave ? TileKind::Treasure : TileKind::PipeTopLeft;
    int count = 0;
    for (std::uint8_t cell : grid.cells)
        if (cell < tileset.size() && tileset.kind(cell) == feature) ++count;
    return count;
}

Outcome classify(const Grid& grid, const TileSet& tileset, const MoveModel& model,
                 int target_count) {
    const bool playable = is_playable(grid, tileset, model).playable;
    const bool correct = count_features(grid, model.game) == target_count;
    if (playable) return correct ? Outcome::PlayableCorrect : Outcome::PlayableIncorrect;
    return correct ? Outcome::UnplayableCorrect : Outcome::UnplayableIncorrect;
}

}  // namespace levelsmith
