#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "levelsmith/levelgrid.hpp"

namespace levelsmith {

/// Movement rules for one game. Cave is a 4-connected top-down walker.
/// Mario is a minimal platformer: walk onto supported cells, fall straight
/// down or one column sideways per row fallen, and jump from a supported
/// cell up to `max_jump_height` rows straight up followed by up to
/// `max_jump_lateral` columns sideways at the apex, every arc cell passable.
struct MoveModel {
    Game game = Game::Cave;
    int max_jump_height = 4;
    int max_jump_lateral = 4;

    static MoveModel cave() { return {Game::Cave}; }
    static MoveModel mario() { return {Game::Mario, 4, 4}; }
    static MoveModel for_game(Game game) { return game == Game::Cave ? cave() : mario(); }

    bool passable(TileKind kind) const;
};

struct PathResult {
    bool playable = false;
    std::optional<std::vector<std::pair<int, int>>> path;  // start..end inclusive
    std::optional<int> length;                             // number of moves
};

enum class Outcome {
    PlayableCorrect,
    PlayableIncorrect,
    UnplayableCorrect,
    UnplayableIncorrect,
};

/// BFS playability verdict with a deterministic shortest path. Grids that
/// fail structural validation (not exactly one start and one end) are
/// unplayable immediately.
PathResult is_playable(const Grid& grid, const TileSet& tileset, const MoveModel& model);

/// Number of controlled features: top-left pipe tiles for Mario, treasure
/// tiles for Cave. Reachability of the features is ignored.
int count_features(const Grid& grid, Game game);

Outcome classify(const Grid& grid, const TileSet& tileset, const MoveModel& model,
                 int target_count);

}  // namespace levelsmith
