#include "levelsmith/corpusgen.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace levelsmith {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

std::uint64_t child_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return splitmix64(splitmix64(splitmix64(seed ^ a) ^ b) ^ c);
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Vanilla: return "vanilla";
        case ModelKind::Rumi: return "rumi";
        case ModelKind::CGan: return "cgan";
    }
    return "?";
}

std::string to_string(Game game) { return game == Game::Cave ? "cave" : "mario"; }

std::optional<Game> game_from_string(const std::string& name) {
    if (name == "cave") return Game::Cave;
    if (name == "mario") return Game::Mario;
    return std::nullopt;
}

std::optional<ModelKind> model_kind_from_string(const std::string& name) {
    if (name == "vanilla") return ModelKind::Vanilla;
    if (name == "rumi") return ModelKind::Rumi;
    if (name == "cgan") return ModelKind::CGan;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Pattern dictionary
// ---------------------------------------------------------------------------

namespace {

std::string block_key(const Grid& grid, int r0, int c0, int window) {
    std::string key(static_cast<std::size_t>(window) * window, '\0');
    int i = 0;
    for (int r = r0; r < r0 + window; ++r)
        for (int c = c0; c < c0 + window; ++c) key[i++] = static_cast<char>(grid.at(r, c));
    return key;
}

}  // namespace

PatternDict extract_patterns(const std::vector<Grid>& corpus, int window) {
    if (corpus.empty()) throw CorpusError("pattern extraction needs a non-empty corpus");
    if (window < 2) throw CorpusError("pattern window must be at least 2");
    PatternDict dict;
    dict.window = window;
    for (const Grid& grid : corpus) {
        if (window > grid.rows || window > grid.cols)
            throw WindowTooLarge("pattern window exceeds grid dimensions");
        for (int r = 0; r + window <= grid.rows; ++r)
            for (int c = 0; c + window <= grid.cols; ++c)
                dict.patterns.insert(block_key(grid, r, c, window));
    }
    return dict;
}

bool PatternDict::contains_all_blocks(const Grid& grid) const {
    if (window > grid.rows || window > grid.cols) return true;  // no interior blocks
    for (int r = 0; r + window <= grid.rows; ++r)
        for (int c = 0; c + window <= grid.cols; ++c)
            if (!patterns.contains(block_key(grid, r, c, window))) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Playable generation: Cave
// ---------------------------------------------------------------------------

namespace {

namespace cave_tile {
constexpr std::uint8_t Solid = 0, Empty = 1, Treasure = 2, Start = 3, End = 4;
}

std::vector<int> cave_min_cut(const Grid& grid, const std::vector<bool>& banned, int window);

bool try_generate_cave(const CorpusSpec& spec, int k, std::mt19937_64& rng, Grid& out) {
    const int rows = spec.rows, cols = spec.cols;
    Grid g(rows, cols, cave_tile::Solid);

    const int sr = uniform_int(rng, 0, rows - 1);
    const int sc = uniform_int(rng, 0, cols / 2 - 1);
    const int er = uniform_int(rng, 0, rows - 1);
    const int ec = uniform_int(rng, cols / 2, cols - 1);

    std::vector<std::pair<int, int>> carved;
    auto carve = [&](int r, int c) {
        if (!g.in_bounds(r, c)) return;
        if (g.at(r, c) == cave_tile::Solid) {
            g.set(r, c, cave_tile::Empty);
            carved.emplace_back(r, c);
        }
    };

    // Main corridor: biased random walk from start to end.
    int r = sr, c = sc;
    carve(r, c);
    int guard = rows * cols * 16;
    while ((r != er || c != ec) && guard-- > 0) {
        int dr = 0, dc = 0;
        if (rng() % 10 < 6) {
            if (std::abs(er - r) > std::abs(ec - c))
                dr = er > r ? 1 : -1;
            else
                dc = ec > c ? 1 : -1;
        } else {
            switch (rng() % 4) {
                case 0: dr = -1; break;
                case 1: dr = 1; break;
                case 2: dc = -1; break;
                default: dc = 1; break;
            }
        }
        if (g.in_bounds(r + dr, c + dc)) {
            r += dr;
            c += dc;
            carve(r, c);
        }
    }
    if (r != er || c != ec) return false;

    // Dead-end branches and small rooms give the pattern dictionary the
    // plugged-corridor shapes the unplayable mutation will produce.
    const int branches = uniform_int(rng, 1, 3);
    for (int b = 0; b < branches && !carved.empty(); ++b) {
        auto [br, bc] = carved[rng() % carved.size()];
        const int len = uniform_int(rng, 2, (rows + cols) / 2);
        for (int s = 0; s < len; ++s) {
            const int dir = static_cast<int>(rng() % 4);
            const int dr = dir == 0 ? -1 : dir == 1 ? 1 : 0;
            const int dc = dir == 2 ? -1 : dir == 3 ? 1 : 0;
            if (g.in_bounds(br + dr, bc + dc)) {
                br += dr;
                bc += dc;
                carve(br, bc);
            }
        }
    }
    const int rooms = uniform_int(rng, 0, 2);
    for (int b = 0; b < rooms && !carved.empty(); ++b) {
        auto [rr, rc] = carved[rng() % carved.size()];
        for (int dr = 0; dr < 2; ++dr)
            for (int dc = 0; dc < 2; ++dc) carve(rr + dr, rc + dc);
    }

    std::vector<std::pair<int, int>> open;
    for (auto& cell : carved)
        if (cell != std::make_pair(sr, sc) && cell != std::make_pair(er, ec)) open.push_back(cell);
    if (static_cast<int>(open.size()) < k) return false;
    std::shuffle(open.begin(), open.end(), rng);
    for (int i = 0; i < k; ++i) g.set(open[i].first, open[i].second, cave_tile::Treasure);

    g.set(sr, sc, cave_tile::Start);
    g.set(er, ec, cave_tile::End);

    const TileSet& ts = TileSet::cave();
    if (count_features(g, Game::Cave) != k) return false;
    if (!is_playable(g, ts, MoveModel::cave()).playable) return false;

    // Stamp a plugged copy of the level's own minimum start/end cut into an
    // untouched solid region. The unplayable mutation will fill exactly that
    // cut, so every local pattern it produces already occurs here.
    const int w = spec.window;
    const auto cut = cave_min_cut(g, std::vector<bool>(rows * cols, false), w);
    if (cut.empty()) return false;
    int r0 = rows, r1 = -1, c0 = cols, c1 = -1;
    for (int i : cut) {
        const int cr = i / cols, cc = i % cols;
        r0 = std::min(r0, std::max(0, cr - (w - 1)));
        r1 = std::max(r1, std::min(rows - 1, cr + (w - 1)));
        c0 = std::min(c0, std::max(0, cc - (w - 1)));
        c1 = std::max(c1, std::min(cols - 1, cc + (w - 1)));
    }
    Grid plugged = g;
    for (int i : cut) plugged.cells[i] = cave_tile::Solid;
    const int br = r1 - r0 + 1, bc = c1 - c0 + 1;
    std::vector<std::pair<int, int>> spots;
    for (int pr = 0; pr + br <= rows; ++pr)
        for (int pc = 0; pc + bc <= cols; ++pc) {
            bool clear = true;
            for (int dr = -1; dr <= br && clear; ++dr)
                for (int dc = -1; dc <= bc && clear; ++dc) {
                    const int rr = pr + dr, cc = pc + dc;
                    if (g.in_bounds(rr, cc) && g.at(rr, cc) != cave_tile::Solid) clear = false;
                }
            if (clear) spots.emplace_back(pr, pc);
        }
    if (spots.empty()) return false;
    const auto [pr, pc] = spots[rng() % spots.size()];
    for (int dr = 0; dr < br; ++dr)
        for (int dc = 0; dc < bc; ++dc) g.set(pr + dr, pc + dc, plugged.at(r0 + dr, c0 + dc));

    if (count_features(g, Game::Cave) != k) return false;
    if (!validate_grid(g, ts).structurally_valid) return false;
    if (!is_playable(g, ts, MoveModel::cave()).playable) return false;
    out = std::move(g);
    return true;
}

// ---------------------------------------------------------------------------
// Playable generation: Mario
// ---------------------------------------------------------------------------

namespace mario_tile {
constexpr std::uint8_t Ground = 0, Breakable = 1, Empty = 2, Question = 3, PipeTL = 4,
                       PipeTR = 5, PipeL = 6, PipeR = 7, Start = 8, End = 9;
}

bool try_generate_mario(const CorpusSpec& spec, int k, std::mt19937_64& rng, Grid& out) {
    const int rows = spec.rows, cols = spec.cols;
    const int w = spec.window;
    const int zone = 2 * w - 1;  // stamp zone width at the left edge
    if (rows < 8 || cols < 4 * k + zone + 12) return false;

    // Terrain height per column (ground tiles stacked from the bottom).
    std::vector<int> h(cols);
    h[0] = uniform_int(rng, 1, 3);
    for (int c = 1; c < cols; ++c) {
        const int step = uniform_int(rng, -1, 1);
        h[c] = std::clamp(h[c - 1] + step, 1, 4);
    }

    // The start sits right of the stamp zone plus one buffer column.
    const int sc = zone + 1 + uniform_int(rng, 0, 1);
    const int ec = cols - 1 - uniform_int(rng, 3, 4);

    // Designated plug column: flat, undecorated terrain where the unplayable
    // mutation can drop a full-height wall. Its plugged neighborhood is
    // stamped into the left zone below so the wall's patterns occur here.
    const int cp = uniform_int(rng, sc + 3, ec - 3);
    const int flat = std::clamp(h[cp], 1, 4);
    for (int c = cp - (w - 1); c <= cp + (w - 1); ++c) h[c] = flat;
    // Keep anything jumpable-from out of lateral reach of the plug column.
    auto near_plug = [&](int c) { return std::abs(c - cp) <= w + 3; };

    // Pipe columns, pairwise at least 3 apart so jumps over them stay clear.
    std::vector<int> pipe_cols;
    {
        std::vector<int> candidates;
        for (int c = sc + 2; c <= ec - 3; ++c)
            if (!near_plug(c) && !near_plug(c + 1)) candidates.push_back(c);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        for (int c : candidates) {
            bool ok = true;
            for (int p : pipe_cols)
                if (std::abs(p - c) < 4) ok = false;
            if (ok) pipe_cols.push_back(c);
            if (static_cast<int>(pipe_cols.size()) == k) break;
        }
        if (static_cast<int>(pipe_cols.size()) != k) return false;
        for (int c : pipe_cols) h[c + 1] = h[c];  // level base under the pipe
    }

    // Pits (missing ground), narrow enough to jump across.
    const int pits = uniform_int(rng, 0, 2);
    for (int p = 0; p < pits; ++p) {
        const int width = uniform_int(rng, 1, 2);
        const int at = uniform_int(rng, sc + 2, ec - 2 - width);
        bool ok = true;
        for (int c = at - 2; c < at + width + 2; ++c) {
            if (near_plug(c)) ok = false;
            for (int pc : pipe_cols)
                if (c >= pc - 1 && c <= pc + 2) ok = false;
            if (c >= at - 1 && c <= at + width && h[std::clamp(c, 0, cols - 1)] == 0) ok = false;
        }
        if (!ok) continue;
        for (int c = at; c < at + width; ++c) h[c] = 0;
    }
    if (h[sc] == 0 || h[ec] == 0) return false;

    Grid g(rows, cols, mario_tile::Empty);
    for (int c = 0; c < cols; ++c)
        for (int r = rows - h[c]; r < rows; ++r) g.set(r, c, mario_tile::Ground);

    for (int c : pipe_cols) {
        const int p = uniform_int(rng, 1, 2);
        const int base = rows - h[c] - 1;
        for (int r = base; r > base - p; --r) {
            g.set(r, c, mario_tile::PipeL);
            g.set(r, c + 1, mario_tile::PipeR);
        }
        g.set(base - p + 1, c, mario_tile::PipeTL);
        g.set(base - p + 1, c + 1, mario_tile::PipeTR);
    }

    // Floating decorations: question/breakable blocks and short air pillars.
    const int blocks = uniform_int(rng, 0, 3);
    for (int b = 0; b < blocks; ++b) {
        const int c = uniform_int(rng, sc + 1, ec - 1);
        const int r = uniform_int(rng, 2, rows - 7);
        if (near_plug(c) || g.at(r, c) != mario_tile::Empty) continue;
        g.set(r, c, rng() % 2 ? mario_tile::Question : mario_tile::Breakable);
    }
    const int pillars = uniform_int(rng, 0, 2);
    for (int b = 0; b < pillars; ++b) {
        const int c = uniform_int(rng, sc + 1, ec - 1);
        const int top = uniform_int(rng, 0, 2);
        const int len = uniform_int(rng, 2, 5);
        const int bottom = top + len - 1;
        if (near_plug(c)) continue;
        if (bottom > rows - h[c] - 5) continue;  // keep walk-under clearance
        bool clear = true;
        for (int r = top; r <= bottom && clear; ++r)
            if (g.at(r, c) != mario_tile::Empty) clear = false;
        if (!clear) continue;
        for (int r = top; r <= bottom; ++r) g.set(r, c, mario_tile::Ground);
    }

    g.set(rows - h[sc] - 1, sc, mario_tile::Start);
    g.set(rows - h[ec] - 1, ec, mario_tile::End);

    const TileSet& ts = TileSet::mario();
    if (count_features(g, Game::Mario) != k) return false;
    if (!validate_grid(g, ts).structurally_valid) return false;
    if (!is_playable(g, ts, MoveModel::mario()).playable) return false;

    // Verify the designated plug really breaks the level, then copy the
    // plugged neighborhood into the stamp zone left of the start.
    const int top = uniform_int(rng, 1, 3);
    Grid plugged = g;
    for (int r = top; r < rows - flat; ++r) plugged.set(r, cp, mario_tile::Ground);
    if (is_playable(plugged, ts, MoveModel::mario()).playable) return false;
    for (int dc = 0; dc < zone; ++dc)
        for (int r = 0; r < rows; ++r) g.set(r, dc, plugged.at(r, cp - (w - 1) + dc));

    if (count_features(g, Game::Mario) != k) return false;
    if (!validate_grid(g, ts).structurally_valid) return false;
    if (!is_playable(g, ts, MoveModel::mario()).playable) return false;
    out = std::move(g);
    return true;
}

}  // namespace

Grid generate_playable(const CorpusSpec& spec, int k, std::mt19937_64& rng) {
    if (std::find(spec.classes.begin(), spec.classes.end(), k) == spec.classes.end())
        throw CorpusError("feature count " + std::to_string(k) + " is not a spec class");
    Grid out;
    for (int attempt = 0; attempt < spec.attempt_budget; ++attempt) {
        const bool ok = spec.game == Game::Cave ? try_generate_cave(spec, k, rng, out)
                                                : try_generate_mario(spec, k, rng, out);
        if (ok) return out;
    }
    throw GenerationTimeout(spec.attempt_budget);
}

// ---------------------------------------------------------------------------
// Unplayable mutation
// ---------------------------------------------------------------------------

namespace {

// Node-split Edmonds-Karp max-flow for minimum vertex cuts on the Cave
// movement graph. Cell i maps to nodes 2i (in) and 2i+1 (out).
class VertexCut {
public:
    VertexCut(int cells) : head_(2 * cells, -1) {}

    void add_edge(int u, int v, long long cap) {
        edges_.push_back({v, head_[u], cap});
        head_[u] = static_cast<int>(edges_.size()) - 1;
        edges_.push_back({u, head_[v], 0});
        head_[v] = static_cast<int>(edges_.size()) - 1;
    }

    long long max_flow(int s, int t) {
        long long total = 0;
        while (true) {
            std::vector<int> pred_edge(head_.size(), -1);
            std::deque<int> queue{s};
            std::vector<bool> seen(head_.size(), false);
            seen[s] = true;
            while (!queue.empty() && !seen[t]) {
                const int u = queue.front();
                queue.pop_front();
                for (int e = head_[u]; e != -1; e = edges_[e].next) {
                    if (edges_[e].cap <= 0 || seen[edges_[e].to]) continue;
                    seen[edges_[e].to] = true;
                    pred_edge[edges_[e].to] = e;
                    queue.push_back(edges_[e].to);
                }
            }
            if (!seen[t]) return total;
            long long aug = std::numeric_limits<long long>::max();
            for (int v = t; v != s; v = edges_[pred_edge[v] ^ 1].to)
                aug = std::min(aug, edges_[pred_edge[v]].cap);
            for (int v = t; v != s; v = edges_[pred_edge[v] ^ 1].to) {
                edges_[pred_edge[v]].cap -= aug;
                edges_[pred_edge[v] ^ 1].cap += aug;
            }
            total += aug;
            if (total >= kInf) return total;
        }
    }

    std::vector<bool> source_side(int s) const {
        std::vector<bool> seen(head_.size(), false);
        std::deque<int> queue{s};
        seen[s] = true;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (int e = head_[u]; e != -1; e = edges_[e].next) {
                if (edges_[e].cap <= 0 || seen[edges_[e].to]) continue;
                seen[edges_[e].to] = true;
                queue.push_back(edges_[e].to);
            }
        }
        return seen;
    }

    static constexpr long long kInf = 1LL << 40;

private:
    struct Edge {
        int to;
        int next;
        long long cap;
    };
    std::vector<Edge> edges_;
    std::vector<int> head_;
};

// Minimum vertex cut between start and end over passable cells. Cells within
// chebyshev distance window-1 of a start, end or treasure tile are not
// cuttable, so the plugged neighborhood never contains a special tile.
std::vector<int> cave_min_cut(const Grid& grid, const std::vector<bool>& banned, int window) {
    const TileSet& ts = TileSet::cave();
    const MoveModel model = MoveModel::cave();
    const int n = grid.rows * grid.cols;

    int start = -1, end = -1;
    std::vector<std::pair<int, int>> specials;
    for (int i = 0; i < n; ++i) {
        const TileKind kind = ts.kind(grid.cells[i]);
        if (grid.cells[i] == ts.start_index()) start = i;
        if (grid.cells[i] == ts.end_index()) end = i;
        if (kind == TileKind::Start || kind == TileKind::End || kind == TileKind::Treasure)
            specials.emplace_back(i / grid.cols, i % grid.cols);
    }
    if (start < 0 || end < 0) throw CorpusError("cut source lacks start or end");

    auto near_special = [&](int r, int c) {
        for (auto& [sr, sc] : specials)
            if (std::max(std::abs(sr - r), std::abs(sc - c)) < window) return true;
        return false;
    };
    auto passable = [&](int i) { return model.passable(ts.kind(grid.cells[i])); };

    VertexCut flow(n);
    for (int i = 0; i < n; ++i) {
        if (!passable(i)) continue;
        const int r = i / grid.cols, c = i % grid.cols;
        const bool cuttable = !banned[i] && !near_special(r, c);
        flow.add_edge(2 * i, 2 * i + 1, cuttable ? 1 : VertexCut::kInf);
        const int neigh[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
        for (auto& [nr, nc] : neigh) {
            if (!grid.in_bounds(nr, nc)) continue;
            const int j = nr * grid.cols + nc;
            if (passable(j)) flow.add_edge(2 * i + 1, 2 * j, VertexCut::kInf);
        }
    }
    if (flow.max_flow(2 * start, 2 * end + 1) >= VertexCut::kInf) return {};
    const auto reach = flow.source_side(2 * start);
    std::vector<int> cut;
    for (int i = 0; i < n; ++i)
        if (passable(i) && reach[2 * i] && !reach[2 * i + 1]) cut.push_back(i);
    return cut;
}

Grid mutate_cave(const Grid& grid, const PatternDict& patterns, std::mt19937_64& rng,
                 int attempt_budget) {
    const TileSet& ts = TileSet::cave();
    const MoveModel model = MoveModel::cave();
    const int n = grid.rows * grid.cols;

    std::vector<bool> banned(n, false);
    (void)rng;
    for (int attempt = 0; attempt < attempt_budget; ++attempt) {
        const auto cut = cave_min_cut(grid, banned, patterns.window);
        if (cut.empty()) break;  // no finite cut left

        Grid mutated = grid;
        for (int i : cut) mutated.cells[i] = cave_tile::Solid;
        if (!is_playable(mutated, ts, model).playable &&
            count_features(mutated, Game::Cave) == count_features(grid, Game::Cave) &&
            patterns.contains_all_blocks(mutated))
            return mutated;
        for (int i : cut) banned[i] = true;  // force a different cut next round
    }
    throw MutationFailed(attempt_budget);
}

Grid mutate_mario(const Grid& grid, const PatternDict& patterns, std::mt19937_64& rng,
                  int attempt_budget) {
    const TileSet& ts = TileSet::mario();
    const MoveModel model = MoveModel::mario();
    const int w = patterns.window;
    (void)attempt_budget;

    int sc = -1, ec = -1;
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            if (grid.at(r, c) == ts.start_index()) sc = c;
            if (grid.at(r, c) == ts.end_index()) ec = c;
        }
    if (sc < 0 || ec < 0) throw CorpusError("mutation source lacks start or end");
    if (sc > ec) std::swap(sc, ec);

    auto ground_height = [&](int c) {
        int h = 0;
        while (h < grid.rows && grid.at(grid.rows - 1 - h, c) == mario_tile::Ground) ++h;
        return h;
    };

    // Plug candidates: flat terrain across the whole pattern window, nothing
    // but air above it, between the start and end columns.
    std::vector<int> candidates;
    for (int c = sc + 2; c <= ec - 2; ++c) {
        const int h = ground_height(c);
        if (h < 1) continue;
        bool ok = true;
        for (int cc = c - (w - 1); cc <= c + (w - 1) && ok; ++cc) {
            if (cc < 0 || cc >= grid.cols || ground_height(cc) != h) ok = false;
            for (int r = 0; ok && r < grid.rows - h; ++r)
                if (grid.at(r, cc) != mario_tile::Empty) ok = false;
        }
        if (ok) candidates.push_back(c);
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);

    int attempts = 0;
    for (int c : candidates) {
        std::vector<int> tops{1, 2, 3};
        std::shuffle(tops.begin(), tops.end(), rng);
        for (int top : tops) {
            ++attempts;
            Grid mutated = grid;
            const int h = ground_height(c);
            for (int r = top; r < grid.rows - h; ++r) mutated.set(r, c, mario_tile::Ground);
            if (!patterns.contains_all_blocks(mutated)) continue;
            if (is_playable(mutated, ts, model).playable) continue;
            if (count_features(mutated, Game::Mario) != count_features(grid, Game::Mario))
                continue;
            return mutated;
        }
    }
    throw MutationFailed(attempts);
}

}  // namespace

Grid make_unplayable(const Grid& grid, Game game, const PatternDict& patterns,
                     std::mt19937_64& rng, int attempt_budget) {
    const TileSet& ts = TileSet::for_game(game);
    if (!is_playable(grid, ts, MoveModel::for_game(game)).playable)
        throw CorpusError("mutation source must be playable");
    return game == Game::Cave ? mutate_cave(grid, patterns, rng, attempt_budget)
                              : mutate_mario(grid, patterns, rng, attempt_budget);
}

// ---------------------------------------------------------------------------
// Corpus assembly
// ---------------------------------------------------------------------------

std::vector<CorpusEntry> build_corpus(const CorpusSpec& spec) {
    if (spec.per_class < 1) throw CorpusError("per_class must be at least 1");
    if (spec.classes.empty()) throw CorpusError("classes must be non-empty");
    for (int k : spec.classes)
        if (k < 1) throw CorpusError("classes must be strictly positive");

    std::vector<std::vector<Grid>> playable_by_class(spec.classes.size());
    std::vector<Grid> all_playable;
    for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
        const int k = spec.classes[ci];
        for (int i = 0; i < spec.per_class; ++i) {
            std::mt19937_64 rng(child_seed(spec.seed, static_cast<std::uint64_t>(k), i));
            Grid g = generate_playable(spec, k, rng);
            playable_by_class[ci].push_back(g);
            all_playable.push_back(std::move(g));
        }
    }
    const PatternDict patterns = extract_patterns(all_playable, spec.window);

    std::vector<CorpusEntry> entries;
    entries.reserve(2 * spec.classes.size() * spec.per_class);
    for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
        const int k = spec.classes[ci];
        for (const Grid& g : playable_by_class[ci]) entries.push_back({g, true, k, k});
        for (int i = 0; i < spec.per_class; ++i) {
            std::optional<Grid> mutated;
            // Any playable grid of the class may serve as the mutation
            // source; rotate through them until one yields a valid result.
            for (int off = 0; off < spec.per_class && !mutated; ++off) {
                const Grid& source = playable_by_class[ci][(i + off) % spec.per_class];
                std::mt19937_64 rng(
                    child_seed(spec.seed, static_cast<std::uint64_t>(k), i, 0xA5u + off));
                try {
                    mutated = make_unplayable(source, spec.game, patterns, rng);
                } catch (const MutationFailed&) {
                }
            }
            if (!mutated) throw MutationFailed(spec.per_class);
            entries.push_back({std::move(*mutated), false, k, k});
        }
    }
    return entries;
}

// ---------------------------------------------------------------------------
// Partitioning (Table-2 style rows)
// ---------------------------------------------------------------------------

Partition partition_samples(const std::vector<CorpusEntry>& corpus, Objective objective,
                            ModelKind model_kind, std::uint64_t seed) {
    std::unordered_set<int> seen_classes;
    for (const auto& e : corpus) seen_classes.insert(e.class_label);
    if (objective.kind == Objective::Kind::ClassK && !seen_classes.contains(objective.class_k))
        throw MissingClass("corpus has no class " + std::to_string(objective.class_k));

    Partition part;
    const bool labeled = model_kind == ModelKind::CGan;
    auto add_pos = [&](const CorpusEntry& e, int cls) {
        part.positives.push_back(e);
        if (labeled) part.positive_labels.push_back({cls, 0});
    };
    auto add_neg = [&](const CorpusEntry& e, int cls) {
        part.negatives.push_back(e);
        if (labeled) part.negative_labels.push_back({cls, 1});
    };

    for (const auto& e : corpus) {
        if (objective.kind == Objective::Kind::Playability) {
            if (e.playable)
                add_pos(e, e.class_label);
            else if (model_kind != ModelKind::Vanilla)
                add_neg(e, e.class_label);
        } else {
            const bool target = e.playable && e.class_label == objective.class_k;
            if (target)
                add_pos(e, e.class_label);
            else if (model_kind != ModelKind::Vanilla)
                add_neg(e, e.class_label);
        }
    }
    if (model_kind != ModelKind::Vanilla && part.negatives.empty())
        throw MissingClass("partition requires negative examples but the corpus has none");

    // Balance by uniform subsampling without replacement of the larger side.
    if (!part.negatives.empty()) {
        const std::size_t n = std::min(part.positives.size(), part.negatives.size());
        auto shrink = [&](std::vector<CorpusEntry>& side, std::vector<LabelPair>& labels,
                          std::uint64_t salt) {
            if (side.size() <= n) return;
            std::vector<std::size_t> idx(side.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::mt19937_64 rng(child_seed(seed, 0xBA1A9CEDULL, salt));
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(n);
            std::sort(idx.begin(), idx.end());
            std::vector<CorpusEntry> kept;
            std::vector<LabelPair> kept_labels;
            for (std::size_t i : idx) {
                kept.push_back(side[i]);
                if (labeled) kept_labels.push_back(labels[i]);
            }
            side = std::move(kept);
            labels = std::move(kept_labels);
        };
        shrink(part.positives, part.positive_labels, 0);
        shrink(part.negatives, part.negative_labels, 1);
    }
    return part;
}

// ---------------------------------------------------------------------------
// Corpus files
// ---------------------------------------------------------------------------

std::string corpus_file_text(const std::vector<CorpusEntry>& entries, const TileSet& tileset) {
    std::string out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i) out += "\n\n";
        out += "# playable=" + std::to_string(entries[i].playable ? 1 : 0) +
               " features=" + std::to_string(entries[i].feature_count) + "\n";
        out += render_level(entries[i].grid, tileset);
    }
    out += "\n";
    return out;
}

std::vector<CorpusEntry> parse_corpus_file(const std::string& text, const TileSet& tileset) {
    std::vector<CorpusEntry> entries;
    std::istringstream in(text);
    std::string line;
    std::optional<std::pair<bool, int>> header;
    std::string body;
    auto flush = [&] {
        if (!header && body.empty()) return;
        if (!header) throw CorpusError("corpus level missing header line");
        CorpusEntry e;
        e.grid = parse_level(body, tileset);
        e.playable = header->first;
        e.feature_count = header->second;
        e.class_label = e.feature_count;
        entries.push_back(std::move(e));
        header.reset();
        body.clear();
    };
    while (std::getline(in, line)) {
        if (line.empty()) {
            flush();
        } else if (line[0] == '#') {
            int playable = 0, features = 0;
            if (std::sscanf(line.c_str(), "# playable=%d features=%d", &playable, &features) != 2)
                throw CorpusError("malformed corpus header: " + line);
            header = {playable != 0, features};
        } else {
            if (!body.empty()) body += '\n';
            body += line;
        }
    }
    flush();
    return entries;
}

std::string corpus_hash(const std::vector<CorpusEntry>& entries, const TileSet& tileset) {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    auto mix = [&](const std::string& s) {
        for (unsigned char ch : s) {
            hash ^= ch;
            hash *= 0x100000001B3ULL;
        }
    };
    mix(corpus_file_text(entries, tileset));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec,
                  const std::vector<CorpusEntry>& entries) {
    namespace fs = std::filesystem;
    const TileSet& ts = TileSet::for_game(spec.game);
    const std::string game = to_string(spec.game);
    for (int k : spec.classes) {
        for (bool playable : {true, false}) {
            std::vector<CorpusEntry> group;
            for (const auto& e : entries)
                if (e.class_label == k && e.playable == playable) group.push_back(e);
            const fs::path sub =
                dir / game / (playable ? "playable" : "unplayable") / ("class_" + std::to_string(k));
            fs::create_directories(sub);
            std::ofstream out(sub / "levels.txt", std::ios::binary);
            if (!out) throw CorpusError("cannot write " + (sub / "levels.txt").string());
            out << corpus_file_text(group, ts);
        }
    }
    nlohmann::json manifest{
        {"game", game},
        {"rows", spec.rows},
        {"cols", spec.cols},
        {"classes", spec.classes},
        {"per_class", spec.per_class},
        {"seed", spec.seed},
        {"window", spec.window},
        {"entries", entries.size()},
        {"corpus_hash", corpus_hash(entries, ts)},
    };
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw CorpusError("cannot write manifest.json");
    out << manifest.dump(2) << "\n";
}

std::vector<CorpusEntry> read_corpus(const std::filesystem::path& dir, CorpusSpec& spec_out) {
    namespace fs = std::filesystem;
    std::ifstream in(dir / "manifest.json");
    if (!in) throw CorpusError("missing manifest.json in " + dir.string());
    nlohmann::json manifest = nlohmann::json::parse(in);
    const auto game = game_from_string(manifest.at("game").get<std::string>());
    if (!game) throw CorpusError("unknown game in manifest");
    spec_out.game = *game;
    spec_out.rows = manifest.at("rows").get<int>();
    spec_out.cols = manifest.at("cols").get<int>();
    spec_out.classes = manifest.at("classes").get<std::vector<int>>();
    spec_out.per_class = manifest.at("per_class").get<int>();
    spec_out.seed = manifest.at("seed").get<std::uint64_t>();
    spec_out.window = manifest.at("window").get<int>();

    const TileSet& ts = TileSet::for_game(spec_out.game);
    std::vector<CorpusEntry> entries;
    for (int k : spec_out.classes) {
        for (bool playable : {true, false}) {
            const fs::path file = dir / to_string(spec_out.game) /
                                  (playable ? "playable" : "unplayable") /
                                  ("class_" + std::to_string(k)) / "levels.txt";
            std::ifstream level_in(file, std::ios::binary);
            if (!level_in) throw CorpusError("missing corpus file " + file.string());
            std::stringstream buf;
            buf << level_in.rdbuf();
            for (auto& e : parse_corpus_file(buf.str(), ts)) {
                e.class_label = k;
                entries.push_back(std::move(e));
            }
        }
    }
    return entries;
}

}  // namespace levelsmith
