#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "levelsmith/reachability.hpp"

namespace levelsmith {

struct CorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GenerationTimeout : CorpusError {
    int attempts;
    explicit GenerationTimeout(int n)
        : CorpusError("level generation failed after " + std::to_string(n) + " attempts"),
          attempts(n) {}
};
struct MutationFailed : CorpusError {
    int attempts;
    explicit MutationFailed(int n)
        : CorpusError("unplayable mutation failed after " + std::to_string(n) + " attempts"),
          attempts(n) {}
};
struct WindowTooLarge : CorpusError {
    using CorpusError::CorpusError;
};
struct MissingClass : CorpusError {
    using CorpusError::CorpusError;
};

struct CorpusSpec {
    Game game = Game::Cave;
    int rows = 14;
    int cols = 14;
    std::vector<int> classes{1, 2, 3};
    int per_class = 100;
    std::uint64_t seed = 0;
    int window = 3;
    int attempt_budget = 2000;

    static CorpusSpec cave_preset() { return {Game::Cave, 14, 14}; }
    static CorpusSpec mario_preset() { return {Game::Mario, 14, 32}; }
};

struct CorpusEntry {
    Grid grid;
    bool playable = false;
    int feature_count = 0;
    int class_label = 0;
};

/// Set of window x window tile blocks observed in a corpus; blocks are
/// position-independent. Only interior blocks are extracted (no padding).
struct PatternDict {
    int window = 3;
    std::unordered_set<std::string> patterns;

    bool contains_all_blocks(const Grid& grid) const;
};

struct LabelPair {
    int class_value = 0;
    int neg_flag = 0;
};

/// Positive/negative split of a corpus per one Table-2 style training row.
/// Labels are present only for conditional training.
struct Partition {
    std::vector<CorpusEntry> positives;
    std::vector<CorpusEntry> negatives;
    std::vector<LabelPair> positive_labels;  // parallel to positives when labeled
    std::vector<LabelPair> negative_labels;
};

enum class ModelKind { Vanilla, Rumi, CGan };

struct Objective {
    enum class Kind { Playability, ClassK };
    Kind kind = Kind::Playability;
    int class_k = 0;

    static Objective playability() { return {Kind::Playability, 0}; }
    static Objective class_k_of(int k) { return {Kind::ClassK, k}; }
};

Grid generate_playable(const CorpusSpec& spec, int k, std::mt19937_64& rng);
Grid make_unplayable(const Grid& grid, Game game, const PatternDict& patterns,
                     std::mt19937_64& rng, int attempt_budget = 64);
PatternDict extract_patterns(const std::vector<Grid>& corpus, int window);
std::vector<CorpusEntry> build_corpus(const CorpusSpec& spec);
Partition partition_samples(const std::vector<CorpusEntry>& corpus, Objective objective,
                            ModelKind model_kind, std::uint64_t seed);

// Corpus file format: levels separated by one blank line, each preceded by
// a `# playable=<0|1> features=<k>` header line.
std::string corpus_file_text(const std::vector<CorpusEntry>& entries, const TileSet& tileset);
std::vector<CorpusEntry> parse_corpus_file(const std::string& text, const TileSet& tileset);

void write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec,
                  const std::vector<CorpusEntry>& entries);
std::vector<CorpusEntry> read_corpus(const std::filesystem::path& dir, CorpusSpec& spec_out);

/// FNV-1a digest of the rendered corpus, quoted in model sidecars and reports.
std::string corpus_hash(const std::vector<CorpusEntry>& entries, const TileSet& tileset);

std::string to_string(ModelKind kind);
std::string to_string(Game game);
std::optional<Game> game_from_string(const std::string& name);
std::optional<ModelKind> model_kind_from_string(const std::string& name);

/// Deterministic per-entry child seed stream.
std::uint64_t child_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                         std::uint64_t c = 0);

}  // namespace levelsmith
