// Acceptance gate: one pass/fail line per criterion, nonzero exit on failure.
// Usage: acceptance <source-dir>   (source dir supplies configs/)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "levelsmith/experiments.hpp"

using namespace levelsmith;
namespace fs = std::filesystem;

namespace {

fs::path g_source_dir;
int g_failures = 0;
int g_index = 0;

void criterion(const std::string& name, const std::function<bool(std::string&)>& body) {
    ++g_index;
    std::string detail;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", g_index, name.c_str(),
                secs, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient oracle
// ---------------------------------------------------------------------------

using ad::Tape;
using ad::Value;

Value random_grad_input(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0,
                        double hi = 1.0) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = dist(rng);
    Value t = ad::make_input(std::move(shape), std::move(v));
    t->requires_grad = true;
    t->g.assign(t->v.size(), 0.0);
    return t;
}

bool gradient_oracle(std::string& detail) {
    constexpr int kShapes = 20;
    constexpr double kTol = 1e-4;
    double worst = 0.0;
    std::string worst_op;
    auto note = [&](const char* op, double err) {
        if (err > worst) {
            worst = err;
            worst_op = op;
        }
    };

    std::mt19937_64 rng(101);
    auto dim = [&](int lo, int hi) { return lo + static_cast<int>(rng() % (hi - lo + 1)); };

    for (int i = 0; i < kShapes; ++i) {
        std::mt19937_64 probe(1000 + i);
        {  // dense
            const int n = dim(1, 3), in = dim(1, 5), out = dim(1, 5);
            Value x = random_grad_input({n, in}, rng);
            Value w = random_grad_input({out, in}, rng);
            Value b = random_grad_input({out}, rng);
            note("dense", gradcheck::max_rel_error(
                              [&](Tape& t) {
                                  std::mt19937_64 p = probe;
                                  return gradcheck::scalar_probe(t, t.dense(x, w, b), p);
                              },
                              {x, w, b}));
        }
        {  // conv2d
            const int n = dim(1, 2), cin = dim(1, 2), cout = dim(1, 2);
            const int h = dim(3, 6), wd = dim(3, 6), k = dim(1, 3);
            const int stride = dim(1, 2), pad = dim(0, 1);
            if (h + 2 * pad >= k && wd + 2 * pad >= k) {
                Value x = random_grad_input({n, cin, h, wd}, rng);
                Value w = random_grad_input({cout, cin, k, k}, rng);
                Value b = random_grad_input({cout}, rng);
                note("conv2d", gradcheck::max_rel_error(
                                   [&](Tape& t) {
                                       std::mt19937_64 p = probe;
                                       return gradcheck::scalar_probe(
                                           t, t.conv2d(x, w, b, stride, pad), p);
                                   },
                                   {x, w, b}));
            }
        }
        {  // conv_transpose2d
            const int n = dim(1, 2), cin = dim(1, 2), cout = dim(1, 2);
            const int h = dim(2, 4), wd = dim(2, 4), k = dim(2, 4);
            const int stride = dim(1, 2), pad = dim(0, 1);
            if ((h - 1) * stride - 2 * pad + k >= 1 && (wd - 1) * stride - 2 * pad + k >= 1) {
                Value x = random_grad_input({n, cin, h, wd}, rng);
                Value w = random_grad_input({cin, cout, k, k}, rng);
                Value b = random_grad_input({cout}, rng);
                note("conv_transpose2d",
                     gradcheck::max_rel_error(
                         [&](Tape& t) {
                             std::mt19937_64 p = probe;
                             return gradcheck::scalar_probe(
                                 t, t.conv_transpose2d(x, w, b, stride, pad), p);
                         },
                         {x, w, b}));
            }
        }
        {  // batchnorm2d, train mode
            const int n = dim(2, 3), ch = dim(1, 3), h = dim(2, 3);
            Value x = random_grad_input({n, ch, h, h}, rng);
            Value gamma = random_grad_input({ch}, rng, 0.5, 1.5);
            Value beta = random_grad_input({ch}, rng);
            std::vector<double> rm, rv;
            note("batchnorm2d",
                 gradcheck::max_rel_error(
                     [&](Tape& t) {
                         std::mt19937_64 p = probe;
                         return gradcheck::scalar_probe(
                             t, t.batchnorm2d(x, gamma, beta, rm, rv, true), p);
                     },
                     {x, gamma, beta}));
        }
        {  // leaky_relu
            const int n = dim(1, 4), m = dim(1, 6);
            Value x = random_grad_input({n, m}, rng, -2.0, 2.0);
            note("leaky_relu", gradcheck::max_rel_error(
                                   [&](Tape& t) {
                                       std::mt19937_64 p = probe;
                                       return gradcheck::scalar_probe(t, t.leaky_relu(x, 0.2), p);
                                   },
                                   {x}));
        }
        {  // channel_softmax
            const int n = dim(1, 2), ch = dim(2, 5), h = dim(2, 3);
            Value x = random_grad_input({n, ch, h, h}, rng, -2.0, 2.0);
            note("channel_softmax", gradcheck::max_rel_error(
                                        [&](Tape& t) {
                                            std::mt19937_64 p = probe;
                                            return gradcheck::scalar_probe(
                                                t, t.channel_softmax(x), p);
                                        },
                                        {x}));
        }
        {  // the three losses on both heads
            const int n = dim(2, 6);
            Value d_real = random_grad_input({n, 1}, rng, -1.5, 1.5);
            Value d_fake = random_grad_input({n, 1}, rng, -1.5, 1.5);
            Value d_neg = random_grad_input({n, 1}, rng, -1.5, 1.5);
            for (gan::LossHead head : {gan::LossHead::LogGAN, gan::LossHead::Wasserstein}) {
                note("loss_vanilla",
                     gradcheck::max_rel_error(
                         [&](Tape& t) { return gan::loss_vanilla(t, d_real, d_fake, head).first; },
                         {d_real, d_fake}));
                note("loss_vanilla_gen",
                     gradcheck::max_rel_error(
                         [&](Tape& t) {
                             return gan::loss_vanilla(t, d_real, d_fake, head).second;
                         },
                         {d_fake}));
                note("loss_cgan",
                     gradcheck::max_rel_error(
                         [&](Tape& t) { return gan::loss_cgan(t, d_real, d_fake, head).first; },
                         {d_real, d_fake}));
                note("loss_rumi",
                     gradcheck::max_rel_error(
                         [&](Tape& t) {
                             return gan::loss_rumi(t, d_real, d_neg, d_fake, 1.0, 0.5, head)
                                 .first;
                         },
                         {d_real, d_neg, d_fake}));
            }
        }
    }
    std::ostringstream ss;
    ss << "max rel error " << worst << " (" << worst_op << ")";
    detail = ss.str();
    return worst < kTol;
}

// ---------------------------------------------------------------------------
// Criterion 2: loss identities
// ---------------------------------------------------------------------------

bool loss_identities(std::string& detail) {
    Value zeros = ad::make_input({4, 1}, std::vector<double>(4, 0.0));
    Tape t1;
    const double vanilla = gan::loss_vanilla(t1, zeros, zeros, gan::LossHead::LogGAN).first->v[0];
    Tape t2;
    const double rumi =
        gan::loss_rumi(t2, zeros, zeros, zeros, 1.0, 0.5, gan::LossHead::LogGAN).first->v[0];
    if (std::abs(vanilla - 1.3863) > 1e-3) {
        detail = "vanilla symmetric value " + std::to_string(vanilla);
        return false;
    }
    if (std::abs(rumi - 1.7329) > 1e-3) {
        detail = "rumi symmetric value " + std::to_string(rumi);
        return false;
    }
    std::mt19937_64 rng(7);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> rv(5), fv(5), nv(5);
        for (auto* v : {&rv, &fv, &nv})
            for (double& x : *v) x = dist(rng);
        for (gan::LossHead head : {gan::LossHead::LogGAN, gan::LossHead::Wasserstein}) {
            Value d_real = ad::make_input({5, 1}, rv);
            Value d_fake = ad::make_input({5, 1}, fv);
            Value d_neg = ad::make_input({5, 1}, nv);
            Tape ta, tb;
            auto a = gan::loss_vanilla(ta, d_real, d_fake, head);
            auto b = gan::loss_rumi(tb, d_real, d_neg, d_fake, 1.0, 0.0, head);
            if (a.first->v[0] != b.first->v[0] || a.second->v[0] != b.second->v[0]) {
                detail = "rumi(alpha_minus=0) differs from vanilla";
                return false;
            }
        }
    }
    detail = "vanilla 1.3863, rumi 1.7329, rumi(0) == vanilla bitwise";
    return true;
}

// ---------------------------------------------------------------------------
// Criterion 3: reachability oracle
// ---------------------------------------------------------------------------

bool cave_oracle(const Grid& g) {
    constexpr int kStart = 3, kEnd = 4, kSolid = 0;
    int starts = 0, ends = 0, sr = 0, sc = 0, er = 0, ec = 0;
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) {
            if (g.at(r, c) == kStart) ++starts, sr = r, sc = c;
            if (g.at(r, c) == kEnd) ++ends, er = r, ec = c;
        }
    if (starts != 1 || ends != 1) return false;
    std::vector<char> seen(static_cast<std::size_t>(g.rows) * g.cols, 0);
    std::function<bool(int, int)> dfs = [&](int r, int c) -> bool {
        if (!g.in_bounds(r, c) || g.at(r, c) == kSolid) return false;
        char& mark = seen[static_cast<std::size_t>(r) * g.cols + c];
        if (mark) return false;
        mark = 1;
        if (r == er && c == ec) return true;
        return dfs(r - 1, c) || dfs(r + 1, c) || dfs(r, c - 1) || dfs(r, c + 1);
    };
    return dfs(sr, sc);
}

bool reachability_oracle(std::string& detail) {
    const TileSet& ts = TileSet::cave();
    const MoveModel model = MoveModel::cave();
    long long checked = 0;

    // Full enumeration at 3x3 with exactly one start and one end.
    Grid g3(3, 3);
    for (int sp = 0; sp < 9; ++sp)
        for (int ep = 0; ep < 9; ++ep) {
            if (ep == sp) continue;
            for (int code = 0; code < 2187; ++code) {
                int rest = code;
                for (int pos = 0; pos < 9; ++pos) {
                    if (pos == sp) {
                        g3.cells[pos] = 3;
                    } else if (pos == ep) {
                        g3.cells[pos] = 4;
                    } else {
                        g3.cells[pos] = static_cast<std::uint8_t>(rest % 3);
                        rest /= 3;
                    }
                }
                ++checked;
                if (is_playable(g3, ts, model).playable != cave_oracle(g3)) {
                    detail = "3x3 disagreement: " + render_level(g3, ts);
                    return false;
                }
            }
        }

    // 1e5 sampled 4x4 grids.
    std::mt19937_64 rng(202);
    Grid g4(4, 4);
    for (int trial = 0; trial < 100000; ++trial) {
        for (auto& cell : g4.cells) cell = static_cast<std::uint8_t>(rng() % 3);
        const int sp = static_cast<int>(rng() % 16);
        int ep = static_cast<int>(rng() % 16);
        if (ep == sp) ep = (ep + 1) % 16;
        g4.cells[sp] = 3;
        g4.cells[ep] = 4;
        ++checked;
        if (is_playable(g4, ts, model).playable != cave_oracle(g4)) {
            detail = "4x4 disagreement: " + render_level(g4, ts);
            return false;
        }
    }
    detail = std::to_string(checked) + " grids, zero disagreements";
    return true;
}

// ---------------------------------------------------------------------------
// Criterion 4: corpus soundness
// ---------------------------------------------------------------------------

bool corpus_soundness(std::string& detail) {
    for (Game game : {Game::Cave, Game::Mario}) {
        CorpusSpec spec =
            game == Game::Cave ? CorpusSpec::cave_preset() : CorpusSpec::mario_preset();
        spec.per_class = 100;
        spec.seed = 7;
        const TileSet& ts = TileSet::for_game(game);
        const MoveModel model = MoveModel::for_game(game);
        const std::vector<CorpusEntry> corpus = build_corpus(spec);
        if (corpus.size() != 600) {
            detail = to_string(game) + ": expected 600 entries, got " +
                     std::to_string(corpus.size());
            return false;
        }
        std::vector<Grid> playable_grids;
        for (const auto& e : corpus)
            if (e.playable) playable_grids.push_back(e.grid);
        const PatternDict dict = extract_patterns(playable_grids, spec.window);
        for (const auto& e : corpus) {
            if (is_playable(e.grid, ts, model).playable != e.playable) {
                detail = to_string(game) + ": verdict mismatch on a " +
                         (e.playable ? "playable" : "unplayable") + " entry";
                return false;
            }
            if (count_features(e.grid, game) != e.feature_count ||
                e.feature_count != e.class_label) {
                detail = to_string(game) + ": feature count mismatch";
                return false;
            }
            if (!e.playable && !dict.contains_all_blocks(e.grid)) {
                detail = to_string(game) + ": unplayable level has a block outside the " +
                         "playable-corpus pattern dictionary";
                return false;
            }
        }
    }
    detail = "cave and mario, 600 entries each, all verified";
    return true;
}

// ---------------------------------------------------------------------------
// Criteria 5 and 7 share the desk experiment-1 run.
// ---------------------------------------------------------------------------

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool dirs_equal(const fs::path& a, const fs::path& b, std::string& detail) {
    std::vector<fs::path> ra, rb;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) ra.push_back(fs::relative(e.path(), a));
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file()) rb.push_back(fs::relative(e.path(), b));
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
    if (ra != rb) {
        detail = "file lists differ";
        return false;
    }
    for (const auto& rel : ra)
        if (read_file(a / rel) != read_file(b / rel)) {
            detail = "byte difference in " + rel.string();
            return false;
        }
    return true;
}

exp::RunReport g_exp1_report;
bool g_exp1_ok = false;

bool determinism(std::string& detail) {
    exp::ExperimentPlan plan =
        exp::parse_plan(read_file(g_source_dir / "configs" / "exp1-cave-desk.cfg"));
    plan.seeds = {11};
    const fs::path root = fs::temp_directory_path() / "levelsmith-acceptance-exp1";
    fs::remove_all(root);
    exp::RunReport r1 = exp::run_plan(plan, root / "a");
    exp::RunReport r2 = exp::run_plan(plan, root / "b");
    g_exp1_report = r1;
    if (!dirs_equal(r1.run_dir, r2.run_dir, detail)) return false;
    g_exp1_ok = true;
    detail = "two runs byte-identical (models, samples, reports)";
    return true;
}

bool exp1_schema(std::string& detail) {
    if (!g_exp1_ok) {
        detail = "skipped: determinism run unavailable";
        return false;
    }
    const exp::RunReport& report = g_exp1_report;
    for (const auto& table : report.per_seed)
        for (std::size_t k = 0; k < table.kinds.size(); ++k) {
            const auto& cell = table.cells[k][0];
            if (!cell.present) {
                detail = to_string(table.kinds[k]) + " cell failed: " + cell.error;
                return false;
            }
            if (cell.percent_playable < 0.0 || cell.percent_playable > 100.0) {
                detail = "playable% out of range";
                return false;
            }
        }
    const std::string text = read_file(report.run_dir / "report.txt");
    if (text.find("67.8 / 72.0 / 75.4") == std::string::npos ||
        text.find("87.0 / 89.6 / 66.6") == std::string::npos) {
        detail = "published reference rows missing from report";
        return false;
    }
    detail = "3-model playable% table with reference rows";
    return true;
}

// ---------------------------------------------------------------------------
// Criterion 6: training efficacy floor
// ---------------------------------------------------------------------------

double playable_rate(const std::vector<Grid>& grids, const TileSet& ts, const MoveModel& model) {
    int n = 0;
    for (const Grid& g : grids) n += is_playable(g, ts, model).playable;
    return static_cast<double>(n) / static_cast<double>(grids.size());
}

bool efficacy_floor(std::string& detail) {
    CorpusSpec spec = CorpusSpec::cave_preset();
    spec.per_class = 300;
    spec.seed = 7;
    const TileSet& ts = TileSet::cave();
    const MoveModel move = MoveModel::cave();
    const std::vector<CorpusEntry> corpus = build_corpus(spec);

    std::vector<double> ratios;
    std::ostringstream log;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const Partition part =
            partition_samples(corpus, Objective::playability(), ModelKind::Vanilla, seed);
        gan::TrainConfig config;  // batch 32, lr 5e-5, 200 iterations
        config.seed = seed;

        // The untrained baseline replays the exact initialization sequence
        // the trainer uses before its first step.
        std::mt19937_64 init_rng(config.seed);
        gan::GeneratorNet untrained =
            gan::build_generator(spec.rows, spec.cols, ts.size(), config.latent_dim, 0, init_rng);
        std::mt19937_64 base_rng(child_seed(seed, 0, 0, 0x5A11));
        const double base =
            playable_rate(gan::sample(untrained, 500, std::nullopt, ts, base_rng), ts, move);

        gan::TrainedModel model = gan::train(ModelKind::Vanilla, part, ts, config);
        std::mt19937_64 sample_rng(child_seed(seed, 0, 0, 0x5A11));
        const double trained =
            playable_rate(gan::sample(model.gen, 500, std::nullopt, ts, sample_rng), ts, move);

        const double ratio = base > 0.0 ? trained / base
                             : trained > 0.0 ? std::numeric_limits<double>::infinity()
                                             : 0.0;
        ratios.push_back(ratio);
        log << " seed" << seed << " " << trained << "/" << base;
    }
    std::sort(ratios.begin(), ratios.end());
    const double median = ratios[1];
    std::ostringstream ss;
    ss << "median ratio " << median << " (trained/untrained playable rate:" << log.str() << ")";
    detail = ss.str();
    return median >= 1.5;
}

// ---------------------------------------------------------------------------
// Criterion 8: experiment-2 schema
// ---------------------------------------------------------------------------

bool exp2_schema(std::string& detail) {
    exp::ExperimentPlan plan =
        exp::parse_plan(read_file(g_source_dir / "configs" / "exp2-cave-desk.cfg"));
    plan.seeds = {11};
    const fs::path root = fs::temp_directory_path() / "levelsmith-acceptance-exp2";
    fs::remove_all(root);
    exp::RunReport report = exp::run_plan(plan, root);

    for (const auto& table : report.per_seed)
        for (std::size_t k = 0; k < table.kinds.size(); ++k)
            for (std::size_t c = 0; c < table.cells[k].size(); ++c) {
                const auto& cell = table.cells[k][c];
                if (!cell.present) {
                    detail = to_string(table.kinds[k]) + " class " +
                             std::to_string(table.classes[c]) + " failed: " + cell.error;
                    return false;
                }
                if (cell.percent_playable_correct >
                    std::min(cell.percent_correct, cell.percent_playable) + 1e-9) {
                    detail = "containment invariant violated";
                    return false;
                }
            }
    for (int k : plan.classes) {
        const fs::path meta_path = report.run_dir / "models" /
                                   ("seed11-cgan-class" + std::to_string(k) + ".bin.meta");
        const auto meta = gan::read_sidecar(meta_path);
        if (meta.at("sample_label_neg_flag") != "0" ||
            meta.at("sample_label_class") != std::to_string(k)) {
            detail = "cgan sidecar label metadata wrong for class " + std::to_string(k);
            return false;
        }
    }
    detail = "all cells scored, invariant holds, cgan sampled with label (k,0)";
    return true;
}

// ---------------------------------------------------------------------------
// Criterion 9: persistence round trip
// ---------------------------------------------------------------------------

bool persistence_roundtrip(std::string& detail) {
    CorpusSpec spec = CorpusSpec::cave_preset();
    spec.per_class = 8;
    spec.seed = 31;
    const TileSet& ts = TileSet::cave();
    const std::vector<CorpusEntry> corpus = build_corpus(spec);
    gan::TrainConfig config;
    config.batch_size = 8;
    config.iterations = 3;
    config.critic_steps_per_gen_step = 2;
    config.latent_dim = 16;
    config.seed = 5;

    for (ModelKind kind : {ModelKind::Vanilla, ModelKind::Rumi, ModelKind::CGan}) {
        const Partition part =
            partition_samples(corpus, Objective::playability(), kind, config.seed);
        gan::TrainedModel model = gan::train(kind, part, ts, config);
        const fs::path path = fs::temp_directory_path() /
                              ("levelsmith-acceptance-" + to_string(kind) + ".bin");
        gan::save_model(path, model.gen, model.critic, {{"kind", to_string(kind)}});
        gan::LoadedModel loaded = gan::load_model(path);

        std::optional<LabelPair> label;
        if (kind == ModelKind::CGan) label = LabelPair{1, 0};
        std::mt19937_64 r1(99), r2(99);
        const auto a = gan::sample(model.gen, 32, label, ts, r1);
        const auto b = gan::sample(loaded.gen, 32, label, ts, r2);
        if (a != b) {
            detail = to_string(kind) + ": reloaded samples differ";
            return false;
        }
        fs::remove(path);
        fs::remove(fs::path(path.string() + ".meta"));
    }
    detail = "vanilla, rumi and cgan reload to bitwise-identical samples";
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    g_source_dir = argc > 1 ? fs::path(argv[1]) : fs::current_path();

    criterion("gradient oracle vs central finite differences", gradient_oracle);
    criterion("loss identities at the symmetric point", loss_identities);
    criterion("cave reachability vs exhaustive DFS oracle", reachability_oracle);
    criterion("corpus soundness and pattern containment", corpus_soundness);
    criterion("byte-identical repeated experiment runs", determinism);
    criterion("training efficacy floor (vanilla cave, 3 seeds)", efficacy_floor);
    criterion("experiment-1 report schema with reference rows", exp1_schema);
    criterion("experiment-2 containment invariant and cgan labels", exp2_schema);
    criterion("model persistence round trip", persistence_roundtrip);

    if (g_failures) {
        std::printf("%d of %d criteria failed\n", g_failures, g_index);
        return 1;
    }
    std::printf("all %d criteria passed\n", g_index);
    return 0;
}
