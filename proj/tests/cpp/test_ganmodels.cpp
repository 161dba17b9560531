#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "levelsmith/ganmodels.hpp"

using namespace levelsmith;
using namespace levelsmith::gan;
namespace fs = std::filesystem;

namespace {

Value grad_input(std::vector<int> shape, std::vector<double> v) {
    Value t = ad::make_input(std::move(shape), std::move(v));
    t->requires_grad = true;
    t->g.assign(t->v.size(), 0.0);
    return t;
}

Value zeros_col(int n) { return ad::make_input({n, 1}, std::vector<double>(n, 0.0)); }

gan::TrainConfig desk_config() {
    gan::TrainConfig config;
    config.batch_size = 4;
    config.iterations = 2;
    config.critic_steps_per_gen_step = 2;
    config.latent_dim = 8;
    config.seed = 5;
    return config;
}

Partition cave_partition(ModelKind kind) {
    CorpusSpec spec = CorpusSpec::cave_preset();
    spec.per_class = 4;
    spec.seed = 31;
    return partition_samples(build_corpus(spec), Objective::playability(), kind, 3);
}

}  // namespace

TEST_CASE("symmetric log loss values") {
    // sigmoid(0) = 0.5 on every head input.
    Tape tape;
    auto [critic, gen] = loss_vanilla(tape, zeros_col(4), zeros_col(4), LossHead::LogGAN);
    CHECK(critic->v[0] == doctest::Approx(1.3863).epsilon(1e-3));
    CHECK(gen->v[0] == doctest::Approx(0.6931).epsilon(1e-3));

    Tape tape2;
    auto [rumi_critic, rumi_gen] =
        loss_rumi(tape2, zeros_col(4), zeros_col(4), zeros_col(4), 1.0, 0.5, LossHead::LogGAN);
    CHECK(rumi_critic->v[0] == doctest::Approx(1.7329).epsilon(1e-3));
    CHECK(rumi_gen->v[0] == doctest::Approx(0.6931).epsilon(1e-3));
}

TEST_CASE("wasserstein loss arithmetic") {
    Value d_real = ad::make_input({2, 1}, {1.0, 3.0});   // mean 2
    Value d_fake = ad::make_input({2, 1}, {0.5, -0.5});  // mean 0
    Tape tape;
    auto [critic, gen] = loss_vanilla(tape, d_real, d_fake, LossHead::Wasserstein);
    CHECK(critic->v[0] == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(gen->v[0] == doctest::Approx(0.0).epsilon(1e-12));

    Value d_neg = ad::make_input({2, 1}, {2.0, 6.0});  // mean 4
    Tape tape2;
    auto [rumi_critic, rumi_gen] =
        loss_rumi(tape2, d_real, d_neg, d_fake, 1.0, 0.5, LossHead::Wasserstein);
    // mean(fake) - 1*mean(pos) + 0.5*mean(neg) = 0 - 2 + 2
    CHECK(rumi_critic->v[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rumi_gen->v[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("rumi with alpha_minus zero equals the vanilla loss exactly") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> rv(6), fv(6), nv(6);
    for (auto* v : {&rv, &fv, &nv})
        for (double& x : *v) x = dist(rng);
    for (LossHead head : {LossHead::LogGAN, LossHead::Wasserstein}) {
        Value d_real = ad::make_input({6, 1}, rv);
        Value d_fake = ad::make_input({6, 1}, fv);
        Value d_neg = ad::make_input({6, 1}, nv);
        Tape ta, tb;
        auto vanilla = loss_vanilla(ta, d_real, d_fake, head);
        auto rumi = loss_rumi(tb, d_real, d_neg, d_fake, 1.0, 0.0, head);
        CHECK(rumi.first->v[0] == vanilla.first->v[0]);
        CHECK(rumi.second->v[0] == vanilla.second->v[0]);
    }
}

TEST_CASE("cgan loss shares the vanilla functional form") {
    Value d_real = ad::make_input({3, 1}, {0.2, -1.0, 0.4});
    Value d_fake = ad::make_input({3, 1}, {0.9, 0.1, -0.3});
    for (LossHead head : {LossHead::LogGAN, LossHead::Wasserstein}) {
        Tape ta, tb;
        auto a = loss_vanilla(ta, d_real, d_fake, head);
        auto b = loss_cgan(tb, d_real, d_fake, head);
        CHECK(a.first->v[0] == b.first->v[0]);
        CHECK(a.second->v[0] == b.second->v[0]);
    }
}

TEST_CASE("loss validation errors") {
    Tape tape;
    Value d = zeros_col(2);
    Value empty = ad::make_input({0, 1}, {});
    CHECK_THROWS_AS(loss_vanilla(tape, empty, d, LossHead::LogGAN), EmptyBatch);
    CHECK_THROWS_AS(loss_rumi(tape, d, d, d, 0.0, 0.5, LossHead::LogGAN), NegativeAlpha);
    CHECK_THROWS_AS(loss_rumi(tape, d, d, d, 1.0, -0.1, LossHead::LogGAN), NegativeAlpha);
    CHECK_THROWS_AS(loss_rumi(tape, d, empty, d, 1.0, 0.5, LossHead::LogGAN), EmptyBatch);
    // alpha_minus 0 skips the negative term, so an empty negative batch is fine.
    CHECK_NOTHROW(loss_rumi(tape, d, empty, d, 1.0, 0.0, LossHead::LogGAN));
}

TEST_CASE("loss gradients match finite differences on both heads") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> dist(0.0, 1.0);
    auto draw = [&](int n) {
        std::vector<double> v(n);
        for (double& x : v) x = dist(rng);
        return grad_input({n, 1}, std::move(v));
    };
    for (LossHead head : {LossHead::LogGAN, LossHead::Wasserstein}) {
        Value d_real = draw(5), d_fake = draw(5), d_neg = draw(5);
        auto critic_v = [&](Tape& t) { return loss_vanilla(t, d_real, d_fake, head).first; };
        auto gen_v = [&](Tape& t) { return loss_vanilla(t, d_real, d_fake, head).second; };
        auto critic_r = [&](Tape& t) {
            return loss_rumi(t, d_real, d_neg, d_fake, 1.0, 0.5, head).first;
        };
        CHECK(gradcheck::max_rel_error(critic_v, {d_real, d_fake}) < 1e-4);
        CHECK(gradcheck::max_rel_error(gen_v, {d_fake}) < 1e-4);
        CHECK(gradcheck::max_rel_error(critic_r, {d_real, d_neg, d_fake}) < 1e-4);
    }
}

TEST_CASE("encode_label one-hot layout") {
    const std::vector<int> classes{1, 2, 3};
    CHECK(encode_label({2, 0}, classes) == std::vector<double>{0, 1, 0, 0});
    CHECK(encode_label({3, 1}, classes) == std::vector<double>{0, 0, 1, 1});
    CHECK(encode_label({1, 0}, classes) == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("generator and critic forward shapes") {
    std::mt19937_64 rng(6);
    GeneratorNet gen = build_generator(14, 14, 5, 8, 0, rng);
    CriticNet critic = build_critic(14, 14, 5, 0, rng);
    Tape tape;
    Value z = ad::make_input({2, 8}, std::vector<double>(16, 0.1));
    Value x = gen.forward(tape, z, nullptr, true);
    CHECK(x->shape == std::vector<int>{2, 5, 14, 14});
    for (int i = 0; i < 2 * 14 * 14; ++i) {
        const int ni = i / (14 * 14), s = i % (14 * 14);
        double sum = 0.0;
        for (int ch = 0; ch < 5; ++ch) sum += x->v[(ni * 5 + ch) * 14 * 14 + s];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    Value d = critic.forward(tape, x, nullptr, true);
    CHECK(d->shape == std::vector<int>{2, 1});
}

TEST_CASE("builders reject odd or tiny grids") {
    std::mt19937_64 rng(7);
    CHECK_THROWS_AS(build_generator(13, 14, 5, 8, 0, rng), IncompatibleDims);
    CHECK_THROWS_AS(build_generator(14, 15, 5, 8, 0, rng), IncompatibleDims);
    CHECK_THROWS_AS(build_generator(4, 14, 5, 8, 0, rng), IncompatibleDims);
    CHECK_THROWS_AS(build_critic(13, 14, 5, 0, rng), IncompatibleDims);
}

TEST_CASE("train validates the partition against the model kind") {
    Partition rumi_part = cave_partition(ModelKind::Rumi);
    Partition vanilla_part = cave_partition(ModelKind::Vanilla);
    const TileSet& ts = TileSet::cave();
    gan::TrainConfig config = desk_config();

    CHECK_THROWS_AS(train(ModelKind::Vanilla, rumi_part, ts, config), PartitionMismatch);
    CHECK_THROWS_AS(train(ModelKind::Rumi, vanilla_part, ts, config), PartitionMismatch);
    Partition unlabeled = rumi_part;
    unlabeled.positive_labels.clear();
    unlabeled.negative_labels.clear();
    CHECK_THROWS_AS(train(ModelKind::CGan, unlabeled, ts, config), PartitionMismatch);
    Partition empty;
    CHECK_THROWS_AS(train(ModelKind::Vanilla, empty, ts, config), PartitionMismatch);
}

TEST_CASE("training runs, records history and is deterministic") {
    const TileSet& ts = TileSet::cave();
    gan::TrainConfig config = desk_config();
    Partition part = cave_partition(ModelKind::Vanilla);
    TrainedModel a = train(ModelKind::Vanilla, part, ts, config);
    TrainedModel b = train(ModelKind::Vanilla, part, ts, config);
    CHECK(a.history.critic_loss.size() == 2);
    CHECK(a.history.gen_loss.size() == 2);
    CHECK(a.history.gen_grad_norm.size() == 2);
    for (double v : a.history.critic_loss) CHECK(std::isfinite(v));
    auto pa = a.gen.params();
    auto pb = b.gen.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->v == pb[i]->v);

    gan::TrainConfig other = config;
    other.seed = 6;
    TrainedModel c = train(ModelKind::Vanilla, part, ts, other);
    bool any_diff = false;
    auto pc = c.gen.params();
    for (std::size_t i = 0; i < pa.size(); ++i) any_diff |= pa[i]->v != pc[i]->v;
    CHECK(any_diff);
}

TEST_CASE("wasserstein critic weights stay clipped after every critic step") {
    const TileSet& ts = TileSet::cave();
    gan::TrainConfig config = desk_config();
    config.loss_head = LossHead::Wasserstein;
    Partition part = cave_partition(ModelKind::Rumi);
    int checks = 0;
    train(ModelKind::Rumi, part, ts, config, [&](const CriticNet& critic) {
        CriticNet& mutable_critic = const_cast<CriticNet&>(critic);
        CHECK(ad::max_abs(mutable_critic.params()) <= config.clip + 1e-12);
        ++checks;
    });
    CHECK(checks == config.iterations * config.critic_steps_per_gen_step);
}

TEST_CASE("sampling enforces label presence and is rng-deterministic") {
    const TileSet& ts = TileSet::cave();
    gan::TrainConfig config = desk_config();
    TrainedModel vanilla = train(ModelKind::Vanilla, cave_partition(ModelKind::Vanilla), ts,
                                 config);
    TrainedModel cgan = train(ModelKind::CGan, cave_partition(ModelKind::CGan), ts, config);

    std::mt19937_64 rng(9);
    CHECK_THROWS_AS(sample(vanilla.gen, 2, LabelPair{1, 0}, ts, rng), LabelRequired);
    CHECK_THROWS_AS(sample(cgan.gen, 2, std::nullopt, ts, rng), LabelRequired);

    std::mt19937_64 r1(9), r2(9);
    auto s1 = sample(vanilla.gen, 70, std::nullopt, ts, r1);  // spans two chunks
    auto s2 = sample(vanilla.gen, 70, std::nullopt, ts, r2);
    REQUIRE(s1.size() == 70);
    CHECK(s1 == s2);
    for (const Grid& g : s1) {
        CHECK(g.rows == 14);
        CHECK(g.cols == 14);
    }

    std::mt19937_64 r3(9);
    auto s3 = sample(cgan.gen, 3, LabelPair{2, 0}, ts, r3);
    CHECK(s3.size() == 3);
}

TEST_CASE("model persistence reproduces samples bitwise") {
    const TileSet& ts = TileSet::cave();
    gan::TrainConfig config = desk_config();
    TrainedModel model = train(ModelKind::CGan, cave_partition(ModelKind::CGan), ts, config);

    const fs::path path = fs::temp_directory_path() / "levelsmith-model-test.bin";
    save_model(path, model.gen, model.critic, {{"kind", "cgan"}, {"game", "cave"}});
    LoadedModel loaded = load_model(path);

    CHECK(loaded.meta.at("kind") == "cgan");
    CHECK(loaded.meta.at("rows") == "14");
    CHECK(loaded.meta.at("latent_dim") == "8");
    CHECK(loaded.gen.label_classes == model.gen.label_classes);

    auto pa = model.gen.params();
    auto pb = loaded.gen.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->v == pb[i]->v);
    CHECK(loaded.gen.bn0.running_mean == model.gen.bn0.running_mean);
    CHECK(loaded.gen.bn1.running_var == model.gen.bn1.running_var);

    std::mt19937_64 r1(11), r2(11);
    auto original = sample(model.gen, 8, LabelPair{1, 0}, ts, r1);
    auto reloaded = sample(loaded.gen, 8, LabelPair{1, 0}, ts, r2);
    CHECK(original == reloaded);

    fs::remove(path);
    fs::remove(fs::path(path.string() + ".meta"));
}

TEST_CASE("sidecar files round trip") {
    const fs::path path = fs::temp_directory_path() / "levelsmith-sidecar-test.meta";
    std::map<std::string, std::string> meta{
        {"kind", "rumi"}, {"seed", "42"}, {"corpus_hash", "abc123"}};
    write_sidecar(path, meta);
    CHECK(read_sidecar(path) == meta);
    fs::remove(path);
    CHECK_THROWS_AS(read_sidecar(path), GanError);
}

TEST_CASE("loss head names round trip") {
    CHECK(loss_head_from_string(to_string(LossHead::LogGAN)) == LossHead::LogGAN);
    CHECK(loss_head_from_string(to_string(LossHead::Wasserstein)) == LossHead::Wasserstein);
    CHECK_FALSE(loss_head_from_string("hinge").has_value());
}
