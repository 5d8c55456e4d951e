#include <catch2/catch_amalgamated.hpp>

#include "advpat/reid.hpp"

using namespace advpat;

namespace {

ReIDModel random_model(int h, int w, int dim, std::uint64_t seed) {
    Rng rng = make_rng(seed, "test-model");
    ReIDModel m;
    m.net = EmbeddingNet(h, w, dim, rng);
    m.classifier.init(dim, 2, rng);
    m.num_classes = 2;
    return m;
}

Image random_image(int h, int w, Rng& rng) {
    Image x(h, w);
    for (double& v : x.data()) v = uniform(rng, 0.0, 1.0);
    return x;
}

Dataset small_dataset(int ids, int cams, int per, std::uint64_t seed = 1) {
    ToyDatasetConfig cfg;
    cfg.identity_count = ids;
    cfg.camera_count = cams;
    cfg.images_per_identity_per_camera = per;
    cfg.image_height = 32;
    cfg.image_width = 16;
    cfg.seed = seed;
    return generate_toy_dataset(cfg);
}

}  // namespace

TEST_CASE("embeddings are unit-norm") {
    const ReIDModel m = random_model(16, 16, 32, 3);
    Rng rng = make_rng(1, "imgs");
    for (int i = 0; i < 5; ++i) {
        const auto e = embed(m, random_image(16, 16, rng));
        double n = 0.0;
        for (double v : e) n += v * v;
        CHECK(std::sqrt(n) == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("similarity is symmetric, bounded, and 1 for identical inputs") {
    const ReIDModel m = random_model(16, 16, 32, 5);
    Rng rng = make_rng(2, "imgs");
    const Image a = random_image(16, 16, rng);
    const Image b = random_image(16, 16, rng);
    const double sab = similarity(m, a, b);
    const double sba = similarity(m, b, a);
    CHECK(sab == Catch::Approx(sba).margin(1e-14));
    CHECK(sab >= 0.0);
    CHECK(sab <= 1.0);
    CHECK(similarity(m, a, a) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("similarity of opposite embeddings is 0") {
    std::vector<double> e{1.0, 0.0, 0.0};
    std::vector<double> ne{-1.0, 0.0, 0.0};
    CHECK(similarity_from_embeddings(e, ne) == Catch::Approx(0.0).margin(1e-15));
    CHECK(similarity_from_embeddings(e, e) == Catch::Approx(1.0).margin(1e-15));
    std::vector<double> orth{0.0, 1.0, 0.0};
    CHECK(similarity_from_embeddings(e, orth) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("normalizing a degenerate embedding raises a numerical error") {
    std::vector<double> zero(8, 0.0);
    CHECK_THROWS_AS(nn::l2_normalize(zero), NumericalError);
}

TEST_CASE("similarity gradient matches central finite differences") {
    const ReIDModel m = random_model(16, 16, 16, 7);
    Rng rng = make_rng(3, "imgs");
    const Image a = random_image(16, 16, rng);
    const Image b = random_image(16, 16, rng);

    for (WrtInput wrt : {WrtInput::a, WrtInput::b}) {
        const SimilarityGradient sg = similarity_gradient(m, a, b, wrt);
        CHECK(sg.score == Catch::Approx(similarity(m, a, b)).margin(1e-14));
        const double step = 1e-5;
        Image& target = const_cast<Image&>(wrt == WrtInput::a ? a : b);
        for (size_t i = 0; i < target.size(); i += 53) {
            const double orig = target.data()[i];
            target.data()[i] = orig + step;
            const double hi = similarity(m, a, b);
            target.data()[i] = orig - step;
            const double lo = similarity(m, a, b);
            target.data()[i] = orig;
            const double fd = (hi - lo) / (2 * step);
            CHECK(sg.grad[i] == Catch::Approx(fd).margin(1e-7));
        }
    }
}

TEST_CASE("similarity gradient requires model-sized inputs") {
    const ReIDModel m = random_model(16, 16, 16, 7);
    Rng rng = make_rng(4, "imgs");
    const Image big = random_image(24, 24, rng);
    const Image ok = random_image(16, 16, rng);
    CHECK_THROWS_AS(similarity_gradient(m, big, ok, WrtInput::a), std::invalid_argument);
}

TEST_CASE("pair embedding gradient accumulation matches the analytic pair term") {
    const ReIDModel m = random_model(16, 16, 16, 11);
    Rng rng = make_rng(5, "imgs");
    const Image a = random_image(16, 16, rng);
    const Image b = random_image(16, 16, rng);
    EmbeddingNet::Workspace wa, wb;
    m.net.forward(a, wa);
    m.net.forward(b, wb);
    std::vector<double> ge_a(16, 0.0), ge_b(16, 0.0);
    accumulate_pair_embedding_grads(wa, wb, 2.0, ge_a, ge_b);
    for (size_t i = 0; i < ge_a.size(); ++i) {
        CHECK(ge_a[i] == Catch::Approx(wb.e[i]).margin(1e-15));  // 2 * 0.5 * e_b
        CHECK(ge_b[i] == Catch::Approx(wa.e[i]).margin(1e-15));
    }
}

TEST_CASE("bilinear resize is identity at matching size and preserves constants") {
    Rng rng = make_rng(6, "imgs");
    const Image x = random_image(16, 12, rng);
    CHECK(resize_bilinear(x, 16, 12) == x);
    Image flat(20, 10, 0.31);
    const Image r = resize_bilinear(flat, 14, 18);
    for (double v : r.data()) CHECK(v == Catch::Approx(0.31).margin(1e-12));
}

TEST_CASE("preprocess resizes arbitrary inputs to the model size") {
    const ReIDModel m = random_model(16, 16, 16, 13);
    Rng rng = make_rng(7, "imgs");
    const Image big = random_image(48, 24, rng);
    const Image p = preprocess(m, big);
    CHECK(p.height() == 16);
    CHECK(p.width() == 16);
    CHECK_NOTHROW(embed(m, big));  // embed handles resizing internally
}

TEST_CASE("training config and dataset validation") {
    TrainConfig tc;
    tc.epochs = 0;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    Dataset one_cam = small_dataset(3, 2, 6);
    for (auto& e : one_cam.entries) e.camera = 1;
    CHECK_THROWS_AS(train_model(one_cam, ModelVariant::classification_embedding, TrainConfig{}),
                    ConfigError);
    CHECK_THROWS_AS(train_model(Dataset{}, ModelVariant::classification_embedding, TrainConfig{}),
                    ConfigError);
}

TEST_CASE("variant names round-trip") {
    CHECK(variant_from_name("A") == ModelVariant::siamese_verification);
    CHECK(variant_from_name("B") == ModelVariant::classification_embedding);
    CHECK(variant_from_name(variant_name(ModelVariant::siamese_verification)) ==
          ModelVariant::siamese_verification);
    CHECK_THROWS_AS(variant_from_name("C"), ConfigError);
}

TEST_CASE("training the classification variant learns cross-camera identity structure") {
    const Dataset ds = small_dataset(6, 3, 10);
    TrainConfig tc;
    tc.epochs = 10;
    tc.learning_rate = 3e-3;
    tc.seed = 7;
    const ReIDModel m = train_model(ds, ModelVariant::classification_embedding, tc, 32);
    CHECK(m.holdout_rank1 >= 0.0);
    CHECK(m.holdout_rank1 <= 1.0);
    CHECK(m.holdout_rank1 >= 0.5);  // well above the ~1/6 chance level

    // same identity across cameras scores higher on average than different
    // identities across cameras
    auto [train, test] = split_dataset(ds, 5);
    double same = 0, diff = 0;
    int ns = 0, nd = 0;
    std::vector<std::vector<double>> embs;
    for (const auto& e : test.entries) embs.push_back(embed(m, e.image));
    for (size_t i = 0; i < test.entries.size(); ++i)
        for (size_t j = i + 1; j < test.entries.size(); ++j) {
            if (test.entries[i].camera == test.entries[j].camera) continue;
            const double s = similarity_from_embeddings(embs[i], embs[j]);
            if (test.entries[i].identity == test.entries[j].identity) { same += s; ++ns; }
            else { diff += s; ++nd; }
        }
    REQUIRE(ns > 0);
    REQUIRE(nd > 0);
    CHECK(same / ns > diff / nd);
}

TEST_CASE("training the siamese variant converges and is seed-reproducible") {
    const Dataset ds = small_dataset(4, 3, 8);
    TrainConfig tc;
    tc.epochs = 4;
    tc.seed = 11;
    const ReIDModel a = train_model(ds, ModelVariant::siamese_verification, tc, 16);
    CHECK(a.holdout_rank1 >= 0.0);
    CHECK(a.variant == ModelVariant::siamese_verification);
    CHECK_FALSE(a.verifier_w.empty());

    const ReIDModel b = train_model(ds, ModelVariant::siamese_verification, tc, 16);
    CHECK(a.net.fc_.w == b.net.fc_.w);
    CHECK(a.holdout_rank1 == b.holdout_rank1);
}
