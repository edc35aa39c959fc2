#include <gtest/gtest.h>

#include <numeric>

#include "dkmo/bundle.hpp"
#include "dkmo/error.hpp"
#include "dkmo/mdkmo.hpp"
#include "dkmo/synthetic.hpp"
#include "test_util.hpp"

using namespace dkmo::model;
using dkmo::Rng;
using dkmo::kernels::KernelFunction;
using dkmo::linalg::Matrix;

namespace {

DkmoConfig small_config(Index out_width = 8) {
    DkmoConfig cfg;
    cfg.branch.hidden = {16, 16, 16, out_width};
    cfg.train.epochs = 20;
    cfg.train.batch_size = 32;
    return cfg;
}

EmbeddingPlan small_plan() {
    EmbeddingPlan plan;
    plan.rank = 6;
    return plan;
}

KernelFunction rbf_for(const Matrix& x) {
    KernelFunction k;
    k.gamma = dkmo::kernels::estimate_gamma(dkmo::kernels::feature_distances(x, k.kind));
    k.normalized = true;
    return k;
}

// Three noisy views of the same blobs.
struct Views {
    std::vector<KernelSource> sources;
    std::vector<Matrix> x;
    std::vector<int> y;
};

Views noisy_views(Index n, std::uint64_t seed, double noise = 0.3) {
    dkmo::data::BlobsParams p;
    p.classes = 3;
    p.samples = n;
    const auto ds = dkmo::data::blobs(p, seed);
    Rng rng(seed + 100);
    Views v;
    v.y = ds.labels;
    for (int m = 0; m < 3; ++m) {
        Matrix x = ds.views.front().values + noise * testutil::gaussian(n, 2, rng);
        v.sources.push_back({"view" + std::to_string(m), std::nullopt, x, rbf_for(x)});
        v.x.push_back(x);
    }
    return v;
}

std::vector<DkmoModel> models_of(std::vector<DkmoTrainResult> r) {
    std::vector<DkmoModel> out;
    for (auto& t : r) out.push_back(std::move(t.model));
    return out;
}

std::vector<Index> all_rows(Index n) {
    std::vector<Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

bool same_network(const dkmo::nn::Network& a, const dkmo::nn::Network& b) {
    if (a.layers().size() != b.layers().size()) return false;
    for (std::size_t i = 0; i < a.layers().size(); ++i) {
        const auto& la = a.layers()[i];
        const auto& lb = b.layers()[i];
        if (la.weight != lb.weight || la.bias != lb.bias || la.gamma != lb.gamma || la.beta != lb.beta ||
            la.running_mean != lb.running_mean || la.running_var != lb.running_var)
            return false;
    }
    return true;
}

double accuracy_of(const Matrix& proba, const std::vector<int>& y) { return dkmo::nn::accuracy(proba, y); }

}  // namespace

class MdkmoFixture : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        views_ = new Views(noisy_views(90, 1));
        models_ = new std::vector<DkmoModel>(
            models_of(pretrain_all(views_->sources, views_->y, small_plan(), small_config(), 5)));
    }
    static void TearDownTestSuite() {
        delete views_;
        delete models_;
    }
    static Views* views_;
    static std::vector<DkmoModel>* models_;
};
Views* MdkmoFixture::views_ = nullptr;
std::vector<DkmoModel>* MdkmoFixture::models_ = nullptr;

TEST_F(MdkmoFixture, RejectsSingleKernel) {
    EXPECT_THROW(build_mdkmo(std::span(models_->data(), 1), {}, 1), dkmo::ConfigError);
}

TEST_F(MdkmoFixture, RejectsWidthMismatchUnderSum) {
    auto other = models_of(pretrain_all({views_->sources[0]}, views_->y, small_plan(), small_config(4), 5));
    std::vector<DkmoModel> mixed{(*models_)[0], other[0]};
    EXPECT_THROW(build_mdkmo(mixed, {}, 1), dkmo::ConfigError);
    GlobalFusionConfig concat;
    concat.merge = Merge::concat;
    EXPECT_EQ(build_mdkmo(mixed, concat, 1).head().input_width(), 12);
}

TEST_F(MdkmoFixture, ConcatHeadWidth) {
    auto wide = models_of(pretrain_all(views_->sources, views_->y, small_plan(), small_config(128), 5));
    GlobalFusionConfig concat;
    concat.merge = Merge::concat;
    const auto m = build_mdkmo(wide, concat, 1);
    EXPECT_EQ(m.head().input_width(), 384);
    EXPECT_EQ(m.head().output_width(), 3);
}

TEST_F(MdkmoFixture, BuildPreservesBodiesBitwise) {
    const auto m = build_mdkmo(*models_, {}, 2);
    ASSERT_EQ(m.kernel_count(), 3);
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& body = m.bodies()[k];
        const auto& src = (*models_)[k].body();
        ASSERT_EQ(body.branch_count(), src.branch_count());
        for (std::size_t p = 0; p < body.branches().size(); ++p)
            EXPECT_TRUE(same_network(body.branches()[p], src.branches()[p]));
    }
    EXPECT_EQ(m.kernel_names(), (std::vector<std::string>{"view0", "view1", "view2"}));
}

TEST_F(MdkmoFixture, IdenticalBodiesGiveSymmetricOutput) {
    std::vector<DkmoModel> twins{(*models_)[0], (*models_)[0]};
    const auto m = build_mdkmo(twins, {}, 3);
    const auto& ens = (*models_)[0].ensemble();
    const auto a = ens.gather(all_rows(10));
    std::vector<Index> shifted(10);
    std::iota(shifted.begin(), shifted.end(), 20);
    const auto b = ens.gather(shifted);
    const std::vector<std::vector<Matrix>> ab{a, b};
    const std::vector<std::vector<Matrix>> ba{b, a};
    EXPECT_EQ(m.predict_proba(ab), m.predict_proba(ba));
}

TEST_F(MdkmoFixture, ZeroEpochFinetuneIsNoOp) {
    auto m = build_mdkmo(*models_, {}, 4);
    auto before = m;
    dkmo::nn::TrainConfig tc;
    tc.epochs = 0;
    const auto log = finetune(m, views_->y, tc, 1);
    EXPECT_TRUE(log.epochs.empty());
    const auto a = m.networks();
    const auto b = before.networks();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(same_network(*a[i], *b[i]));
}

TEST_F(MdkmoFixture, FinetuneKeepsShapeAndIsDeterministic) {
    auto m1 = build_mdkmo(*models_, {}, 5);
    auto m2 = build_mdkmo(*models_, {}, 5);
    dkmo::nn::TrainConfig tc;
    tc.epochs = 5;
    finetune(m1, views_->y, tc, 9);
    finetune(m2, views_->y, tc, 9);
    EXPECT_EQ(m1.classes(), 3);
    const Matrix p1 = m1.predict_proba_rows(all_rows(90));
    EXPECT_EQ(p1.cols(), 3);
    EXPECT_EQ(p1, m2.predict_proba_rows(all_rows(90)));
}

TEST_F(MdkmoFixture, PredictReplaysTrainingRows) {
    auto m = build_mdkmo(*models_, {}, 6);
    dkmo::nn::TrainConfig tc;
    tc.epochs = 3;
    finetune(m, views_->y, tc, 2);
    std::vector<SampleInput> inputs;
    for (const auto& x : views_->x) inputs.push_back({x, std::nullopt});
    const Matrix replay = m.predict_proba(inputs);
    const Matrix stored = m.predict_proba_rows(all_rows(90));
    EXPECT_LT((replay - stored).cwiseAbs().maxCoeff(), 1e-10);
    for (Index i = 0; i < replay.rows(); ++i) EXPECT_NEAR(replay.row(i).sum(), 1.0, 1e-12);
    inputs.pop_back();
    EXPECT_THROW(m.predict_proba(inputs), dkmo::BindingError);
}

TEST_F(MdkmoFixture, BundleRoundTrip) {
    GlobalFusionConfig cfg;
    cfg.hidden = {8};
    auto m = build_mdkmo(*models_, cfg, 7);
    dkmo::nn::TrainConfig tc;
    tc.epochs = 2;
    finetune(m, views_->y, tc, 3);
    const auto dir = testutil::temp_dir("mdkmo_bundle");
    dkmo::bundle::BundleInfo info{"abc", 42, {"a", "b", "c"}, std::nullopt};
    dkmo::bundle::save_mdkmo(dir, m, info);
    EXPECT_EQ(dkmo::bundle::bundle_kind(dir), dkmo::bundle::BundleKind::mdkmo);
    auto loaded = dkmo::bundle::load_mdkmo(dir);
    EXPECT_EQ(loaded.info.config_hash, "abc");
    EXPECT_EQ(loaded.info.seed, 42u);
    EXPECT_EQ(loaded.info.class_names, info.class_names);
    const auto a = m.networks();
    const auto b = loaded.model.networks();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(same_network(*a[i], *b[i]));
    EXPECT_EQ(loaded.model.predict_proba_rows(all_rows(90)), m.predict_proba_rows(all_rows(90)));
    EXPECT_EQ(loaded.model.kernel_names(), m.kernel_names());
}

TEST_F(MdkmoFixture, DkmoBundleRoundTrip) {
    const auto& model = (*models_)[1];
    const auto dir = testutil::temp_dir("dkmo_bundle");
    dkmo::bundle::save_dkmo(dir, model, {"h", 1, {}, std::nullopt});
    EXPECT_EQ(dkmo::bundle::bundle_kind(dir), dkmo::bundle::BundleKind::dkmo);
    const auto loaded = dkmo::bundle::load_dkmo(dir);
    const SampleInput in{views_->x[1], std::nullopt};
    EXPECT_EQ(loaded.model.predict_proba(in), model.predict_proba(in));
    EXPECT_EQ(loaded.model.kernel_name(), "view1");
}

TEST(Mdkmo, PretrainOrderInvariance) {
    const auto v = noisy_views(60, 2);
    std::vector<KernelSource> permuted{v.sources[2], v.sources[0], v.sources[1]};
    auto a = models_of(pretrain_all(v.sources, v.y, small_plan(), small_config(), 11));
    auto b = models_of(pretrain_all(permuted, v.y, small_plan(), small_config(), 11, 2));
    for (int k = 0; k < 3; ++k) {
        const auto& ma = a[static_cast<std::size_t>((k + 2) % 3)];
        const auto& mb = b[static_cast<std::size_t>(k)];
        EXPECT_EQ(ma.kernel_name(), mb.kernel_name());
        for (std::size_t p = 0; p < ma.body().branches().size(); ++p)
            EXPECT_TRUE(same_network(ma.body().branches()[p], mb.body().branches()[p]));
    }
    const auto fa = build_mdkmo(a, {}, 3);
    const auto fb = build_mdkmo(b, {}, 3);
    std::vector<SampleInput> ia, ib;
    for (const auto& x : v.x) ia.push_back({x, std::nullopt});
    ib = {ia[2], ia[0], ia[1]};
    EXPECT_LT((fa.predict_proba(ia) - fb.predict_proba(ib)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Mdkmo, PretrainNoisyViewsAccurate) {
    const auto v = noisy_views(300, 3);
    DkmoConfig cfg;
    cfg.branch.hidden = {64, 128, 64, 32};
    cfg.train.epochs = 100;
    cfg.train.val_fraction = 0.2;
    EmbeddingPlan plan;
    plan.rank = 20;
    const auto results = pretrain_all(v.sources, v.y, plan, cfg, 4);
    ASSERT_EQ(results.size(), 3u);
    for (const auto& r : results) {
        ASSERT_GT(r.log.best_epoch, 0);
        EXPECT_GE(r.log.epochs[static_cast<std::size_t>(r.log.best_epoch - 1)].val_accuracy, 0.9) << r.model.kernel_name();
    }
}

TEST(Mdkmo, FusionNotWorseThanBestSingle) {
    // Three noisy views; the fused model should match the best single view.
    const Index n = 300;
    const auto v = noisy_views(2 * n, 5, 0.8);
    const auto split = dkmo::data::make_split(v.y, {0.5, std::nullopt, true}, 1);
    std::vector<KernelSource> train_sources;
    for (const auto& s : v.sources) {
        KernelSource t = s;
        t.features = dkmo::linalg::select_rows(*s.features, split.train);
        train_sources.push_back(t);
    }
    std::vector<int> ytr, yte;
    for (auto i : split.train) ytr.push_back(v.y[static_cast<std::size_t>(i)]);
    for (auto i : split.test) yte.push_back(v.y[static_cast<std::size_t>(i)]);
    DkmoConfig cfg;
    cfg.branch.hidden = {32, 64, 32, 16};
    cfg.train.epochs = 60;
    EmbeddingPlan plan;
    plan.rank = 20;
    auto models = models_of(pretrain_all(train_sources, ytr, plan, cfg, 6));
    double best_single = 0.0;
    std::vector<SampleInput> test_inputs;
    for (std::size_t k = 0; k < 3; ++k) {
        test_inputs.push_back({dkmo::linalg::select_rows(v.x[k], split.test), std::nullopt});
        best_single = std::max(best_single, accuracy_of(models[k].predict_proba(test_inputs.back()), yte));
    }
    auto fused = build_mdkmo(models, {}, 7);
    dkmo::nn::TrainConfig tc;
    tc.epochs = 30;
    finetune(fused, ytr, tc, 8);
    EXPECT_GE(accuracy_of(fused.predict_proba(test_inputs), yte), best_single - 0.01);
}
