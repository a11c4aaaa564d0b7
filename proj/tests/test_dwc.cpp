#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>

#include "scida/dwc.hpp"
#include "scida/errors.hpp"
#include "scida/synth.hpp"

using namespace scida;

namespace {

constexpr std::array<ParamGroup, 6> kAllGroups = {ParamGroup::g_cm,    ParamGroup::g_t,
                                                  ParamGroup::c1,      ParamGroup::c2,
                                                  ParamGroup::fc_head, ParamGroup::gcn};

ModelConfig tiny_model_config(int k) {
    ModelConfig mc;
    mc.k = k;
    mc.side = 16;
    mc.feature_dim = 8;
    mc.embed_dim = 4;
    mc.conv_widths = {4, 4, 4, 4};
    mc.seed = 3;
    return mc;
}

// Separable toy source: class c images are constant c / (k-1) plus noise.
Dataset constant_source(int k, int per_class, std::uint64_t seed) {
    Dataset ds;
    for (int c = 0; c < k; ++c) ds.categories.push_back("c" + std::to_string(c));
    ds.side = 16;
    Rng rng(seed);
    int id = 0;
    for (int c = 0; c < k; ++c)
        for (int i = 0; i < per_class; ++i) {
            ImageSample s;
            s.id = "x" + std::to_string(id++);
            s.pixels = Vec::Constant(3 * 16 * 16, double(c) / (k - 1));
            for (int p = 0; p < s.pixels.size(); ++p)
                s.pixels[p] = std::clamp(s.pixels[p] + 0.05 * (rng.uniform() - 0.5), 0.0, 1.0);
            s.label = LabelVector::from_indices(k, {c});
            ds.samples.push_back(std::move(s));
        }
    return ds;
}

DomainBatch batch_from(const Dataset& source, const Dataset& target, int n, int offset = 0) {
    DomainBatch batch;
    batch.source_images = Mat(n, source.pixel_count());
    batch.source_labels = Mat(n, source.num_classes());
    batch.target_images = Mat(n, target.pixel_count());
    for (int i = 0; i < n; ++i) {
        const auto& s = source.samples[(offset + i * 7) % source.size()];
        batch.source_images.row(i) = s.pixels.transpose();
        batch.source_labels.row(i) = s.label->values.transpose();
        const auto& t = target.samples[(offset + i) % target.size()];
        batch.target_images.row(i) = t.pixels.transpose();
        batch.target_ids.push_back(t.id);
    }
    return batch;
}

FocalParams focal_for(const Dataset& source) {
    FocalParams f;
    f.class_weights = class_frequencies(source);
    return f;
}

std::array<std::uint64_t, 6> group_hashes(ScidaModel& m) {
    std::array<std::uint64_t, 6> h{};
    for (std::size_t i = 0; i < kAllGroups.size(); ++i) h[i] = m.group_hash(kAllGroups[i]);
    return h;
}

std::pair<Dataset, Dataset> small_pair(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.k = 4;
    cfg.side = 16;
    cfg.source_per_class = 4;
    cfg.target_count = 16;
    cfg.max_labels = 2;
    auto [src, tgt] = generate_synthetic_pair(cfg, seed);
    return {std::move(src), strip_labels(tgt)};
}

}  // namespace

TEST_CASE("top-n label selection follows the tie rule") {
    Vec probs(3);
    probs << 0.9, 0.9, 0.1;
    CHECK(top_n_labels(probs, 1).positive_indices() == std::vector<int>{0});
    CHECK(top_n_labels(probs, 2).positive_indices() == std::vector<int>{0, 1});

    Vec flat = Vec::Constant(5, 0.5);
    CHECK(top_n_labels(flat, 3).positive_indices() == std::vector<int>{0, 1, 2});
}

TEST_CASE("pseudo-label extraction honors the delta semantics") {
    auto [source, target] = small_pair(1);
    ScidaModel model = ScidaModel::create(tiny_model_config(4));

    SUBCASE("delta of 1 selects every class") {
        const auto pseudo = extract_pseudo_labels(model, target, 1.0);
        CHECK(pseudo.n_delta == 4);
        for (const auto& lv : pseudo.labels) CHECK(lv.num_positive() == 4);
    }
    SUBCASE("round(delta * K) positives per image, raw scores retained") {
        const auto pseudo = extract_pseudo_labels(model, target, 0.5);
        CHECK(pseudo.n_delta == 2);
        REQUIRE(pseudo.ids.size() == static_cast<std::size_t>(target.size()));
        CHECK(pseudo.raw_probabilities.rows() == target.size());
        for (std::size_t i = 0; i < pseudo.labels.size(); ++i) {
            CHECK(pseudo.labels[i].num_positive() == 2);
            // positives really are the top-scoring classes
            const Vec row = pseudo.raw_probabilities.row(i).transpose();
            CHECK(pseudo.labels[i].positive_indices() ==
                  top_n_labels(row, 2).positive_indices());
        }
    }
    SUBCASE("rounding to zero positives is a configuration error") {
        CHECK_THROWS_AS(extract_pseudo_labels(model, target, 0.1), ConfigError);
        CHECK_THROWS_AS(extract_pseudo_labels(model, target, -0.2), ConfigError);
        CHECK_THROWS_AS(extract_pseudo_labels(model, target, 1.5), ConfigError);
    }
    SUBCASE("extraction is a pure function of (model, dataset, delta)") {
        const auto a = extract_pseudo_labels(model, target, 0.5);
        const auto b = extract_pseudo_labels(model, target, 0.5, 5);  // different batch size
        CHECK(a.ids == b.ids);
        CHECK((a.raw_probabilities - b.raw_probabilities).cwiseAbs().maxCoeff() == 0.0);
        for (std::size_t i = 0; i < a.labels.size(); ++i)
            CHECK(a.labels[i].positive_indices() == b.labels[i].positive_indices());
    }
    SUBCASE("json export carries delta and per-image class indices") {
        const auto pseudo = extract_pseudo_labels(model, target, 0.5);
        const std::string js = pseudo.to_json();
        CHECK(js.find("\"delta\"") != std::string::npos);
        CHECK(js.find("\"labels\"") != std::string::npos);
        CHECK(js.find(target.samples[0].id) != std::string::npos);
    }
}

TEST_CASE("supervised source step learns a separable toy problem") {
    const Dataset source = constant_source(2, 8, 5);
    const Dataset target = strip_labels(source);
    ScidaModel model = ScidaModel::create(tiny_model_config(2));
    const Sgd opt;
    const FocalParams focal = focal_for(source);

    const DomainBatch batch = batch_from(source, target, 8);
    const double initial = step_source_supervised(model, batch, focal, opt, 0.05);
    double final_loss = initial;
    for (int step = 1; step < 50; ++step)
        final_loss = step_source_supervised(model, batch, focal, opt, 0.05);
    CHECK(final_loss < 0.5 * initial);

    // both heads should agree on source samples once trained
    const Mat feats = model.g_cm.forward(batch.source_images);
    const Mat p1 = sigmoid(model.c1.forward(feats));
    const Mat p2 = sigmoid(model.c2.forward(feats));
    int agree = 0;
    for (int n = 0; n < p1.rows(); ++n) {
        int a1, a2;
        p1.row(n).maxCoeff(&a1);
        p2.row(n).maxCoeff(&a2);
        agree += a1 == a2;
    }
    CHECK(agree >= static_cast<int>(0.95 * p1.rows()));
}

TEST_CASE("a perfectly classified batch produces a near-zero gradient") {
    const Dataset source = constant_source(2, 4, 6);
    ScidaModel model = ScidaModel::create(tiny_model_config(2));
    const Sgd opt{0.0, 0.0};  // no momentum/decay: isolate the gradient
    const FocalParams focal = focal_for(source);

    // craft saturated heads: logits (+20, -20) regardless of features, so the
    // all-class-0 batch below is classified perfectly
    for (Mlp* head : {&model.c1, &model.c2}) {
        head->l2.w.value.setZero();
        head->l2.b.value(0, 0) = 20.0;
        head->l2.b.value(0, 1) = -20.0;
    }
    DomainBatch batch;
    batch.source_images = Mat(4, source.pixel_count());
    batch.source_labels = Mat(4, 2);
    for (int i = 0; i < 4; ++i) {
        batch.source_images.row(i) = source.samples[i].pixels.transpose();  // class 0 samples
        batch.source_labels.row(i) = source.samples[i].label->values.transpose();
    }

    std::vector<Param*> params = model.group(ParamGroup::g_cm);
    for (Param* p : model.group(ParamGroup::c1)) params.push_back(p);
    for (Param* p : model.group(ParamGroup::c2)) params.push_back(p);
    step_source_supervised(model, batch, focal, opt, 0.0);  // lr 0: just read the gradient
    double gnorm = 0.0;
    for (const Param* p : params) gnorm += p->grad.squaredNorm();
    CHECK(std::sqrt(gnorm) < 1e-3);
}

TEST_CASE("the three steps respect their freeze contracts") {
    auto [source, target] = small_pair(2);
    ScidaModel model = ScidaModel::create(tiny_model_config(4));
    const Sgd opt;
    const FocalParams focal = focal_for(source);
    const DomainBatch batch = batch_from(source, target, 4);

    SUBCASE("source-supervised step updates G_cm, C1, C2 and nothing else") {
        const auto before = group_hashes(model);
        CHECK_THROWS_AS(step_source_supervised(model, DomainBatch{}, focal, opt, 0.01),
                        ContractError);
        CHECK(group_hashes(model) == before);

        step_source_supervised(model, batch, focal, opt, 0.01);
        const auto after = group_hashes(model);
        CHECK(after[0] != before[0]);  // g_cm
        CHECK(after[1] == before[1]);  // g_t
        CHECK(after[2] != before[2]);  // c1
        CHECK(after[3] != before[3]);  // c2
        CHECK(after[4] == before[4]);  // fc_head
        CHECK(after[5] == before[5]);  // gcn
    }
    SUBCASE("max-discrepancy step freezes the generator") {
        const auto before = group_hashes(model);
        step_max_discrepancy(model, batch, focal, opt, 0.01);
        const auto after = group_hashes(model);
        CHECK(after[0] == before[0]);
        CHECK(after[1] == before[1]);
        CHECK(after[2] != before[2]);
        CHECK(after[3] != before[3]);
        CHECK(after[4] == before[4]);
        CHECK(after[5] == before[5]);
    }
    SUBCASE("min-discrepancy step updates only the generator") {
        const auto before = group_hashes(model);
        step_min_discrepancy(model, batch, opt, 0.01, 4);
        const auto after = group_hashes(model);
        CHECK(after[0] != before[0]);
        CHECK(after[1] == before[1]);
        CHECK(after[2] == before[2]);
        CHECK(after[3] == before[3]);
        CHECK(after[4] == before[4]);
        CHECK(after[5] == before[5]);
    }
    SUBCASE("n_inner 0 leaves the model untouched and reports the current discrepancy") {
        const auto before = group_hashes(model);
        const double reported = step_min_discrepancy(model, batch, opt, 0.01, 0);
        CHECK(group_hashes(model) == before);
        const Mat feats = model.g_cm.forward(batch.target_images);
        const double direct =
            discrepancy_loss(sigmoid(model.c1.forward(feats)), sigmoid(model.c2.forward(feats)));
        CHECK(reported == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("adversarial steps move the discrepancy in opposite directions") {
    int max_raised = 0, min_lowered = 0;
    const int trials = 10;
    for (int trial = 0; trial < trials; ++trial) {
        auto [source, target] = small_pair(100 + trial);
        ModelConfig mc = tiny_model_config(4);
        mc.seed = 200 + trial;
        const Sgd opt;
        const FocalParams focal = focal_for(source);
        const DomainBatch batch = batch_from(source, target, 6, trial);

        auto measure = [&](ScidaModel& m) {
            const Mat feats = m.g_cm.forward(batch.target_images);
            return discrepancy_loss(sigmoid(m.c1.forward(feats)), sigmoid(m.c2.forward(feats)));
        };

        ScidaModel model = ScidaModel::create(mc);
        // warm up the supervised objective first, as the training loop does;
        // near its optimum the discrepancy term dominates the update direction
        for (int s = 0; s < 40; ++s) step_source_supervised(model, batch, focal, opt, 0.02);

        const double before_max = measure(model);
        step_max_discrepancy(model, batch, focal, opt, 0.02);
        const double after_max = measure(model);
        max_raised += after_max >= before_max;

        const double before_min = measure(model);
        step_min_discrepancy(model, batch, opt, 0.02, 4);
        const double after_min = measure(model);
        min_lowered += after_min <= before_min;
    }
    CHECK(max_raised >= static_cast<int>(0.9 * trials));
    CHECK(min_lowered >= static_cast<int>(0.9 * trials));
}

TEST_CASE("degenerate target equal to source keeps gradients well-defined") {
    const Dataset source = constant_source(3, 3, 8);
    ScidaModel model = ScidaModel::create(tiny_model_config(3));
    const Sgd opt;
    const FocalParams focal = focal_for(source);

    DomainBatch batch = batch_from(source, strip_labels(source), 4);
    batch.target_images = batch.source_images;  // duplicated domains
    CHECK_NOTHROW(step_max_discrepancy(model, batch, focal, opt, 0.01));
    CHECK_NOTHROW(step_min_discrepancy(model, batch, opt, 0.01, 2));
    const Mat probs = model.dwc_probabilities(batch.target_images);
    CHECK(probs.allFinite());
}
