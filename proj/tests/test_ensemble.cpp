#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "labelprop/ensemble.hpp"
#include "labelprop/store.hpp"
#include "oracles.hpp"

using namespace labelprop;

namespace {

ClassRegistry two_classes() {
    return ClassRegistry::from_classes(
        {{0, "a", Complexity::Simple}, {1, "b", Complexity::Medium}});
}

// Head in `space` whose softmax for query [1,0] is exactly softmax(log p).
HopfieldHead fixed_head(const std::string& space, double p0, double p1) {
    HopfieldHead head;
    head.space = space;
    head.d = 2;
    head.p = 2;
    head.m = 1;
    head.beta = 1.0;
    Matrix eye(2, 2);
    eye(0, 0) = eye(1, 1) = 1.0;
    Bank bank{eye, Matrix(2, 2), eye};
    bank.w_k(0, 0) = std::log(p0);
    bank.w_k(1, 0) = std::log(p1);
    head.banks.push_back(bank);
    return head;
}

std::map<std::string, std::vector<double>> unit_queries(
    const EnsemblePredictor& ens) {
    std::map<std::string, std::vector<double>> queries;
    for (const auto& head : ens.heads) queries[head.space] = {1.0, 0.0};
    return queries;
}

}  // namespace

TEST_CASE("mean of identical heads is that head") {
    EnsemblePredictor ens;
    ens.registry = two_classes();
    ens.heads = {fixed_head("sa", 0.8, 0.2), fixed_head("sb", 0.8, 0.2),
                 fixed_head("sc", 0.8, 0.2)};
    const ScoreVector one = predict(ens.heads[0], std::vector<double>{1.0, 0.0});
    const ScoreVector mean = ensemble_predict(ens, unit_queries(ens));
    CHECK(mean.scores == one.scores);
    CHECK(mean.predicted == one.predicted);
}

TEST_CASE("two heads average arithmetically") {
    EnsemblePredictor ens;
    ens.registry = two_classes();
    ens.heads = {fixed_head("sa", 0.8, 0.2), fixed_head("sb", 0.4, 0.6)};
    const ScoreVector sv = ensemble_predict(ens, unit_queries(ens));
    CHECK(sv.scores[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(sv.scores[1] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(sv.predicted == 0);
}

TEST_CASE("an ensemble of one equals predict exactly") {
    EnsemblePredictor ens;
    ens.registry = two_classes();
    ens.heads = {fixed_head("sa", 0.3, 0.7)};
    const ScoreVector direct = predict(ens.heads[0], std::vector<double>{1.0, 0.0});
    const ScoreVector via = ensemble_predict(ens, unit_queries(ens));
    CHECK(via.scores == direct.scores);
}

TEST_CASE("head order does not matter") {
    EnsemblePredictor fwd;
    fwd.registry = two_classes();
    fwd.heads = {fixed_head("sa", 0.8, 0.2), fixed_head("sb", 0.4, 0.6),
                 fixed_head("sc", 0.55, 0.45)};
    EnsemblePredictor rev = fwd;
    std::reverse(rev.heads.begin(), rev.heads.end());
    const auto queries = unit_queries(fwd);
    const ScoreVector a = ensemble_predict(fwd, queries);
    const ScoreVector b = ensemble_predict(rev, queries);
    CHECK(a.scores == b.scores);
}

TEST_CASE("outputs stay on the simplex") {
    SplitRng rng(3);
    EnsemblePredictor ens;
    ens.registry = ClassRegistry::from_classes({{0, "a", Complexity::Simple},
                                                {1, "b", Complexity::Medium},
                                                {2, "c", Complexity::Complex}});
    for (const char* space : {"sa", "sb", "sc"}) {
        HopfieldHead head = oracles::random_head(4, 3, 3, 2, rng.next_u64());
        head.space = space;
        ens.heads.push_back(std::move(head));
    }
    for (int round = 0; round < 50; ++round) {
        std::map<std::string, std::vector<double>> queries;
        for (const auto& head : ens.heads) {
            queries[head.space] = rng.split("q", round).gaussian_vector(4);
        }
        const ScoreVector sv = ensemble_predict(ens, queries);
        double total = 0.0;
        for (double s : sv.scores) {
            CHECK(s > 0.0);
            total += s;
        }
        CHECK(std::fabs(total - 1.0) < 1e-9);
    }
}

TEST_CASE("missing spaces and mismatched shapes are rejected") {
    EnsemblePredictor ens;
    ens.registry = two_classes();
    ens.heads = {fixed_head("sa", 0.8, 0.2), fixed_head("sb", 0.4, 0.6)};
    std::map<std::string, std::vector<double>> queries = {{"sa", {1.0, 0.0}}};
    CHECK_THROWS_WITH_AS(ensemble_predict(ens, queries),
                         doctest::Contains("missing query"), std::invalid_argument);
    queries["sb"] = {1.0};
    CHECK_THROWS(ensemble_predict(ens, queries));

    EnsemblePredictor dup = ens;
    dup.heads[1].space = "sa";
    CHECK_THROWS_WITH_AS(dup.validate(), doctest::Contains("duplicate"),
                         std::invalid_argument);
}

TEST_CASE("manifest round-trip checks the registry") {
    const auto dir = std::filesystem::temp_directory_path() / "lp_ens";
    std::filesystem::create_directories(dir);
    const ClassRegistry registry = two_classes();
    save_head(fixed_head("sa", 0.8, 0.2), dir / "head_sa.json", registry.checksum());
    save_head(fixed_head("sb", 0.4, 0.6), dir / "head_sb.json", registry.checksum());
    save_ensemble_manifest({"head_sa.json", "head_sb.json"}, registry,
                           dir / "ensemble.json");
    const EnsemblePredictor ens = load_ensemble(dir / "ensemble.json", registry);
    CHECK(ens.heads.size() == 2);

    const ClassRegistry other = ClassRegistry::from_classes(
        {{0, "x", Complexity::Simple}, {1, "y", Complexity::Medium}});
    CHECK_THROWS_WITH_AS(load_ensemble(dir / "ensemble.json", other),
                         doctest::Contains("checksum"), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("complementary spaces: the ensemble beats every head") {
    // Two spaces, each fully merging one class pair; heads trained per
    // space, ensemble evaluated on the validation split.
    SyntheticConfig config;
    config.seed = 33;
    config.num_classes = 4;
    config.dim = 16;
    config.spaces = {"sa", "sb"};
    config.samples_per_class_per_split = {
        {"representative", 3}, {"train", 25}, {"validation", 15}};
    config.cluster_sigma = 0.3;
    config.confusion_pairs = {{"sa", {{0, 1}}}, {"sb", {{2, 3}}}};
    config.confusion_blend = 1.0;
    const EmbeddingStore store = synth_generate(config);

    EnsemblePredictor ens;
    ens.registry = store.registry;
    Hyperparams hp;
    for (const auto& space : config.spaces) {
        HopfieldHead head = init_head(store, space, 8, 2, {}, 5);
        hp.seed = SplitRng(5).split(space).key();
        ens.heads.push_back(train_head(std::move(head), store, "train", hp).first);
    }

    auto validation_ids = [&] {
        std::vector<std::pair<std::string, int>> out;
        for (const auto* rec : store.labeled_records("sa", "validation")) {
            out.emplace_back(rec->id, *rec->class_id);
        }
        return out;
    }();

    std::map<std::string, std::map<std::string, const EmbeddingRecord*>> lookup;
    for (const auto& space : config.spaces) {
        for (const auto& rec : store.space(space).records) {
            lookup[space].emplace(rec.id, &rec);
        }
    }

    double best_head_acc = 0.0;
    for (const auto& head : ens.heads) {
        std::size_t correct = 0;
        for (const auto& [id, cls] : validation_ids) {
            if (predict(head, lookup[head.space].at(id)->vector).predicted == cls) {
                ++correct;
            }
        }
        best_head_acc = std::max(
            best_head_acc,
            static_cast<double>(correct) / static_cast<double>(validation_ids.size()));
    }

    std::size_t ens_correct = 0;
    for (const auto& [id, cls] : validation_ids) {
        std::map<std::string, std::vector<double>> queries;
        for (const auto& space : config.spaces) {
            queries[space] = lookup[space].at(id)->vector;
        }
        if (ensemble_predict(ens, queries).predicted == cls) ++ens_correct;
    }
    const double ens_acc = static_cast<double>(ens_correct) /
                           static_cast<double>(validation_ids.size());
    INFO("ensemble ", ens_acc, " best head ", best_head_acc);
    CHECK(ens_acc >= best_head_acc);
    CHECK(best_head_acc < 1.0);  // each head is blind on its merged pair
}
