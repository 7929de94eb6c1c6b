#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "labelprop/annotations.hpp"
#include "labelprop/json_io.hpp"

using namespace labelprop;

namespace {

AnnotationSet demo_set(std::size_t n = 6) {
    AnnotationSet set;
    set.categories = ClassRegistry::from_classes(
        {{0, "a", Complexity::Simple}, {1, "b", Complexity::Complex}});
    for (std::size_t i = 0; i < n; ++i) {
        ImageEntry img;
        img.id = "img" + std::to_string(i);
        img.width = 640;
        img.height = 480;
        set.images.push_back(img);
        Annotation ann;
        ann.id = "ann" + std::to_string(i);
        ann.image_id = img.id;
        ann.class_id = static_cast<int>(i % 2);
        ann.confidence = 0.75;
        ann.complexity = i % 2 == 0 ? Complexity::Simple : Complexity::Complex;
        ann.geometry = nlohmann::ordered_json::parse(
            R"({"polygon":[[0,0],[3,1],[2,4]],"area":5.5,"meta":{"z":1,"a":2}})");
        set.annotations.push_back(std::move(ann));
    }
    return set;
}

}  // namespace

TEST_CASE("annotation files round-trip with geometry intact") {
    const AnnotationSet set = demo_set();
    const auto path = std::filesystem::temp_directory_path() / "lp_anno_rt.json";
    save_annotations(set, path);
    const AnnotationSet loaded = load_annotations(path);
    REQUIRE(loaded.annotations.size() == set.annotations.size());
    CHECK(loaded.categories == set.categories);
    for (std::size_t i = 0; i < set.annotations.size(); ++i) {
        CHECK(loaded.annotations[i].id == set.annotations[i].id);
        CHECK(loaded.annotations[i].class_id == set.annotations[i].class_id);
        CHECK(loaded.annotations[i].confidence == set.annotations[i].confidence);
        // Byte-level geometry fidelity, key order included.
        CHECK(loaded.annotations[i].geometry.dump() ==
              set.annotations[i].geometry.dump());
    }
    // A second save is byte-identical.
    const auto path2 = std::filesystem::temp_directory_path() / "lp_anno_rt2.json";
    save_annotations(loaded, path2);
    CHECK(read_text_file(path) == read_text_file(path2));
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("validation catches broken references") {
    SUBCASE("duplicate annotation id") {
        AnnotationSet set = demo_set();
        set.annotations[1].id = set.annotations[0].id;
        CHECK_THROWS_WITH_AS(set.validate(), doctest::Contains("duplicate"),
                             std::runtime_error);
    }
    SUBCASE("unknown image") {
        AnnotationSet set = demo_set();
        set.annotations[0].image_id = "nope";
        CHECK_THROWS_WITH_AS(set.validate(), doctest::Contains("unknown image"),
                             std::runtime_error);
    }
    SUBCASE("unknown class") {
        AnnotationSet set = demo_set();
        set.annotations[0].class_id = 7;
        CHECK_THROWS_WITH_AS(set.validate(), doctest::Contains("class"),
                             std::runtime_error);
    }
}

TEST_CASE("drop rate zero is the identity") {
    const AnnotationSet set = demo_set();
    const AnnotationSet out = perturb_proposals(set, 0.0, 9);
    REQUIRE(out.annotations.size() == set.annotations.size());
    for (std::size_t i = 0; i < set.annotations.size(); ++i) {
        CHECK(out.annotations[i].id == set.annotations[i].id);
    }
}

TEST_CASE("drop rate one empties the annotations but keeps images") {
    const AnnotationSet set = demo_set();
    const AnnotationSet out = perturb_proposals(set, 1.0, 9);
    CHECK(out.annotations.empty());
    CHECK(out.images.size() == set.images.size());
    CHECK(out.categories == set.categories);
}

TEST_CASE("half of 100 drops exactly 50, deterministically") {
    const AnnotationSet set = demo_set(100);
    const AnnotationSet a = perturb_proposals(set, 0.5, 4);
    const AnnotationSet b = perturb_proposals(set, 0.5, 4);
    CHECK(a.annotations.size() == 50);
    REQUIRE(b.annotations.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(a.annotations[i].id == b.annotations[i].id);
    }
    const AnnotationSet c = perturb_proposals(set, 0.5, 5);
    std::set<std::string> ids_a, ids_c;
    for (const auto& ann : a.annotations) ids_a.insert(ann.id);
    for (const auto& ann : c.annotations) ids_c.insert(ann.id);
    CHECK(ids_a != ids_c);  // different seed, different survivors
    // Survivors keep their original relative order.
    std::size_t pos = 0;
    for (const auto& ann : set.annotations) {
        if (pos < a.annotations.size() && a.annotations[pos].id == ann.id) ++pos;
    }
    CHECK(pos == a.annotations.size());
}

TEST_CASE("drop count rounds half away from zero") {
    const AnnotationSet set = demo_set(3);
    CHECK(perturb_proposals(set, 0.5, 1).annotations.size() == 1);  // drops 2
    CHECK_THROWS(perturb_proposals(set, 1.5, 1));
}

TEST_CASE("relabel noise rewrites classes to other valid ones") {
    const AnnotationSet set = demo_set(40);
    const AnnotationSet none = perturb_relabel(set, 0.0, 7);
    for (std::size_t i = 0; i < set.annotations.size(); ++i) {
        CHECK(none.annotations[i].class_id == set.annotations[i].class_id);
    }
    const AnnotationSet all = perturb_relabel(set, 1.0, 7);
    for (std::size_t i = 0; i < set.annotations.size(); ++i) {
        REQUIRE(all.annotations[i].class_id.has_value());
        CHECK(*all.annotations[i].class_id != *set.annotations[i].class_id);
        CHECK(set.categories.contains(*all.annotations[i].class_id));
    }
    const AnnotationSet again = perturb_relabel(set, 1.0, 7);
    for (std::size_t i = 0; i < set.annotations.size(); ++i) {
        CHECK(again.annotations[i].class_id == all.annotations[i].class_id);
    }
}
