#include "labelprop/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "labelprop/json_io.hpp"
#include "labelprop/rng.hpp"

namespace labelprop {

void AnnotationSet::validate() const {
    std::unordered_set<std::string> image_ids;
    for (const ImageEntry& img : images) {
        if (!image_ids.insert(img.id).second) {
            throw std::runtime_error("duplicate image id '" + img.id + "'");
        }
    }
    std::unordered_set<std::string> ann_ids;
    for (const Annotation& ann : annotations) {
        if (!ann_ids.insert(ann.id).second) {
            throw std::runtime_error("duplicate annotation id '" + ann.id + "'");
        }
        if (!image_ids.count(ann.image_id)) {
            throw std::runtime_error("annotation '" + ann.id +
                                     "' references unknown image '" +
                                     ann.image_id + "'");
        }
        if (ann.class_id && !categories.contains(*ann.class_id)) {
            throw std::runtime_error("annotation '" + ann.id +
                                     "' references unknown class id " +
                                     std::to_string(*ann.class_id));
        }
    }
}

const Annotation* AnnotationSet::find(const std::string& annotation_id) const {
    for (const Annotation& ann : annotations) {
        if (ann.id == annotation_id) return &ann;
    }
    return nullptr;
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
    nlohmann::ordered_json doc;
    {
        const std::string text = read_text_file(path);
        try {
            doc = nlohmann::ordered_json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path.string() + ": " + e.what());
        }
    }
    if (!doc.contains("format") || doc["format"].get<std::string>() != "annoset/1") {
        throw std::runtime_error(path.string() + ": expected format annoset/1");
    }
    AnnotationSet set;
    for (const auto& img : doc.value("images", nlohmann::ordered_json::array())) {
        ImageEntry entry;
        entry.id = img.at("id").get<std::string>();
        entry.width = img.value("width", 0);
        entry.height = img.value("height", 0);
        set.images.push_back(std::move(entry));
    }
    std::vector<ClassInfo> classes;
    for (const auto& cat : doc.value("categories", nlohmann::ordered_json::array())) {
        classes.push_back(ClassInfo{
            cat.at("id").get<int>(), cat.at("name").get<std::string>(),
            complexity_from_string(cat.at("complexity").get<std::string>())});
    }
    set.categories = ClassRegistry::from_classes(std::move(classes));
    for (const auto& aj : doc.value("annotations", nlohmann::ordered_json::array())) {
        Annotation ann;
        ann.id = aj.at("id").get<std::string>();
        ann.image_id = aj.at("image_id").get<std::string>();
        if (aj.contains("class_id") && !aj["class_id"].is_null()) {
            ann.class_id = aj["class_id"].get<int>();
        }
        if (aj.contains("confidence") && !aj["confidence"].is_null()) {
            ann.confidence = aj["confidence"].get<double>();
        }
        if (aj.contains("complexity") && !aj["complexity"].is_null()) {
            ann.complexity = complexity_from_string(aj["complexity"].get<std::string>());
        }
        if (aj.contains("geometry")) ann.geometry = aj["geometry"];
        set.annotations.push_back(std::move(ann));
    }
    try {
        set.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return set;
}

void save_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
    set.validate();
    std::string out = "{\"format\":\"annoset/1\",\"images\":[";
    for (std::size_t i = 0; i < set.images.size(); ++i) {
        if (i) out += ',';
        const ImageEntry& img = set.images[i];
        out += "{\"id\":" + json_quote(img.id) +
               ",\"width\":" + std::to_string(img.width) +
               ",\"height\":" + std::to_string(img.height) + "}";
    }
    out += "],\"annotations\":[";
    for (std::size_t i = 0; i < set.annotations.size(); ++i) {
        if (i) out += ',';
        const Annotation& ann = set.annotations[i];
        out += "{\"id\":" + json_quote(ann.id) +
               ",\"image_id\":" + json_quote(ann.image_id);
        if (ann.class_id) out += ",\"class_id\":" + std::to_string(*ann.class_id);
        if (ann.confidence) out += ",\"confidence\":" + fmt_double(*ann.confidence);
        if (ann.complexity) {
            out += ",\"complexity\":\"" + std::string(to_string(*ann.complexity)) + "\"";
        }
        if (!ann.geometry.is_null()) out += ",\"geometry\":" + ann.geometry.dump();
        out += '}';
    }
    out += "],\"categories\":[";
    for (std::size_t i = 0; i < set.categories.classes().size(); ++i) {
        if (i) out += ',';
        const ClassInfo& c = set.categories.classes()[i];
        out += "{\"id\":" + std::to_string(c.id) + ",\"name\":" + json_quote(c.name) +
               ",\"complexity\":\"" + std::string(to_string(c.complexity)) + "\"}";
    }
    out += "]}\n";
    write_text_file(path, out);
}

AnnotationSet perturb_proposals(const AnnotationSet& annotations,
                                double drop_rate, std::uint64_t seed) {
    if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) {
        throw std::invalid_argument("drop_rate must lie in [0,1]");
    }
    const std::size_t n = annotations.annotations.size();
    const auto k = static_cast<std::size_t>(
        std::llround(drop_rate * static_cast<double>(n)));
    AnnotationSet out = annotations;
    if (k == 0) return out;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    SplitRng rng = SplitRng(seed).split("perturb-drop");
    rng.shuffle(order);
    std::set<std::size_t> dropped(order.begin(),
                                  order.begin() + static_cast<std::ptrdiff_t>(k));
    out.annotations.clear();
    for (std::size_t i = 0; i < n; ++i) {
        if (!dropped.count(i)) out.annotations.push_back(annotations.annotations[i]);
    }
    return out;
}

AnnotationSet perturb_relabel(const AnnotationSet& annotations, double noise,
                              std::uint64_t seed) {
    if (!(noise >= 0.0 && noise <= 1.0)) {
        throw std::invalid_argument("relabel noise must lie in [0,1]");
    }
    const std::size_t c = annotations.categories.size();
    AnnotationSet out = annotations;
    if (noise == 0.0 || c < 2) return out;

    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < out.annotations.size(); ++i) {
        if (out.annotations[i].class_id) labeled.push_back(i);
    }
    const auto k = static_cast<std::size_t>(
        std::llround(noise * static_cast<double>(labeled.size())));
    SplitRng rng = SplitRng(seed).split("perturb-relabel");
    rng.shuffle(labeled);
    for (std::size_t i = 0; i < k; ++i) {
        Annotation& ann = out.annotations[labeled[i]];
        // Uniform over the other classes.
        const auto shift = 1 + rng.next_below(c - 1);
        ann.class_id = static_cast<int>(
            (static_cast<std::uint64_t>(*ann.class_id) + shift) % c);
    }
    return out;
}

}  // namespace labelprop
