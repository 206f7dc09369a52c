#include "infer/store.hpp"

#include <fstream>

#include <json.hpp>

namespace axf {

using nlohmann::json;

void FeatureStore::put(int64_t match_id, Kind kind, int64_t step, std::vector<double> values) {
    const Key key{match_id, static_cast<int>(kind), step};
    if (data_.count(key))
        throw ValidationError("feature store is append-only: key (match " + std::to_string(match_id) + ", kind " +
                              std::to_string(static_cast<int>(kind)) + ", step " + std::to_string(step) +
                              ") already written");
    data_[key] = std::move(values);
}

const std::vector<double>* FeatureStore::get(int64_t match_id, Kind kind, int64_t step) const {
    auto it = data_.find(Key{match_id, static_cast<int>(kind), step});
    return it == data_.end() ? nullptr : &it->second;
}

void FeatureStore::require_contiguous(int64_t match_id, Kind kind, int64_t upto) const {
    for (int64_t s = 0; s < upto; ++s)
        if (!has(match_id, kind, s))
            throw ValidationError("feature store gap: match " + std::to_string(match_id) + " missing step " +
                                  std::to_string(s));
}

void FeatureStore::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write feature store: " + path);
    for (const auto& [key, values] : data_) {
        out << json{{"match", key.match_id}, {"kind", key.kind}, {"step", key.step}, {"values", values}}.dump()
            << "\n";
    }
}

FeatureStore FeatureStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open feature store: " + path);
    FeatureStore store;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        store.put(j.at("match").get<int64_t>(), static_cast<Kind>(j.at("kind").get<int>()),
                  j.at("step").get<int64_t>(), j.at("values").get<std::vector<double>>());
    }
    return store;
}

}  // namespace axf
