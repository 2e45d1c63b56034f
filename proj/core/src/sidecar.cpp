#include "unirec/embed/sidecar.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

UNIREC_NAMESPACE_BEGIN

void FeatureSidecar::put(std::string entity_id, std::string attribute, std::vector<float> vector) {
    if (vector.empty()) throw DataError("sidecar vector for " + entity_id + "/" + attribute + " is empty");
    records_[{std::move(entity_id), std::move(attribute)}] = std::move(vector);
}

const std::vector<float>* FeatureSidecar::find(const std::string& entity_id, const std::string& attribute) const {
    auto it = records_.find({entity_id, attribute});
    return it == records_.end() ? nullptr : &it->second;
}

std::vector<std::size_t> FeatureSidecar::widths() const {
    std::set<std::size_t> w;
    for (const auto& [key, v] : records_) w.insert(v.size());
    return {w.begin(), w.end()};
}

FeatureSidecar FeatureSidecar::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open sidecar " + path);
    FeatureSidecar out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            std::vector<float> v = j.at("vector").get<std::vector<float>>();
            for (float x : v) {
                if (!std::isfinite(x)) throw DataError("non-finite entry");
            }
            out.put(j.at("entity_id").get<std::string>(), j.at("attribute").get<std::string>(), std::move(v));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed sidecar record: " + e.what());
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void FeatureSidecar::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write sidecar " + path);
    for (const auto& [key, v] : records_) {
        nlohmann::json j;
        j["entity_id"] = key.first;
        j["attribute"] = key.second;
        j["vector"] = v;
        out << j.dump() << '\n';
    }
}

UNIREC_NAMESPACE_END
