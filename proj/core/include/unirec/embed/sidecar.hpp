#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "unirec/base.hpp"

UNIREC_NAMESPACE_BEGIN

/// Precomputed native vectors keyed by (entity id, attribute name). On disk:
/// one JSON object per line, {"entity_id", "attribute", "vector": [...]}.
class FeatureSidecar {
  public:
    using Key = std::pair<std::string, std::string>;

    void put(std::string entity_id, std::string attribute, std::vector<float> vector);
    /// nullptr when absent.
    const std::vector<float>* find(const std::string& entity_id, const std::string& attribute) const;

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    /// Distinct vector widths present.
    std::vector<std::size_t> widths() const;
    const std::map<Key, std::vector<float>>& records() const { return records_; }

    /// Throws DataError (with the line number) on malformed records.
    static FeatureSidecar load(const std::string& path);
    void save(const std::string& path) const;

  private:
    std::map<Key, std::vector<float>> records_;
};

UNIREC_NAMESPACE_END
