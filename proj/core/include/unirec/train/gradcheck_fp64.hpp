#pragma once

// Precision-independent entry to the whole-model gradient check. The check
// runs in the double-precision build; this header only uses plain types, so
// float-precision code can call it by linking unirec::core_fp64.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace unirec::fp64 {

struct GradcheckRow {
    std::string name;
    std::size_t checked = 0;
    double max_rel_error = 0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
    double seconds = 0;
};

/// Loads the run config at `config_path` (seed optionally overridden) and
/// checks the model modes it selects at the toy dimensions.
std::vector<GradcheckRow> gradcheck_from_config(const std::string& config_path, std::optional<std::uint64_t> seed);

}  // namespace unirec::fp64
