#pragma once

#include <string>
#include <vector>

#include "unirec/model/model.hpp"
#include "unirec/tensor/gradcheck.hpp"

UNIREC_NAMESPACE_BEGIN

struct GradcheckCase {
    std::string name;
    GradCheckReport report;
    double seconds = 0;
};

/// Toy dimensions for the whole-model check: d = 8, two item and two user
/// tokens, histories of two interactions. Modes come from `modes`.
ModelConfig gradcheck_model_config(const ModelConfig& modes);

/// Finite-difference checks of the pretraining and fine-tuning losses with
/// respect to every parameter each stage trains, on a small generated
/// dataset. Meaningful in the fp64 build.
std::vector<GradcheckCase> whole_model_gradcheck(const ModelConfig& modes, std::uint64_t seed);

UNIREC_NAMESPACE_END
