#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "unirec/tensor/tensor.hpp"

UNIREC_NAMESPACE_BEGIN

/// Relative error |a - b| / max(|a|, |b|, floor). The floor keeps gradients
/// that are zero up to rounding from dominating the statistic.
Real relative_error(Real analytic, Real numeric, Real floor);

struct GradCheckOptions {
    Real step = Real(1e-4);
    Real floor = Real(1e-6);
    /// Upper bound on checked entries per tensor (0 = all). Entries are taken
    /// at an even stride so large tensors are still sampled end to end.
    std::size_t max_entries_per_tensor = 0;
    /// Combine steps h and h/2 to remove the O(h^2) error; matters for
    /// losses with large third derivatives (layer norms over tiny inputs).
    bool richardson = true;
};

struct GradCheckReport {
    std::size_t checked = 0;
    Real max_rel_error = 0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
    Real worst_analytic = 0;
    Real worst_numeric = 0;

    bool passed(Real tolerance) const { return max_rel_error < tolerance; }
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Compares the reverse-mode gradient of `loss_fn` with central finite
/// differences for every entry of every tensor in `params`. `loss_fn` must
/// rebuild the graph from the current parameter values on each call.
GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn, NamedTensors params,
                                const GradCheckOptions& options = {});

UNIREC_NAMESPACE_END
