#include "unirec/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>

UNIREC_NAMESPACE_BEGIN

Real relative_error(Real analytic, Real numeric, Real floor) {
    const Real denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn, NamedTensors params,
                                const GradCheckOptions& options) {
    for (auto& [name, t] : params) t.zero_grad();
    Tensor loss = loss_fn();
    loss.backward();

    GradCheckReport report;
    for (auto& [name, t] : params) {
        std::vector<Real> analytic(t.numel(), Real(0));
        if (!t.grad().empty()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
        const std::size_t n = t.numel();
        const std::size_t stride =
            options.max_entries_per_tensor == 0 ? 1 : std::max<std::size_t>(1, n / options.max_entries_per_tensor);
        auto values = t.mutable_data();
        for (std::size_t i = 0; i < n; i += stride) {
            const Real saved = values[i];
            auto central = [&](Real h) {
                NoGradGuard guard;
                values[i] = saved + h;
                const Real plus = loss_fn().item();
                values[i] = saved - h;
                const Real minus = loss_fn().item();
                values[i] = saved;
                return (plus - minus) / (Real(2) * h);
            };
            const Real coarse = central(options.step);
            // Richardson: cancels the h^2 truncation term of the central difference
            const Real numeric =
                options.richardson ? (Real(4) * central(options.step / 2) - coarse) / Real(3) : coarse;
            const Real err = relative_error(analytic[i], numeric, options.floor);
            ++report.checked;
            if (report.checked == 1 || err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_tensor = name;
                report.worst_index = i;
                report.worst_analytic = analytic[i];
                report.worst_numeric = numeric;
            }
        }
    }
    for (auto& [name, t] : params) t.zero_grad();
    return report;
}

UNIREC_NAMESPACE_END
