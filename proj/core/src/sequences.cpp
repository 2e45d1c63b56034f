#include "unirec/data/sequences.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>

UNIREC_NAMESPACE_BEGIN

std::vector<Interaction> five_core_filter(const std::vector<Interaction>& interactions, std::size_t k) {
    std::vector<char> alive(interactions.size(), 1);
    for (bool changed = true; changed;) {
        changed = false;
        std::unordered_map<std::string, std::size_t> user_deg, item_deg;
        for (std::size_t e = 0; e < interactions.size(); ++e) {
            if (!alive[e]) continue;
            ++user_deg[interactions[e].user_id];
            ++item_deg[interactions[e].item_id];
        }
        for (std::size_t e = 0; e < interactions.size(); ++e) {
            if (alive[e] && (user_deg[interactions[e].user_id] < k || item_deg[interactions[e].item_id] < k)) {
                alive[e] = 0;
                changed = true;
            }
        }
    }
    std::vector<Interaction> out;
    for (std::size_t e = 0; e < interactions.size(); ++e) {
        if (alive[e]) out.push_back(interactions[e]);
    }
    if (out.empty()) throw DataError("5-core filtering left no interactions");
    return out;
}

std::vector<UserSequence> build_sequences(const Dataset& data) {
    std::map<std::string, std::vector<std::size_t>> by_user;
    for (std::size_t e = 0; e < data.interactions.size(); ++e) by_user[data.interactions[e].user_id].push_back(e);
    std::vector<UserSequence> out;
    out.reserve(by_user.size());
    for (auto& [user, events] : by_user) {
        // indices already follow file order, so a stable sort keeps ties in it
        std::stable_sort(events.begin(), events.end(), [&](std::size_t a, std::size_t b) {
            return data.interactions[a].timestamp < data.interactions[b].timestamp;
        });
        out.push_back({user, std::move(events)});
    }
    return out;
}

namespace {

Window window_ending_at(std::size_t target, std::size_t max_history) {
    Window w;
    w.target = target;
    const std::size_t begin = target > max_history ? target - max_history : 0;
    for (std::size_t p = begin; p < target; ++p) w.history.push_back(p);
    return w;
}

}  // namespace

UserWindows make_windows(std::size_t length, std::size_t max_history) {
    if (max_history == 0) throw ConfigError("max_history must be positive");
    UserWindows out;
    if (length < 2) return out;
    out.test = window_ending_at(length - 1, max_history);
    if (length >= 3) out.valid = window_ending_at(length - 2, max_history);
    if (length < 4) return out;
    const std::size_t prefix = length - 2;  // positions 0 .. prefix-1 may be training targets
    if (prefix >= max_history + 1) {
        for (std::size_t target = max_history; target < prefix; ++target) {
            out.train.push_back(window_ending_at(target, max_history));
        }
    } else {
        out.train.push_back(window_ending_at(prefix - 1, max_history));
    }
    return out;
}

Splits make_splits(const std::vector<UserSequence>& users, std::size_t max_history) {
    Splits s;
    for (std::size_t u = 0; u < users.size(); ++u) {
        const auto& ev = users[u].events;
        const UserWindows w = make_windows(ev.size(), max_history);
        auto resolve = [&](const Window& win) {
            Sample sample{u, {}, ev[win.target]};
            for (std::size_t p : win.history) sample.history.push_back(ev[p]);
            return sample;
        };
        for (const auto& win : w.train) s.train.push_back(resolve(win));
        if (w.valid) s.valid.push_back(resolve(*w.valid));
        if (w.test) s.test.push_back(resolve(*w.test));
    }
    return s;
}

UNIREC_NAMESPACE_END
