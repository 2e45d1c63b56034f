#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "unirec/data/records.hpp"

UNIREC_NAMESPACE_BEGIN

/// Iteratively drops users and items with fewer than `k` interactions until
/// every survivor meets the bound. Order of the kept interactions is
/// preserved. Throws DataError when nothing survives.
std::vector<Interaction> five_core_filter(const std::vector<Interaction>& interactions, std::size_t k = 5);

struct UserSequence {
    std::string user_id;
    /// Indices into Dataset::interactions, sorted by (timestamp, file order).
    std::vector<std::size_t> events;
};

/// Users in ascending id order.
std::vector<UserSequence> build_sequences(const Dataset& data);

/// One prediction problem over positions of a user's sequence: the history
/// is the (at most max_history) positions right before the target.
struct Window {
    std::vector<std::size_t> history;
    std::size_t target = 0;
    bool operator==(const Window&) const = default;
};

struct UserWindows {
    std::vector<Window> train;
    std::optional<Window> valid;
    std::optional<Window> test;
};

/// The last position is the test target and the one before it the
/// validation target. Training targets come from the remaining prefix:
/// every full-length window (max_history + 1 positions, stride 1) or, when
/// the prefix is shorter than that, a single window ending at the prefix's
/// last position with a shorter history.
UserWindows make_windows(std::size_t length, std::size_t max_history = 20);

/// A window resolved to interaction indices plus the owning user.
struct Sample {
    std::size_t user = 0;
    std::vector<std::size_t> history;
    std::size_t target = 0;
};

struct Splits {
    std::vector<Sample> train, valid, test;
};

Splits make_splits(const std::vector<UserSequence>& users, std::size_t max_history = 20);

UNIREC_NAMESPACE_END
