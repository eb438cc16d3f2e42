#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lvsr {

using ItemId = std::int64_t;

/// Dense item catalog: ids are 0..num_items-1.
class ItemCatalog {
public:
    ItemCatalog() = default;
    explicit ItemCatalog(std::size_t num_items, std::vector<std::string> labels = {});

    std::size_t num_items() const noexcept { return num_items_; }
    bool has_labels() const noexcept { return !labels_.empty(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::string& label(ItemId id) const;

    bool contains(ItemId id) const noexcept {
        return id >= 0 && static_cast<std::size_t>(id) < num_items_;
    }

private:
    std::size_t num_items_ = 0;
    std::vector<std::string> labels_;
};

struct Session {
    std::string id;
    std::vector<ItemId> views;

    std::size_t length() const noexcept { return views.size(); }
    bool operator==(const Session&) const = default;
};

/// Sessions sharing one catalog. Session ids are unique and every view is a
/// valid catalog id; both are checked on construction.
class SessionSet {
public:
    SessionSet() = default;
    SessionSet(ItemCatalog catalog, std::vector<Session> sessions);

    const ItemCatalog& catalog() const noexcept { return catalog_; }
    std::size_t num_items() const noexcept { return catalog_.num_items(); }
    const std::vector<Session>& sessions() const noexcept { return sessions_; }
    std::size_t size() const noexcept { return sessions_.size(); }
    bool empty() const noexcept { return sessions_.empty(); }
    const Session& operator[](std::size_t i) const { return sessions_[i]; }
    std::size_t num_views() const noexcept;

    auto begin() const noexcept { return sessions_.begin(); }
    auto end() const noexcept { return sessions_.end(); }

private:
    ItemCatalog catalog_;
    std::vector<Session> sessions_;
};

/// Per-item view counts of one session; sums to the session length.
using CountVector = std::vector<std::int64_t>;

/// Reads `session_id,order_key,item_id` rows. A non-numeric first row is
/// treated as a header. Views are ordered by order_key (stable on ties) and
/// sessions appear in order of first occurrence. When `num_items` is absent
/// the catalog is max id + 1.
SessionSet load_sessions(const std::filesystem::path& path,
                         std::optional<std::size_t> num_items = std::nullopt);
SessionSet parse_sessions(const std::string& text,
                          std::optional<std::size_t> num_items = std::nullopt);

/// Writes with a header and order_key = 1..T within each session.
void write_sessions(const SessionSet& data, const std::filesystem::path& path);
std::string format_sessions(const SessionSet& data);

/// One label per line; line i names item i.
std::vector<std::string> load_labels(const std::filesystem::path& path);

/// Whole-session partition into (train, test). Deterministic given seed.
std::pair<SessionSet, SessionSet> split_by_session(const SessionSet& data,
                                                   double test_fraction,
                                                   std::uint64_t seed);

CountVector to_counts(std::span<const ItemId> views, std::size_t num_items);
inline CountVector to_counts(const Session& s, std::size_t num_items) {
    return to_counts(s.views, num_items);
}

/// Keeps the `keep` most viewed items, re-indexed densely by descending
/// popularity (ties by ascending original id). Views of other items are
/// dropped, as are sessions left empty.
SessionSet filter_top_items(const SessionSet& data, std::size_t keep);

}  // namespace lvsr
