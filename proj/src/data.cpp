#include "lvsr/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "lvsr/error.hpp"
#include "lvsr/random.hpp"

namespace lvsr {

ItemCatalog::ItemCatalog(std::size_t num_items, std::vector<std::string> labels)
    : num_items_(num_items), labels_(std::move(labels)) {
    if (num_items_ == 0) throw ArgumentError("catalog must contain at least one item");
    if (!labels_.empty() && labels_.size() != num_items_)
        throw ArgumentError("catalog has " + std::to_string(num_items_) + " items but " +
                            std::to_string(labels_.size()) + " labels");
}

const std::string& ItemCatalog::label(ItemId id) const {
    if (!contains(id) || labels_.empty()) throw BoundsError("no label for item " + std::to_string(id));
    return labels_[static_cast<std::size_t>(id)];
}

SessionSet::SessionSet(ItemCatalog catalog, std::vector<Session> sessions)
    : catalog_(std::move(catalog)), sessions_(std::move(sessions)) {
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& s : sessions_) {
        if (!seen.emplace(s.id, 0).second) throw ArgumentError("duplicate session id '" + s.id + "'");
        for (auto v : s.views)
            if (!catalog_.contains(v))
                throw BoundsError("session '" + s.id + "' views item " + std::to_string(v) +
                                  " outside catalog of " + std::to_string(catalog_.num_items()));
    }
}

std::size_t SessionSet::num_views() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sessions_) n += s.length();
    return n;
}

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974;

std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
    s = trim(s);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

struct Row {
    std::string session;
    std::int64_t order;
    ItemId item;
    std::size_t seq;
};

}  // namespace

SessionSet parse_sessions(const std::string& text, std::optional<std::size_t> num_items) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;
    std::vector<Row> rows;

    while (std::getline(in, line)) {
        ++line_no;
        auto view = trim(line);
        if (view.empty()) continue;

        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            auto comma = view.find(',', start);
            fields.push_back(trim(view.substr(start, comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        const bool header_candidate = first_content;
        first_content = false;
        if (fields.size() != 3) {
            throw ParseError(line_no, "expected 3 fields (session_id,order_key,item_id), got " +
                                          std::to_string(fields.size()));
        }
        std::int64_t order = 0;
        std::int64_t item = 0;
        const bool order_ok = parse_int(fields[1], order);
        const bool item_ok = parse_int(fields[2], item);
        if (header_candidate && (!order_ok || !item_ok)) continue;
        if (fields[0].empty()) throw ParseError(line_no, "empty session id");
        if (!order_ok) throw ParseError(line_no, "order_key '" + std::string(fields[1]) + "' is not an integer");
        if (!item_ok || item < 0)
            throw ParseError(line_no, "item_id '" + std::string(fields[2]) + "' is not a non-negative integer");
        if (num_items && static_cast<std::uint64_t>(item) >= *num_items)
            throw BoundsError("line " + std::to_string(line_no) + ": item " + std::to_string(item) +
                              " >= catalog size " + std::to_string(*num_items));
        rows.push_back({std::string(fields[0]), order, item, rows.size()});
    }

    std::size_t catalog_size = 0;
    if (num_items) {
        catalog_size = *num_items;
    } else {
        if (rows.empty()) throw ArgumentError("empty session file and no catalog size supplied");
        ItemId max_id = 0;
        for (const auto& r : rows) max_id = std::max(max_id, r.item);
        catalog_size = static_cast<std::size_t>(max_id) + 1;
    }

    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::vector<const Row*>> grouped;
    std::vector<std::string> ids;
    for (const auto& r : rows) {
        auto [it, inserted] = index.emplace(r.session, grouped.size());
        if (inserted) {
            grouped.emplace_back();
            ids.push_back(r.session);
        }
        grouped[it->second].push_back(&r);
    }

    std::vector<Session> sessions;
    sessions.reserve(grouped.size());
    for (std::size_t g = 0; g < grouped.size(); ++g) {
        auto& members = grouped[g];
        std::stable_sort(members.begin(), members.end(),
                         [](const Row* a, const Row* b) { return a->order < b->order; });
        Session s{ids[g], {}};
        s.views.reserve(members.size());
        for (const auto* r : members) s.views.push_back(r->item);
        sessions.push_back(std::move(s));
    }
    return SessionSet(ItemCatalog(catalog_size), std::move(sessions));
}

SessionSet load_sessions(const std::filesystem::path& path, std::optional<std::size_t> num_items) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open session file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_sessions(buf.str(), num_items);
}

std::string format_sessions(const SessionSet& data) {
    std::ostringstream out;
    out << "session_id,order_key,item_id\n";
    for (const auto& s : data) {
        for (std::size_t t = 0; t < s.views.size(); ++t) out << s.id << ',' << (t + 1) << ',' << s.views[t] << '\n';
    }
    return out.str();
}

void write_sessions(const SessionSet& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write session file " + path.string());
    out << format_sessions(data);
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> load_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label file " + path.string());
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        labels.push_back(line);
    }
    while (!labels.empty() && labels.back().empty()) labels.pop_back();
    return labels;
}

std::pair<SessionSet, SessionSet> split_by_session(const SessionSet& data, double test_fraction,
                                                   std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ArgumentError("test_fraction must lie in (0, 1)");
    const std::size_t n = data.size();
    if (n < 2) throw ArgumentError("need at least 2 sessions to split");

    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(seed, {kSplitStream});
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<bool> is_test(n, false);
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

    std::vector<Session> train, test;
    for (std::size_t i = 0; i < n; ++i) (is_test[i] ? test : train).push_back(data[i]);
    return {SessionSet(data.catalog(), std::move(train)), SessionSet(data.catalog(), std::move(test))};
}

CountVector to_counts(std::span<const ItemId> views, std::size_t num_items) {
    CountVector counts(num_items, 0);
    for (auto v : views) {
        if (v < 0 || static_cast<std::size_t>(v) >= num_items)
            throw BoundsError("view " + std::to_string(v) + " outside catalog of " + std::to_string(num_items));
        ++counts[static_cast<std::size_t>(v)];
    }
    return counts;
}

SessionSet filter_top_items(const SessionSet& data, std::size_t keep) {
    if (keep == 0) throw ArgumentError("must keep at least one item");
    const std::size_t p = data.num_items();
    std::vector<std::int64_t> popularity(p, 0);
    for (const auto& s : data)
        for (auto v : s.views) ++popularity[static_cast<std::size_t>(v)];

    std::vector<ItemId> ranked(p);
    std::iota(ranked.begin(), ranked.end(), 0);
    std::stable_sort(ranked.begin(), ranked.end(), [&](ItemId a, ItemId b) {
        return popularity[static_cast<std::size_t>(a)] > popularity[static_cast<std::size_t>(b)];
    });
    keep = std::min(keep, p);

    std::vector<ItemId> remap(p, -1);
    std::vector<std::string> labels;
    for (std::size_t r = 0; r < keep; ++r) {
        remap[static_cast<std::size_t>(ranked[r])] = static_cast<ItemId>(r);
        if (data.catalog().has_labels()) labels.push_back(data.catalog().label(ranked[r]));
    }

    std::vector<Session> out;
    for (const auto& s : data) {
        Session f{s.id, {}};
        for (auto v : s.views)
            if (auto m = remap[static_cast<std::size_t>(v)]; m >= 0) f.views.push_back(m);
        if (!f.views.empty()) out.push_back(std::move(f));
    }
    return SessionSet(ItemCatalog(keep, std::move(labels)), std::move(out));
}

}  // namespace lvsr
