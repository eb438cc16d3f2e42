#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "lvsr/data.hpp"
#include "lvsr/error.hpp"

using namespace lvsr;

namespace {

SessionSet numbered_sessions(std::size_t n) {
    std::vector<Session> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back({"u" + std::to_string(i), {static_cast<ItemId>(i % 3)}});
    return SessionSet(ItemCatalog(3), std::move(s));
}

}  // namespace

TEST_CASE("parse groups rows by session and infers the catalog") {
    const auto data = parse_sessions("s1,1,0\ns1,2,2\ns2,1,1\n");
    REQUIRE(data.size() == 2);
    CHECK(data.num_items() == 3);
    CHECK(data[0] == Session{"s1", {0, 2}});
    CHECK(data[1] == Session{"s2", {1}});
}

TEST_CASE("rows are ordered by order_key") {
    const auto data = parse_sessions("s1,2,2\ns1,1,0\n");
    CHECK(data[0].views == std::vector<ItemId>{0, 2});
}

TEST_CASE("header row is detected and skipped") {
    const auto data = parse_sessions("session_id,order_key,item_id\na,5,1\n");
    REQUIRE(data.size() == 1);
    CHECK(data[0].views == std::vector<ItemId>{1});
}

TEST_CASE("empty input needs an explicit catalog size") {
    CHECK_THROWS_AS(parse_sessions(""), ArgumentError);
    const auto data = parse_sessions("", 4);
    CHECK(data.empty());
    CHECK(data.num_items() == 4);
}

TEST_CASE("malformed rows report their line number") {
    try {
        parse_sessions("a,1,0\nb,x,1\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_sessions("a,1,0\nb,2\n"), ParseError);
    CHECK_THROWS_AS(parse_sessions("a,1,0\nb,2,-3\n"), ParseError);
}

TEST_CASE("explicit catalog size bounds item ids") {
    CHECK_THROWS_AS(parse_sessions("a,1,3\n", 3), BoundsError);
    CHECK(parse_sessions("a,1,0\n", 10).num_items() == 10);
}

TEST_CASE("write then load reproduces the sessions") {
    const auto original = parse_sessions("s1,10,4\ns2,3,1\ns1,20,0\ns2,4,1\n");
    const auto path = std::filesystem::temp_directory_path() / "lvsr_roundtrip.csv";
    write_sessions(original, path);
    const auto again = load_sessions(path, original.num_items());
    std::filesystem::remove(path);
    CHECK(again.sessions() == original.sessions());
    CHECK(format_sessions(again) == format_sessions(original));
}

TEST_CASE("catalog label count must match") {
    CHECK_THROWS_AS(ItemCatalog(3, {"a", "b"}), ArgumentError);
    CHECK_THROWS_AS(ItemCatalog(0), ArgumentError);
    CHECK(ItemCatalog(2, {"a", "b"}).label(1) == "b");
}

TEST_CASE("duplicate session ids are rejected") {
    CHECK_THROWS_AS(SessionSet(ItemCatalog(2), {{"a", {0}}, {"a", {1}}}), ArgumentError);
}

TEST_CASE("split_by_session partitions whole sessions") {
    const auto data = numbered_sessions(10);
    auto [train, test] = split_by_session(data, 0.3, 7);
    CHECK(train.size() == 7);
    CHECK(test.size() == 3);
    std::set<std::string> ids;
    for (const auto& s : train) ids.insert(s.id);
    for (const auto& s : test) CHECK(ids.insert(s.id).second);
    CHECK(ids.size() == 10);

    auto [train2, test2] = split_by_session(data, 0.3, 7);
    CHECK(train2.sessions() == train.sessions());
    CHECK(test2.sessions() == test.sessions());
}

TEST_CASE("split of two sessions gives one each") {
    auto [train, test] = split_by_session(numbered_sessions(2), 0.5, 1);
    CHECK(train.size() == 1);
    CHECK(test.size() == 1);
}

TEST_CASE("split rejects bad fractions and tiny inputs") {
    CHECK_THROWS_AS(split_by_session(numbered_sessions(5), 0.0, 1), ArgumentError);
    CHECK_THROWS_AS(split_by_session(numbered_sessions(5), 1.0, 1), ArgumentError);
    CHECK_THROWS_AS(split_by_session(numbered_sessions(1), 0.5, 1), ArgumentError);
}

TEST_CASE("to_counts counts occurrences") {
    CHECK(to_counts(std::vector<ItemId>{0, 0, 2}, 3) == CountVector{2, 0, 1});
    CHECK(to_counts(std::vector<ItemId>{1}, 4) == CountVector{0, 1, 0, 0});
    CHECK(to_counts(std::vector<ItemId>{}, 2) == CountVector{0, 0});
    CHECK_THROWS_AS(to_counts(std::vector<ItemId>{2}, 2), BoundsError);
}

TEST_CASE("to_counts is permutation invariant and sums to the length") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ItemId> views(1 + rng() % 20);
        for (auto& v : views) v = static_cast<ItemId>(rng() % 7);
        const auto base = to_counts(views, 7);
        std::shuffle(views.begin(), views.end(), rng);
        CHECK(to_counts(views, 7) == base);
        std::int64_t total = 0;
        for (auto c : base) total += c;
        CHECK(total == static_cast<std::int64_t>(views.size()));
    }
}

TEST_CASE("filter_top_items re-indexes by descending popularity") {
    const SessionSet data(ItemCatalog(4), {{"a", {3, 3, 1}}, {"b", {3, 2}}, {"c", {0}}});
    const auto top = filter_top_items(data, 2);
    CHECK(top.num_items() == 2);
    // item 3 (3 views) -> 0; items 0, 1, 2 tie at one view -> lowest id 0 -> 1.
    REQUIRE(top.size() == 3);
    CHECK(top[0].views == std::vector<ItemId>{0, 0});
    CHECK(top[1].views == std::vector<ItemId>{0});
    CHECK(top[2].views == std::vector<ItemId>{1});
}
