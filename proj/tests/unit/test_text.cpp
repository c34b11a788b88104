#include "litpipe/text.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace litpipe;

TEST_CASE("trim and case helpers") {
    CHECK(text::trim("  a b \n\t") == "a b");
    CHECK(text::trim("   ").empty());
    CHECK(text::to_lower("CoCa Model") == "coca model");
    CHECK(text::iequals("Cite", "cITE"));
    CHECK_FALSE(text::iequals("cite", "cites"));
    CHECK(text::istarts_with("Please generate", "please"));
    CHECK_FALSE(text::istarts_with("Pl", "please"));
}

TEST_CASE("word splitting") {
    CHECK(text::split_words("  one two\tthree\n") == std::vector<std::string>{"one", "two", "three"});
    CHECK(text::count_words("") == 0);
    CHECK(text::count_words("a  b") == 2);
    CHECK(text::join({"a", "b", "c"}, ",") == "a,b,c");
    CHECK(text::join({}, ",").empty());
}

TEST_CASE("form encoding matches urlencode of python requests") {
    CHECK(text::form_encode("Multimodal Research: Image-Text Model Interaction") ==
          "Multimodal+Research%3A+Image-Text+Model+Interaction");
    CHECK(text::form_encode("title,abstract") == "title%2Cabstract");
    CHECK(text::form_encode("a~b_c.d") == "a~b_c.d");
    CHECK(text::percent_encode("a b/c") == "a%20b%2Fc");
}

TEST_CASE("sha256 known vectors") {
    CHECK(text::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(text::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("truncate_utf8 never splits a code point") {
    const std::string s = "a\xc3\xa9\xe2\x82\xac\xf0\x9f\x98\x80z";  // a é € 😀 z
    CHECK(text::truncate_utf8(s, 100) == s);
    CHECK(text::truncate_utf8(s, 2) == "a");
    CHECK(text::truncate_utf8(s, 3) == "a\xc3\xa9");
    CHECK(text::truncate_utf8(s, 5) == "a\xc3\xa9");

    std::mt19937 rng(7);
    for (int round = 0; round < 200; ++round) {
        std::string t;
        int len = std::uniform_int_distribution<int>(0, 12)(rng);
        for (int i = 0; i < len; ++i) {
            switch (rng() % 4) {
            case 0: t += "x"; break;
            case 1: t += "\xc3\xa9"; break;
            case 2: t += "\xe2\x82\xac"; break;
            default: t += "\xf0\x9f\x98\x80"; break;
            }
        }
        std::size_t cap = std::uniform_int_distribution<std::size_t>(0, t.size())(rng);
        auto cut = text::truncate_utf8(t, cap);
        REQUIRE(cut.size() <= cap);
        REQUIRE(t.compare(0, cut.size(), cut) == 0);
        // the next byte, if any, starts a sequence
        if (cut.size() < t.size()) REQUIRE((static_cast<unsigned char>(t[cut.size()]) & 0xC0) != 0x80);
        // and nothing more than one sequence was lost
        REQUIRE(cap - cut.size() < 4);
    }
}
