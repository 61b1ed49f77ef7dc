#include <gtest/gtest.h>

#include <random>

#include "generators.hpp"
#include "venus/error.hpp"
#include "venus/text.hpp"

namespace venus {
namespace {

TEST(Canonicalize, TrimsLowercasesCollapses) {
  EXPECT_EQ(canonicalize_text("  Brown\t\tHORSE \n"), "brown horse");
  EXPECT_EQ(canonicalize_text(""), "");
  EXPECT_EQ(canonicalize_text("   "), "");
}

TEST(Canonicalize, KeepsNonAscii) { EXPECT_EQ(canonicalize_text("Caf\xc3\xa9  Au"), "caf\xc3\xa9 au"); }

TEST(Canonicalize, IdempotentOnRandomText) {
  testing::Rng rng(7);
  const std::string alphabet = "aB c\tD\n  e,.!Z";
  for (int i = 0; i < 500; ++i) {
    std::string s;
    const int n = testing::uniform_int(rng, 0, 30);
    for (int k = 0; k < n; ++k) s += alphabet[static_cast<std::size_t>(testing::uniform_int(rng, 0, 13))];
    const auto once = canonicalize_text(s);
    EXPECT_EQ(canonicalize_text(once), once);
  }
}

TEST(SplitWords, SplitsOnPunctuationAndSpace) {
  const std::vector<std::string> expected = {"dog", "sitting", "on", "bench", "sky"};
  EXPECT_EQ(split_words("dog sitting on bench, sky."), expected);
  EXPECT_TRUE(split_words(" ,, ").empty());
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Base64, Rfc4648Vectors) {
  const std::pair<const char*, const char*> cases[] = {
      {"", ""}, {"f", "Zg=="}, {"fo", "Zm8="}, {"foo", "Zm9v"}, {"foob", "Zm9vYg=="}, {"foobar", "Zm9vYmFy"}};
  for (const auto& [raw, enc] : cases) {
    EXPECT_EQ(base64_encode(raw), enc);
    EXPECT_EQ(base64_decode(enc), raw);
  }
}

TEST(Base64, RoundTripsBinary) {
  testing::Rng rng(3);
  for (int n = 0; n < 70; ++n) {
    std::string s;
    for (int k = 0; k < n; ++k) s += static_cast<char>(testing::uniform_int(rng, 0, 255));
    EXPECT_EQ(base64_decode(base64_encode(s)), s);
  }
}

TEST(Base64, RejectsForeignCharacters) { EXPECT_THROW(base64_decode("Zm9v*YmFy"), ParseError); }

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Join, Basic) {
  EXPECT_EQ(join({"a", "b", "c"}, ", "), "a, b, c");
  EXPECT_EQ(join({}, ", "), "");
}

}  // namespace
}  // namespace venus
