#include "core/provider.hpp"

#include <cmath>
#include <random>

#include "support.hpp"

namespace omgm {
namespace {

double cosine(const DenseVector& a, const DenseVector& b) {
  return dot(a.values, b.values) / (l2_norm(a.values) * l2_norm(b.values));
}

std::string random_string(std::mt19937_64& rng) {
  std::string s(8 + rng() % 40, ' ');
  for (auto& c : s) c = static_cast<char>('a' + rng() % 26);
  return s;
}

TEST(DeterministicProvider, SameTextTwiceGivesIdenticalUnitVectors) {
  const DeterministicProvider p;
  const std::vector<std::string> texts{"red fox", "red fox", "blue whale"};
  const auto v = p.embed_text(texts);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].values, v[1].values);
  EXPECT_NE(v[0].values, v[2].values);
  for (const auto& x : v) {
    EXPECT_EQ(x.dims(), 256u);
    EXPECT_NEAR(l2_norm(x.values), 1.0, 1e-6);
  }
}

TEST(DeterministicProvider, BatchEqualsOneAtATime) {
  const DeterministicProvider p;
  const std::vector<std::string> texts{"a", "bb", "[seed:x*0.5+y] z"};
  const auto batch = p.embed_text(texts);
  for (std::size_t i = 0; i < texts.size(); ++i)
    EXPECT_EQ(p.embed_text(std::span(&texts[i], 1))[0].values, batch[i].values);

  const std::vector<FusedInput> inputs{{ImageRef{"i1", "synth:i1", ""}, "t1"},
                                       {ImageRef{"i2", "synth:i2", ""}, "t2"}};
  const auto fused = p.embed_fused(inputs);
  for (std::size_t i = 0; i < inputs.size(); ++i)
    EXPECT_EQ(p.embed_fused(inputs[i].image, inputs[i].text).values, fused[i].values);
}

TEST(DeterministicProvider, UnrelatedStringsAreNearlyOrthogonal) {
  const DeterministicProvider p;
  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::vector<std::string> pair{random_string(rng), random_string(rng)};
    if (pair[0] == pair[1]) continue;
    const auto v = p.embed_text(pair);
    worst = std::max(worst, std::abs(cosine(v[0], v[1])));
  }
  EXPECT_LT(worst, 0.5);
}

TEST(DeterministicProvider, PlantedImageMatchesItsSummary) {
  const DeterministicProvider p;
  const ImageRef img{"[seed:entity-7]photo", "synth:photo", ""};
  const std::vector<std::string> summary{"[seed:entity-7] A summary with any words."};
  const auto iv = p.embed_image(std::span(&img, 1));
  const auto tv = p.embed_text(summary);
  EXPECT_NEAR(cosine(iv[0], tv[0]), 1.0, 1e-12);
}

TEST(DeterministicProvider, WeightedDirectiveLeansToHeavierKey) {
  const DeterministicProvider p;
  const std::vector<std::string> texts{"[seed:a*0.58+b*0.6]", "[seed:a]", "[seed:b]"};
  const auto v = p.embed_text(texts);
  EXPECT_GT(dot(v[0].values, v[2].values), dot(v[0].values, v[1].values));
  EXPECT_GT(dot(v[0].values, v[1].values), 0.6);
}

TEST(DeterministicProvider, FusedMatrixShapeAndRowNorms) {
  const DeterministicProvider p;
  const auto m = p.embed_fused(ImageRef{"img", "synth:img", ""}, "where is it");
  EXPECT_EQ(m.rows, kFusedRows);
  EXPECT_EQ(m.dims, 64u);
  ASSERT_EQ(m.values.size(), 32u * 64u);
  for (std::size_t r = 0; r < m.rows; ++r) EXPECT_NEAR(l2_norm(m.row(r)), 1.0, 1e-6);
  EXPECT_EQ(p.embed_fused(ImageRef{"img", "synth:img", ""}, "where is it").values, m.values);
}

TEST(DeterministicProvider, ImageResolution) {
  const DeterministicProvider p;
  const ImageRef remote{"r", "https://example.org/a.jpg", ""};
  EXPECT_OMGM_ERROR(p.embed_image(std::span(&remote, 1)), ErrorCode::kResolution);
  const ImageRef missing{"m", "/nonexistent/omgm/a.jpg", ""};
  EXPECT_OMGM_ERROR(p.embed_image(std::span(&missing, 1)), ErrorCode::kResolution);
  const ImageRef inline_bytes{"b", "", "aGVsbG8="};
  EXPECT_EQ(p.embed_image(std::span(&inline_bytes, 1)).size(), 1u);

  test::TempDir dir;
  write_file(dir.file("x.jpg"), "jpegish");
  const ImageRef local{"l", "file://" + dir.file("x.jpg"), ""};
  EXPECT_EQ(p.embed_image(std::span(&local, 1)).size(), 1u);
}

TEST(DeterministicProvider, EmptyInputsArePreconditionErrors) {
  const DeterministicProvider p;
  EXPECT_OMGM_ERROR(p.embed_text({}), ErrorCode::kInvalidArgument);
  const std::vector<std::string> blank{""};
  EXPECT_OMGM_ERROR(p.embed_text(blank), ErrorCode::kInvalidArgument);
  EXPECT_OMGM_ERROR(p.generate("", {}), ErrorCode::kInvalidArgument);
  EXPECT_OMGM_ERROR(p.score_text_pairs("q", {}), ErrorCode::kInvalidArgument);
}

TEST(DeterministicProvider, TruncationIsReported) {
  const DeterministicProvider p(DeterministicOptions{16, 8, 10});
  const std::vector<std::string> texts{"short", "this text is longer than ten"};
  const auto v = p.embed_text(texts);
  EXPECT_FALSE(v[0].truncated);
  EXPECT_TRUE(v[1].truncated);
}

TEST(DeterministicProvider, GenerateEchoesFirst64CodePoints) {
  const DeterministicProvider p;
  EXPECT_EQ(p.generate("hello", {}), "ECHO:hello");
  const std::string long_prompt(100, 'x');
  EXPECT_EQ(p.generate(long_prompt, {}), "ECHO:" + std::string(64, 'x'));
  std::string accented;
  for (int i = 0; i < 70; ++i) accented += "\xC3\xA9";  // U+00E9
  const auto out = p.generate(accented, {});
  EXPECT_EQ(out.size(), 5u + 64u * 2u);
}

TEST(TokenOverlap, HandComputedRatios) {
  EXPECT_DOUBLE_EQ(token_overlap("red fox den", "red fox"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(token_overlap("red fox den", "blue whale"), 0.0);
  EXPECT_DOUBLE_EQ(token_overlap("The Fox", "the fox"), 1.0);
  EXPECT_DOUBLE_EQ(token_overlap("", "anything"), 0.0);

  const DeterministicProvider p;
  const std::vector<std::string> passages{"red fox", "blue whale", "[seed:k] red fox den"};
  const auto s = p.score_text_pairs("[seed:q] red fox den", passages);
  EXPECT_GT(s[0], s[1]);
  EXPECT_DOUBLE_EQ(s[2], 1.0);
}

TEST(SeedDirective, ParsesTermsAndWeights) {
  const auto d = parse_seed_directive("[seed:img-a*0.58+img-b*0.6] rest of text");
  ASSERT_TRUE(d);
  ASSERT_EQ(d->terms.size(), 2u);
  EXPECT_EQ(d->terms[0].key, "img-a");
  EXPECT_DOUBLE_EQ(d->terms[0].weight, 0.58);
  EXPECT_EQ(d->terms[1].key, "img-b");
  EXPECT_EQ(d->rest, "rest of text");
  EXPECT_FALSE(parse_seed_directive("no directive"));
  EXPECT_FALSE(parse_seed_directive("[seed:a*x]"));
  EXPECT_EQ(strip_seed_directive("[seed:a] b"), "b");
}

TEST(SeedDirective, KeysHashWithFnv1a) {
  // Reference FNV-1a 64-bit values.
  EXPECT_EQ(seed_of_key(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(seed_of_key("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(seed_of_key("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(seed_of_key(placeholder_image().ref_id), 0u);
}

TEST(CachingProvider, MemoizesAndKeepsIdentity) {
  auto inner = std::make_shared<DeterministicProvider>();
  CachingProvider cache(inner);
  EXPECT_EQ(cache.id(), inner->id());
  const std::vector<std::string> texts{"a", "b"};
  const auto first = cache.embed_text(texts);
  const auto second = cache.embed_text(texts);
  EXPECT_EQ(first[0].values, second[0].values);
  EXPECT_EQ(cache.misses(), 2u);
  EXPECT_EQ(cache.hits(), 2u);
  EXPECT_EQ(cache.embed_text(texts)[1].values, inner->embed_text(texts)[1].values);
}

TEST(Base64, KnownVectorsAndRoundTrip) {
  EXPECT_EQ(base64::encode("hello"), "aGVsbG8=");
  EXPECT_EQ(base64::encode(""), "");
  EXPECT_EQ(base64::encode("ab"), "YWI=");
  EXPECT_EQ(base64::decode("aGVsbG8="), "hello");
  EXPECT_EQ(base64::decode("YWI="), "ab");
  std::mt19937_64 rng(3);
  for (int n = 0; n < 64; ++n) {
    std::string bytes(n, '\0');
    for (auto& c : bytes) c = static_cast<char>(rng());
    EXPECT_EQ(base64::decode(base64::encode(bytes)), bytes);
  }
  EXPECT_OMGM_ERROR(base64::decode("a$=="), ErrorCode::kResolution);
}

}  // namespace
}  // namespace omgm
