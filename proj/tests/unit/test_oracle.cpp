#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "advxfer/error.hpp"
#include "advxfer/oracle.hpp"
#include "advxfer/parallel.hpp"
#include "advxfer/scripted.hpp"

using namespace advxfer;

namespace {

std::unique_ptr<Embedder> bow(int dim = 4096) { return make_embedder({"scripted:bow", dim}); }

Frame placard_frame(std::uint8_t red) {
  Frame f = Frame::blank(32, 32, 90, 90, 90);
  for (int y = 8; y < 24; ++y) {
    for (int x = 8; x < 24; ++x) {
      f.at(x, y, 0) = red;
      f.at(x, y, 1) = 20;
      f.at(x, y, 2) = 20;
    }
  }
  return f;
}

OracleClient scripted_client(const std::string& endpoint, int max_in_flight = 1) {
  OracleRef ref{"m", endpoint};
  ref.max_in_flight = max_in_flight;
  return OracleClient(ref, make_scripted_oracle(endpoint), std::make_shared<QueryLedger>());
}

}  // namespace

TEST(SemanticLoss, ReferenceValues) {
  const std::vector<double> v{1, 2, 3};
  const std::vector<double> neg{-1, -2, -3};
  EXPECT_NEAR(semantic_loss(v, v), 0.0, 1e-15);
  EXPECT_NEAR(semantic_loss(v, neg), 2.0, 1e-15);
  EXPECT_NEAR(semantic_loss(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 1.0, 1e-15);
  EXPECT_THROW(semantic_loss(v, std::vector<double>{1, 2}), Error);
  try {
    semantic_loss(v, std::vector<double>{0, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateEmbedding);
  }
}

TEST(Embedding, DeterministicAndValidated) {
  auto e = bow();
  EXPECT_EQ(embed_text(*e, "brake now"), embed_text(*e, "brake now"));
  EXPECT_EQ(embed_text(*e, "brake").size(), 4096u);
  EXPECT_NEAR(cosine_similarity(embed_text(*e, "brake"), embed_text(*e, "brake")), 1.0, 1e-15);
  try {
    embed_text(*e, "");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::kInvalidInput);
  }
  // Text without alphanumeric tokens embeds to the zero vector.
  try {
    embed_text(*e, "?!");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::kDegenerateEmbedding);
  }
}

TEST(Embedding, BagOfWordsCountsTokens) {
  BagOfWordsEmbedder e(64, 0);
  const auto v = e.embed("Brake, brake BRAKE");
  EXPECT_EQ(v[e.bucket("brake")], 3.0);
  double total = 0;
  for (double x : v) total += x;
  EXPECT_EQ(total, 3.0);
  EXPECT_EQ(tokenize("Turn-left NOW 2x"), (std::vector<std::string>{"turn", "left", "now", "2x"}));
}

TEST(NormalizeAction, CanonicalAndFixtureTexts) {
  auto e = bow();
  const auto label = [&](const std::string& t) { return normalize_action({t, 0.0, {}}, *e); };
  for (ActionLabel a : kCanonicalActions) EXPECT_EQ(label(std::string(canonical_phrase(a))), a);
  EXPECT_EQ(label(std::string(kCrosswalkTargetText)), ActionLabel::kAccelerate);
  EXPECT_EQ(label(std::string(kHighwayTargetText)), ActionLabel::kTurnRight);
  EXPECT_EQ(label(std::string(kSafeText)), ActionLabel::kBrake);
  EXPECT_EQ(label("I should brake"), ActionLabel::kBrake);
  EXPECT_EQ(label("purple elephants dance quietly"), ActionLabel::kUnknown);
}

TEST(NormalizeAction, TotalOverRandomTexts) {
  auto e = bow(256);
  const ActionNormalizer n(*e);
  const std::vector<std::string> words{"brake", "left", "the", "car", "turn", "speed", "go", "x"};
  std::uint64_t s = 1;
  for (int i = 0; i < 500; ++i) {
    std::string text;
    for (int k = 0; k < 1 + i % 6; ++k) {
      s = s * 6364136223846793005ULL + 1442695040888963407ULL;
      text += words[(s >> 33) % words.size()] + " ";
    }
    const ActionLabel a = n.classify(OracleResponse{text, 0.0, {}});
    EXPECT_TRUE(a == ActionLabel::kUnknown || canonical_phrase(a).size() > 0);
  }
}

TEST(ActionLabel, RoundTrip) {
  for (ActionLabel a : kCanonicalActions) EXPECT_EQ(parse_action(to_string(a)), a);
  EXPECT_EQ(parse_action("unknown"), ActionLabel::kUnknown);
  EXPECT_THROW(parse_action("fly"), Error);
}

TEST(ScriptedOracle, AlwaysSafeAndUnsafe) {
  const Frame f = Frame::blank(8, 8);
  EXPECT_EQ(ScriptedOracle(parse_scripted_endpoint("scripted:always-safe")).respond(f), kSafeText);
  EXPECT_EQ(ScriptedOracle(parse_scripted_endpoint("scripted:always-brake")).respond(f), kSafeText);
  EXPECT_EQ(ScriptedOracle(parse_scripted_endpoint("scripted:always-unsafe")).respond(f),
            kCrosswalkTargetText);
  EXPECT_EQ(ScriptedOracle(parse_scripted_endpoint("scripted:always-unsafe?unsafe=go go go"))
                .respond(f),
            "go go go");
  EXPECT_THROW(ScriptedOracle(parse_scripted_endpoint("scripted:nonsense")), Error);
}

TEST(ScriptedOracle, PatchSensitiveRule) {
  ScriptedOracle o(parse_scripted_endpoint("scripted:patch-sensitive?region=8,8,16,16"));
  EXPECT_EQ(o.respond(placard_frame(230)), kCrosswalkTargetText);
  EXPECT_EQ(o.respond(placard_frame(230)), o.respond(placard_frame(230)));
  const std::string below = o.respond(placard_frame(100));
  EXPECT_NE(below.find("brake"), std::string::npos);
  auto e = bow();
  EXPECT_EQ(normalize_action({below, 0.0, {}}, *e), ActionLabel::kBrake);
  // Threshold is strict.
  EXPECT_NE(o.respond(placard_frame(200)), kCrosswalkTargetText);
  EXPECT_EQ(o.respond(placard_frame(201)), kCrosswalkTargetText);
}

TEST(ScriptedOracle, GradedLossFallsAsTheStatisticRises) {
  ScriptedOracle o(parse_scripted_endpoint("scripted:patch-sensitive?region=8,8,16,16"));
  auto e = bow();
  const auto target = embed_text(*e, kCrosswalkTargetText);
  double previous = 3.0;
  for (int red = 0; red <= 200; red += 20) {
    const double loss = semantic_loss(embed_text(*e, o.respond(placard_frame(red))), target);
    EXPECT_LE(loss, previous);
    previous = loss;
  }
  EXPECT_LT(previous, 0.5);
  EXPECT_NEAR(semantic_loss(embed_text(*e, o.respond(placard_frame(255))), target), 0.0, 1e-12);
}

TEST(ScriptedOracle, InvertAndChannel) {
  ScriptedOracle o(
      parse_scripted_endpoint("scripted:patch-sensitive?region=8,8,16,16&channel=g&threshold=50&invert=1"));
  EXPECT_EQ(o.respond(placard_frame(230)), kCrosswalkTargetText);  // green 20 <= 50
  EXPECT_NE(o.respond(Frame::blank(32, 32, 0, 200, 0)), kCrosswalkTargetText);
}

TEST(ScriptedOracle, NoisyIsAPureFunctionOfTheFrame) {
  ScriptedOracle o(parse_scripted_endpoint("scripted:noisy?p=0.5&seed=3"));
  int unsafe = 0;
  for (int v = 0; v < 200; ++v) {
    const Frame f = Frame::blank(4, 4, static_cast<std::uint8_t>(v), 0, 0);
    EXPECT_EQ(o.respond(f), o.respond(f));
    unsafe += o.respond(f) == kCrosswalkTargetText ? 1 : 0;
  }
  EXPECT_GT(unsafe, 60);
  EXPECT_LT(unsafe, 140);
}

TEST(OracleClient, LedgersEveryCall) {
  auto client = scripted_client("scripted:always-safe");
  for (int i = 0; i < 7; ++i) query_oracle(client, Frame::blank(4, 4));
  EXPECT_EQ(client.ledger().size(), 7u);
  EXPECT_EQ(client.ledger().count("m"), 7u);
  EXPECT_EQ(client.ledger().snapshot().front().request_bytes, 48u);
}

namespace {

class SlowBackend final : public OracleBackend {
 public:
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
  std::string infer(const Frame&, const std::string&, std::size_t&) override {
    const int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active;
    return "brake";
  }
};

class FailingBackend final : public OracleBackend {
 public:
  std::string infer(const Frame&, const std::string&, std::size_t&) override {
    fail(ErrorKind::kTransport, "down");
  }
};

}  // namespace

TEST(OracleClient, BoundsConcurrencyToMaxInFlight) {
  auto backend = std::make_unique<SlowBackend>();
  SlowBackend* raw = backend.get();
  OracleRef ref{"m", "scripted:x"};
  ref.max_in_flight = 2;
  OracleClient client(ref, std::move(backend), nullptr);
  parallel_for(24, 8, [&](std::size_t) { client.query(Frame::blank(2, 2)); });
  EXPECT_LE(raw->peak.load(), 2);
  EXPECT_EQ(client.ledger().size(), 24u);
}

TEST(OracleClient, FailedCallsAreLedgeredAndPropagated) {
  OracleClient client(OracleRef{"m", "scripted:x"}, std::make_unique<FailingBackend>(), nullptr);
  EXPECT_THROW(client.query(Frame::blank(2, 2)), Error);
  ASSERT_EQ(client.ledger().size(), 1u);
  EXPECT_FALSE(client.ledger().snapshot()[0].ok);
}

TEST(OracleRef, Validation) {
  OracleRef r{"a", "scripted:always-safe"};
  EXPECT_NO_THROW(r.validate());
  r.timeout = 0;
  EXPECT_THROW(r.validate(), Error);
  r = {"a", "scripted:always-safe"};
  r.max_in_flight = 0;
  EXPECT_THROW(r.validate(), Error);
  EXPECT_THROW(make_oracle({"a", "ftp://x"}, nullptr), Error);
}
