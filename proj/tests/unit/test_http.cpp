#include <gtest/gtest.h>

#include "advxfer/error.hpp"
#include "advxfer/http.hpp"
#include "advxfer/image_io.hpp"
#include "advxfer/reference_server.hpp"
#include "advxfer/scripted.hpp"
#include "json.hpp"
#include "support/fixtures.hpp"

using namespace advxfer;

namespace {

const std::string kGoldenOracle = "scripted:patch-sensitive?region=8,8,16,16";
const EmbeddingRef kGoldenEmbedding{"scripted:bow", 64};

ReferenceServer::Options golden_options() {
  ReferenceServer::Options o;
  o.oracle_endpoint = kGoldenOracle;
  o.embedding = kGoldenEmbedding;
  return o;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

// Port that was just bound and released.
int closed_port() {
  ReferenceServer s(golden_options());
  const int port = s.start();
  s.stop();
  return port;
}

}  // namespace

TEST(Base64, RoundTripAndTruncation) {
  for (std::size_t n = 0; n < 20; ++n) {
    std::vector<std::uint8_t> bytes(n);
    for (std::size_t i = 0; i < n; ++i) bytes[i] = static_cast<std::uint8_t>(i * 37 + 11);
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
  }
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>{'f', 'o', 'o', 'b'}), "Zm9vYg==");
  EXPECT_EQ(kind_of([] { base64_decode("Zm9vYg="); }), ErrorKind::kProtocol);
  EXPECT_EQ(kind_of([] { base64_decode("Zm9*Yg=="); }), ErrorKind::kProtocol);
}

TEST(WireCodec, RequestAndReplyShapes) {
  const Frame f = Frame::blank(3, 2, 1, 2, 3);
  const auto req = nlohmann::json::parse(encode_infer_request(f, "What should the driver do?"));
  EXPECT_EQ(req.at("prompt"), "What should the driver do?");
  EXPECT_EQ(decode_png(base64_decode(req.at("image_png_b64").get<std::string>())).pixels, f.pixels);
  EXPECT_EQ(decode_infer_reply(R"({"text": "brake"})"), "brake");
  EXPECT_EQ(kind_of([] { decode_infer_reply(R"({"txt": "brake"})"); }), ErrorKind::kProtocol);
  EXPECT_EQ(kind_of([] { decode_infer_reply(R"({"text": ""})"); }), ErrorKind::kProtocol);
  EXPECT_EQ(decode_embed_reply(R"({"vector": [1, 2.5], "dim": 2})", 2), (std::vector<double>{1, 2.5}));
  EXPECT_EQ(kind_of([] { decode_embed_reply(R"({"vector": [1], "dim": 1})", 2); }), ErrorKind::kProtocol);
  EXPECT_EQ(kind_of([] { decode_embed_reply("not json", 2); }), ErrorKind::kProtocol);
}

TEST(ReferenceServer, HealthAndInfer) {
  ReferenceServer server(golden_options());
  server.start();
  const HealthInfo h = check_health(server.url(), 5.0);
  EXPECT_EQ(h.name, "advxfer-reference");

  auto ledger = std::make_shared<QueryLedger>();
  auto http = make_oracle({"net", server.url()}, ledger);
  ScriptedOracle local(parse_scripted_endpoint(kGoldenOracle));
  Frame f = Frame::blank(32, 32, 90, 90, 90);
  for (int y = 8; y < 24; ++y) {
    for (int x = 8; x < 24; ++x) f.at(x, y, 0) = 230;
  }
  EXPECT_EQ(http->query(f).text, local.respond(f));
  EXPECT_EQ(http->query(Frame::blank(32, 32)).text, local.respond(Frame::blank(32, 32)));
  EXPECT_EQ(ledger->size(), 2u);
  EXPECT_GT(ledger->snapshot()[0].request_bytes, 0u);
}

TEST(ReferenceServer, EmbedMatchesInProcess) {
  ReferenceServer server(golden_options());
  server.start();
  auto remote = make_embedder({server.url(), 64});
  auto local = make_embedder(kGoldenEmbedding);
  for (const std::string t : {std::string("brake"), std::string("turn left now"),
                              std::string(kHighwayTargetText)}) {
    EXPECT_EQ(embed_text(*remote, t), embed_text(*local, t));
  }
  EXPECT_EQ(kind_of([&] { make_embedder({server.url(), 32})->embed("brake"); }), ErrorKind::kProtocol);
}

TEST(HttpOracle, RetriesTransientFailures) {
  ReferenceServer server(golden_options());
  server.start();
  auto oracle = make_oracle({"net", server.url()}, nullptr);
  server.inject_failures(503, 2);
  EXPECT_NO_THROW(oracle->query(Frame::blank(8, 8)));
  EXPECT_EQ(server.requests(), 3u);

  server.inject_failures(503, 3);
  EXPECT_EQ(kind_of([&] { oracle->query(Frame::blank(8, 8)); }), ErrorKind::kTransport);
}

TEST(HttpOracle, ClientErrorsAreProtocolErrors) {
  ReferenceServer server(golden_options());
  server.start();
  auto oracle = make_oracle({"net", server.url()}, nullptr);
  server.inject_failures(400, 1);
  EXPECT_EQ(kind_of([&] { oracle->query(Frame::blank(8, 8)); }), ErrorKind::kProtocol);
  EXPECT_EQ(server.requests(), 1u);
}

TEST(HttpOracle, UnreachableEndpointFailsAfterRetries) {
  const std::string url = "http://127.0.0.1:" + std::to_string(closed_port());
  OracleRef ref{"gone", url};
  ref.timeout = 1.0;
  auto oracle = make_oracle(ref, nullptr);
  try {
    oracle->query(Frame::blank(4, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTransport);
    EXPECT_NE(std::string(e.what()).find("2 retries"), std::string::npos);
  }
  EXPECT_EQ(kind_of([&] { check_health(url, 1.0); }), ErrorKind::kTransport);
}

TEST(HttpEndpoint, Parsing) {
  const Endpoint e = parse_http_endpoint("http://example.org:9000/");
  EXPECT_EQ(e.host, "example.org");
  EXPECT_EQ(e.port, 9000);
  EXPECT_EQ(parse_http_endpoint("http://h").port, 80);
  EXPECT_THROW(parse_http_endpoint("https://h"), Error);
  EXPECT_THROW(parse_http_endpoint("http://h:notaport"), Error);
}

TEST(Conformance, ShippedGoldenCasesAreCurrent) {
  const auto shipped = load_conformance_cases(ADVXFER_GOLDEN_DIR);
  const auto fresh = build_golden_cases(kGoldenOracle, kGoldenEmbedding);
  ASSERT_EQ(shipped.size(), fresh.size());
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    EXPECT_EQ(shipped[i].name, fresh[i].name);
    EXPECT_EQ(shipped[i].path, fresh[i].path);
    EXPECT_EQ(shipped[i].body, fresh[i].body) << fresh[i].name;
    EXPECT_EQ(shipped[i].expect_status, fresh[i].expect_status);
    EXPECT_EQ(nlohmann::json::parse(shipped[i].expect_body_json.empty() ? "null" : shipped[i].expect_body_json),
              nlohmann::json::parse(fresh[i].expect_body_json.empty() ? "null" : fresh[i].expect_body_json))
        << fresh[i].name;
  }
}

TEST(Conformance, ReferenceServerPassesEveryCase) {
  ReferenceServer server(golden_options());
  server.start();
  const auto results = run_conformance(server.url(), load_conformance_cases(ADVXFER_GOLDEN_DIR));
  ASSERT_GE(results.size(), 10u);
  for (const auto& r : results) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Conformance, DeviatingServerIsCaught) {
  ReferenceServer::Options o = golden_options();
  o.oracle_endpoint = "scripted:patch-sensitive?region=8,8,16,16&threshold=240";
  ReferenceServer server(o);
  server.start();
  int failed = 0;
  for (const auto& r : run_conformance(server.url(), load_conformance_cases(ADVXFER_GOLDEN_DIR))) {
    failed += r.passed ? 0 : 1;
  }
  EXPECT_GT(failed, 0);
}

TEST(Conformance, CaseFilesRoundTrip) {
  fixtures::TempDir dir("golden");
  const auto cases = build_golden_cases(kGoldenOracle, kGoldenEmbedding);
  write_conformance_cases(dir.path(), cases);
  const auto back = load_conformance_cases(dir.path());
  ASSERT_EQ(back.size(), cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    EXPECT_EQ(back[i].name, cases[i].name);
    EXPECT_EQ(back[i].body, cases[i].body);
    EXPECT_EQ(back[i].expect_same_as_previous, cases[i].expect_same_as_previous);
  }
}

TEST(ReferenceServer, RejectsOversizedBodies) {
  ReferenceServer::Options o = golden_options();
  o.max_request_bytes = 64;
  ReferenceServer server(o);
  server.start();
  auto oracle = make_oracle({"net", server.url()}, nullptr);
  EXPECT_EQ(kind_of([&] { oracle->query(Frame::blank(16, 16)); }), ErrorKind::kProtocol);
}
