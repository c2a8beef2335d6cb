#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "rusgroup/cache.hpp"
#include "rusgroup/dataset_io.hpp"
#include "rusgroup/error.hpp"
#include "rusgroup/inference.hpp"
#include "support.hpp"

using namespace rusgroup;
namespace fs = std::filesystem;
namespace t = rusgroup::testing;
using nlohmann::json;

namespace {

fs::path demo_corpus() { return t::data_dir() / "demo" / "corpus"; }

struct Harness {
  std::unique_ptr<t::StubFixture> stub = t::StubFixture::demo();
  fs::path cache_dir = t::scratch_dir("cache");
  PredictionCache cache{cache_dir};
  ChatClient client;
  PromptRegistry prompts = PromptRegistry::builtin();
  PredictionContext ctx;

  Harness() {
    ctx.cache = &cache;
    ctx.client = &client;
    ctx.prompts = &prompts;
    ctx.media_root = demo_corpus();
  }
  ~Harness() { fs::remove_all(cache_dir); }
};

}  // namespace

TEST(ChatWire, RequestShape) {
  ModelRoleConfig c;
  c.model_id = "m";
  c.max_output_tokens = 7;
  RenderedPrompt p;
  p.text = "hello";
  const json with_image = build_chat_request(c, p, std::string("data:image/png;base64,AAAA"));
  EXPECT_EQ(with_image["model"], "m");
  EXPECT_EQ(with_image["max_tokens"], 7);
  EXPECT_EQ(with_image["temperature"], 0.0);
  const json& content = with_image["messages"][0]["content"];
  ASSERT_EQ(content.size(), 2u);
  EXPECT_EQ(content[0]["type"], "text");
  EXPECT_EQ(content[1]["image_url"]["url"], "data:image/png;base64,AAAA");
  EXPECT_EQ(build_chat_request(c, p, std::nullopt)["messages"][0]["content"].size(), 1u);
}

TEST(ChatWire, ResponseParsing) {
  EXPECT_EQ(parse_chat_response(R"({"choices":[{"message":{"content":"yes"}}]})"), "yes");
  EXPECT_THROW((void)parse_chat_response("{\"choices\": ["), ProtocolError);
  EXPECT_THROW((void)parse_chat_response(R"({"choices":[]})"), ProtocolError);
  EXPECT_THROW((void)parse_chat_response(R"({"choices":[{"message":{"content":[1]}}]})"), ProtocolError);
}

TEST(Media, LocalFilesBecomeDataUris) {
  const auto m = resolve_media("images/nlvr-001.png", demo_corpus());
  EXPECT_EQ(m.payload_url.rfind("data:image/png;base64,", 0), 0u);
  EXPECT_EQ(m.digest.size(), 64u);
  const auto remote = resolve_media("https://example.org/x.png", demo_corpus());
  EXPECT_EQ(remote.payload_url, "https://example.org/x.png");
  EXPECT_THROW((void)resolve_media("images/missing.png", demo_corpus()), InputError);
}

TEST(RoleConfig, ValidationAndJson) {
  Harness h;
  auto roles = h.stub->roles();
  EXPECT_NO_THROW(roles.validate(true));
  roles.multimodal.temperature = 0.7;
  EXPECT_THROW(roles.validate(true), InputError);
  EXPECT_NO_THROW(roles.validate(false));
  roles.multimodal.role = ModelRole::unimodal1;
  EXPECT_THROW(roles.validate(false), InputError);
  EXPECT_EQ(json(roles.unimodal1).get<ModelRoleConfig>(), roles.unimodal1);
  json bad = roles.unimodal1;
  bad["surprise"] = 1;
  EXPECT_THROW((void)bad.get<ModelRoleConfig>(), InputError);
}

TEST(Cache, KeysSeparateEveryField) {
  const auto base = PredictionCache::make_key("m", ModelRole::multimodal, "t", "p", "d");
  EXPECT_NE(base, PredictionCache::make_key("m2", ModelRole::multimodal, "t", "p", "d"));
  EXPECT_NE(base, PredictionCache::make_key("m", ModelRole::unimodal1, "t", "p", "d"));
  EXPECT_NE(base, PredictionCache::make_key("m", ModelRole::multimodal, "t2", "p", "d"));
  EXPECT_NE(base, PredictionCache::make_key("m", ModelRole::multimodal, "t", "p2", "d"));
  EXPECT_NE(base, PredictionCache::make_key("m", ModelRole::multimodal, "t", "p", "d2"));
  // Length prefixing: shifting a boundary changes the key.
  EXPECT_NE(PredictionCache::make_key("ab", ModelRole::multimodal, "c", "p", "d"),
            PredictionCache::make_key("a", ModelRole::multimodal, "bc", "p", "d"));
}

TEST(Cache, PutGetRoundTrip) {
  const fs::path dir = t::scratch_dir("cache-rt");
  PredictionCache cache(dir);
  const std::string key = PredictionCache::make_key("m", ModelRole::multimodal, "t", "p", "d");
  EXPECT_FALSE(cache.get(key).has_value());
  CacheEntry e{"{\"raw\":1}", "yes", "m", "http://x", "2026-01-01T00:00:00Z", 1};
  cache.put(key, e);
  EXPECT_EQ(cache.get(key), e);
  EXPECT_TRUE(fs::exists(cache.path_for(key)));
  fs::remove_all(dir);
}

TEST(Predict, TripletFromStubUsesRoleAnswers) {
  Harness h;
  const auto ds = load_dataset(demo_corpus(), "fer2013");
  const auto triplet = predict_triplet(ds.instances[0], ds.descriptor, h.stub->roles(), h.ctx);
  EXPECT_EQ(triplet.y1, "neutral");
  EXPECT_EQ(triplet.y2, "happy");
  EXPECT_EQ(triplet.ym, "happy");
  EXPECT_FALSE(triplet.provenance.multimodal.cache_hit);
  EXPECT_EQ(triplet.provenance.multimodal.model_id, "demo-mm");

  // The text-only role never carries an image; the others do.
  for (const auto& body : h.stub->server().chat_log()) {
    const bool has_image = body["messages"][0]["content"].size() == 2;
    EXPECT_EQ(has_image, body["model"] != "demo-text") << body.dump();
  }
}

TEST(Predict, RetriesThroughRateLimits) {
  Harness h;
  stub::FaultPlan f;
  f.fail_first_n = 2;
  f.fail_status = 429;
  h.stub->server().set_faults(f);
  const auto ds = load_dataset(demo_corpus(), "nlvr");
  auto roles = h.stub->roles();
  const auto triplet = predict_triplet(ds.instances[0], ds.descriptor, roles, h.ctx);
  const int total = triplet.provenance.unimodal1.retries + triplet.provenance.unimodal2.retries +
                    triplet.provenance.multimodal.retries;
  EXPECT_EQ(total, 2);
  EXPECT_EQ(h.stub->server().chat_requests(), 5u);
}

TEST(Predict, ExhaustedRetriesAreTransportErrors) {
  Harness h;
  stub::FaultPlan f;
  f.fail_first_n = 100;
  f.fail_status = 503;
  h.stub->server().set_faults(f);
  const auto ds = load_dataset(demo_corpus(), "nlvr");
  try {
    (void)predict_triplet(ds.instances[0], ds.descriptor, h.stub->roles(1), h.ctx);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 503);
  }
}

TEST(Predict, ClientErrorsAreNotRetried) {
  Harness h;
  stub::FaultPlan f;
  f.fail_first_n = 100;
  f.fail_status = 400;
  h.stub->server().set_faults(f);
  const auto ds = load_dataset(demo_corpus(), "nlvr");
  EXPECT_THROW((void)predict_triplet(ds.instances[0], ds.descriptor, h.stub->roles(3), h.ctx), TransportError);
  EXPECT_EQ(h.stub->server().chat_requests(), 1u);
}

TEST(Predict, UnreachableEndpointIsTransportError) {
  Harness h;
  auto roles = h.stub->roles(0);
  for (auto* r : {&roles.unimodal1, &roles.unimodal2, &roles.multimodal}) {
    r->endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
    r->request_timeout = std::chrono::milliseconds(500);
  }
  const auto ds = load_dataset(demo_corpus(), "nlvr");
  EXPECT_THROW((void)predict_triplet(ds.instances[0], ds.descriptor, roles, h.ctx), TransportError);
}

TEST(Predict, ProtocolFaults) {
  const auto ds = load_dataset(demo_corpus(), "nlvr");
  for (int fault = 0; fault < 3; ++fault) {
    Harness h;
    stub::FaultPlan f;
    f.malformed_body = fault == 0;
    f.empty_choices = fault == 1;
    f.non_string_content = fault == 2;
    h.stub->server().set_faults(f);
    EXPECT_THROW((void)predict_triplet(ds.instances[0], ds.descriptor, h.stub->roles(), h.ctx), ProtocolError)
        << fault;
  }
}

TEST(Predict, ParallelKeepsOrderAndBoundsInFlight) {
  Harness h;
  auto cfg = stub::StubConfig::load(t::data_dir() / "demo" / "stub_answers.json");
  cfg.latency = std::chrono::milliseconds(20);
  t::StubFixture slow(cfg);
  const auto ds = load_dataset(demo_corpus(), "ucmerced");
  PredictOptions opts;
  opts.parallelism = 4;
  // 4 workers x 3 roles could overlap, but each worker issues its roles in turn.
  const auto triplets = predict_dataset(ds.instances, ds.descriptor, slow.roles(), h.ctx, opts);
  ASSERT_EQ(triplets.size(), ds.instances.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    EXPECT_EQ(triplets[i].instance_id, ds.instances[i].instance_id);
    EXPECT_EQ(triplets[i].ym, ds.instances[i].gold_answer);
  }
  EXPECT_LE(slow.server().max_in_flight(), 4u);
  EXPECT_GE(slow.server().max_in_flight(), 2u);
}

TEST(Predict, CheckpointThenResumeFetchesOnlyMissing) {
  Harness h;
  const auto ds = load_dataset(demo_corpus(), "hateful_memes");
  const fs::path ckpt = h.cache_dir / "hateful_memes.checkpoint.json";
  stub::FaultPlan f;
  f.fail_on_substring = ds.instances[3].question;
  f.fail_on_status = 500;
  h.stub->server().set_faults(f);
  PredictOptions opts;
  opts.parallelism = 1;
  opts.checkpoint_path = ckpt;
  EXPECT_THROW((void)predict_dataset(ds.instances, ds.descriptor, h.stub->roles(1), h.ctx, opts), TransportError);
  ASSERT_TRUE(fs::exists(ckpt));
  const json c = json::parse(read_file(ckpt));
  EXPECT_EQ(c["dataset_id"], "hateful_memes");
  EXPECT_EQ(c["failed_instance_id"], ds.instances[3].instance_id);
  EXPECT_EQ(c["error"]["category"], "transport");
  EXPECT_EQ(c["completed_ids"].size(), 3u);

  h.stub->server().set_faults({});
  h.stub->server().reset_counters();
  const auto triplets = predict_dataset(ds.instances, ds.descriptor, h.stub->roles(1), h.ctx, opts);
  EXPECT_EQ(triplets.size(), 5u);
  EXPECT_EQ(h.stub->server().chat_requests(), 6u);  // instances 4 and 5, three roles each
  EXPECT_FALSE(fs::exists(ckpt));
  EXPECT_TRUE(triplets[0].provenance.multimodal.cache_hit);
  EXPECT_FALSE(triplets[4].provenance.multimodal.cache_hit);
}

TEST(Predict, WarmCacheMakesNoRequests) {
  Harness h;
  const auto ds = load_dataset(demo_corpus(), "memecap");
  const auto cold = predict_dataset(ds.instances, ds.descriptor, h.stub->roles(), h.ctx);
  h.stub->server().reset_counters();
  const auto warm = predict_dataset(ds.instances, ds.descriptor, h.stub->roles(), h.ctx);
  EXPECT_EQ(h.stub->server().chat_requests(), 0u);
  ASSERT_EQ(cold.size(), warm.size());
  for (std::size_t i = 0; i < cold.size(); ++i) {
    EXPECT_EQ(cold[i].ym, warm[i].ym);
    EXPECT_EQ(cold[i].provenance.multimodal.timestamp, warm[i].provenance.multimodal.timestamp);
    EXPECT_TRUE(warm[i].provenance.unimodal2.cache_hit);
  }
}

TEST(Embeddings, ReflexiveThroughStubEndpoint) {
  Harness h;
  EmbeddingEndpoint ep;
  ep.endpoint_url = h.stub->server().embeddings_url();
  ep.model_id = "stub-embed";
  auto embedder = std::make_shared<HttpEmbedder>(ep);
  SimilarityFunction fn("embed", SimilarityKind::embedding_cosine, {}, embedder);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const std::string a = t::random_text(rng) + " word";
    const std::string b = t::random_text(rng) + " other";
    EXPECT_NEAR(fn(a, a), 1.0, 1e-6);
    const double ab = fn(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_NEAR(ab, fn(b, a), 1e-12);
  }
  const std::size_t before = embedder->request_count();
  (void)fn("fresh text one", "fresh text two");
  (void)fn("fresh text one", "fresh text two");
  EXPECT_EQ(embedder->request_count(), before + 1);
}
