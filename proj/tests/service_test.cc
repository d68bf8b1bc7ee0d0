#include <algorithm>

#include <gtest/gtest.h>

#include <httplib.h>

#include "cbir/image_io.h"
#include "cbir/pipeline.h"
#include "cbir/service.h"
#include "synthetic.h"

namespace cbir {
namespace {

using nlohmann::json;
using testing::TempDir;

std::string base64_encode(const std::string& in) {
  static const char* a = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t v = std::uint8_t(in[i]) << 16 | std::uint8_t(in[i + 1]) << 8 | std::uint8_t(in[i + 2]);
    for (int s = 18; s >= 0; s -= 6) out += a[(v >> s) & 63];
  }
  if (i + 1 == in.size()) {
    const std::uint32_t v = std::uint8_t(in[i]) << 16;
    out += a[(v >> 18) & 63];
    out += a[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == in.size()) {
    const std::uint32_t v = std::uint8_t(in[i]) << 16 | std::uint8_t(in[i + 1]) << 8;
    out += a[(v >> 18) & 63];
    out += a[(v >> 12) & 63];
    out += a[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

// Three classes of eight 48x48 images with hist_l and lbp_rgb tables.
class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    testing::write_image_tree(dir_->path(), 3, 8, 48, 1);
    dataset_ = new Dataset(load_dataset(dir_->path()));
    tables_ = new std::map<std::string, FeatureTable>();
    for (const char* kind : {"hist_l", "lbp_rgb"}) tables_->emplace(kind, extract_table(*dataset_, kind, {}));
  }
  static void TearDownTestSuite() {
    delete tables_;
    delete dataset_;
    delete dir_;
  }

  ServiceCore make_core(ServiceOptions opts = {}) const { return ServiceCore(*dataset_, *tables_, {}, opts); }

  static json labels_for(const json& session, const FeedbackOracle& oracle) {
    json labels = json::object();
    const std::uint32_t q = session.at("query").get<std::uint32_t>();
    for (const json& id : session.at("pending")) {
      labels[std::to_string(id.get<int>())] = oracle.relevant(q, id.get<std::uint32_t>());
    }
    return labels;
  }

  static TempDir* dir_;
  static Dataset* dataset_;
  static std::map<std::string, FeatureTable>* tables_;
};

TempDir* ServiceTest::dir_ = nullptr;
Dataset* ServiceTest::dataset_ = nullptr;
std::map<std::string, FeatureTable>* ServiceTest::tables_ = nullptr;

TEST(Base64, Decode) {
  EXPECT_EQ(base64_decode("aGVsbG8="), "hello");
  EXPECT_EQ(base64_decode("aGVs\nbG8"), "hello");
  EXPECT_EQ(base64_decode(base64_encode(std::string("\x00\xff\x10", 3))), std::string("\x00\xff\x10", 3));
  EXPECT_THROW(base64_decode("a$=="), DataError);
  EXPECT_THROW(base64_decode("a"), DataError);
}

TEST_F(ServiceTest, QueryById) {
  const ServiceCore core = make_core();
  const ServiceResponse r = core.query({{"kind", "hist_l"}, {"image_id", 3}, {"page_size", 5}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const json& res = r.body.at("results");
  EXPECT_EQ(res.at("total"), 24);
  EXPECT_EQ(res.at("items").size(), 5u);
  EXPECT_EQ(res.at("items")[0].at("id"), 3);
  EXPECT_EQ(res.at("items")[0].at("rank"), 1);
  const ServiceResponse ex = core.query({{"kind", "hist_l"}, {"image_id", 3}, {"exclude_query", true}, {"page", 4}, {"page_size", 5}});
  EXPECT_EQ(ex.body.at("results").at("total"), 23);
  EXPECT_EQ(ex.body.at("results").at("items").size(), 3u);
  const RankedList direct = rank(std::uint32_t(3), tables_->at("hist_l"), Metric::kEuclidean, true);
  EXPECT_EQ(ex.body.at("results").at("items")[0].at("id"), direct.items[20].id);
}

TEST_F(ServiceTest, QueryErrors) {
  const ServiceCore core = make_core();
  const ServiceResponse kind = core.query({{"kind", "sift9"}, {"image_id", 0}});
  EXPECT_EQ(kind.status, 404);
  EXPECT_EQ(kind.body.at("kinds"), json({"hist_l", "lbp_rgb"}));
  EXPECT_EQ(core.query({{"dataset", "nope"}, {"kind", "hist_l"}, {"image_id", 0}}).status, 404);
  EXPECT_EQ(core.query({{"kind", "hist_l"}, {"image_id", 0}, {"metric", "hamming"}}).status, 400);
  EXPECT_EQ(core.query({{"kind", "hist_l"}, {"image_id", 999}}).status, 404);
  EXPECT_EQ(core.query({{"kind", "hist_l"}}).status, 400);
  EXPECT_EQ(core.query({{"kind", "hist_l"}, {"image_base64", base64_encode("not an image")}}).status, 422);
  EXPECT_EQ(core.query({{"kind", "hist_l"}, {"image_base64", "!!!"}}).status, 422);
}

TEST_F(ServiceTest, UploadMatchesStoredImage) {
  const ServiceCore core = make_core();
  const std::string png = encode_png(testing::constant_image(40, 40, 90, 90, 90));
  const ServiceResponse up = core.query({{"kind", "hist_l"}, {"image_base64", base64_encode(png)}, {"metric", "histint"}});
  ASSERT_EQ(up.status, 200) << up.body.dump();
  EXPECT_TRUE(up.body.at("query_id").is_null());
  EXPECT_EQ(up.body.at("results").at("order"), "descending");
  // Uploading a stored image ranks that image first.
  const std::string stored = encode_png(read_image(dataset_->images[10].path));
  const ServiceResponse same = core.query({{"kind", "lbp_rgb"}, {"image_base64", base64_encode(stored)}});
  ASSERT_EQ(same.status, 200);
  EXPECT_EQ(same.body.at("results").at("items")[0].at("id"), 10);
  EXPECT_NEAR(same.body.at("results").at("items")[0].at("score").get<double>(), 0.0, 1e-6);
}

TEST_F(ServiceTest, Thumbnails) {
  const ServiceCore core = make_core();
  const ServiceResponse a = core.thumbnail(4);
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.content_type, "image/png");
  const RgbImage img = decode_image(std::span(reinterpret_cast<const std::uint8_t*>(a.bytes.data()), a.bytes.size()));
  EXPECT_EQ(img.width, 48);
  EXPECT_EQ(core.thumbnail(4).bytes, a.bytes);
  EXPECT_EQ(core.thumbnail(24).status, 404);
  EXPECT_EQ(core.thumbnail(-1).status, 404);
}

TEST_F(ServiceTest, KindsListing) {
  const ServiceResponse r = make_core().kinds();
  EXPECT_EQ(r.body.at("images"), 24);
  EXPECT_EQ(r.body.at("kinds").size(), 2u);
  EXPECT_EQ(r.body.at("kinds")[0].at("dimension"), 256);
  EXPECT_EQ(r.body.at("kinds")[0].at("uploads"), true);
}

TEST_F(ServiceTest, AlrfSessionProtocol) {
  ServiceCore core = make_core();
  const FeedbackOracle oracle(dataset_->class_of);
  // 23 candidates: small seeding chunks and three rounds keep the pool from running dry.
  ServiceResponse r = core.create_session(
      {{"kind", "lbp_rgb"}, {"query", 2}, {"params", {{"seed_chunk", 4}, {"iterations", 3}}}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const std::string id = r.body.at("id");
  EXPECT_EQ(r.body.at("phase"), "seeding");
  EXPECT_EQ(r.body.at("pending").size(), 4u);

  // Missing labels, then labels for images that were not proposed.
  EXPECT_EQ(core.feedback(id, {{"labels", json::object()}}).status, 400);
  json extra = labels_for(r.body, oracle);
  extra["23"] = false;
  const json& pend = r.body.at("pending");
  if (std::find(pend.begin(), pend.end(), json(23)) == pend.end()) {
    EXPECT_EQ(core.feedback(id, {{"labels", extra}}).status, 400);
  }

  int rounds = 0;
  std::size_t proposed = 0;
  while (!r.body.at("finished").get<bool>()) {
    if (r.body.at("phase") == "iterating") {
      // Five per round unless the unlabeled pool runs short.
      EXPECT_GE(r.body.at("pending").size(), 1u);
      EXPECT_LE(r.body.at("pending").size(), 5u);
      proposed += r.body.at("pending").size();
    }
    r = core.feedback(id, {{"labels", labels_for(r.body, oracle)}});
    ASSERT_EQ(r.status, 200) << r.body.dump();
    ++rounds;
  }
  EXPECT_GE(rounds, 4);
  EXPECT_EQ(r.body.at("trace").size(), 3u);
  EXPECT_EQ(r.body.at("training_size"), 5 + proposed);
  EXPECT_EQ(core.feedback(id, {{"labels", json::object()}}).status, 410);
  EXPECT_EQ(core.feedback("ffff", {{"labels", json::object()}}).status, 404);

  const ServiceResponse page = core.session_state(id, 1, 10);
  EXPECT_EQ(page.body.at("ranking").at("items")[0].at("rank"), 11);
  EXPECT_EQ(page.body.at("ranking").at("total"), 23);
}

TEST_F(ServiceTest, AllIrrelevantLabelsStillAdvance) {
  ServiceCore core = make_core();
  const FeedbackOracle oracle(dataset_->class_of);
  ServiceResponse r =
      core.create_session({{"kind", "hist_l"}, {"query", 0}, {"params", {{"iterations", 2}, {"seed_chunk", 4}}}});
  int guard = 0;
  while (!r.body.at("finished").get<bool>() && guard++ < 20) {
    json labels = json::array();
    const bool seeding = r.body.at("phase") == "seeding";
    for (const json& p : r.body.at("pending")) {
      labels.push_back({{"id", p}, {"relevant", seeding && oracle.relevant(0, p.get<std::uint32_t>())}});
    }
    const int before = r.body.at("iteration");
    r = core.feedback(r.body.at("id"), {{"labels", labels}});
    ASSERT_EQ(r.status, 200) << r.body.dump();
    if (!seeding) {
      EXPECT_EQ(r.body.at("iteration"), before + 1);
    }
  }
  EXPECT_TRUE(r.body.at("finished").get<bool>());
  EXPECT_EQ(r.body.at("trace").size(), 2u);
  EXPECT_EQ(r.body.at("training_size"), 15);
}

TEST_F(ServiceTest, ManualSessionAndConflicts) {
  ServiceCore core = make_core();
  const FeedbackOracle oracle(dataset_->class_of);
  ServiceResponse r = core.create_session({{"kind", "hist_l"}, {"query", 9}, {"scheme", "manual"}, {"params", {{"n", 3}, {"chunk", 4}}}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  while (!r.body.at("finished").get<bool>()) {
    r = core.feedback(r.body.at("id"), {{"labels", labels_for(r.body, oracle)}});
    ASSERT_EQ(r.status, 200);
  }
  RfConfig cfg;
  cfg.n = 3;
  const ManualRfResult m = manual_rf_simulated(9, tables_->at("hist_l"), Metric::kEuclidean, cfg, oracle);
  EXPECT_EQ(r.body.at("used").size(), m.used.size());
  EXPECT_EQ(r.body.at("ranking").at("items")[0].at("id"), m.list.items[0].id);
  EXPECT_EQ(core.create_session({{"kind", "hist_l"}, {"query", 9}, {"scheme", "rocchio"}}).status, 400);
  EXPECT_EQ(core.create_session({{"kind", "hist_l"}}).status, 400);
  EXPECT_EQ(core.create_session({{"kind", "hist_l"}, {"query", 99}}).status, 404);
  EXPECT_EQ(core.create_session({{"kind", "hist_l"}, {"query", 1}, {"params", {{"h", 30}}}}).status, 400);
}

TEST_F(ServiceTest, ReplayIsDeterministicAndMatchesInProcess) {
  const FeedbackOracle oracle(dataset_->class_of);
  const AlrfResult expected = alrf_session(5, tables_->at("lbp_rgb"), oracle, {});
  for (int replay = 0; replay < 2; ++replay) {
    ServiceCore core = make_core();
    ServiceResponse r = core.create_session({{"kind", "lbp_rgb"}, {"query", 5}});
    while (!r.body.at("finished").get<bool>()) r = core.feedback(r.body.at("id"), {{"labels", labels_for(r.body, oracle)}});
    const ServiceResponse all = core.session_state(r.body.at("id"), 0, 1000);
    const json& items = all.body.at("ranking").at("items");
    ASSERT_EQ(items.size(), expected.list.size());
    for (std::size_t i = 0; i < items.size(); ++i) EXPECT_EQ(items[i].at("id"), expected.list.items[i].id) << i;
  }
}

TEST_F(ServiceTest, IdleSessionsExpire) {
  ServiceOptions opts;
  opts.idle_timeout = std::chrono::seconds(60);
  ServiceCore core = make_core(opts);
  const ServiceResponse r = core.create_session({{"kind", "hist_l"}, {"query", 1}});
  EXPECT_EQ(core.session_count(), 1u);
  EXPECT_EQ(core.expire_idle(ServiceCore::Clock::now()), 0u);
  EXPECT_EQ(core.expire_idle(ServiceCore::Clock::now() + std::chrono::seconds(61)), 1u);
  EXPECT_EQ(core.session_state(r.body.at("id"), 0, 10).status, 404);
}

TEST_F(ServiceTest, HttpEndpoints) {
  ServiceCore core = make_core();
  HttpService http(core);
  const int port = http.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  httplib::Client client("127.0.0.1", port);
  const FeedbackOracle oracle(dataset_->class_of);

  auto kinds = client.Get("/kinds");
  ASSERT_TRUE(kinds);
  EXPECT_EQ(kinds->status, 200);
  EXPECT_EQ(kinds->get_header_value("Access-Control-Allow-Origin"), "*");

  auto q = client.Post("/query", json({{"kind", "hist_l"}, {"image_id", 7}}).dump(), "application/json");
  ASSERT_TRUE(q);
  EXPECT_EQ(q->status, 200);
  EXPECT_EQ(json::parse(q->body).at("results").at("items")[0].at("id"), 7);
  auto bad = client.Post("/query", "{not json", "application/json");
  EXPECT_EQ(bad->status, 400);
  auto missing = client.Post("/query", json({{"kind", "gist"}, {"image_id", 7}}).dump(), "application/json");
  EXPECT_EQ(missing->status, 404);

  auto thumb = client.Get("/image/3/thumb");
  ASSERT_TRUE(thumb);
  EXPECT_EQ(thumb->status, 200);
  EXPECT_EQ(thumb->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(client.Get("/image/300/thumb")->status, 404);

  auto created = client.Post("/session", json({{"kind", "lbp_rgb"}, {"query", 5}}).dump(), "application/json");
  ASSERT_EQ(created->status, 200);
  json s = json::parse(created->body);
  const std::string id = s.at("id");
  while (!s.at("finished").get<bool>()) {
    auto fb = client.Post("/session/" + id + "/feedback", json({{"labels", labels_for(s, oracle)}}).dump(), "application/json");
    ASSERT_EQ(fb->status, 200);
    s = json::parse(fb->body);
  }
  auto state = client.Get("/session/" + id + "?page=0&page_size=100");
  ASSERT_EQ(state->status, 200);
  const json items = json::parse(state->body).at("ranking").at("items");
  const AlrfResult expected = alrf_session(5, tables_->at("lbp_rgb"), oracle, {});
  for (std::size_t i = 0; i < items.size(); ++i) EXPECT_EQ(items[i].at("id"), expected.list.items[i].id);
  auto gone = client.Post("/session/" + id + "/feedback", R"({"labels":{}})", "application/json");
  EXPECT_EQ(gone->status, 410);
  EXPECT_EQ(client.Get("/session/abc123")->status, 404);
  auto options = client.Options("/query");
  EXPECT_EQ(options->status, 204);
  http.stop();
}

}  // namespace
}  // namespace cbir
