#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "hmmlabel/pupil.hpp"
#include "hmmlabel/server.hpp"
#include "hmmlabel/simulator.hpp"
#include "service_fixtures.hpp"

namespace hmmlabel {
namespace {

RecordStream stream_of(std::uint64_t seed, std::uint64_t length) {
  auto config = SimConfig::gaze_default();
  config.seed = seed;
  config.length = length;
  return simulate_records(config);
}

struct Harness {
  std::unique_ptr<AnnotationService> service;
  std::unique_ptr<AnnotationServer> server;
  std::unique_ptr<httplib::Client> client;

  explicit Harness(ServiceConfig config) {
    service = std::make_unique<AnnotationService>(std::move(config));
    server = std::make_unique<AnnotationServer>(*service);
    const int port = server->bind("127.0.0.1", 0);
    server->start_background();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  ~Harness() {
    server->stop();
    service->stop();
  }

  Json get(const std::string& path, int expected = 200) const {
    const auto res = client->Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return Json::parse(res->body);
  }
  std::pair<int, Json> send(const std::string& method, const std::string& path, const std::string& body) const {
    const auto res = method == "PUT" ? client->Put(path, body, "application/json")
                                     : client->Post(path, body, "application/json");
    if (!res) return {0, {}};
    return {res->status, Json::parse(res->body)};
  }
};

ServiceConfig config_for(const RecordStream& stream, PipelineParams params = {}) {
  ServiceConfig c;
  c.stream = stream;
  c.initial_model = HmmModel::uniform(stream.states);
  c.params = params;
  return c;
}

Json next_packet(const Harness& h) {
  for (;;) {
    auto body = h.get("/api/queue/next?lease=60");
    if (!body.at("packet").is_null()) return body.at("packet");
  }
}

TEST(Server, ParamsCanChangeOnlyBeforeTheRun) {
  Harness h(config_for(stream_of(1, 2000)));
  EXPECT_EQ(h.get("/api/params").at("delta_min").get<double>(), 0.3);
  auto [status, body] = h.send("PUT", "/api/params", R"({"delta_min": 0.4, "c_min": 5})");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body.at("delta_min").get<double>(), 0.4);
  EXPECT_EQ(h.get("/api/params").at("c_min").get<double>(), 5.0);
  EXPECT_EQ(h.send("PUT", "/api/params", R"({"delta_min": 3})").first, 400);
  EXPECT_EQ(h.send("PUT", "/api/params", R"({"delta": 0.1})").first, 400);
  EXPECT_EQ(h.send("PUT", "/api/params", "{").first, 400);

  const auto progress = h.get("/api/progress");
  EXPECT_EQ(progress.at("state"), "idle");
  EXPECT_EQ(progress.at("manual_frames"), 0);
  EXPECT_TRUE(progress.at("reduction_factor").is_null());

  EXPECT_EQ(h.send("POST", "/api/start", "").first, 200);
  EXPECT_EQ(h.send("PUT", "/api/params", R"({"delta_min": 0.2})").first, 409);
  EXPECT_EQ(h.get("/api/params").at("delta_min").get<double>(), 0.4);
}

TEST(Server, LabelSubmissionContract) {
  const auto stream = stream_of(2, 3000);
  Harness h(config_for(stream));
  const auto packet = next_packet(h);
  const auto id = std::to_string(packet.at("id").get<std::uint64_t>());
  const auto frames = packet.at("frames").get<std::vector<FrameIndex>>();
  EXPECT_EQ(packet.at("status"), "leased");

  auto labels = testing::truth_labels(stream, frames);
  const auto dropped = frames.back();
  labels.erase(std::to_string(dropped));
  auto [status, body] = h.send("POST", "/api/queue/" + id + "/labels", Json{{"labels", labels}}.dump());
  EXPECT_EQ(status, 422);
  EXPECT_EQ(body.at("missing"), Json::array({dropped}));

  labels = testing::truth_labels(stream, frames);
  labels[std::to_string(frames.front())] = "Elsewhere";
  std::tie(status, body) = h.send("POST", "/api/queue/" + id + "/labels", Json{{"labels", labels}}.dump());
  EXPECT_EQ(status, 422);
  EXPECT_EQ(body.at("invalid"), Json::array({frames.front()}));

  EXPECT_EQ(h.send("POST", "/api/queue/" + id + "/labels", R"({"label": {}})").first, 400);
  EXPECT_EQ(h.send("POST", "/api/queue/" + id + "/labels", "not json").first, 400);
  EXPECT_EQ(h.get("/api/progress").at("manual_frames"), 0);

  const std::string good = Json{{"labels", testing::truth_labels(stream, frames)}}.dump();
  std::tie(status, body) = h.send("POST", "/api/queue/" + id + "/labels", good);
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body.at("status"), "accepted");
  std::tie(status, body) = h.send("POST", "/api/queue/" + id + "/labels", good);
  EXPECT_EQ(body.at("status"), "duplicate");
  EXPECT_EQ(h.get("/api/progress").at("manual_frames"), frames.size());
  EXPECT_EQ(h.send("POST", "/api/queue/999999/labels", good).first, 404);
}

TEST(Server, BadLeaseIsRejected) {
  Harness h(config_for(stream_of(3, 500)));
  h.get("/api/queue/next?lease=-1", 400);
  h.get("/api/queue/next?lease=soon", 400);
}

TEST(Server, FramesAndImages) {
  const auto stream = stream_of(4, 300);
  const auto dir = ::testing::TempDir() + "frames";
  std::filesystem::create_directories(dir);
  const pupil::GrayImage image(4, 3, 0.5f);
  pupil::save_pgm(dir + "/7.pgm", image);
  auto config = config_for(stream);
  config.image_dir = dir;
  Harness h(std::move(config));

  const auto present = std::find_if(stream.records.begin() + 1, stream.records.end(),
                                    [](const FrameRecord& r) { return r.object_present && r.change_score; });
  ASSERT_NE(present, stream.records.end());
  const auto j = h.get("/api/frames/" + std::to_string(present->frame_index));
  EXPECT_EQ(j.at("class_probs").get<std::vector<double>>(), present->class_probs);
  EXPECT_EQ(j.at("change_score").get<double>(), *present->change_score);
  EXPECT_FALSE(j.contains("ground_truth"));
  h.get("/api/frames/300", 404);

  EXPECT_EQ(h.get("/api/frames/7").at("image"), "/api/frames/7/image");
  const auto res = h.client->Get("/api/frames/7/image");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  std::ifstream in(dir + "/7.pgm", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(res->body, bytes);
  EXPECT_EQ(h.client->Get("/api/frames/8/image")->status, 404);

  EXPECT_EQ(h.get("/api/states").at("states").get<std::vector<std::string>>(), stream.states.names());
  EXPECT_EQ(h.get("/api/model").at("version"), 0);
}

TEST(Server, ScriptedClientMatchesInProcessReplay) {
  const auto stream = stream_of(5, 6000);
  PipelineParams params;
  params.retrain_interval = 400;
  Harness h(config_for(stream, params));
  testing::drain_over_http(*h.client, stream);
  const auto progress = h.get("/api/progress");
  const auto expected = replay_metrics(stream, HmmModel::uniform(stream.states), params);
  EXPECT_TRUE(progress.at("drained").get<bool>());
  EXPECT_EQ(progress.at("state"), "finished");
  EXPECT_EQ(progress.at("manual_frames").get<double>(), expected.manual_frames);
  EXPECT_EQ(progress.at("auto_frames").get<double>(), expected.auto_frames);
  EXPECT_EQ(progress.at("total_frames").get<double>(), expected.total_frames);
  EXPECT_EQ(progress.at("accuracy").get<double>(), expected.accuracy);
  EXPECT_EQ(progress.at("reduction_factor").get<double>(), expected.reduction_factor);
  EXPECT_EQ(progress.at("model_version").get<std::uint64_t>(), expected.model_version);
  const auto next = h.get("/api/queue/next");
  EXPECT_TRUE(next.at("packet").is_null());
  EXPECT_TRUE(next.at("drained").get<bool>());
}

}  // namespace
}  // namespace hmmlabel
