#include "hmmlabel/server.hpp"

#include <httplib.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "hmmlabel/config.hpp"

namespace hmmlabel {

namespace {

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, {{"error", message}});
}

Json entry_json(const QueueEntry& e, const StateSpace& states) {
  Json frames = Json::array();
  for (FrameIndex f : e.packet.frames) frames.push_back(f);
  Json j = {{"id", e.packet.id},
            {"reason", to_string(e.packet.reason)},
            {"segment_id", e.packet.segment_id},
            {"frames", frames},
            {"enqueue_sequence", e.enqueue_sequence},
            {"status", to_string(e.status)},
            {"lease_expiry", e.lease_expiry}};
  if (!e.labels.empty()) {
    Json labels = Json::object();
    for (const auto& l : e.labels) labels[std::to_string(l.frame_index)] = states.name(l.state);
    j["labels"] = labels;
  }
  return j;
}

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json progress_json(const ProgressSnapshot& s) {
  Json j = {{"state", to_string(s.state)},
            {"total_frames", s.total_frames},
            {"manual_frames", s.manual_frames},
            {"auto_frames", s.auto_frames},
            {"auto_stable_frames", s.auto_stable_frames},
            {"auto_confident_frames", s.auto_confident_frames},
            {"pending_packets", s.pending_packets},
            {"leased_packets", s.leased_packets},
            {"completed_packets", s.completed_packets},
            {"segments_done", s.segments_done},
            {"segments_total", s.segments_total},
            {"model_version", s.model_version},
            {"reduction_factor", optional_json(s.reduction_factor)},
            {"accuracy", optional_json(s.accuracy)},
            {"scored_frames", s.scored_frames},
            {"drained", s.drained}};
  if (!s.error.empty()) j["error"] = s.error;
  return j;
}

std::string content_type(const std::string& path) {
  if (path.ends_with(".png")) return "image/png";
  if (path.ends_with(".jpg") || path.ends_with(".jpeg")) return "image/jpeg";
  return "image/x-portable-graymap";
}

std::uint64_t path_number(const httplib::Request& req) {
  try {
    return std::stoull(req.matches[1].str());
  } catch (const std::out_of_range&) {
    throw InputError("number in path is out of range");
  }
}

}  // namespace

struct AnnotationServer::Impl {
  AnnotationService& service;
  httplib::Server server;
  std::thread thread;
  bool bound = false;

  explicit Impl(AnnotationService& s) : service(s) { routes(); }

  void routes() {
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const ConflictError& e) {
        fail(res, 409, e.what());
      } catch (const InputError& e) {
        fail(res, 400, e.what());
      } catch (const std::exception& e) {
        fail(res, 500, e.what());
      }
    });

    server.Get("/api/queue/next", [this](const httplib::Request& req, httplib::Response& res) {
      double lease = 300.0;
      if (req.has_param("lease")) lease = parse_double(req.get_param_value("lease"));
      const auto entry = service.next(lease);
      const bool drained = !entry && service.progress().drained;
      reply(res, 200, {{"drained", drained}, {"packet", entry ? entry_json(*entry, service.states()) : Json(nullptr)}});
    });

    server.Post(R"(/api/queue/(\d+)/labels)", [this](const httplib::Request& req, httplib::Response& res) {
      const Json body = parse_json(req.body, "request body");
      if (!body.is_object() || !body.contains("labels") || !body.at("labels").is_object()) {
        throw InputError("body must be {\"labels\": {\"<frame>\": \"<state>\", ...}}");
      }
      std::map<std::string, std::string> labels;
      for (const auto& [frame, state] : body.at("labels").items()) {
        if (!state.is_string()) throw InputError("label for frame " + frame + " must be a state name");
        labels[frame] = state.get<std::string>();
      }
      const SubmitResult r = service.submit(path_number(req), labels);
      Json j = {{"missing", r.missing}, {"extra", r.extra}, {"invalid", r.invalid}};
      switch (r.status) {
        case SubmitResult::Status::accepted:
          j["status"] = "accepted";
          return reply(res, 200, j);
        case SubmitResult::Status::duplicate:
          j["status"] = "duplicate";
          return reply(res, 200, j);
        case SubmitResult::Status::rejected:
          j["status"] = "rejected";
          j["error"] = r.message;
          return reply(res, 422, j);
        case SubmitResult::Status::unknown_packet:
          j["status"] = "unknown_packet";
          j["error"] = r.message;
          return reply(res, 404, j);
      }
    });

    server.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, progress_json(service.progress()));
    });

    server.Get("/api/params", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, to_json(service.params()));
    });

    server.Put("/api/params", [this](const httplib::Request& req, httplib::Response& res) {
      service.set_params(params_from_json(parse_json(req.body, "request body"), service.params()));
      reply(res, 200, to_json(service.params()));
    });

    server.Get("/api/states", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"states", service.states().names()}});
    });

    server.Get(R"(/api/frames/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      const FrameIndex index = path_number(req);
      const FrameRecord* r = service.frame(index);
      if (!r) return fail(res, 404, "no frame " + std::to_string(index));
      Json j = {{"frame_index", r->frame_index},
                {"object_present", r->object_present},
                {"class_probs", r->class_probs},
                {"change_score", optional_json(r->change_score)},
                {"image", nullptr}};
      if (service.image_path(index)) j["image"] = "/api/frames/" + std::to_string(index) + "/image";
      reply(res, 200, j);
    });

    server.Get(R"(/api/frames/(\d+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto path = service.image_path(path_number(req));
      if (!path) return fail(res, 404, "no image for this frame");
      std::ifstream in(*path, std::ios::binary);
      std::stringstream bytes;
      bytes << in.rdbuf();
      res.set_content(bytes.str(), content_type(*path));
    });

    server.Get("/api/model", [this](const httplib::Request&, httplib::Response& res) {
      const auto [model, version] = service.model();
      reply(res, 200, {{"version", version}, {"model", to_json(model)}});
    });

    server.Post("/api/start", [this](const httplib::Request&, httplib::Response& res) {
      service.start();
      reply(res, 200, progress_json(service.progress()));
    });
  }
};

AnnotationServer::AnnotationServer(AnnotationService& service) : impl_(std::make_unique<Impl>(service)) {}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  impl_->bound = true;
  return bound;
}

void AnnotationServer::listen() {
  if (!impl_->bound) throw Error("server is not bound");
  impl_->server.listen_after_bind();
}

void AnnotationServer::start_background() {
  if (!impl_->bound) throw Error("server is not bound");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void AnnotationServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace hmmlabel
