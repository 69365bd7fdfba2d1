#pragma once

#include <memory>
#include <string>

#include "hmmlabel/service.hpp"

namespace hmmlabel {

/// HTTP/JSON front end for an AnnotationService.
///
///   GET  /api/queue/next?lease=SECONDS   {"drained": bool, "packet": {...} | null}
///   POST /api/queue/{id}/labels          {"labels": {"<frame>": "<state>", ...}}
///   GET  /api/progress
///   GET  /api/params, PUT /api/params    (PUT only before the run starts)
///   GET  /api/states
///   GET  /api/frames/{index}             metadata, plus an image URL when one exists
///   GET  /api/frames/{index}/image       raw image bytes
///   GET  /api/model
///   POST /api/start
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationService& service);
  ~AnnotationServer();

  /// Binds without serving. Port 0 picks a free port; returns the bound port.
  /// Throws Error when binding fails.
  int bind(const std::string& host, int port);
  /// Serves until stop(); blocks.
  void listen();
  /// Serves on a background thread.
  void start_background();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hmmlabel
