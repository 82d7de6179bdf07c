// HTTP + server-sent-event front end for TutorService (see service.hpp for
// the JSON shapes).
#pragma once

#include <memory>
#include <string>

#include "gwl/service.hpp"

namespace gwl::service {

// Status code an error kind maps to.
int http_status(ErrorKind kind);

class HttpServer {
 public:
  explicit HttpServer(TutorService& service);
  ~HttpServer();

  // Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks serving requests until stop().
  void serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gwl::service
