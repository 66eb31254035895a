#pragma once

// JSON-over-HTTP front end for a broker. Routing is separate from the socket
// layer so handlers can be exercised in-process.
//
//   POST /session        {"username", "password", "sourceAddr"}
//   POST /request        {"sessionId", "service", "path", "op", "sizeMB"?, "clientNode"}
//   POST /admin/policy   {"action": "create", "policy": {...}} | {"action": "enable"|"disable", "policyId"}
//   POST /admin/tick     {"seconds"}
//   GET  /audit/query?start=&end=&groupBy=

#include <map>
#include <memory>
#include <string>

#include "fedgate/broker.hpp"

namespace httplib {
class Server;
}

namespace fedgate {

struct HttpReply {
  int status = 200;
  std::string body;
};

class BrokerService {
 public:
  explicit BrokerService(Broker& broker);
  ~BrokerService();

  HttpReply handle(const std::string& method, const std::string& path, const std::string& body,
                   const std::map<std::string, std::string>& query = {});

  /// Blocks serving on host:port until stop() is called from another thread.
  void listen(const std::string& host, int port);
  void stop();

 private:
  Broker& broker_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace fedgate
