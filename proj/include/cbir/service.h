// HTTP query service: stateless ranking queries, thumbnails, and interactive
// manual / active-learning feedback sessions.
//
// ServiceCore implements every endpoint as a JSON-in/JSON-out call so it can
// be exercised without a network; HttpService binds it to httplib routes.

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cbir/dataset.h"
#include "cbir/feature_store.h"
#include "cbir/global_descriptors.h"
#include "cbir/local_descriptors.h"
#include "cbir/relevance_feedback.h"

namespace httplib {
class Server;
}

namespace cbir {

struct ServiceOptions {
  std::chrono::seconds idle_timeout = std::chrono::minutes(30);
  int default_page_size = 20;
  int max_page_size = 100000;
  int thumb_side = 128;
  AlrfConfig alrf;
  RfConfig rf;
  GlobalParams global_params;
  LocalParams local_params;
  std::filesystem::path static_dir;  // served at / when set
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
  std::string bytes;  // binary payload when non-empty
  std::string content_type = "application/json";
};

class ServiceCore {
 public:
  using Clock = std::chrono::steady_clock;

  // Tables are keyed by kind. `models` supplies codebooks for local kinds so
  // that uploads can be encoded.
  ServiceCore(Dataset dataset, std::map<std::string, FeatureTable> tables,
              std::map<std::string, LocalModel> models = {}, ServiceOptions opts = {});
  ~ServiceCore();

  // POST /query
  ServiceResponse query(const nlohmann::json& body) const;
  // POST /session
  ServiceResponse create_session(const nlohmann::json& body);
  // POST /session/{id}/feedback
  ServiceResponse feedback(const std::string& id, const nlohmann::json& body);
  // GET /session/{id}
  ServiceResponse session_state(const std::string& id, int page, int page_size);
  // GET /image/{id}/thumb
  ServiceResponse thumbnail(int image_id) const;
  // GET /kinds
  ServiceResponse kinds() const;

  // Drops sessions idle since before now - idle_timeout; returns how many.
  std::size_t expire_idle(Clock::time_point now);
  std::size_t session_count() const;

  const Dataset& dataset() const { return dataset_; }
  const ServiceOptions& options() const { return opts_; }

 private:
  struct Session;

  std::shared_ptr<Session> find_session(const std::string& id);
  nlohmann::json session_json(const Session& s, int page, int page_size) const;
  const FeatureTable* table_for(const nlohmann::json& body, ServiceResponse& err) const;

  Dataset dataset_;
  std::map<std::string, FeatureTable> tables_;
  std::map<std::string, LocalModel> models_;
  ServiceOptions opts_;

  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;
  std::uint64_t session_salt_;

  mutable std::mutex thumbs_mu_;
  mutable std::map<int, std::string> thumbs_;
};

// Decodes standard base64 (padding optional, whitespace ignored). Throws
// DataError on invalid input.
std::string base64_decode(std::string_view text);

class HttpService {
 public:
  explicit HttpService(ServiceCore& core);
  ~HttpService();

  // Binds to host:port (port 0 picks a free one) and serves on a background
  // thread. Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks serving on the calling thread.
  void run(const std::string& host, int port);
  void stop();

 private:
  ServiceCore& core_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace cbir
