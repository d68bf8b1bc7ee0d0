#include "cbir/service.h"

#include <httplib.h>

#include <algorithm>
#include <random>

#include "cbir/image_io.h"

using nlohmann::json;

namespace cbir {

struct ServiceCore::Session {
  std::mutex mu;
  std::string id;
  std::string scheme;
  std::string kind;
  std::uint32_t query = 0;
  Metric metric = Metric::kEuclidean;
  std::unique_ptr<AlrfSession> alrf;
  std::unique_ptr<ManualSession> manual;
  Clock::time_point last_used;
};

namespace {

ServiceResponse error(int status, const std::string& message, json extra = json::object()) {
  ServiceResponse r;
  r.status = status;
  r.body = std::move(extra);
  r.body["error"] = message;
  return r;
}

ServiceResponse ok(json body) {
  ServiceResponse r;
  r.body = std::move(body);
  return r;
}

json page_json(const RankedList& list, int page, int page_size) {
  json items = json::array();
  const std::size_t begin = std::size_t(page) * std::size_t(page_size);
  for (std::size_t i = begin; i < list.items.size() && i < begin + std::size_t(page_size); ++i) {
    items.push_back({{"id", list.items[i].id}, {"score", list.items[i].score}, {"rank", i + 1}});
  }
  return {{"total", list.items.size()}, {"page", page}, {"page_size", page_size},
          {"order", list.order == Order::kAscending ? "ascending" : "descending"}, {"items", std::move(items)}};
}

// Reads page / page_size from a request body, clamped to sane values.
std::pair<int, int> paging(const json& body, const ServiceOptions& opts) {
  int page = body.value("page", 0);
  int size = body.value("page_size", opts.default_page_size);
  page = std::max(page, 0);
  size = std::clamp(size, 1, opts.max_page_size);
  return {page, size};
}

json ids_json(const std::vector<std::uint32_t>& ids) {
  json a = json::array();
  for (std::uint32_t id : ids) a.push_back(id);
  return a;
}

std::string_view phase_name(AlrfSession::Phase p) {
  switch (p) {
    case AlrfSession::Phase::kSeeding: return "seeding";
    case AlrfSession::Phase::kIterating: return "iterating";
    case AlrfSession::Phase::kFinished: return "finished";
  }
  return "";
}

}  // namespace

std::string base64_decode(std::string_view text) {
  static const auto table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    const std::string_view alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    for (std::size_t i = 0; i < alphabet.size(); ++i) t[std::uint8_t(alphabet[i])] = int(i);
    return t;
  }();
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  bool padding = false;
  for (char ch : text) {
    if (ch == ' ' || ch == '\n' || ch == '\r' || ch == '\t') continue;
    if (ch == '=') {
      padding = true;
      continue;
    }
    const int v = table[std::uint8_t(ch)];
    if (v < 0 || padding) throw DataError("invalid base64 input");
    acc = (acc << 6) | std::uint32_t(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(char((acc >> bits) & 0xFF));
    }
  }
  if (bits >= 6) throw DataError("invalid base64 length");
  return out;
}

ServiceCore::ServiceCore(Dataset dataset, std::map<std::string, FeatureTable> tables,
                         std::map<std::string, LocalModel> models, ServiceOptions opts)
    : dataset_(std::move(dataset)), tables_(std::move(tables)), models_(std::move(models)), opts_(std::move(opts)) {
  session_salt_ = std::random_device{}();
  session_salt_ = (session_salt_ << 32) ^ std::random_device{}();
}

ServiceCore::~ServiceCore() = default;

const FeatureTable* ServiceCore::table_for(const json& body, ServiceResponse& err) const {
  if (body.contains("dataset") && body["dataset"].get<std::string>() != dataset_.name) {
    err = error(404, "unknown dataset '" + body["dataset"].get<std::string>() + "'", {{"datasets", {dataset_.name}}});
    return nullptr;
  }
  const std::string kind = body.value("kind", std::string());
  const auto it = tables_.find(kind);
  if (it == tables_.end()) {
    json names = json::array();
    for (const auto& [k, t] : tables_) names.push_back(k);
    err = error(404, "unknown kind '" + kind + "'", {{"kinds", names}});
    return nullptr;
  }
  return &it->second;
}

ServiceResponse ServiceCore::query(const json& body) const {
  try {
    ServiceResponse err;
    const FeatureTable* table = table_for(body, err);
    if (!table) return err;
    const auto metric = parse_metric(body.value("metric", std::string("euclidean")));
    if (!metric) return error(400, "unknown metric '" + body.value("metric", std::string()) + "'");
    const auto [page, page_size] = paging(body, opts_);
    const bool exclude = body.value("exclude_query", false);

    RankedList list;
    if (body.contains("image_id")) {
      const int id = body["image_id"].get<int>();
      if (id < 0 || !table->contains(std::uint32_t(id))) return error(404, "unknown image id " + std::to_string(id));
      list = rank(std::uint32_t(id), *table, *metric, exclude);
    } else if (body.contains("image_base64")) {
      RgbImage img;
      try {
        const std::string bytes = base64_decode(body["image_base64"].get<std::string>());
        img = decode_image(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
      } catch (const DataError& e) {
        return error(422, std::string("undecodable upload: ") + e.what());
      }
      FeatureVector fv;
      try {
        if (const auto g = parse_global_kind(table->kind())) {
          fv = extract_global(img, *g, opts_.global_params);
        } else if (const auto l = parse_local_kind(table->kind())) {
          const auto m = models_.find(table->kind());
          if (m == models_.end()) return error(422, "no codebook loaded for kind '" + table->kind() + "'");
          fv = extract_local(img, *l, m->second, opts_.local_params);
        } else {
          return error(422, "kind '" + table->kind() + "' cannot be extracted from an upload");
        }
      } catch (const Error& e) {
        return error(422, std::string("extraction failed: ") + e.what());
      }
      list = rank(std::span<const double>(fv.values), -1, *table, *metric, false);
    } else {
      return error(400, "either image_id or image_base64 is required");
    }
    json out = {{"dataset", dataset_.name}, {"kind", table->kind()}, {"metric", metric_name(*metric)}};
    out["query_id"] = list.query_id >= 0 ? json(list.query_id) : json(nullptr);
    out["results"] = page_json(list, page, page_size);
    return ok(std::move(out));
  } catch (const json::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  } catch (const UsageError& e) {
    return error(400, e.what());
  } catch (const Error& e) {
    return error(422, e.what());
  }
}

ServiceResponse ServiceCore::create_session(const json& body) {
  try {
    ServiceResponse err;
    const FeatureTable* table = table_for(body, err);
    if (!table) return err;
    const auto metric = parse_metric(body.value("metric", std::string("euclidean")));
    if (!metric) return error(400, "unknown metric '" + body.value("metric", std::string()) + "'");
    if (!body.contains("query")) return error(400, "query (an image id) is required");
    const int q = body["query"].get<int>();
    if (q < 0 || !table->contains(std::uint32_t(q))) return error(404, "unknown image id " + std::to_string(q));
    const std::string scheme = body.value("scheme", std::string("alrf"));
    const json params = body.value("params", json::object());

    auto s = std::make_shared<Session>();
    s->scheme = scheme;
    s->kind = table->kind();
    s->query = std::uint32_t(q);
    s->metric = *metric;
    s->last_used = Clock::now();
    if (scheme == "alrf") {
      AlrfConfig cfg = opts_.alrf;
      cfg.metric = *metric;
      cfg.iterations = params.value("iterations", cfg.iterations);
      cfg.seed_relevant = params.value("seed_relevant", cfg.seed_relevant);
      cfg.seed_irrelevant = params.value("seed_irrelevant", cfg.seed_irrelevant);
      cfg.p = params.value("p", cfg.p);
      cfg.h = params.value("h", cfg.h);
      cfg.svm_c = params.value("svm_c", cfg.svm_c);
      cfg.seed = params.value("seed", cfg.seed);
      cfg.seed_chunk = params.value("seed_chunk", cfg.seed_chunk);
      s->alrf = std::make_unique<AlrfSession>(*table, std::uint32_t(q), cfg);
    } else if (scheme == "manual") {
      RfConfig cfg = opts_.rf;
      cfg.n = params.value("n", cfg.n);
      if (params.contains("fusion")) {
        const auto f = parse_fusion(params["fusion"].get<std::string>());
        if (!f) return error(400, "unknown fusion rule");
        cfg.fusion = *f;
      }
      s->manual = std::make_unique<ManualSession>(*table, std::uint32_t(q), *metric, cfg, params.value("chunk", 20));
    } else {
      return error(400, "scheme must be 'manual' or 'alrf'");
    }
    {
      std::lock_guard lock(sessions_mu_);
      std::mt19937_64 mix(session_salt_ + next_session_++);
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(mix()));
      s->id = buf;
      sessions_[s->id] = s;
    }
    expire_idle(Clock::now());
    std::lock_guard lock(s->mu);
    return ok(session_json(*s, 0, opts_.default_page_size));
  } catch (const json::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  } catch (const UsageError& e) {
    return error(400, e.what());
  } catch (const Error& e) {
    return error(422, e.what());
  }
}

std::shared_ptr<ServiceCore::Session> ServiceCore::find_session(const std::string& id) {
  std::lock_guard lock(sessions_mu_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

ServiceResponse ServiceCore::feedback(const std::string& id, const json& body) {
  const auto s = find_session(id);
  if (!s) return error(404, "unknown session '" + id + "'");
  std::lock_guard lock(s->mu);
  s->last_used = Clock::now();
  const bool finished = s->alrf ? s->alrf->phase() == AlrfSession::Phase::kFinished : s->manual->finished();
  if (finished) return error(410, "session already finished");
  try {
    std::map<std::uint32_t, bool> given;
    const json& labels = body.at("labels");
    if (labels.is_object()) {
      for (const auto& [key, value] : labels.items()) given[std::uint32_t(std::stoul(key))] = value.get<bool>();
    } else if (labels.is_array()) {
      for (const json& e : labels) given[e.at("id").get<std::uint32_t>()] = e.at("relevant").get<bool>();
    } else {
      return error(400, "labels must be an object or an array");
    }
    const std::vector<std::uint32_t>& pending = s->alrf ? s->alrf->pending() : s->manual->pending();
    std::vector<std::uint8_t> ordered;
    for (std::uint32_t p : pending) {
      const auto it = given.find(p);
      if (it == given.end()) {
        return error(400, "labels must cover every proposed image", {{"pending", ids_json(pending)}});
      }
      ordered.push_back(it->second);
    }
    if (given.size() != pending.size()) {
      return error(400, "labels given for images that were not proposed", {{"pending", ids_json(pending)}});
    }
    if (s->alrf) {
      s->alrf->submit(ordered);
    } else {
      s->manual->submit(ordered);
    }
    return ok(session_json(*s, 0, opts_.default_page_size));
  } catch (const LabelConflictError& e) {
    return error(409, e.what());
  } catch (const SessionFinishedError& e) {
    return error(410, e.what());
  } catch (const json::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  } catch (const std::invalid_argument&) {
    return error(400, "label keys must be image ids");
  } catch (const UsageError& e) {
    return error(400, e.what());
  } catch (const Error& e) {
    return error(422, e.what());
  }
}

ServiceResponse ServiceCore::session_state(const std::string& id, int page, int page_size) {
  const auto s = find_session(id);
  if (!s) return error(404, "unknown session '" + id + "'");
  std::lock_guard lock(s->mu);
  s->last_used = Clock::now();
  return ok(session_json(*s, std::max(page, 0), std::clamp(page_size, 1, opts_.max_page_size)));
}

json ServiceCore::session_json(const Session& s, int page, int page_size) const {
  json j = {{"id", s.id}, {"scheme", s.scheme}, {"kind", s.kind}, {"query", s.query},
            {"metric", metric_name(s.metric)}};
  if (s.alrf) {
    const AlrfSession& a = *s.alrf;
    j["phase"] = phase_name(a.phase());
    j["finished"] = a.phase() == AlrfSession::Phase::kFinished;
    j["iteration"] = a.iteration();
    j["max_iterations"] = a.config().iterations;
    j["pending"] = ids_json(a.pending());
    j["training_size"] = a.training_size();
    json trace = json::array();
    for (const AlrfRound& r : a.trace()) {
      json e = {{"iteration", r.iteration}, {"shown", ids_json(r.shown)}, {"labels", r.labels}};
      e["nmrr"] = r.nmrr ? json(*r.nmrr) : json(nullptr);
      trace.push_back(std::move(e));
    }
    j["trace"] = std::move(trace);
    j["warnings"] = a.warnings();
    j["ranking"] = page_json(a.ranking(), page, page_size);
  } else {
    const ManualSession& m = *s.manual;
    j["phase"] = m.finished() ? "finished" : "labeling";
    j["finished"] = m.finished();
    j["iteration"] = m.rounds();
    j["pending"] = ids_json(m.pending());
    j["used"] = ids_json(m.used());
    j["ranking"] = page_json(m.ranking(), page, page_size);
  }
  return j;
}

ServiceResponse ServiceCore::thumbnail(int image_id) const {
  if (image_id < 0 || image_id >= dataset_.size()) return error(404, "unknown image id " + std::to_string(image_id));
  ServiceResponse r;
  r.content_type = "image/png";
  {
    std::lock_guard lock(thumbs_mu_);
    const auto it = thumbs_.find(image_id);
    if (it != thumbs_.end()) {
      r.bytes = it->second;
      return r;
    }
  }
  const auto& path = dataset_.images[std::size_t(image_id)].path;
  if (path.empty()) return error(404, "no image file for id " + std::to_string(image_id));
  try {
    r.bytes = encode_png(fit_within(read_image(path), opts_.thumb_side));
  } catch (const Error& e) {
    return error(404, e.what());
  }
  std::lock_guard lock(thumbs_mu_);
  thumbs_.emplace(image_id, r.bytes);
  return r;
}

ServiceResponse ServiceCore::kinds() const {
  json list = json::array();
  for (const auto& [name, t] : tables_) {
    const bool native = parse_global_kind(name).has_value() ||
                        (parse_local_kind(name).has_value() && models_.count(name) > 0);
    list.push_back({{"name", name}, {"dimension", t.dim()}, {"rows", t.size()}, {"uploads", native}});
  }
  json metrics = json::array();
  for (Metric m : kAllMetrics) metrics.push_back(metric_name(m));
  return ok({{"dataset", dataset_.name},
             {"images", dataset_.size()},
             {"classes", dataset_.classes},
             {"kinds", std::move(list)},
             {"metrics", std::move(metrics)},
             {"schemes", {"manual", "alrf"}}});
}

std::size_t ServiceCore::expire_idle(Clock::time_point now) {
  std::lock_guard lock(sessions_mu_);
  std::size_t dropped = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    bool idle;
    {
      std::lock_guard s_lock(it->second->mu);
      idle = now - it->second->last_used > opts_.idle_timeout;
    }
    if (idle) {
      it = sessions_.erase(it);
      ++dropped;
    } else {
      ++it;
    }
  }
  return dropped;
}

std::size_t ServiceCore::session_count() const {
  std::lock_guard lock(sessions_mu_);
  return sessions_.size();
}

namespace {

void send(httplib::Response& res, const ServiceResponse& r) {
  res.status = r.status;
  if (!r.bytes.empty()) {
    res.set_content(r.bytes, r.content_type);
  } else {
    res.set_content(r.body.dump(), "application/json");
  }
}

json parse_body(const httplib::Request& req, httplib::Response& res, bool& ok) {
  ok = true;
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception&) {
    ok = false;
    send(res, error(400, "request body is not valid JSON"));
    return {};
  }
}

int int_param(const httplib::Request& req, const char* name, int fallback) {
  if (!req.has_param(name)) return fallback;
  try {
    return std::stoi(req.get_param_value(name));
  } catch (const std::exception&) {
    return fallback;
  }
}

}  // namespace

HttpService::HttpService(ServiceCore& core) : core_(core), server_(std::make_unique<httplib::Server>()) {
  httplib::Server& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Content-Type"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  s.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
    bool ok;
    const json body = parse_body(req, res, ok);
    if (ok) send(res, core_.query(body));
  });
  s.Post("/session", [this](const httplib::Request& req, httplib::Response& res) {
    bool ok;
    const json body = parse_body(req, res, ok);
    if (ok) send(res, core_.create_session(body));
  });
  s.Post(R"(/session/([0-9a-f]+)/feedback)", [this](const httplib::Request& req, httplib::Response& res) {
    bool ok;
    const json body = parse_body(req, res, ok);
    if (ok) send(res, core_.feedback(req.matches[1], body));
  });
  s.Get(R"(/session/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, core_.session_state(req.matches[1], int_param(req, "page", 0),
                                  int_param(req, "page_size", core_.options().default_page_size)));
  });
  s.Get(R"(/image/(\d+)/thumb)", [this](const httplib::Request& req, httplib::Response& res) {
    int id = -1;
    try {
      id = std::stoi(req.matches[1]);
    } catch (const std::exception&) {
    }
    send(res, core_.thumbnail(id));
  });
  s.Get("/kinds", [this](const httplib::Request&, httplib::Response& res) { send(res, core_.kinds()); });
  if (!core_.options().static_dir.empty()) s.set_mount_point("/", core_.options().static_dir.string());
}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw UsageError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpService::run(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw UsageError("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace cbir
