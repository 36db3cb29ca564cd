#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "arloc/errors.hpp"
#include "arloc/io.hpp"
#include "arloc/pose.hpp"
#include "arloc/positioning.hpp"
#include "arloc/synth.hpp"

namespace arloc {

struct ServiceConfig {
  double step_length = 0.5;   // metres per forward/back step
  double turn_step = 15.0;    // degrees per turn
  std::chrono::seconds session_ttl{600};
  std::string session_device = "phone_a";
};

struct ApiResponse {
  int status = 200;
  json body;
};

/// Request handling for the localization API, independent of the transport.
///
/// Holds an immutable database and localizer plus a mutex-guarded table of
/// walkthrough sessions. All handlers are safe to call concurrently.
class ServiceCore {
 public:
  using Clock = std::chrono::steady_clock;

  explicit ServiceCore(Database db, ServiceConfig cfg = {}) : db_(std::move(db)), cfg_(std::move(cfg)) {
    db_.map.validate();
    if (db_.map.subareas.empty()) db_.map.subareas = build_subareas(db_.map, db_.cluster);
    localizer_ = std::make_unique<Localizer>(db_.map, db_.cluster, db_.match);
    if (db_.world && db_.synth) env_ = environment_from_db(db_);
    std::random_device rd;
    token_rng_.seed((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  }

  const Database& database() const noexcept { return db_; }
  const Localizer& localizer() const noexcept { return *localizer_; }

  ApiResponse health() const {
    return {200, {{"status", "ok"}, {"rps", db_.map.rps.size()}, {"subareas", db_.map.subareas.size()}}};
  }

  // Layout only: no fingerprints or keypoints.
  ApiResponse map() const {
    json rps = json::array();
    for (const auto& rp : db_.map.rps) {
      rps.push_back({{"id", rp.id}, {"position", vec3_to_json(rp.position)}, {"subarea_id", subarea_json(rp.id)}});
    }
    json subareas = json::array();
    for (const auto& s : db_.map.subareas) subareas.push_back({{"id", s.id}, {"member_rp_ids", s.member_rp_ids}});
    json objects = json::array();
    for (const auto& o : db_.map.objects) {
      objects.push_back({{"id", o.id}, {"label", o.label}, {"position", vec3_to_json(o.position)}});
    }
    return {200,
            {{"width", db_.map.width},
             {"depth", db_.map.depth},
             {"interval", db_.map.interval},
             {"origin", vec3_to_json(db_.map.origin)},
             {"rps", std::move(rps)},
             {"subareas", std::move(subareas)},
             {"objects", std::move(objects)},
             {"pose",
              {{"body_height", db_.pose.body_height},
               {"horizontal_fov", db_.pose.horizontal_fov},
               {"max_observe_distance", db_.pose.max_observe_distance}}}}};
  }

  ApiResponse localize(const std::string& body) const {
    return guarded([&] {
      const json j = parse_body(body);
      const Query q = query_from_json(j);
      const Method method = method_field(j);
      const auto result = localizer_->localize(q, method);
      return ApiResponse{200, estimate_json(result, q.heading)};
    });
  }

  ApiResponse create_session(const std::string& body) {
    return guarded([&] {
      if (!env_) return error(409, "database carries no synthetic world; sessions are unavailable");
      const json j = body.empty() ? json::object() : parse_body(body);
      if (!j.is_object()) throw SchemaViolation("body must be a JSON object");
      std::uint64_t seed = 0;
      {
        std::lock_guard lock(mu_);
        seed = token_rng_();
      }
      if (auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned()) throw SchemaViolation("'seed' must be a non-negative integer");
        seed = it->get<std::uint64_t>();
      }
      auto rng = sub_rng(seed, detail::kSessions);
      const auto& rp = db_.map.rps[std::uniform_int_distribution<std::size_t>(0, db_.map.rps.size() - 1)(rng)];
      const auto headings = stored_headings(env_->synth.headings_per_rp);
      Session s;
      s.seed = seed;
      s.position = rp.position;
      s.heading = headings[std::uniform_int_distribution<std::size_t>(0, headings.size() - 1)(rng)];
      s.last_used = Clock::now();

      std::lock_guard lock(mu_);
      sweep_locked(s.last_used);
      const std::string id = new_token_locked();
      sessions_[id] = s;
      return ApiResponse{201, {{"session_id", id}, {"true_position", vec3_to_json(s.position)}, {"heading", s.heading}}};
    });
  }

  ApiResponse step_session(const std::string& id, const std::string& body) {
    return guarded([&] {
      const json j = parse_body(body);
      const std::string action = detail::string(detail::field(j, "action"), "action");
      const Method method = method_field(j);

      Session s;
      {
        std::lock_guard lock(mu_);
        sweep_locked(Clock::now());
        auto it = sessions_.find(id);
        if (it == sessions_.end()) return error(404, "unknown session '" + id + "'");
        Session& live = it->second;
        if (action == "forward" || action == "back") {
          const double sign = action == "forward" ? 1.0 : -1.0;
          live.position = clamp_to_map(live.position + (sign * cfg_.step_length) * facing_from_heading(live.heading));
        } else if (action == "turn_left") {
          live.heading = wrap_heading(live.heading - cfg_.turn_step);
        } else if (action == "turn_right") {
          live.heading = wrap_heading(live.heading + cfg_.turn_step);
        } else if (action != "stay") {
          throw SchemaViolation("unknown action '" + action + "'");
        }
        live.steps += 1;
        live.last_used = Clock::now();
        s = live;
      }

      auto rng = sub_rng(s.seed, detail::kSessions, s.steps);
      const Query q = synth_query(*env_, s.position, s.heading, cfg_.session_device, rng);
      const auto result = localizer_->localize(q, method);
      json estimate = estimate_json(result, q.heading);
      json visible = estimate["visible_objects"];
      return ApiResponse{200,
                         {{"true_position", vec3_to_json(s.position)},
                          {"heading", s.heading},
                          {"estimate", std::move(estimate)},
                          {"visible_objects", std::move(visible)}}};
    });
  }

  ApiResponse delete_session(const std::string& id) {
    std::lock_guard lock(mu_);
    if (sessions_.erase(id) == 0) return error(404, "unknown session '" + id + "'");
    return {200, {{"deleted", id}}};
  }

  // Drops sessions idle for longer than the configured TTL as of `now`.
  std::size_t sweep_expired(Clock::time_point now) {
    std::lock_guard lock(mu_);
    return sweep_locked(now);
  }

  std::size_t session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

 private:
  struct Session {
    std::uint64_t seed = 0;
    Vec3 position;
    double heading = 0.0;
    std::uint64_t steps = 0;
    Clock::time_point last_used;
  };

  static ApiResponse error(int status, const std::string& reason) { return {status, {{"error", reason}}}; }

  template <typename Fn>
  static ApiResponse guarded(Fn&& fn) {
    try {
      return fn();
    } catch (const SchemaViolation& e) {
      return error(400, e.what());
    } catch (const InvalidArgument& e) {
      return error(400, e.what());
    } catch (const json::exception& e) {
      return error(400, e.what());
    } catch (const DegenerateInput& e) {
      return error(422, e.what());
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }

  static json parse_body(const std::string& body) {
    json j = parse_json(body, "request body");
    if (!j.is_object()) throw SchemaViolation("body must be a JSON object");
    return j;
  }

  static Method method_field(const json& j) {
    auto it = j.find("method");
    if (it == j.end()) return Method::kCombinedDr;
    return parse_method(detail::string(*it, "method"));
  }

  json subarea_json(int rp_id) const {
    for (const auto& s : db_.map.subareas) {
      if (std::ranges::find(s.member_rp_ids, rp_id) != s.member_rp_ids.end()) return s.id;
    }
    return nullptr;
  }

  // Result plus the virtual objects seen from the estimated RP along the query heading.
  json estimate_json(const LocalizationResult& r, double heading) const {
    json out = result_to_json(r);
    const EyePose pose = eye_pose(r.position, heading, db_.pose);
    const auto visible = visible_objects(pose, build_frustum(pose, db_.pose), db_.map.objects);
    out["visible_objects"] = visible_to_json(visible);
    return out;
  }

  Vec3 clamp_to_map(Vec3 p) const {
    const auto& m = db_.map;
    p.x = std::clamp(p.x, m.origin.x - m.width / 2, m.origin.x + m.width / 2);
    p.z = std::clamp(p.z, m.origin.z - m.depth / 2, m.origin.z + m.depth / 2);
    return p;
  }

  std::size_t sweep_locked(Clock::time_point now) {
    return std::erase_if(sessions_, [&](const auto& kv) { return now - kv.second.last_used > cfg_.session_ttl; });
  }

  std::string new_token_locked() {
    char buf[17];
    std::string id;
    do {
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(token_rng_()));
      id = buf;
    } while (sessions_.contains(id));
    return id;
  }

  Database db_;
  ServiceConfig cfg_;
  std::unique_ptr<Localizer> localizer_;  // points into db_.map
  std::optional<SyntheticEnvironment> env_;
  mutable std::mutex mu_;
  std::map<std::string, Session> sessions_;
  std::mt19937_64 token_rng_;
};

/// Binds the API routes of `core` onto an httplib server.
inline void mount_routes(httplib::Server& server, ServiceCore& core) {
  const auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
  server.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.Get("/api/v1/health", [&core, send](const httplib::Request&, httplib::Response& res) { send(res, core.health()); });
  server.Get("/api/v1/map", [&core, send](const httplib::Request&, httplib::Response& res) { send(res, core.map()); });
  server.Post("/api/v1/localize",
              [&core, send](const httplib::Request& req, httplib::Response& res) { send(res, core.localize(req.body)); });
  server.Post("/api/v1/session", [&core, send](const httplib::Request& req, httplib::Response& res) {
    send(res, core.create_session(req.body));
  });
  server.Post(R"(/api/v1/session/([0-9a-f]+)/step)", [&core, send](const httplib::Request& req, httplib::Response& res) {
    send(res, core.step_session(req.matches[1], req.body));
  });
  server.Delete(R"(/api/v1/session/([0-9a-f]+))", [&core, send](const httplib::Request& req, httplib::Response& res) {
    send(res, core.delete_session(req.matches[1]));
  });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) res.set_content(json{{"error", "not found"}}.dump(), "application/json");
  });
}

}  // namespace arloc
