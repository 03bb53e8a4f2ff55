#pragma once

// Local HTTP service for the browser runner: trial distribution, session
// plans and state, log ingestion and reports. Sessions persist as flat
// files under the data directory.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "steerlab/curvegen.hpp"

namespace steerlab::service {

struct ServiceConfig {
  std::vector<curvegen::TrialSpec> trials;
  std::filesystem::path data_dir;
  // Session clock in milliseconds; defaults to a steady clock.
  std::function<double()> clock_ms;
};

// Data directory: $STEERLAB_DATA_DIR when set, else `fallback`.
std::filesystem::path resolve_data_dir(const std::filesystem::path& fallback);

//   GET  /api/v1/trials
//   GET  /api/v1/trials/{trial_id}
//   POST /api/v1/sessions                 {participant_id, seed, reversed}
//   GET  /api/v1/sessions/{id}/next
//   POST /api/v1/sessions/{id}/logs       trajlog v1 text, or {"trajlog": text}
//   GET  /api/v1/sessions/{id}/report
//
// Errors are JSON {"error": kind, "reason": text}: 400 for bad requests,
// 404 for unknown ids, 409 for protocol violations, 422 for invalid logs.
class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace steerlab::service
