/**
 * @file service.hpp
 * @brief HTTP service under /v1.
 *
 * Handlers read one store snapshot per request, so a concurrent write is
 * seen entirely or not at all. Errors come back as
 * {"error": {"status", "code", "message", "detail"}}.
 */
#pragma once

#include <memory>
#include <string>

#include "oncotwin/config.hpp"
#include "oncotwin/recommender.hpp"
#include "oncotwin/store.hpp"

namespace oncotwin {

/// Stable error codes by status.
struct ApiError : public Error {
    ApiError(int status, std::string code, const std::string& message, Json detail = nullptr);
    int status;
    std::string code;
    Json detail;
};

Json api_error_body(const ApiError& e);

class Service {
public:
    Service(Config config, std::shared_ptr<TwinStore> store, KnowledgeBase kb);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds to an ephemeral port on `host` and returns it.
    int bind_any_port(const std::string& host);
    bool bind(const std::string& host, int port);
    /// Serves until stop(). Call after a bind.
    bool listen_after_bind();
    void stop();
    /// Waits for background jobs to finish.
    void drain_jobs();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace oncotwin
