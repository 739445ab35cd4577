#pragma once

#include "glasshands/session.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace glasshands::io {

/// Protocol state of one client connection, independent of the transport.
/// Messages are JSON text; every processed frame yields zero or more "event" messages
/// followed by exactly one "detection" message.
class SessionHandler {
 public:
  /// `default_id` names the session unless the client's hello carries its own.
  SessionHandler(SessionConfig cfg, std::string default_id);

  /// Replies to one client message. Malformed input yields a single "error" message and
  /// leaves the session usable.
  std::vector<std::string> handle(std::string_view message);

  bool established() const { return pipeline_ != nullptr; }
  const std::string& session_id() const { return id_; }

 private:
  SessionConfig cfg_;
  std::string id_;
  std::unique_ptr<Pipeline> pipeline_;
  std::int64_t frames_ = 0;
};

std::string error_message(std::string_view code, std::string_view text);

/// Websocket server: one thread per connected client, one pipeline per session.
class Service {
 public:
  explicit Service(SessionConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds cfg.host:cfg.port (port 0 picks a free port) and returns the bound port.
  /// Throws IoError when the address cannot be bound.
  std::uint16_t bind();
  /// Accepts clients until stop(); binds first when needed.
  void run();
  /// Closes the listener and every open session, then joins their threads. Thread-safe.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Blocking websocket client speaking the session protocol.
class ServiceClient {
 public:
  ServiceClient();
  ~ServiceClient();
  ServiceClient(const ServiceClient&) = delete;
  ServiceClient& operator=(const ServiceClient&) = delete;

  /// Throws IoError when the connection or upgrade fails.
  void connect(const std::string& host, std::uint16_t port);
  void send(const std::string& text);
  /// Next text message; throws IoError on a closed connection.
  std::string receive();
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Streams a trajectory to a sim-live service as scene messages and returns the received
/// events re-serialized without the "type" field, i.e. in the events.jsonl line format.
std::vector<std::string> replay_trajectory(ServiceClient& client, const sim::TrajectorySpec& spec,
                                           const std::string& session);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Throws ProtocolError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace glasshands::io
