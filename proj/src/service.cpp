#include "glasshands/service.hpp"

#include "glasshands/error.hpp"
#include "json_util.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <openssl/evp.h>
#include <sys/socket.h>

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

namespace glasshands::io {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using detail::json;

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::ProtocolError, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::ProtocolError, "invalid base64 payload");
  std::size_t pad = 0;
  for (auto it = text.rbegin(); it != text.rend() && *it == '=' && pad < 2; ++it) ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string error_message(std::string_view code, std::string_view text) {
  return json{{"type", "error"}, {"code", code}, {"msg", text}}.dump();
}

// ---------------------------------------------------------------------------------------------
// Protocol

SessionHandler::SessionHandler(SessionConfig cfg, std::string default_id) : cfg_(std::move(cfg)), id_(std::move(default_id)) {}

namespace {

const json& field(const json& msg, const char* key) {
  const auto it = msg.find(key);
  if (it == msg.end()) throw Error(ErrorCode::ProtocolError, std::string("missing field '") + key + "'");
  return *it;
}

double number_field(const json& msg, const char* key) {
  const auto& v = field(msg, key);
  if (!v.is_number()) throw Error(ErrorCode::ProtocolError, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::int64_t integer_field(const json& msg, const char* key) {
  const auto& v = field(msg, key);
  if (!v.is_number_integer()) throw Error(ErrorCode::ProtocolError, std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::optional<double> optional_number(const json& msg, const char* key) {
  if (!msg.contains(key)) return std::nullopt;
  return number_field(msg, key);
}

std::vector<std::string> frame_replies(const FrameOutput& out) {
  std::vector<std::string> replies;
  for (const auto& e : out.events) {
    json m{{"type", "event"}};
    const json body = detail::event_object(e);
    for (const auto& [k, v] : body.items()) m[k] = v;
    replies.push_back(m.dump());
  }
  json d{{"type", "detection"}};
  const json body = detail::detection_object(out);
  for (const auto& [k, v] : body.items()) d[k] = v;
  replies.push_back(d.dump());
  return replies;
}

}  // namespace

std::vector<std::string> SessionHandler::handle(std::string_view message) {
  try {
    json msg;
    try {
      msg = json::parse(message);
    } catch (const json::exception&) {
      throw Error(ErrorCode::ProtocolError, "message is not valid JSON");
    }
    if (!msg.is_object()) throw Error(ErrorCode::ProtocolError, "message must be a JSON object");
    const auto& type_v = field(msg, "type");
    if (!type_v.is_string()) throw Error(ErrorCode::ProtocolError, "field 'type' must be a string");
    const auto type = type_v.get<std::string>();

    if (type == "hello") {
      if (pipeline_) throw Error(ErrorCode::ProtocolError, "session already established");
      SessionConfig cfg = cfg_;
      if (msg.contains("config")) cfg = parse_session_config(msg["config"].dump(), cfg);
      const auto& mode_v = field(msg, "mode");
      if (!mode_v.is_string()) throw Error(ErrorCode::ProtocolError, "field 'mode' must be a string");
      cfg.mode = parse_mode(mode_v.get<std::string>());
      if (cfg.mode == Mode::Offline) throw Error(ErrorCode::ProtocolError, "live sessions use sim-live or frames-live");
      if (msg.contains("session")) {
        if (!msg["session"].is_string()) throw Error(ErrorCode::ProtocolError, "field 'session' must be a string");
        id_ = msg["session"].get<std::string>();
      }
      cfg.pipeline.session = id_;
      PipelineConfig pc = cfg.pipeline;
      if (cfg.calibration_source == CalibrationSource::File && cfg.calibration_path) {
        pc.calibration = calib::load_calibration(*cfg.calibration_path);
      }
      cfg_ = cfg;
      pipeline_ = std::make_unique<Pipeline>(pc);
      json ack{{"type", "ack"}, {"session", id_}, {"mode", to_string(cfg.mode)}};
      ack["config"] = json::parse(config_echo(cfg));
      return {ack.dump()};
    }

    if (!pipeline_) throw Error(ErrorCode::ProtocolError, "send hello first");

    if (type == "scene") {
      if (cfg_.mode != Mode::SimLive) throw Error(ErrorCode::ProtocolError, "scene messages need sim-live mode");
      sim::SceneState s = cfg_.scene;
      s.timestamp_ms = integer_field(msg, "t_ms");
      s.hand_cm = {number_field(msg, "hand_x_cm"), number_field(msg, "hand_y_cm")};
      s.hand_height_cm = optional_number(msg, "hand_h_cm").value_or(0.0);
      if (auto v = optional_number(msg, "phone_x_cm")) s.phone_center_cm.x() = *v;
      if (auto v = optional_number(msg, "phone_y_cm")) s.phone_center_cm.y() = *v;
      if (auto v = optional_number(msg, "ambient")) s.ambient = *v;
      if (msg.contains("hand_visible")) {
        if (!msg["hand_visible"].is_boolean()) throw Error(ErrorCode::ProtocolError, "'hand_visible' must be a boolean");
        s.hand_visible = msg["hand_visible"].get<bool>();
      }
      s.validate();
      const auto rf = sim::render_frame(s, cfg_.render);
      ++frames_;
      return frame_replies(pipeline_->process(rf.frame));
    }

    if (type == "frame") {
      if (cfg_.mode != Mode::FramesLive) throw Error(ErrorCode::ProtocolError, "frame messages need frames-live mode");
      const auto w = integer_field(msg, "w");
      const auto h = integer_field(msg, "h");
      if (w <= 0 || h <= 0 || w > 8192 || h > 8192) throw Error(ErrorCode::CorruptFrame, "frame size out of range");
      const auto& b64 = field(msg, "rgb_b64");
      if (!b64.is_string()) throw Error(ErrorCode::ProtocolError, "field 'rgb_b64' must be a string");
      Frame f;
      f.width = static_cast<int>(w);
      f.height = static_cast<int>(h);
      f.rgb = base64_decode(b64.get_ref<const std::string&>());
      if (!f.valid()) throw Error(ErrorCode::CorruptFrame, "payload size does not match w*h*3");
      f.timestamp_ms = msg.contains("t_ms") ? integer_field(msg, "t_ms")
                                            : std::llround(static_cast<double>(frames_) * 1000.0 / 30.0);
      ++frames_;
      return frame_replies(pipeline_->process(f));
    }

    throw Error(ErrorCode::ProtocolError, "unknown message type '" + type + "'");
  } catch (const Error& e) {
    return {error_message(to_string(e.code()), e.what())};
  } catch (const std::exception& e) {
    return {error_message(to_string(ErrorCode::ProtocolError), e.what())};
  }
}

// ---------------------------------------------------------------------------------------------
// Server

struct Service::Impl {
  SessionConfig cfg;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  bool bound = false;
  std::atomic<bool> stopping{false};
  std::mutex mu;
  std::vector<std::thread> threads;
  std::map<int, int> open_fds;  // session number -> socket descriptor
  int next_session = 0;

  void accept_next() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec || stopping) return;
      std::lock_guard lock(mu);
      const int n = ++next_session;
      open_fds[n] = socket.native_handle();
      threads.emplace_back([this, n, s = std::move(socket)]() mutable { serve(n, std::move(s)); });
      accept_next();
    });
  }

  void serve(int n, tcp::socket socket) {
    try {
      websocket::stream<tcp::socket> ws(std::move(socket));
      ws.accept();
      SessionHandler handler(cfg, "s" + std::to_string(n));
      beast::flat_buffer buffer;
      for (;;) {
        buffer.clear();
        ws.read(buffer);
        std::vector<std::string> replies;
        if (!ws.got_text()) {
          replies.push_back(error_message(to_string(ErrorCode::ProtocolError), "binary messages are not supported"));
        } else {
          replies = handler.handle(beast::buffers_to_string(buffer.data()));
        }
        ws.text(true);
        for (const auto& r : replies) ws.write(net::buffer(r));
      }
    } catch (const std::exception&) {
      // Disconnects and shutdowns end the session.
    }
    std::lock_guard lock(mu);
    open_fds.erase(n);
  }
};

Service::Service(SessionConfig cfg) : impl_(std::make_unique<Impl>()) { impl_->cfg = std::move(cfg); }

Service::~Service() { stop(); }

std::uint16_t Service::bind() {
  auto& im = *impl_;
  if (!im.bound) {
    try {
      const tcp::endpoint ep(net::ip::make_address(im.cfg.host), im.cfg.port);
      im.acceptor.open(ep.protocol());
      im.acceptor.set_option(net::socket_base::reuse_address(true));
      im.acceptor.bind(ep);
      im.acceptor.listen();
    } catch (const std::exception& e) {
      throw Error(ErrorCode::IoError, "cannot listen on " + im.cfg.host + ":" + std::to_string(im.cfg.port) + ": " +
                                          e.what());
    }
    im.bound = true;
  }
  return im.acceptor.local_endpoint().port();
}

void Service::run() {
  bind();
  impl_->accept_next();
  impl_->ioc.run();
}

void Service::stop() {
  auto& im = *impl_;
  if (im.stopping.exchange(true)) return;
  net::post(im.ioc, [&im] {
    beast::error_code ec;
    im.acceptor.close(ec);
  });
  im.ioc.stop();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(im.mu);
    // Shutting the descriptor down wakes the blocked read of each session thread.
    for (const auto& [n, fd] : im.open_fds) ::shutdown(fd, SHUT_RDWR);
    threads.swap(im.threads);
  }
  for (auto& t : threads) t.join();
}

// ---------------------------------------------------------------------------------------------
// Client

struct ServiceClient::Impl {
  net::io_context ioc;
  websocket::stream<tcp::socket> ws{ioc};
};

ServiceClient::ServiceClient() : impl_(std::make_unique<Impl>()) {}

ServiceClient::~ServiceClient() {
  try {
    close();
  } catch (...) {
  }
}

void ServiceClient::connect(const std::string& host, std::uint16_t port) {
  try {
    tcp::resolver resolver(impl_->ioc);
    net::connect(impl_->ws.next_layer(), resolver.resolve(host, std::to_string(port)));
    impl_->ws.handshake(host, "/");
    impl_->ws.text(true);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::IoError, "cannot connect to " + host + ":" + std::to_string(port) + ": " + e.what());
  }
}

void ServiceClient::send(const std::string& text) {
  try {
    impl_->ws.write(net::buffer(text));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::IoError, std::string("send failed: ") + e.what());
  }
}

std::string ServiceClient::receive() {
  try {
    beast::flat_buffer buffer;
    impl_->ws.read(buffer);
    return beast::buffers_to_string(buffer.data());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::IoError, std::string("receive failed: ") + e.what());
  }
}

void ServiceClient::close() {
  if (!impl_->ws.is_open()) return;
  beast::error_code ec;
  impl_->ws.close(websocket::close_code::normal, ec);
}

std::vector<std::string> replay_trajectory(ServiceClient& client, const sim::TrajectorySpec& spec,
                                           const std::string& session) {
  client.send(json{{"type", "hello"}, {"mode", "sim-live"}, {"session", session}}.dump());
  const auto ack = json::parse(client.receive());
  if (ack.value("type", "") != "ack") throw Error(ErrorCode::ProtocolError, "expected ack, got " + ack.dump());

  std::vector<std::string> events;
  for (auto t : spec.frame_times()) {
    const auto s = sim::sample_trajectory(spec, t);
    json msg{{"type", "scene"},
             {"t_ms", t},
             {"hand_x_cm", s.hand_cm.x()},
             {"hand_y_cm", s.hand_cm.y()},
             {"hand_h_cm", s.hand_height_cm},
             {"hand_visible", s.hand_visible},
             {"phone_x_cm", s.phone_center_cm.x()},
             {"phone_y_cm", s.phone_center_cm.y()},
             {"ambient", s.ambient}};
    client.send(msg.dump());
    for (;;) {
      auto reply = json::parse(client.receive());
      const auto type = reply.value("type", "");
      if (type == "detection") break;
      if (type == "error") throw Error(ErrorCode::ProtocolError, "service error: " + reply.dump());
      if (type == "event") {
        reply.erase("type");
        events.push_back(reply.dump());
      }
    }
  }
  return events;
}

}  // namespace glasshands::io
