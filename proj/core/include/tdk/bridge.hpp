#pragma once

// Line-delimited TCP bridge exposing a DriverInterface; grammar in
// docs/bridge_protocol.md.
//
//   READ               -> STATE <t> <theta x M> <theta_dot x M>   | ERR timeout
//   WRITE <theta x M>  -> OK                                       | ERR parse | ERR nack
//   QUIT               -> BYE, then the server closes the connection
//   anything else      -> ERR parse

#include <atomic>
#include <cstdint>
#include <string>
#include <string_view>
#include <thread>
#include <variant>

#include "tdk/runtime.hpp"

namespace tdk {

struct ReadRequest {};
struct WriteRequest {
  Vec theta;
};
struct QuitRequest {};
struct BadRequest {};
using BridgeRequest = std::variant<ReadRequest, WriteRequest, QuitRequest, BadRequest>;

/// Parses one request line (without the newline). `motors` is the expected
/// WRITE arity.
BridgeRequest parse_bridge_request(std::string_view line, std::size_t motors);
std::string format_state_line(const MotorState& state);
/// Parses a STATE line; nullopt for anything else.
std::optional<MotorState> parse_state_line(std::string_view line, std::size_t motors);

/// Serves one client at a time on 127.0.0.1. `backend` must outlive the server.
class BridgeServer {
 public:
  /// port 0 picks a free port; see port().
  BridgeServer(DriverInterface& backend, std::size_t motors, std::uint16_t port = 0,
               std::string bind_address = "127.0.0.1");
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  std::uint16_t port() const { return port_; }
  void start();  // background thread
  void run();    // blocks until stop()
  void stop();

  /// Handles one request line and returns the response (no newline).
  std::string handle(std::string_view line);

 private:
  void serve_client(int fd);

  DriverInterface& backend_;
  std::size_t motors_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread thread_;
};

/// DriverInterface over a bridge connection. Reads that exceed the timeout or
/// hit a closed connection return nullopt, matching a silent local driver.
class BridgeClientDriver final : public DriverInterface {
 public:
  BridgeClientDriver(const std::string& host, std::uint16_t port, std::size_t motors, double timeout_s = 0.1);
  ~BridgeClientDriver() override;
  BridgeClientDriver(const BridgeClientDriver&) = delete;
  BridgeClientDriver& operator=(const BridgeClientDriver&) = delete;

  std::optional<MotorState> read_motor_state() override;
  bool write_motor_targets(const Vec& theta_des) override;

  /// Sends a raw line and returns the response line (nullopt on timeout).
  std::optional<std::string> request(const std::string& line);

 private:
  std::optional<std::string> read_line();

  int fd_ = -1;
  std::size_t motors_;
  std::string pending_;
};

}  // namespace tdk
