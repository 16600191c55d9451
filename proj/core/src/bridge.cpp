#include "tdk/bridge.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <charconv>
#include <cstring>
#include <vector>

#include "tdk/csv.hpp"

namespace tdk {

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(out);
}

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

[[noreturn]] void sys_error(const std::string& what) {
  throw Error(what + ": " + std::strerror(errno));
}

}  // namespace

BridgeRequest parse_bridge_request(std::string_view line, std::size_t motors) {
  const auto tok = split_ws(line);
  if (tok.empty()) return BadRequest{};
  if (tok[0] == "READ" && tok.size() == 1) return ReadRequest{};
  if (tok[0] == "QUIT" && tok.size() == 1) return QuitRequest{};
  if (tok[0] == "WRITE" && tok.size() == motors + 1) {
    WriteRequest w{Vec(static_cast<Eigen::Index>(motors))};
    for (std::size_t i = 0; i < motors; ++i)
      if (!parse_double(tok[i + 1], w.theta[static_cast<Eigen::Index>(i)])) return BadRequest{};
    return w;
  }
  return BadRequest{};
}

std::string format_state_line(const MotorState& s) {
  std::string line = "STATE " + format_number(s.timestamp);
  for (Eigen::Index i = 0; i < s.theta.size(); ++i) line += " " + format_number(s.theta[i]);
  for (Eigen::Index i = 0; i < s.theta_dot.size(); ++i) line += " " + format_number(s.theta_dot[i]);
  return line;
}

std::optional<MotorState> parse_state_line(std::string_view line, std::size_t motors) {
  const auto tok = split_ws(line);
  if (tok.size() != 2 + 2 * motors || tok[0] != "STATE") return std::nullopt;
  MotorState s;
  s.theta.resize(static_cast<Eigen::Index>(motors));
  s.theta_dot.resize(static_cast<Eigen::Index>(motors));
  if (!parse_double(tok[1], s.timestamp)) return std::nullopt;
  for (std::size_t i = 0; i < motors; ++i) {
    if (!parse_double(tok[2 + i], s.theta[static_cast<Eigen::Index>(i)])) return std::nullopt;
    if (!parse_double(tok[2 + motors + i], s.theta_dot[static_cast<Eigen::Index>(i)])) return std::nullopt;
  }
  return s;
}

BridgeServer::BridgeServer(DriverInterface& backend, std::size_t motors, std::uint16_t port,
                           std::string bind_address)
    : backend_(backend), motors_(motors) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) sys_error("bridge: socket");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw Error("bridge: invalid bind address '" + bind_address + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 4) < 0) {
    const int err = errno;
    ::close(listen_fd_);
    errno = err;
    sys_error("bridge: cannot listen on " + bind_address + ":" + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

BridgeServer::~BridgeServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void BridgeServer::start() {
  if (running_.exchange(true)) return;
  thread_ = std::thread([this] { run(); });
}

void BridgeServer::stop() {
  running_ = false;
  if (thread_.joinable()) thread_.join();
}

std::string BridgeServer::handle(std::string_view line) {
  const BridgeRequest req = parse_bridge_request(line, motors_);
  if (std::holds_alternative<ReadRequest>(req)) {
    const auto s = backend_.read_motor_state();
    return s ? format_state_line(*s) : "ERR timeout";
  }
  if (const auto* w = std::get_if<WriteRequest>(&req)) return backend_.write_motor_targets(w->theta) ? "OK" : "ERR nack";
  if (std::holds_alternative<QuitRequest>(req)) return "BYE";
  return "ERR parse";
}

void BridgeServer::run() {
  running_ = true;
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 50);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    serve_client(fd);
    ::close(fd);
  }
}

void BridgeServer::serve_client(int fd) {
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  std::string buffer;
  char chunk[4096];
  while (running_) {
    pollfd p{fd, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) return;  // client went away
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      const std::string reply = handle(line);
      if (!send_all(fd, reply + "\n") || reply == "BYE") return;
    }
    if (buffer.size() > (1u << 20)) {
      send_all(fd, "ERR parse\n");
      buffer.clear();
    }
  }
}

BridgeClientDriver::BridgeClientDriver(const std::string& host, std::uint16_t port, std::size_t motors,
                                       double timeout_s)
    : motors_(motors) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) sys_error("bridge client: socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw Error("bridge client: invalid address '" + host + "'");
  }
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    const int err = errno;
    ::close(fd_);
    errno = err;
    sys_error("bridge client: cannot connect to " + host + ":" + std::to_string(port));
  }
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout_s);
  tv.tv_usec = static_cast<suseconds_t>((timeout_s - static_cast<double>(tv.tv_sec)) * 1e6);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

BridgeClientDriver::~BridgeClientDriver() {
  if (fd_ >= 0) {
    send_all(fd_, "QUIT\n");
    ::close(fd_);
  }
}

std::optional<std::string> BridgeClientDriver::read_line() {
  char chunk[4096];
  for (;;) {
    const std::size_t nl = pending_.find('\n');
    if (nl != std::string::npos) {
      std::string line = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return line;
    }
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      // A late reply would pair with the wrong request, so a timed-out
      // connection is dropped for good.
      ::close(fd_);
      fd_ = -1;
      return std::nullopt;
    }
    pending_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::optional<std::string> BridgeClientDriver::request(const std::string& line) {
  if (fd_ < 0 || !send_all(fd_, line + "\n")) return std::nullopt;
  return read_line();
}

std::optional<MotorState> BridgeClientDriver::read_motor_state() {
  const auto reply = request("READ");
  if (!reply) return std::nullopt;
  return parse_state_line(*reply, motors_);
}

bool BridgeClientDriver::write_motor_targets(const Vec& theta_des) {
  std::string line = "WRITE";
  for (Eigen::Index i = 0; i < theta_des.size(); ++i) line += " " + format_number(theta_des[i]);
  const auto reply = request(line);
  return reply && *reply == "OK";
}

}  // namespace tdk
