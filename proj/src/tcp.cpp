#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "phishguard/error.hpp"
#include "phishguard/mcp.hpp"

namespace phishguard {

namespace {

class Socket {
 public:
  explicit Socket(int fd = -1) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { reset(); }
  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

// Waits up to 100 ms for fd to become readable. False on timeout or error.
bool readable(int fd) {
  pollfd p{fd, POLLIN, 0};
  const int r = ::poll(&p, 1, 100);
  return r > 0;
}

void serve_connection(Server& server, Socket sock, std::string session, const std::atomic<bool>& stop) {
  std::string buffer;
  char chunk[4096];
  while (!stop.load()) {
    if (!readable(sock.get())) continue;
    const auto n = ::recv(sock.get(), chunk, sizeof chunk, 0);
    if (n == 0) break;
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t newline;
    while ((newline = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, newline);
      buffer.erase(0, newline + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      if (!send_all(sock.get(), server.handle(line, session) + "\n")) return;
    }
  }
}

}  // namespace

void serve_tcp(Server& server, int port, const std::atomic<bool>& stop, std::atomic<int>* bound_port) {
  Socket listener(::socket(AF_INET, SOCK_STREAM, 0));
  if (listener.get() < 0) throw Error(Errc::Io, std::string("socket: ") + std::strerror(errno));
  const int yes = 1;
  ::setsockopt(listener.get(), SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listener.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    throw Error(Errc::Io, "bind port " + std::to_string(port) + ": " + std::strerror(errno));
  }
  if (::listen(listener.get(), 64) < 0) throw Error(Errc::Io, std::string("listen: ") + std::strerror(errno));
  socklen_t len = sizeof addr;
  ::getsockname(listener.get(), reinterpret_cast<sockaddr*>(&addr), &len);
  if (bound_port) bound_port->store(ntohs(addr.sin_port));

  std::vector<std::thread> workers;
  std::size_t connections = 0;
  while (!stop.load()) {
    if (!readable(listener.get())) continue;
    Socket client(::accept(listener.get(), nullptr, nullptr));
    if (client.get() < 0) continue;
    // A failing connection ends its own thread only; the listener keeps going.
    workers.emplace_back(serve_connection, std::ref(server), std::move(client),
                         "tcp-" + std::to_string(++connections), std::cref(stop));
  }
  for (auto& w : workers) w.join();
  server.audit().flush();
}

}  // namespace phishguard
